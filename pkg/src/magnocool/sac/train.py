"""Training loop, evaluation, learning-curve logging and teacher warm starts."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env import CoolingEnv, EnvConfig
from . import checkpoint as ckpt
from .agent import Hyperparams, NonFiniteError, SACAgent
from .buffer import ReplayBuffer

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("episode", "env_steps", "net_reward", "mean_reward", "mean_quotient", "min_quotient",
                 "eval_score", "eval_min_quotient", "alpha", "q1_loss", "q2_loss", "actor_loss")


class TrainingDivergedError(RuntimeError):
    def __init__(self, message: str, result: "TrainResult"):
        super().__init__(message)
        self.result = result


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TrainSchedule:
    episodes: int
    eval_every: int = 50
    eval_episodes: int = 3

    def __post_init__(self):
        if self.episodes < 0 or self.eval_every < 1 or self.eval_episodes < 1:
            raise ValueError("episodes >= 0, eval_every >= 1, eval_episodes >= 1 required")


@dataclass
class TrainResult:
    curve: list[dict]
    best_score: float
    best_episode: int
    best_tensors: dict | None = field(default=None, repr=False)
    halted: bool = False
    diagnostics: str = ""

    def evaluations(self) -> list[tuple[int, float]]:
        return [(r["episode"], r["eval_score"]) for r in self.curve if not math.isnan(r["eval_score"])]


def evaluate(agent: SACAgent, config: EnvConfig, n_episodes: int = 3):
    """Deterministic rollouts; returns the list of episode traces."""
    env = CoolingEnv(config)
    traces = []
    for _ in range(n_episodes):
        obs = env.reset()
        done = False
        while not done:
            a, _ = agent.sample_action(obs, deterministic=True)
            obs, _, done = env.step(a)
        traces.append(env.trace())
    return traces


def format_curve_row(row: dict) -> str:
    return ",".join(repr(int(row[c])) if c in ("episode", "env_steps") else f"{float(row[c]):.17g}"
                    for c in CURVE_COLUMNS)


def read_curve(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split(",")) != CURVE_COLUMNS:
        raise ValueError(f"{path}: not a learning-curve log")
    rows = []
    for ln in lines[1:]:
        vals = ln.split(",")
        rows.append({c: (int(v) if c in ("episode", "env_steps") else float(v)) for c, v in zip(CURVE_COLUMNS, vals)})
    return rows


class Trainer:
    """Alternates environment steps and gradient updates for one agent.

    Timeouts at the fixed episode horizon are stored with ``done = 0`` when
    ``hp.bootstrap_on_timeout`` is set, so the critic keeps bootstrapping
    through the artificial episode boundary.
    """

    def __init__(self, config: EnvConfig, agent: SACAgent | None = None, hp: Hyperparams | None = None,
                 curve_path=None, checkpoint_path=None, checkpoint_meta: dict | None = None):
        self.config = config
        self.agent = agent if agent is not None else SACAgent(config.obs_dim, config.action_dim, hp)
        if (self.agent.obs_dim, self.agent.act_dim) != (config.obs_dim, config.action_dim):
            raise DimensionMismatchError(
                f"agent dims (obs={self.agent.obs_dim}, act={self.agent.act_dim}) do not match env "
                f"(obs={config.obs_dim}, act={config.action_dim})"
            )
        self.hp = self.agent.hp
        self.env = CoolingEnv(config)
        self.buffer = ReplayBuffer(self.hp.buffer_size, config.obs_dim, config.action_dim)
        self.curve_path = Path(curve_path) if curve_path else None
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self.checkpoint_meta = checkpoint_meta or {}
        self.env_steps = 0

    def _noise_for(self, episode: int, total: int) -> float:
        hp = self.hp
        frac = episode / max(total - 1, 1)
        return hp.noise_std_start + (hp.noise_std_end - hp.noise_std_start) * frac

    def _save_best(self):
        if self.checkpoint_path is None:
            return
        ckpt.save(self.checkpoint_path, self.agent, env_hash=self.config.config_hash(),
                  interface_hash=self.config.interface_hash(), env_config=self.config.to_dict(),
                  metadata=self.checkpoint_meta)

    def _episode(self) -> tuple[dict, object]:
        agent, env, hp = self.agent, self.env, self.hp
        obs = env.reset()
        losses = []
        done = False
        while not done:
            if self.env_steps < hp.warmup_steps:
                a = agent.rng.uniform(-1.0, 1.0, size=self.config.action_dim)
            else:
                a, _ = agent.sample_action(obs)
            next_obs, r, done = env.step(a)
            if not (np.isfinite(r) and np.all(np.isfinite(next_obs))):
                raise NonFiniteError(f"environment returned non-finite reward/observation at step {self.env_steps}")
            terminal = done and not hp.bootstrap_on_timeout
            self.buffer.add(obs, a, r, next_obs, terminal)
            obs = next_obs
            self.env_steps += 1
            if self.env_steps >= hp.warmup_steps and len(self.buffer) >= hp.batch_size:
                for _ in range(hp.updates_per_step):
                    losses.append(agent.update(self.buffer.sample(hp.batch_size, agent.rng)))
        trace = env.trace()
        row = {
            "env_steps": self.env_steps,
            "net_reward": trace.net_reward,
            "mean_reward": trace.mean_reward,
            "mean_quotient": float(np.mean(trace.target_quotient)),
            "min_quotient": trace.min_quotient,
            "alpha": agent.alpha,
            "q1_loss": np.mean([l["q1_loss"] for l in losses]) if losses else np.nan,
            "q2_loss": np.mean([l["q2_loss"] for l in losses]) if losses else np.nan,
            "actor_loss": np.mean([l["actor_loss"] for l in losses]) if losses else np.nan,
        }
        return row, trace

    def run(self, schedule: TrainSchedule) -> TrainResult:
        result = TrainResult([], -np.inf, -1)
        fh = None
        if self.curve_path is not None:
            fh = open(self.curve_path, "w", encoding="utf-8", newline="\n")
            fh.write(",".join(CURVE_COLUMNS) + "\n")
        try:
            self._evaluate_into(result, 0, None)
            for ep in range(1, schedule.episodes + 1):
                self.agent.noise_std = self._noise_for(ep - 1, schedule.episodes)
                try:
                    row, _ = self._episode()
                except (NonFiniteError, ArithmeticError, ValueError) as exc:
                    result.halted = True
                    tail = "\n".join(format_curve_row(r) for r in result.curve[-5:])
                    result.diagnostics = f"episode {ep}: {exc}\nlast curve rows:\n{tail}"
                    log.error("training halted: %s", result.diagnostics)
                    raise TrainingDivergedError(result.diagnostics, result) from exc
                row["episode"] = ep
                row["eval_score"] = row["eval_min_quotient"] = np.nan
                if ep % schedule.eval_every == 0 or ep == schedule.episodes:
                    self._evaluate_into(result, ep, row, schedule.eval_episodes)
                result.curve.append(row)
                if fh:
                    fh.write(format_curve_row(row) + "\n")
                    fh.flush()
        finally:
            if fh:
                fh.close()
        return result

    def _evaluate_into(self, result: TrainResult, ep: int, row: dict | None, n: int = 3):
        traces = evaluate(self.agent, self.config, n)
        score = float(np.mean([t.net_reward for t in traces]))
        if row is not None:
            row["eval_score"] = score
            row["eval_min_quotient"] = float(np.mean([t.min_quotient for t in traces]))
        if score > result.best_score:
            result.best_score, result.best_episode = score, ep
            result.best_tensors = {k: v.copy() for k, v in self.agent.tensors().items()}
            self._save_best()
        log.info("episode %d eval score %.6g (best %.6g @ %d)", ep, score, result.best_score, result.best_episode)


def train(config: EnvConfig, hp: Hyperparams | None = None, schedule: TrainSchedule | None = None,
          agent: SACAgent | None = None, **trainer_kwargs) -> tuple[SACAgent, TrainResult]:
    trainer = Trainer(config, agent=agent, hp=hp, **trainer_kwargs)
    result = trainer.run(schedule or TrainSchedule(episodes=100))
    return trainer.agent, result


def warm_start(teacher, config: EnvConfig, hp: Hyperparams | None = None) -> SACAgent:
    """Agent for ``config`` whose networks, temperature and Adam moments are copied from a teacher.

    ``teacher`` is an agent or a checkpoint path/bytes. The new agent keeps
    its own seeded RNG, so a teacher that is a fresh agent with the same
    seed yields exactly the cold-start agent.
    """
    if isinstance(teacher, SACAgent):
        t_hidden, t_obs, t_act = teacher.hp.hidden, teacher.obs_dim, teacher.act_dim
        tensors = teacher.tensors()
        t_desc = {"obs_dim": t_obs, "act_dim": t_act, "hidden": list(t_hidden)}
    else:
        header, tensors = ckpt.read(teacher)
        t_hidden = tuple(header["hyperparams"]["hidden"])
        t_obs, t_act = header["obs_dim"], header["act_dim"]
        t_desc = {"obs_dim": t_obs, "act_dim": t_act, "hidden": list(t_hidden),
                  "env_config": header.get("env_config")}
    hp = hp or Hyperparams()
    want = {"obs_dim": config.obs_dim, "act_dim": config.action_dim, "hidden": list(hp.hidden)}
    if (t_obs, t_act, tuple(t_hidden)) != (config.obs_dim, config.action_dim, hp.hidden):
        raise DimensionMismatchError(f"teacher {t_desc} is incompatible with student {want}, env {config.name}")
    agent = SACAgent(config.obs_dim, config.action_dim, hp)
    agent.load_tensors(tensors)
    return agent


def imitation_pretrain(teacher, config: EnvConfig, hp: Hyperparams | None = None,
                       schedule: TrainSchedule | None = None, **trainer_kwargs) -> tuple[SACAgent, TrainResult]:
    """Warm-start from a teacher trained on the auxiliary system, then fine-tune."""
    agent = warm_start(teacher, config, hp)
    return train(config, schedule=schedule or TrainSchedule(episodes=300), agent=agent, **trainer_kwargs)
