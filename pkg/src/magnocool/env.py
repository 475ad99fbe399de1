"""Episodic control environment around the moment simulator."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dynamics import (
    EPS_N,
    PERIOD,
    CovarianceState,
    SystemSpec,
    bipartite_system,
    build_generators,
    occupancies,
    propagate,
    thermal_covariance,
    tripartite_system,
)
from .trace import EpisodeTrace

INVERSE_QUOTIENT = "inverse_quotient"
INVERSE_QUOTIENT_MINUS_MAGNON = "inverse_quotient_minus_magnon"


@dataclass(frozen=True)
class RewardSpec:
    kind: str = INVERSE_QUOTIENT
    n_thermal: float = 100.0
    magnon_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in (INVERSE_QUOTIENT, INVERSE_QUOTIENT_MINUS_MAGNON):
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if not self.n_thermal > 0:
            raise ValueError("n_thermal must be > 0")
        if self.magnon_weight < 0:
            raise ValueError("magnon weight must be >= 0")

    def __call__(self, occ: np.ndarray, target_mode: int, magnon_mode: int | None = None) -> float:
        quotient = max(float(occ[target_mode]), EPS_N) / self.n_thermal
        r = 1.0 / quotient
        if self.kind == INVERSE_QUOTIENT_MINUS_MAGNON:
            if magnon_mode is None:
                raise ValueError("magnon-penalized reward needs a magnon mode")
            r -= self.magnon_weight * float(occ[magnon_mode])
        return r


#: Covariance entries are divided by ``obs_scale`` and then either passed
#: through or compressed with sign(x) log(1 + |x|); unstable couplings can
#: drive occupancies to 1e80 within one episode.
OBS_TRANSFORMS = ("linear", "signed_log")

#: Action -> control conventions.
COMPLEX_COUPLING = "complex"  # (a1 + i a2) * max / sqrt(2)
NONNEGATIVE = "nonnegative"   # (a + 1)/2 * max, one action per slot


@dataclass(frozen=True)
class EnvConfig:
    system: SystemSpec
    steps_per_episode: int
    dt: float
    control_max: tuple[float, ...]
    action_kind: str = COMPLEX_COUPLING
    reward: RewardSpec = field(default_factory=RewardSpec)
    obs_scale: float = 100.0
    obs_transform: str = "signed_log"
    seed: int = 0
    name: str = "env"

    def __post_init__(self):
        object.__setattr__(self, "control_max", tuple(float(c) for c in self.control_max))
        if self.steps_per_episode < 1:
            raise ValueError("steps_per_episode must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.action_kind == COMPLEX_COUPLING:
            if self.system.n_control_slots != 1 or len(self.control_max) != 1:
                raise ValueError("complex action map drives exactly one control slot")
        elif self.action_kind == NONNEGATIVE:
            if len(self.control_max) != self.system.n_control_slots:
                raise ValueError("need one control maximum per slot")
        else:
            raise ValueError(f"unknown action kind {self.action_kind!r}")
        if any(c <= 0 for c in self.control_max):
            raise ValueError("control maxima must be > 0")
        if self.obs_transform not in OBS_TRANSFORMS:
            raise ValueError(f"unknown observation transform {self.obs_transform!r}")
        if not self.obs_scale > 0:
            raise ValueError("obs_scale must be > 0")

    @property
    def action_dim(self) -> int:
        return 2 if self.action_kind == COMPLEX_COUPLING else self.system.n_control_slots

    @property
    def action_bounds(self) -> list[tuple[float, float]]:
        return [(-1.0, 1.0)] * self.action_dim

    @property
    def obs_dim(self) -> int:
        d = self.system.dim
        return d * (d + 1) // 2 + self.action_dim

    @property
    def magnon_mode(self) -> int | None:
        try:
            return self.system.mode_index("magnon")
        except KeyError:
            return None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["system"] = system_to_dict(self.system)
        return d

    def config_hash(self) -> str:
        """Hash of everything that shapes the dynamics and reward (not the seed or name)."""
        d = self.to_dict()
        d.pop("seed")
        d.pop("name")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def interface_hash(self) -> str:
        """Hash of what a policy network depends on: observation/action layout."""
        blob = json.dumps(
            {"obs_dim": self.obs_dim, "action_dim": self.action_dim, "kind": self.action_kind,
             "modes": [m.label for m in self.system.modes]},
            sort_keys=True,
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def system_to_dict(system: SystemSpec) -> dict:
    out = asdict(system)
    for c in out["couplings"]:
        c["kind"] = c["kind"].value if hasattr(c["kind"], "value") else c["kind"]
        if c["value"] is not None:
            c["value"] = [complex(c["value"]).real, complex(c["value"]).imag]
    return out


def action_map(config: EnvConfig, action) -> np.ndarray:
    """Canonical action in [-1, 1]^k to control-slot values."""
    a = np.asarray(action, dtype=float)
    if config.action_kind == COMPLEX_COUPLING:
        return np.array([(a[0] + 1j * a[1]) * config.control_max[0] / np.sqrt(2)])
    return (a + 1.0) / 2.0 * np.asarray(config.control_max)


def bipartite_env_config(
    g_max_over_sqrt2: float = 5.0,
    steps_per_episode: int = 50,
    dt_periods: float = 0.1,
    n_thermal: float = 100.0,
    seed: int = 0,
    **system_kwargs,
) -> EnvConfig:
    system = bipartite_system(n_thermal=n_thermal, **system_kwargs)
    return EnvConfig(
        system=system,
        steps_per_episode=steps_per_episode,
        dt=dt_periods * PERIOD,
        control_max=(g_max_over_sqrt2 * np.sqrt(2),),
        action_kind=COMPLEX_COUPLING,
        reward=RewardSpec(INVERSE_QUOTIENT, n_thermal),
        obs_scale=n_thermal,
        seed=seed,
        name=f"bipartite-G{g_max_over_sqrt2:g}",
    )


def tripartite_env_config(
    omega_m: float = 1e3,
    omega_max: float = 10.0,
    steps_per_episode: int = 150,
    dt_periods: float = 0.1,
    n_thermal: float = 100.0,
    magnon_weight: float = 10.0,
    dampings=(0.1, 1e-3, 1e-5),
    seed: int = 0,
    **system_kwargs,
) -> EnvConfig:
    system = tripartite_system(omega_m=omega_m, dampings=dampings, n_thermal=n_thermal, **system_kwargs)
    return EnvConfig(
        system=system,
        steps_per_episode=steps_per_episode,
        dt=dt_periods * PERIOD,
        control_max=(omega_max, omega_max),
        action_kind=NONNEGATIVE,
        reward=RewardSpec(INVERSE_QUOTIENT_MINUS_MAGNON, n_thermal, magnon_weight),
        obs_scale=n_thermal,
        seed=seed,
        name=f"tripartite-wm{omega_m:g}-O{omega_max:g}",
    )


class CoolingEnv:
    """Single-threaded, stateful rollout environment.

    ``reset()`` returns the first observation; ``step(action)`` returns
    ``(observation, reward, done)``. Actions outside [-1, 1] are clipped
    and counted in ``n_clipped``.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.n_clipped = 0
        self._iu = np.triu_indices(config.system.dim)
        self._state: CovarianceState | None = None
        self._rows: list = []
        self._done = True

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    @property
    def action_dim(self) -> int:
        return self.config.action_dim

    @property
    def state(self) -> CovarianceState:
        return self._state

    def observe(self) -> np.ndarray:
        sigma_part = self._state.sigma[self._iu] / self.config.obs_scale
        if self.config.obs_transform == "signed_log":
            sigma_part = np.sign(sigma_part) * np.log1p(np.abs(sigma_part))
        c = self._controls
        if self.config.action_kind == COMPLEX_COUPLING:
            ctrl = np.array([c[0].real, c[0].imag]) / self.config.control_max[0]
        else:
            ctrl = c.real / np.asarray(self.config.control_max)
        return np.concatenate([sigma_part, ctrl])

    def reset(self) -> np.ndarray:
        self._state = thermal_covariance(self.config.system)
        self._controls = np.zeros(self.config.system.n_control_slots, dtype=complex)
        self._rows = []
        self._done = False
        self._aborted = False
        return self.observe()

    def step(self, action):
        if self._done:
            raise RuntimeError("episode finished; call reset()")
        a = np.asarray(action, dtype=float).reshape(self.action_dim)
        if not np.all(np.isfinite(a)):
            self._done = self._aborted = True
            raise ValueError(f"non-finite action {a}; episode aborted after {len(self._rows)} steps")
        clipped = np.clip(a, -1.0, 1.0)
        if np.any(clipped != a):
            self.n_clipped += 1
        return self._advance(action_map(self.config, clipped), clipped)

    def step_controls(self, controls, action=None):
        """Advance with explicit control-slot values (open-loop replay)."""
        if self._done:
            raise RuntimeError("episode finished; call reset()")
        c = np.asarray(controls).reshape(self.config.system.n_control_slots)
        if not np.all(np.isfinite(c)):
            self._done = self._aborted = True
            raise ValueError(f"non-finite controls {c}; episode aborted after {len(self._rows)} steps")
        return self._advance(c.astype(complex), action)

    def _advance(self, controls, action):
        self._controls = controls
        gen = build_generators(self.config.system, self._controls)
        self._state = propagate(self._state, gen, self.config.dt)
        occ = occupancies(self._state)
        reward = self.config.reward(occ, self.config.system.target_mode, self.config.magnon_mode)
        self._rows.append((self._state.time, action, self._controls.copy(), occ, reward))
        self._done = len(self._rows) >= self.config.steps_per_episode
        return self.observe(), reward, self._done

    @property
    def done(self) -> bool:
        return self._done

    def trace(self) -> EpisodeTrace:
        system = self.config.system
        if not self._rows:
            raise RuntimeError("no steps recorded")
        t, a, c, occ, r = zip(*self._rows)
        actions = None if any(x is None for x in a) else np.array(a)
        controls = np.array(c)
        if not any(system.slot_is_complex(k) for k in range(system.n_control_slots)):
            controls = controls.real
        return EpisodeTrace(
            times=np.array(t),
            controls=controls,
            occupancies=np.array(occ),
            rewards=np.array(r),
            mode_labels=tuple(m.label for m in system.modes),
            target_mode=system.target_mode,
            n_thermal=self.config.reward.n_thermal,
            actions=actions,
            complex_slots=tuple(system.slot_is_complex(s) for s in range(system.n_control_slots)),
        )


def rollout(env: CoolingEnv, policy) -> EpisodeTrace:
    """Run one episode with ``policy(obs) -> action``."""
    obs = env.reset()
    done = False
    while not done:
        obs, _, done = env.step(policy(obs))
    return env.trace()


def replay(config: EnvConfig, controls, actions=None) -> EpisodeTrace:
    """Open-loop episode under given control values, one row per step.

    The schedule may be shorter or longer than ``steps_per_episode``; its own
    length sets the episode length.
    """
    controls = np.asarray(controls)
    if controls.ndim == 1:
        controls = controls[:, None]
    env = CoolingEnv(_with_steps(config, len(controls)))
    env.reset()
    for k, c in enumerate(controls):
        env.step_controls(c, None if actions is None else np.asarray(actions[k], dtype=float))
    return env.trace()


def _with_steps(config: EnvConfig, n: int) -> EnvConfig:
    return config if config.steps_per_episode == n else replace(config, steps_per_episode=n)
