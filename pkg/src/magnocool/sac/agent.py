"""Soft actor-critic with twin critics, target networks and adaptive temperature."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .buffer import Batch
from .nn import MLP, Adam, clip_by_global_norm, soft_update

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
_HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)
# tanh rounds to +-1 for |z| > 19 in float64; keep actions in the open interval
A_MAX = np.nextafter(1.0, 0.0)


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    hidden: tuple[int, ...] = (512, 256, 256, 128)
    lr: float = 1e-4
    buffer_size: int = 1_000_000
    batch_size: int = 512
    gamma: float = 0.99
    tau: float = 0.005
    alpha0: float = 0.1
    adaptive_alpha: bool = True
    target_entropy: float | None = None  # None -> -action_dim
    warmup_steps: int = 1000
    updates_per_step: int = 1
    grad_clip: float | None = 10.0
    noise_std_start: float = 0.0
    noise_std_end: float = 0.0
    bootstrap_on_timeout: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must be in (0, 1]")
        if self.alpha0 < 0:
            raise ValueError("alpha must be >= 0")
        if self.batch_size < 1 or self.buffer_size < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_size")

    def to_dict(self) -> dict:
        return asdict(self)


def log1m_tanh_sq(z: np.ndarray) -> np.ndarray:
    """log(1 - tanh(z)^2), stable for large |z|."""
    return 2.0 * (np.log(2.0) - z - np.logaddexp(0.0, -2.0 * z))


def squash(mean, log_std, eps):
    """Reparameterized tanh-Gaussian sample and its log-density."""
    std = np.exp(log_std)
    z = mean + std * eps
    a = np.clip(np.tanh(z), -A_MAX, A_MAX)
    logp = np.sum(-0.5 * eps**2 - log_std - _HALF_LOG_2PI - log1m_tanh_sq(z), axis=-1)
    return a, logp, z


class Actor:
    """Policy net whose head emits ``(mean, raw log-std)`` per action."""

    def __init__(self, obs_dim: int, act_dim: int, hidden, rng):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.net = MLP((obs_dim, *hidden, 2 * act_dim), rng)

    def heads(self, obs):
        out, cache = self.net.forward(obs)
        mean = out[..., : self.act_dim]
        raw = out[..., self.act_dim:]
        return mean, np.clip(raw, LOG_STD_MIN, LOG_STD_MAX), raw, cache


def critic_forward(q: MLP, obs, act):
    out, cache = q.forward(np.concatenate([obs, act], axis=-1))
    return out[:, 0], cache


def critic_loss_and_grads(q: MLP, obs, act, y):
    """Mean squared error to the target ``y`` and its parameter gradients."""
    pred, cache = critic_forward(q, obs, act)
    diff = pred - y
    loss = float(np.mean(diff**2))
    grads, _ = q.backward(cache, (2.0 / len(y)) * diff[:, None])
    return loss, grads


def actor_loss_and_grads(actor: Actor, q1: MLP, q2: MLP, obs, eps, alpha: float):
    """E[alpha log pi(a|s) - min_j Q_j(s, a)] with a = tanh(mean + std * eps).

    Returns ``(loss, actor_grads, log_probs)``; critics are not touched.
    """
    n = len(obs)
    mean, log_std, raw, cache = actor.heads(obs)
    a, logp, z = squash(mean, log_std, eps)
    v1, c1 = critic_forward(q1, obs, a)
    v2, c2 = critic_forward(q2, obs, a)
    use1 = v1 <= v2
    qmin = np.where(use1, v1, v2)
    loss = float(np.mean(alpha * logp - qmin))

    # dQmin/da through whichever critic is smaller per sample
    g = -np.ones((n, 1)) / n
    _, gin1 = q1.backward(c1, g * use1[:, None])
    _, gin2 = q2.backward(c2, g * (~use1)[:, None])
    dq_da = (gin1 + gin2)[:, actor.obs_dim:]
    t = np.tanh(z)
    # d/dz of alpha*logp: the -log(1 - tanh^2) term gives 2 tanh(z)
    dz = alpha * 2.0 * t / n + dq_da * (1.0 - t * t)
    dmean = dz
    dlogstd = dz * np.exp(log_std) * eps - alpha / n
    dlogstd = dlogstd * ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX))
    grads, _ = actor.net.backward(cache, np.concatenate([dmean, dlogstd], axis=-1))
    return loss, grads, logp


def critic_target(reward, done, next_q1, next_q2, next_logp, gamma: float, alpha: float):
    """y = r + gamma (1 - d) (min_j Q_targ_j(s', a') - alpha log pi(a'|s'))."""
    soft_v = np.minimum(next_q1, next_q2) - alpha * next_logp
    return reward + gamma * (1.0 - done) * soft_v


class SACAgent:
    def __init__(self, obs_dim: int, act_dim: int, hp: Hyperparams | None = None,
                 rng: np.random.Generator | None = None):
        self.hp = Hyperparams() if hp is None else hp
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.rng = np.random.default_rng(self.hp.seed) if rng is None else rng
        h = self.hp.hidden
        self.actor = Actor(obs_dim, act_dim, h, self.rng)
        self.q1 = MLP((obs_dim + act_dim, *h, 1), self.rng)
        self.q2 = MLP((obs_dim + act_dim, *h, 1), self.rng)
        self.q1_targ, self.q2_targ = self.q1.copy(), self.q2.copy()
        self.log_alpha = np.array([np.log(self.hp.alpha0)]) if self.hp.alpha0 > 0 else np.array([-np.inf])
        self.target_entropy = -float(act_dim) if self.hp.target_entropy is None else self.hp.target_entropy
        self._make_optimizers()
        self.noise_std = self.hp.noise_std_start
        self.n_updates = 0

    def _make_optimizers(self):
        lr = self.hp.lr
        self.actor_opt = Adam(self.actor.net.params, lr)
        self.q1_opt = Adam(self.q1.params, lr)
        self.q2_opt = Adam(self.q2.params, lr)
        self.alpha_opt = Adam([self.log_alpha], lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def sample_action(self, obs, deterministic: bool = False, rng=None):
        """Action in (-1, 1)^k and its log-density for one or many observations.

        Stochastic mode draws ``tanh(mean + std * eps)`` with an extra
        zero-mean perturbation of ``noise_std`` on the pre-squash mean when
        the noise layer is active.
        """
        rng = self.rng if rng is None else rng
        obs = np.asarray(obs, dtype=float)
        single = obs.ndim == 1
        obs2 = obs[None] if single else obs
        if not np.all(np.isfinite(obs2)):
            raise NonFiniteError("non-finite observation")
        with np.errstate(invalid="ignore", over="ignore"):
            mean, log_std, _, _ = self.actor.heads(obs2)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std))):
            raise NonFiniteError("policy network produced non-finite output; checkpoint is corrupt")
        if deterministic:
            a = np.clip(np.tanh(mean), -A_MAX, A_MAX)
            logp = np.full(len(mean), np.nan)
        else:
            if self.noise_std > 0:
                mean = mean + self.noise_std * rng.standard_normal(mean.shape)
            eps = rng.standard_normal(mean.shape)
            a, logp, _ = squash(mean, log_std, eps)
        return (a[0], logp[0]) if single else (a, logp)

    def compute_target(self, batch: Batch) -> np.ndarray:
        mean, log_std, _, _ = self.actor.heads(batch.next_obs)
        eps = self.rng.standard_normal(mean.shape)
        a2, logp2, _ = squash(mean, log_std, eps)
        nq1, _ = critic_forward(self.q1_targ, batch.next_obs, a2)
        nq2, _ = critic_forward(self.q2_targ, batch.next_obs, a2)
        return critic_target(batch.reward, batch.done, nq1, nq2, logp2, self.hp.gamma, self.alpha)

    def update_critics(self, batch: Batch, y: np.ndarray | None = None) -> tuple[float, float]:
        y = self.compute_target(batch) if y is None else y
        l1, g1 = critic_loss_and_grads(self.q1, batch.obs, batch.action, y)
        l2, g2 = critic_loss_and_grads(self.q2, batch.obs, batch.action, y)
        if not (np.isfinite(l1) and np.isfinite(l2)):
            raise NonFiniteError(f"critic loss non-finite (q1={l1}, q2={l2})")
        self.q1_opt.step(clip_by_global_norm(g1, self.hp.grad_clip)[0])
        self.q2_opt.step(clip_by_global_norm(g2, self.hp.grad_clip)[0])
        return l1, l2

    def update_actor(self, batch: Batch, eps: np.ndarray | None = None):
        """One policy step; returns ``(loss, log_probs)`` of the sampled actions."""
        eps = self.rng.standard_normal((len(batch.obs), self.act_dim)) if eps is None else eps
        loss, grads, logp = actor_loss_and_grads(self.actor, self.q1, self.q2, batch.obs, eps, self.alpha)
        if not np.isfinite(loss):
            raise NonFiniteError(f"actor loss non-finite ({loss})")
        self.actor_opt.step(clip_by_global_norm(grads, self.hp.grad_clip)[0])
        return loss, logp

    def update_alpha(self, logp: np.ndarray) -> float:
        """Step on log(alpha) for the loss -log(alpha) * mean(log pi + target_entropy)."""
        if not self.hp.adaptive_alpha or not np.isfinite(self.log_alpha[0]):
            return self.alpha
        grad = -float(np.mean(logp + self.target_entropy))
        self.alpha_opt.step([np.array([grad])])
        return self.alpha

    def soft_update_targets(self, tau: float | None = None):
        tau = self.hp.tau if tau is None else tau
        soft_update(self.q1_targ, self.q1, tau)
        soft_update(self.q2_targ, self.q2, tau)

    def update(self, batch: Batch) -> dict:
        l1, l2 = self.update_critics(batch)
        la, logp = self.update_actor(batch)
        alpha = self.update_alpha(logp)
        self.soft_update_targets()
        self.n_updates += 1
        return {"q1_loss": l1, "q2_loss": l2, "actor_loss": la, "alpha": alpha,
                "entropy": -float(np.mean(logp))}

    # -- state for checkpoints ------------------------------------------------

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        nets = {"actor": self.actor.net, "q1": self.q1, "q2": self.q2,
                "q1_targ": self.q1_targ, "q2_targ": self.q2_targ}
        for name, net in nets.items():
            for i, p in enumerate(net.params):
                out[f"{name}.{i}"] = p
        opts = {"actor": self.actor_opt, "q1": self.q1_opt, "q2": self.q2_opt, "alpha": self.alpha_opt}
        for name, opt in opts.items():
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                out[f"adam.{name}.m.{i}"] = m
                out[f"adam.{name}.v.{i}"] = v
            out[f"adam.{name}.t"] = np.array([float(opt.t)])
        out["log_alpha"] = self.log_alpha
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray], weights_only: bool = False):
        nets = {"actor": self.actor.net, "q1": self.q1, "q2": self.q2,
                "q1_targ": self.q1_targ, "q2_targ": self.q2_targ}
        for name, net in nets.items():
            net.load_params([tensors[f"{name}.{i}"] for i in range(len(net.params))])
        self.log_alpha = np.array(tensors["log_alpha"], dtype=float).copy()
        self._make_optimizers()
        if weights_only:
            return
        opts = {"actor": self.actor_opt, "q1": self.q1_opt, "q2": self.q2_opt, "alpha": self.alpha_opt}
        for name, opt in opts.items():
            opt.m = [np.array(tensors[f"adam.{name}.m.{i}"]) for i in range(len(opt.m))]
            opt.v = [np.array(tensors[f"adam.{name}.v.{i}"]) for i in range(len(opt.v))]
            opt.t = int(tensors[f"adam.{name}.t"][0])
