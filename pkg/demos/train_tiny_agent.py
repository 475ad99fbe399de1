"""About a minute of soft actor-critic on the bipartite cooling task.

Uses small networks and short episodes so it finishes on a laptop CPU. The
full-size configuration is available through ``magnocool train --recipe
bipartite-g5``.

Run: python demos/train_tiny_agent.py
"""
from magnocool.env import bipartite_env_config
from magnocool.sac.agent import Hyperparams
from magnocool.sac.train import TrainSchedule, evaluate, train

config = bipartite_env_config(g_max_over_sqrt2=5.0, steps_per_episode=50, seed=1)
hp = Hyperparams(hidden=(64, 64), batch_size=64, buffer_size=20_000, warmup_steps=200, lr=1e-3)
agent, result = train(config, hp, TrainSchedule(episodes=200, eval_every=20, eval_episodes=2))

for ep, score in result.evaluations():
    print(f"episode {ep:3d}: eval net reward {score:.1f}")
print(f"best checkpoint at episode {result.best_episode} (score {result.best_score:.1f})")

traces = evaluate(agent, config, n_episodes=1)
print(f"deterministic episode min phonon quotient: {traces[0].target_quotient.min():.3e}")
