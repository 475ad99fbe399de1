"""Soft actor-critic learner built on the in-repo MLP/backprop core."""
from .agent import Hyperparams, NonFiniteError, SACAgent
from .buffer import Batch, ReplayBuffer
from .train import TrainResult, TrainSchedule, Trainer, evaluate, imitation_pretrain, train, warm_start

__all__ = ["Hyperparams", "NonFiniteError", "SACAgent", "Batch", "ReplayBuffer", "TrainResult",
           "TrainSchedule", "Trainer", "evaluate", "imitation_pretrain", "train", "warm_start"]
