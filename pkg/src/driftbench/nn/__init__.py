"""Small numpy neural-network core: layers, graphs, optimizers, checks, storage."""

from .gradcheck import GradCheckResult, grad_check
from .layers import Concat, Conv2d, Dense, Flatten, Layer, ReLU, Sequential
from .model import Model, Node, init_params
from .optim import OptimHyper, OptimState, optimize_step
from .serialize import dumps_model, load_model, loads_model, save_model

__all__ = [
    "Concat", "Conv2d", "Dense", "Flatten", "GradCheckResult", "Layer", "Model", "Node", "OptimHyper",
    "OptimState", "ReLU", "Sequential", "dumps_model", "grad_check", "init_params", "load_model",
    "loads_model", "optimize_step", "save_model",
]
