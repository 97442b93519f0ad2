"""Ready-made scalar systems used by the CLI presets and the test-suite."""
import numpy as np

from .spaces import DiscreteSpace, GeneratorRealization, LinearMap
from .stochastics import TimeGrid
from .system import StochasticSystemRealization


def scalar_system(a=-1.0, b=1.0, c=1.0, f1=0.0, sigma=0.0, grid=None):
    """``dY = (a + f1) Y dt + b u dt + sigma Y dW``, ``Z = c Y`` on the real line."""
    grid = grid or TimeGrid(1.0, 256)
    H = DiscreteSpace.euclidean(1, "H")
    U = DiscreteSpace.euclidean(1, "U")
    Ut = DiscreteSpace.euclidean(1, "Utilde")
    A = GeneratorRealization.diagonal(H, [a])
    return StochasticSystemRealization(
        H, U, Ut, A, LinearMap(U, H, [[b]]), LinearMap(H, Ut, [[c]]), grid,
        F1=[[f1]], F2=[[sigma]], meta={"instance": "scalar", "a": a, "b": b, "c": c, "f1": f1, "sigma": sigma},
    )
