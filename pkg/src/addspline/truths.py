"""
Registry of raw truth shapes and their derivatives.

A scenario's truth is the raw shape minus its expectation under the design law,
so every shape here is uncentered.
"""
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

Shape = Callable[[np.ndarray], np.ndarray]

_PHASE = 0.2 * np.pi


def _sine(x: np.ndarray) -> np.ndarray:
    return -10.0 * np.sin(1.9 * x + _PHASE)


def _sine_d1(x: np.ndarray) -> np.ndarray:
    return -19.0 * np.cos(1.9 * x + _PHASE)


def _sine_d2(x: np.ndarray) -> np.ndarray:
    return 36.1 * np.sin(1.9 * x + _PHASE)


def _sine_d3(x: np.ndarray) -> np.ndarray:
    return 68.59 * np.cos(1.9 * x + _PHASE)


def _bump(z: np.ndarray) -> np.ndarray:
    return 3.0 * np.exp(-500.0 * (z - 0.1) ** 2)


def _bump_d1(z: np.ndarray) -> np.ndarray:
    u = z - 0.1
    return -3000.0 * u * np.exp(-500.0 * u ** 2)


def _bump_d2(z: np.ndarray) -> np.ndarray:
    u = z - 0.1
    return (3.0e6 * u ** 2 - 3000.0) * np.exp(-500.0 * u ** 2)


def _bump_d3(z: np.ndarray) -> np.ndarray:
    u = z - 0.1
    return (9.0e6 * u - 3.0e9 * u ** 3) * np.exp(-500.0 * u ** 2)


def _quadratic(x: np.ndarray) -> np.ndarray:
    return 6.0 * x ** 2 - 4.0 * x


def _quadratic_d1(x: np.ndarray) -> np.ndarray:
    return 12.0 * x - 4.0


def _constant(value: float) -> Shape:
    def shape(x: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x), value, dtype=float)
    return shape


@dataclass(frozen=True)
class TruthShape:
    """A raw truth function with its first three derivatives."""
    name: str
    derivatives: Tuple[Shape, Shape, Shape, Shape]

    def __call__(self, t, order: int = 0) -> np.ndarray:
        if not 0 <= order <= 3:
            raise ValueError(f"Derivative order must be in 0..3, got {order}")
        return self.derivatives[order](np.asarray(t, dtype=float))


TRUTHS: Dict[str, TruthShape] = {
    "sine": TruthShape("sine", (_sine, _sine_d1, _sine_d2, _sine_d3)),
    "bump": TruthShape("bump", (_bump, _bump_d1, _bump_d2, _bump_d3)),
    "quadratic": TruthShape(
        "quadratic", (_quadratic, _quadratic_d1, _constant(12.0), _constant(0.0))
    ),
    "zero": TruthShape("zero", (_constant(0.0),) * 4),
}


def get_truth(name: str) -> TruthShape:
    """Look up a registered truth shape by name."""
    try:
        return TRUTHS[name]
    except KeyError:
        raise ValueError(f"Unknown truth shape '{name}'. Available: {', '.join(sorted(TRUTHS))}")


def truth_derivative(name: str, t, order: int) -> np.ndarray:
    """Evaluate the `order`-th derivative of a raw truth shape."""
    return get_truth(name)(t, order)
