"""
Simulation scenario and dataset models.
"""
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from src.addspline.truths import get_truth


@dataclass(frozen=True)
class Scenario:
    """
    Data-generating configuration.

    center_f and center_g are the expectations of the raw shapes under the
    design law; the truths are raw - center. For the sine shape this makes
    center_f = -E[10 sin(1.9X + 0.2pi)].
    """
    rho: float
    a: float
    snr: float
    sigma: float
    center_f: float
    center_g: float
    signal_var: float
    f_shape: str = "sine"
    g_shape: str = "bump"

    @property
    def name(self) -> str:
        snr = "inf" if np.isinf(self.snr) else f"{self.snr:g}"
        return f"rho{self.rho:g}_snr{snr}_{self.f_shape}_{self.g_shape}"

    def f0(self, x) -> np.ndarray:
        """Centered truth for the x-component."""
        return get_truth(self.f_shape)(x) - self.center_f

    def g0(self, z) -> np.ndarray:
        """Centered truth for the z-component."""
        return get_truth(self.g_shape)(z) - self.center_g

    def to_dict(self) -> Dict[str, Any]:
        """Convert scenario to dictionary."""
        return {
            "name": self.name,
            "rho": self.rho,
            "a": self.a,
            "snr": None if np.isinf(self.snr) else self.snr,
            "sigma": self.sigma,
            "center_f": self.center_f,
            "center_g": self.center_g,
            "signal_variance": self.signal_var,
            "f_shape": self.f_shape,
            "g_shape": self.g_shape,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations (x_i, z_i, y_i)."""
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    seed: int
    scenario_ref: str
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.x) == len(self.z) == len(self.y)):
            raise ValueError(
                f"x, z and y must have equal lengths ({len(self.x)}, {len(self.z)}, {len(self.y)})"
            )
        for name in ("x", "z", "y"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def n(self) -> int:
        return len(self.y)

    def to_dict(self) -> Dict[str, Any]:
        """Sidecar metadata record (arrays excluded)."""
        return {
            "n": self.n,
            "seed": self.seed,
            "scenario_ref": self.scenario_ref,
            **self.metadata,
        }
