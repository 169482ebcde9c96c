"""Model parameters and the admissible regularity window."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .lattice import LatticeSpec


def critical_regularity(d: int, p: int = 3) -> float:
    """Scaling-critical Sobolev index ``d/2 - 2/(p-1)``; ``d/2 - 1`` in the cubic case."""
    return d / 2 - 2 / (p - 1)


def srd(d: int) -> Fraction:
    """Width of the admissible window above the critical index."""
    if d < 3:
        raise ValueError("the admissible window is only defined for d >= 3")
    if d == 3:
        return Fraction(1, 7)
    if d == 4:
        return Fraction(4, 19)
    return Fraction(1, 4)


class RegimeWarning(UserWarning):
    """Parameters lie outside the window covered by the local theory."""


@dataclass(frozen=True)
class ModelParams:
    d: int = 3
    rho: int = 1
    alpha: float = 0.0
    s: float | None = None
    M: int = 8
    delta: float = 0.02
    dt: float = 1e-4
    mean_normalized: bool = True

    def __post_init__(self):
        if self.rho not in (1, -1):
            raise ValueError(f"rho must be +1 or -1, got {self.rho!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.delta <= 0 or self.dt <= 0:
            raise ValueError("delta and dt must be positive")
        if self.dt > self.delta * (1 + 1e-12):
            raise ValueError("dt must not exceed delta")
        if self.s is None:
            object.__setattr__(self, "s", self.s_c)
        LatticeSpec(self.d, self.M)  # validates d, M

    @property
    def s_c(self) -> float:
        return critical_regularity(self.d)

    @property
    def s_r(self) -> float:
        return float(srd(self.d)) if self.d >= 3 else float("nan")

    @property
    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.d, self.M)

    @property
    def steps(self) -> int:
        return max(1, int(round(self.delta / self.dt)))

    @property
    def times(self) -> np.ndarray:
        return time_grid(self.delta, self.dt)

    @property
    def decay(self) -> float:
        """Exponent ``d - 1 - alpha`` of the bracket weight in the random data."""
        return self.d - 1 - self.alpha

    def admissible(self) -> bool:
        if self.d < 3:
            return False
        return 0 <= self.alpha < self.s_r and self.s_c <= self.s < self.s_c + self.s_r - self.alpha

    def check_regime(self, force: bool = False) -> bool:
        """Warn when outside the admissible window; raise unless ``force``."""
        if self.admissible():
            return True
        msg = (f"(d={self.d}, alpha={self.alpha}, s={self.s}) is outside "
               f"0 <= alpha < {self.s_r:.6g}, {self.s_c:.6g} <= s < {self.s_c + self.s_r - self.alpha:.6g}")
        warnings.warn(msg, RegimeWarning, stacklevel=2)
        if not force:
            raise ValueError(msg + " (pass force=True to run anyway)")
        return False

    def with_(self, **kw) -> "ModelParams":
        data = self.to_dict()
        data.update(kw)
        return ModelParams(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def describe(self) -> dict:
        out = self.to_dict()
        out.update(s_c=self.s_c, s_r=self.s_r, admissible=self.admissible(), steps=self.steps)
        return out


def time_grid(delta: float, dt: float) -> np.ndarray:
    """Uniform grid ``0 = t_0 < ... < t_T = delta`` with step closest to ``dt``."""
    steps = max(1, int(round(delta / dt)))
    return np.linspace(0.0, delta, steps + 1)
