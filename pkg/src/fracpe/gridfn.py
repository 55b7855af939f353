"""Uniformly gridded scalar functions, the substrate for all pathwise operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidInput(ValueError):
    """Raised when a grid function or operator argument is malformed."""


class InvalidOrder(ValueError):
    """Raised when a fractional order lies outside its admissible window."""


@dataclass(frozen=True)
class GridFunction:
    """A real function sampled on the uniform grid t0 + i*dt, i = 0..n-1."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 2:
            raise InvalidInput("grid function needs at least 2 samples")
        if not self.dt > 0:
            raise InvalidInput(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("grid function values must be finite")
        vals.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def span(self) -> float:
        return (self.n - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            self.n == other.n
            and abs(self.t0 - other.t0) <= 1e-12 * (1 + abs(self.t0))
            and abs(self.dt - other.dt) <= 1e-12 * self.dt
        )

    @classmethod
    def from_samples(cls, t0, dt, values) -> "GridFunction":
        return cls(float(t0), float(dt), np.asarray(values, dtype=float))

    @classmethod
    def from_callable(cls, fn, t0, dt, n) -> "GridFunction":
        t = t0 + dt * np.arange(n)
        return cls(float(t0), float(dt), np.asarray(fn(t), dtype=float))

    def to_csv(self, path) -> None:
        """Write `t,value` rows at full double precision (17 significant digits)."""
        t = self.times()
        with open(path, "w") as fh:
            fh.write("t,value\n")
            for ti, vi in zip(t, self.values):
                fh.write(f"{ti:.17g},{vi:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 2:
            raise InvalidInput(f"malformed grid-function CSV: {path}")
        t, v = data[:, 0], data[:, 1]
        dts = np.diff(t)
        if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
            raise InvalidInput("grid-function CSV is not uniformly gridded")
        return cls(float(t[0]), float(dts.mean()), v)


@dataclass(frozen=True)
class FracOrder:
    """Fractional order alpha with its validity window (lo, hi) recorded."""

    alpha: float
    lo: float = 0.0
    hi: float = 0.5

    def __post_init__(self):
        if not (self.lo < self.alpha < self.hi):
            raise InvalidOrder(
                f"alpha={self.alpha} outside validity window ({self.lo}, {self.hi})"
            )

    def require_in(self, lo, hi) -> float:
        if not (lo < self.alpha < hi):
            raise InvalidOrder(f"alpha={self.alpha} not in required window ({lo}, {hi})")
        return self.alpha


def as_order(alpha, lo=0.0, hi=0.5) -> FracOrder:
    """Coerce a float (or FracOrder) to a FracOrder with the given window."""
    if isinstance(alpha, FracOrder):
        return alpha
    return FracOrder(float(alpha), lo, hi)
