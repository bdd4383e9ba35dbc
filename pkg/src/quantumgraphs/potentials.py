"""Edge potentials: zero, constant, piecewise-constant, and sampled profiles.

A potential lives on a single edge parametrized by x in [0, l].  All types
support pointwise evaluation, restriction to a sub-interval (re-parametrized
to start at 0), and a lower bound used to start Dirichlet-spectrum scans.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import GraphSpecError


@dataclass(frozen=True)
class ZeroPotential:
    """The identically zero potential."""

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def restrict(self, a: float, b: float) -> "ZeroPotential":
        return self

    def pieces(self, length: float):
        """Constant pieces as (x0, x1, value) triples covering [0, length]."""
        return ((0.0, float(length), 0.0),)

    @property
    def min_value(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ConstantPotential:
    value: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def restrict(self, a: float, b: float) -> "ConstantPotential":
        return self

    def pieces(self, length: float):
        return ((0.0, float(length), float(self.value)),)

    @property
    def min_value(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class PiecewiseConstantPotential:
    """Piecewise-constant profile with interior breakpoints.

    ``values[i]`` holds on (breakpoints[i-1], breakpoints[i]); there is one
    more value than breakpoints.  Breakpoints must be strictly increasing and
    must lie inside the edge they are attached to (validated at graph build).
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise GraphSpecError("piecewise potential needs len(values) == len(breakpoints) + 1")
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.size and not np.all(np.diff(bp) > 0):
            raise GraphSpecError("piecewise breakpoints must be strictly increasing")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right")
        return np.asarray(self.values, dtype=float)[idx]

    def restrict(self, a: float, b: float) -> "PiecewiseConstantPotential":
        bps, vals = [], []
        cur = self(np.asarray([a + 0.0]))[0]
        vals.append(cur)
        for bp, v in zip(self.breakpoints, self.values[1:]):
            if a < bp < b:
                bps.append(bp - a)
                vals.append(v)
        return PiecewiseConstantPotential(tuple(bps), tuple(vals))

    def pieces(self, length: float):
        xs = (0.0, *self.breakpoints, float(length))
        return tuple((xs[i], xs[i + 1], float(self.values[i])) for i in range(len(self.values)))

    @property
    def min_value(self) -> float:
        return float(min(self.values))


@dataclass(frozen=True)
class SampledPotential:
    """Gridded samples with piecewise-linear interpolation in between."""

    x: tuple[float, ...]
    v: tuple[float, ...]

    def __post_init__(self):
        if len(self.x) != len(self.v) or len(self.x) < 2:
            raise GraphSpecError("sampled potential needs matching x/v grids with >= 2 nodes")
        xs = np.asarray(self.x, dtype=float)
        if not np.all(np.diff(xs) > 0):
            raise GraphSpecError("sampled potential grid must be strictly increasing")

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.v)

    def restrict(self, a: float, b: float) -> "SampledPotential":
        inner = [xi for xi in self.x if a < xi < b]
        xs = np.asarray([a, *inner, b], dtype=float)
        return SampledPotential(tuple(xs - a), tuple(self(xs)))

    @property
    def min_value(self) -> float:
        return float(min(self.v))


Potential = ZeroPotential | ConstantPotential | PiecewiseConstantPotential | SampledPotential

ZERO = ZeroPotential()


def is_closed_form(potential: Potential) -> bool:
    """True when the edge solutions are products of exact transfer matrices."""
    return not isinstance(potential, SampledPotential)


def potential_from_spec(obj) -> Potential:
    """Build a potential from its JSON-style description (None means zero)."""
    if obj is None:
        return ZERO
    if not isinstance(obj, dict) or "type" not in obj:
        raise GraphSpecError("potential must be an object with a 'type' field")
    kind = obj["type"]
    if kind == "zero":
        return ZERO
    if kind == "constant":
        return ConstantPotential(float(obj["value"]))
    if kind == "piecewise":
        return PiecewiseConstantPotential(
            tuple(float(b) for b in obj["breakpoints"]),
            tuple(float(v) for v in obj["values"]),
        )
    if kind == "sampled":
        return SampledPotential(tuple(float(t) for t in obj["x"]),
                                tuple(float(t) for t in obj["v"]))
    raise GraphSpecError(f"unknown potential type {kind!r}")
