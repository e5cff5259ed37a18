"""Flat-torus geometry, positions, and validated model parameters.

All positions live on the torus ``[0, side)^d`` with the minimum-image
(Euclidean) metric.  Every rate and kernel in the model is governed by a
single immutable :class:`Params` vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import InvalidPositionError, ValidationError


@dataclass(frozen=True)
class Geometry:
    """Torus dimension and side length; fixed for the lifetime of a run."""

    d: int = 2
    side: float = 1.0

    def __post_init__(self):
        problems = []
        if not isinstance(self.d, int) or self.d < 1:
            problems.append("d must be an integer >= 1")
        if not (math.isfinite(self.side) and self.side > 0):
            problems.append("side must be a finite positive real")
        if problems:
            raise ValidationError(problems)

    @property
    def volume(self) -> float:
        return self.side**self.d


def torus_wrap(p, geometry: Geometry = Geometry()) -> np.ndarray:
    """Reduce raw coordinates modulo ``side`` into ``[0, side)``.

    Accepts a single coordinate vector or an array of them (last axis is the
    coordinate axis).  Idempotent on already-wrapped input.
    """
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidPositionError("position coordinates must be finite")
    side = geometry.side
    out = np.mod(arr, side)
    # np.mod can round up to exactly `side` for tiny negative inputs.
    out[out >= side] -= side
    return out


def torus_distance(p, q, geometry: Geometry = Geometry()):
    """Minimum-image Euclidean distance between wrapped positions.

    Broadcasts over leading axes, so ``torus_distance(points, y)`` gives the
    distance from every row of ``points`` to ``y``.
    """
    side = geometry.side
    delta = np.abs(np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64))
    delta = np.minimum(delta, side - delta)
    return np.sqrt(np.sum(delta * delta, axis=-1))


@dataclass(frozen=True)
class Params:
    """Rates and kernel parameters of the model.

    alpha           invitation rate per particle
    beta0           withdrawal rate per particle at the start of a run
    A_f             affinity amplitude (peak of the triangular kernel)
    a_f             affinity radius (support of the triangular kernel)
    sigma           std. dev. of the Gaussian invitation offset
    beta_increment  additive increase of the withdrawal rate after every
                    candidate event (0 keeps beta constant)
    gamma1, gamma2  domination-envelope constants for the two rejection
                    samplers; 1 with the shipped kernels
    """

    alpha: float
    beta0: float
    A_f: float
    a_f: float
    sigma: float
    beta_increment: float = 0.0
    gamma1: float = 1.0
    gamma2: float = 1.0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError([f"unknown parameter field: {name}" for name in sorted(unknown)])
        return cls(**d)


def validate_params(params: Params, geometry: Geometry = Geometry()) -> Params:
    """Check every invariant of a parameter vector; raise naming all violations.

    The rates ``alpha`` and ``A_f`` may be zero (degenerate pure-death or
    no-affinity regimes used by the diagnostics); everything else must be
    strictly positive, except ``beta_increment`` which only needs to be
    nonnegative.
    """
    problems = []
    for name in ("alpha", "beta0", "A_f", "a_f", "sigma", "beta_increment", "gamma1", "gamma2"):
        v = getattr(params, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v)):
            problems.append(f"{name} must be a finite real")
    if problems:
        raise ValidationError(problems)

    if params.alpha < 0:
        problems.append("alpha must be >= 0")
    if params.beta0 <= 0:
        problems.append("beta0 must be > 0")
    if params.A_f < 0:
        problems.append("A_f must be >= 0")
    if params.a_f <= 0:
        problems.append("a_f must be > 0")
    if params.a_f >= geometry.side / 2:
        problems.append("a_f must be < side/2")
    if params.sigma <= 0:
        problems.append("sigma must be > 0")
    if params.beta_increment < 0:
        problems.append("beta_increment must be >= 0")
    if params.gamma1 < 1:
        problems.append("gamma1 must be >= 1")
    if params.gamma2 < 1:
        problems.append("gamma2 must be >= 1")
    if problems:
        raise ValidationError(problems)
    return params
