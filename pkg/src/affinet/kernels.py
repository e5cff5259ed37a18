"""The three model kernels and their domination envelopes.

* invitation offsets: isotropic Gaussian ``N(0, sigma^2 I_d)``, applied to the
  inviter's position and wrapped onto the torus,
* affinity site proposals: uniform on the torus,
* local affinity: triangular kernel ``A_f * (1 - r/a_f)^+`` of the
  minimum-image distance ``r``, zero at exactly coincident points.

Each sampler draws from an envelope density and the thinning acceptance is the
ratio of target to (envelope times gamma).  With the shipped kernels target
and envelope coincide, so the invitation acceptance is identically
``1/gamma1`` and the affinity acceptance is ``aff(x, y)/(A_f * gamma2)``.
Alternative kernels can subclass and override the densities; the acceptance
logic guards against mis-specified envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Geometry, Params, torus_wrap
from .errors import EnvelopeViolationError

_RATIO_TOL = 1e-12


@dataclass(frozen=True)
class InvitationKernel:
    """Gaussian dispersal of a newly invited particle around its inviter.

    ``sigma`` is assumed small against the torus side; the wrapped density
    then equals the unwrapped one to beyond double precision, so the envelope
    is the plain Gaussian and no theta-function evaluation is needed.
    """

    sigma: float
    geometry: Geometry = Geometry()
    gamma1: float = 1.0

    def sample_offset(self, rng: np.random.Generator) -> np.ndarray:
        """Draw an offset from the envelope density (one normal per axis)."""
        d = self.geometry.d
        z = np.empty(d)
        for axis in range(d):
            z[axis] = rng.standard_normal() * self.sigma
        return z

    def envelope_density(self, z) -> float:
        z = np.asarray(z, dtype=np.float64)
        d = self.geometry.d
        norm = (2.0 * math.pi * self.sigma**2) ** (d / 2.0)
        return float(np.exp(-0.5 * np.dot(z, z) / self.sigma**2) / norm)

    def target_density(self, x, z) -> float:
        """Dispersal density ``k(x, z)``; translation invariant here."""
        return self.envelope_density(z)

    def accept_prob(self, x, z) -> float:
        kt = self.target_density(x, z)
        et = self.envelope_density(z)
        if et == 0.0:
            if kt > 0.0:
                raise EnvelopeViolationError(
                    "invitation envelope density is 0 where the target is positive"
                )
            return 0.0
        if kt == et:  # shipped case: translation-invariant target equals envelope
            return 1.0 / self.gamma1
        ratio = kt / (self.gamma1 * et)
        if ratio > 1.0 + _RATIO_TOL:
            raise EnvelopeViolationError(
                f"invitation acceptance ratio {ratio} > 1; gamma1 is mis-specified"
            )
        return min(ratio, 1.0)


@dataclass(frozen=True)
class AffinitySiteKernel:
    """Uniform proposal of the site joined after an affinity recruitment."""

    geometry: Geometry = Geometry()
    gamma2: float = 1.0

    def sample_site(self, rng: np.random.Generator) -> np.ndarray:
        side = self.geometry.side
        d = self.geometry.d
        y = np.empty(d)
        for axis in range(d):
            y[axis] = rng.random() * side
        return y

    def envelope_density(self, y) -> float:
        return 1.0 / self.geometry.volume

    def target_density(self, y) -> float:
        return 1.0 / self.geometry.volume


@dataclass(frozen=True)
class LocalAffinity:
    """Triangular attraction exerted by a particle at ``x`` on a site ``y``.

    Exactly coincident coordinates have zero affinity; the value is positive
    only strictly inside the radius ``a_f``.
    """

    A_f: float
    a_f: float
    geometry: Geometry = Geometry()

    def value(self, x, y) -> float:
        # Comparison against 0.5*side (not side-delta) mirrors the compiled
        # event loop bit for bit.
        side = self.geometry.side
        s = 0.0
        equal = True
        for a, b in zip(x, y):
            delta = abs(float(a) - float(b))
            if delta > 0.5 * side:
                delta = side - delta
            if a != b:
                equal = False
            s += delta * delta
        if equal:
            return 0.0
        dist = math.sqrt(s)
        if dist >= self.a_f:
            return 0.0
        return self.A_f * (1.0 - dist / self.a_f)

    __call__ = value

    def value_many(self, xs: np.ndarray, y) -> np.ndarray:
        """Vectorized affinity of many particles against a single site."""
        xs = np.asarray(xs, dtype=np.float64)
        side = self.geometry.side
        delta = np.abs(xs - np.asarray(y, dtype=np.float64))
        delta = np.where(delta > 0.5 * side, side - delta, delta)
        dist = np.sqrt(np.sum(delta * delta, axis=-1))
        vals = self.A_f * np.clip(1.0 - dist / self.a_f, 0.0, None)
        vals[np.all(xs == np.asarray(y), axis=-1)] = 0.0
        return vals


@dataclass(frozen=True)
class KernelSet:
    """The model's kernel triple, bundled for the simulator and observables."""

    invitation: InvitationKernel
    site: AffinitySiteKernel
    affinity: LocalAffinity

    @classmethod
    def from_params(cls, params: Params, geometry: Geometry = Geometry()) -> "KernelSet":
        return cls(
            invitation=InvitationKernel(sigma=params.sigma, geometry=geometry, gamma1=params.gamma1),
            site=AffinitySiteKernel(geometry=geometry, gamma2=params.gamma2),
            affinity=LocalAffinity(A_f=params.A_f, a_f=params.a_f, geometry=geometry),
        )


def local_affinity(x, y, affinity: LocalAffinity) -> float:
    return affinity.value(x, y)


def sample_invitation_offset(rng: np.random.Generator, kernels: KernelSet) -> np.ndarray:
    return kernels.invitation.sample_offset(rng)


def invitation_accept_prob(x, z, kernels: KernelSet) -> float:
    return kernels.invitation.accept_prob(x, z)


def sample_affinity_site(rng: np.random.Generator, kernels: KernelSet) -> np.ndarray:
    return kernels.site.sample_site(rng)


def affinity_accept_prob(x_i, y, kernels: KernelSet) -> float:
    """Thinning acceptance for an affinity candidate against vertex ``x_i``."""
    aff = kernels.affinity
    if aff.A_f == 0.0:
        return 0.0
    kt = kernels.site.target_density(y)
    et = kernels.site.envelope_density(y)
    if et == 0.0:
        if kt > 0.0:
            raise EnvelopeViolationError(
                "affinity site envelope density is 0 where the target is positive"
            )
        return 0.0
    if kt == et:  # shipped case: uniform target equals envelope
        ratio = aff.value(x_i, y) / (aff.A_f * kernels.site.gamma2)
    else:
        ratio = aff.value(x_i, y) * kt / (aff.A_f * kernels.site.gamma2 * et)
    if ratio > 1.0 + _RATIO_TOL:
        raise EnvelopeViolationError(
            f"affinity acceptance ratio {ratio} > 1; gamma2 is mis-specified"
        )
    return min(ratio, 1.0)


def affinity_integral(params: Params, geometry: Geometry = Geometry()) -> float:
    """Per-particle rate of accepted affinity recruitments.

    The spatial integral of the triangular kernel against the uniform site
    density is the same around every particle by translation invariance:
    ``A_f * V_d(a_f) / ((d+1) * side^d)`` with ``V_d`` the unit-ball volume
    scaling, i.e. ``A_f * pi * a_f^2 / (3 * side^2)`` in two dimensions.
    """
    d = geometry.d
    ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * params.a_f**d
    return params.A_f * ball / ((d + 1) * geometry.volume)


def wrap_offset(x, z, geometry: Geometry = Geometry()) -> np.ndarray:
    """Position reached from ``x`` by offset ``z``, wrapped onto the torus."""
    return torus_wrap(np.asarray(x, dtype=np.float64) + np.asarray(z, dtype=np.float64), geometry)
