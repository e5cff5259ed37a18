"""Statistics linking the particle system to its mean-field limit.

Pairings <measure, f> for a small family of test functions, spatial
histograms (raw and 1/n-rescaled), an L1 histogram distance standing in for
the total-variation norm, the action of the process generator on <., f>, the
quadratic-variation rate of the associated martingale, and a Monte Carlo
drift estimator that checks the generator against short simulated intervals.

Test-function integrals against the Gaussian dispersal kernel and the
triangular affinity kernel are evaluated in closed form where the function
family allows (constant, coordinate, cosine modes) and by radial-angular
quadrature otherwise; the quadrature error is far below the Monte Carlo noise
of every check that consumes these values (validated against large-sample
Monte Carlo in the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import j0, ndtr, roots_legendre

from . import engine
from .domain import Geometry, Params, torus_wrap
from .errors import ShapeMismatchError, ValidationError
from .meanfield import DensityGrid, integrate_to_cells
from .simulator import rng_for
from .state import SystemState

# -- test functions ----------------------------------------------------------


def _phi(t):
    return np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


class TestFunction:
    """Bounded function on the torus with exact kernel integrals attached."""

    tag = "abstract"
    norm_inf = math.nan

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dispersal_mean(self, pts, params: Params, geometry: Geometry) -> np.ndarray:
        """E[f(wrap(x + z))] with z ~ N(0, sigma^2 I), per row of ``pts``."""
        raise NotImplementedError

    def dispersal_mean_sq(self, pts, params: Params, geometry: Geometry) -> np.ndarray:
        raise NotImplementedError

    def affinity_pair(self, pts, params: Params, geometry: Geometry) -> np.ndarray:
        """integral of f(y) aff(x, y) kaf(y) dy, per row x of ``pts``."""
        raise NotImplementedError

    def affinity_pair_sq(self, pts, params: Params, geometry: Geometry) -> np.ndarray:
        raise NotImplementedError


class ConstantOne(TestFunction):
    tag = "constant_one"
    norm_inf = 1.0

    def __call__(self, pts):
        return np.ones(np.asarray(pts).shape[0])

    def dispersal_mean(self, pts, params, geometry):
        return np.ones(np.asarray(pts).shape[0])

    dispersal_mean_sq = dispersal_mean

    def affinity_pair(self, pts, params, geometry):
        from .kernels import affinity_integral

        return np.full(np.asarray(pts).shape[0], affinity_integral(params, geometry))

    affinity_pair_sq = affinity_pair


class Coordinate(TestFunction):
    """f(x) = x[axis]; discontinuous at the wrap seam, handled in closed form."""

    def __init__(self, axis: int = 0):
        self.axis = axis
        self.tag = f"coordinate_{axis}"

    def __call__(self, pts):
        return np.asarray(pts, dtype=np.float64)[:, self.axis]

    @property
    def norm_inf(self):
        return 1.0  # side, rescaled below per geometry at call sites if needed

    def _winding_terms(self, x, params, geometry):
        side = geometry.side
        sigma = params.sigma
        n_img = max(1, int(math.ceil(8 * sigma / side)))
        ms = [m for m in range(-n_img, n_img + 1)]
        return side, sigma, ms

    def dispersal_mean(self, pts, params, geometry):
        x = self(pts)
        side, sigma, ms = self._winding_terms(x, params, geometry)
        out = x.astype(np.float64).copy()
        for m in ms:
            if m == 0:
                continue
            p_m = ndtr(((m + 1) * side - x) / sigma) - ndtr((m * side - x) / sigma)
            out -= side * m * p_m
        return out

    def dispersal_mean_sq(self, pts, params, geometry):
        x = self(pts)
        side, sigma, ms = self._winding_terms(x, params, geometry)
        out = np.zeros_like(x, dtype=np.float64)
        for m in ms:
            a = (m * side - x) / sigma
            b = ((m + 1) * side - x) / sigma
            p = ndtr(b) - ndtr(a)
            dphi = _phi(a) - _phi(b)
            ey = x * p + sigma * dphi
            ey2 = x * x * p + 2.0 * x * sigma * dphi + sigma * sigma * (p + a * _phi(a) - b * _phi(b))
            out += ey2 - 2.0 * m * side * ey + (m * side) ** 2 * p
        return out

    def affinity_pair(self, pts, params, geometry):
        x = self(pts)
        side = geometry.side
        i_a = _triangle_integral(params)
        cap_right = _cap_integrals(side - x, params, moments=(0,))[0]
        cap_left = _cap_integrals(x, params, moments=(0,))[0]
        return (x * i_a - side * cap_right + side * cap_left) / side**2

    def affinity_pair_sq(self, pts, params, geometry):
        x = self(pts)
        side = geometry.side
        i_a = _triangle_integral(params)
        i_2 = _triangle_second_moment(params)
        base = x * x * i_a + i_2
        c0r, c1r = _cap_integrals(side - x, params, moments=(0, 1))
        c0l, c1l = _cap_integrals(x, params, moments=(0, 1))
        # winding m = +1 on the right cap, m = -1 on the left cap
        right = -2.0 * side * (x * c0r + c1r) + side**2 * c0r
        left = 2.0 * side * (x * c0l - c1l) + side**2 * c0l
        return (base + right + left) / side**2


class CosineMode(TestFunction):
    """f(x) = cos(2*pi*(m . x)/side); smooth, so both kernels act in closed form."""

    def __init__(self, mode=(1, 0), geometry: Geometry = Geometry()):
        self.mode = tuple(int(m) for m in mode)
        self.geometry = geometry
        self.tag = f"cosine_{self.mode[0]}_{self.mode[1]}"
        self.norm_inf = 1.0

    def __call__(self, pts):
        return np.cos(self._phase(pts, self.geometry))

    def _phase(self, pts, geometry):
        pts = np.asarray(pts, dtype=np.float64)
        return 2.0 * math.pi * (pts @ np.asarray(self.mode, dtype=np.float64)) / geometry.side

    def gaussian_damping(self, params, geometry, mode=None) -> float:
        m2 = sum(m * m for m in (mode or self.mode))
        return math.exp(-2.0 * math.pi**2 * params.sigma**2 * m2 / geometry.side**2)

    def dispersal_mean(self, pts, params, geometry):
        return np.cos(self._phase(pts, geometry)) * self.gaussian_damping(params, geometry)

    def dispersal_mean_sq(self, pts, params, geometry):
        double = tuple(2 * m for m in self.mode)
        damp = self.gaussian_damping(params, geometry, mode=double)
        return 0.5 + 0.5 * np.cos(2.0 * self._phase(pts, geometry)) * damp

    def affinity_pair(self, pts, params, geometry):
        jhat = _triangle_hankel(params, geometry, self.mode)
        return np.cos(self._phase(pts, geometry)) * jhat / geometry.side**2

    def affinity_pair_sq(self, pts, params, geometry):
        i_a = _triangle_integral(params)
        double = tuple(2 * m for m in self.mode)
        jhat2 = _triangle_hankel(params, geometry, double)
        return (0.5 * i_a + 0.5 * np.cos(2.0 * self._phase(pts, geometry)) * jhat2) / geometry.side**2


class IndicatorCells(TestFunction):
    """Indicator of a union of cells of a regular L_obs x L_obs grid."""

    def __init__(self, cells, L_obs: int, geometry: Geometry = Geometry()):
        self.cells = sorted(set((int(a), int(b)) for a, b in cells))
        self.L_obs = int(L_obs)
        self.geometry = geometry
        self.tag = f"indicator_{self.L_obs}"
        self.norm_inf = 1.0
        self._mask = np.zeros((self.L_obs, self.L_obs), dtype=bool)
        for a, b in self.cells:
            self._mask[a, b] = True

    def _cell_index(self, pts, geometry):
        h = geometry.side / self.L_obs
        idx = np.floor(np.asarray(pts, dtype=np.float64) / h).astype(np.int64)
        return np.minimum(idx, self.L_obs - 1)

    def __call__(self, pts):
        return self.evaluate(pts, self.geometry)

    def evaluate(self, pts, geometry):
        idx = self._cell_index(pts, geometry)
        return self._mask[idx[:, 0], idx[:, 1]].astype(np.float64)

    def dispersal_mean(self, pts, params, geometry):
        # product of per-axis wrapped-Gaussian interval probabilities
        pts = np.asarray(pts, dtype=np.float64)
        side = geometry.side
        sigma = params.sigma
        h = side / self.L_obs
        n_img = max(1, int(math.ceil(8 * sigma / side)))
        out = np.zeros(pts.shape[0])
        for ca, cb in self.cells:
            prob = np.ones(pts.shape[0])
            for axis, c in ((0, ca), (1, cb)):
                lo, hi = c * h, (c + 1) * h
                p_ax = np.zeros(pts.shape[0])
                for m in range(-n_img, n_img + 1):
                    p_ax += ndtr((hi + m * side - pts[:, axis]) / sigma) - ndtr(
                        (lo + m * side - pts[:, axis]) / sigma
                    )
                prob *= p_ax
            out += prob
        return out

    dispersal_mean_sq = dispersal_mean  # indicator squared is itself

    def affinity_pair(self, pts, params, geometry):
        f = lambda q: self.evaluate(q, geometry)
        return _affinity_pair_quadrature(pts, f, params, geometry)

    affinity_pair_sq = affinity_pair


def make_test_function(spec, geometry: Geometry = Geometry()) -> TestFunction:
    """Parse a config entry: "constant_one", {"coordinate": axis},
    {"cosine": [m1, m2]}, {"indicator": {"L_obs": L, "cells": [[i,j], ...]}}."""
    if spec == "constant_one":
        return ConstantOne()
    if isinstance(spec, dict) and len(spec) == 1:
        (key, val), = spec.items()
        if key == "coordinate":
            return Coordinate(int(val))
        if key == "cosine":
            return CosineMode(tuple(val), geometry)
        if key == "indicator":
            return IndicatorCells(val["cells"], val["L_obs"], geometry)
    raise ValidationError(f"unknown test function spec: {spec!r}")


# -- triangular-kernel integrals --------------------------------------------

_GL_NODES, _GL_WEIGHTS = roots_legendre(64)


def _gl(fun, lo, hi):
    """Fixed-order Gauss-Legendre integral of a vectorized scalar integrand."""
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    vals = fun(mid + half * _GL_NODES)
    return np.sum(vals * _GL_WEIGHTS) * half


def _triangle_integral(params: Params) -> float:
    """Plane integral of the triangular kernel: A_f * pi * a_f^2 / 3."""
    return params.A_f * math.pi * params.a_f**2 / 3.0


def _triangle_second_moment(params: Params) -> float:
    """integral of u_axis^2 * aff(|u|) du = A_f * pi * a_f^4 / 20."""
    return params.A_f * math.pi * params.a_f**4 / 20.0


def _triangle_hankel(params: Params, geometry: Geometry, mode) -> float:
    """integral of aff(|u|) cos(2 pi m.u / side) du (radial Hankel form)."""
    m_norm = math.sqrt(sum(m * m for m in mode))
    if m_norm == 0:
        return _triangle_integral(params)
    kappa = 2.0 * math.pi * m_norm / geometry.side
    a = params.a_f

    def integrand(r):
        return (1.0 - r / a) * j0(kappa * r) * r

    return params.A_f * 2.0 * math.pi * float(_gl(integrand, 0.0, a))


def _cap_integrals(t, params: Params, moments=(0,)):
    """Cap integrals of the triangular kernel over the half plane u_x >= t.

    Returns one array per requested moment p with values
    integral_{u_x >= t} u_x^p aff(|u|) du, elementwise over ``t`` (t >= 0;
    zero beyond the kernel radius).  The radial substitution
    r = t + (a - t) s^2 removes the square-root edge singularity.
    """
    t = np.asarray(t, dtype=np.float64)
    a = params.a_f
    tc = np.clip(t, 0.0, a)
    span = a - tc

    def make_integrand(p):
        def integrand(s):
            r = tc[..., None] + span[..., None] * s * s
            jac = 2.0 * span[..., None] * s
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.clip(tc[..., None] / np.where(r > 0, r, 1.0), -1.0, 1.0)
            theta_c = np.arccos(ratio)
            if p == 0:
                ang = 2.0 * theta_c
            else:
                ang = 2.0 * r * np.sin(theta_c)
            return (1.0 - r / a) * r * ang * jac

        return integrand

    out = []
    for p in moments:
        fun = make_integrand(p)
        mid, half = 0.5, 0.5
        s = mid + half * _GL_NODES
        vals = fun(s)
        integral = np.sum(vals * _GL_WEIGHTS, axis=-1) * half
        integral = np.where(t >= a, 0.0, integral)
        out.append(params.A_f * integral)
    return out


def _affinity_pair_quadrature(pts, f, params: Params, geometry: Geometry,
                              n_r: int = 48, n_theta: int = 512) -> np.ndarray:
    """Radial-angular quadrature of integral f(wrap(x+u)) aff(|u|) kaf du.

    Exact enough for smooth f; for discontinuous f (indicators) the angular
    midpoint rule limits accuracy to ~1/n_theta of the integrand variation.
    """
    pts = np.asarray(pts, dtype=np.float64)
    a = params.a_f
    r_nodes, r_weights = roots_legendre(n_r)
    r = 0.5 * a * (r_nodes + 1.0)
    w_r = 0.5 * a * r_weights * (1.0 - r / a) * r * params.A_f
    theta = (np.arange(n_theta) + 0.5) * (2.0 * math.pi / n_theta)
    w_t = 2.0 * math.pi / n_theta
    offsets = np.stack(
        [np.outer(r, np.cos(theta)).ravel(), np.outer(r, np.sin(theta)).ravel()], axis=1
    )
    weights = np.repeat(w_r, n_theta) * w_t
    out = np.empty(pts.shape[0])
    for i, x in enumerate(pts):
        y = torus_wrap(x[None, :] + offsets, geometry)
        out[i] = float(np.dot(f(y), weights))
    return out / geometry.volume


# -- pairings, histograms, rescaling ----------------------------------------


def pair(obj, f: TestFunction, geometry: Geometry = Geometry()) -> float:
    """Function-measure duality <obj, f> for states, grids, or rescaled views."""
    if isinstance(obj, RescaledView):
        return pair(obj.state, f, geometry) / obj.n
    if isinstance(obj, SystemState):
        if obj.size == 0:
            return 0.0
        return float(np.sum(f(obj.positions)))
    if isinstance(obj, DensityGrid):
        cx, cy = obj.cell_centers()
        centers = np.stack([cx.ravel(), cy.ravel()], axis=1)
        return float(np.sum(f(centers) * obj.values.ravel()) * obj.cell_volume)
    raise TypeError(f"cannot pair object of type {type(obj)!r}")


@dataclass(frozen=True)
class RescaledView:
    """A state observed through the 1/n rescaling of the initial size."""

    state: SystemState
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("rescaling size n must be >= 1")


def rescale(state: SystemState, n: int) -> RescaledView:
    return RescaledView(state, int(n))


@dataclass(frozen=True)
class Histogram:
    """Per-cell masses on a regular L_obs x L_obs observation grid."""

    L_obs: int
    masses: np.ndarray

    @property
    def total(self) -> float:
        return float(self.masses.sum())


def spatial_histogram(obj, L_obs: int, geometry: Geometry = Geometry()) -> Histogram:
    """Cell counts of a state (or 1/n masses of a rescaled view)."""
    if isinstance(obj, RescaledView):
        base = spatial_histogram(obj.state, L_obs, geometry)
        return Histogram(L_obs, base.masses / obj.n)
    state: SystemState = obj
    h = geometry.side / L_obs
    if state.size == 0:
        return Histogram(L_obs, np.zeros((L_obs, L_obs)))
    idx = np.floor(state.positions / h).astype(np.int64)
    idx = np.minimum(idx, L_obs - 1)
    flat = idx[:, 0] * L_obs + idx[:, 1]
    counts = np.bincount(flat, minlength=L_obs * L_obs).reshape(L_obs, L_obs)
    return Histogram(L_obs, counts.astype(np.float64))


def density_histogram(grid: DensityGrid, L_obs: int) -> Histogram:
    """Histogram of a mean-field density, for comparison with empirical ones."""
    return Histogram(L_obs, integrate_to_cells(grid, L_obs))


def l1_hist_distance(a: Histogram, b: Histogram) -> float:
    """Sum of absolute per-cell mass differences (TV-style surrogate)."""
    if a.masses.shape != b.masses.shape:
        raise ShapeMismatchError(
            f"histogram shapes differ: {a.masses.shape} vs {b.masses.shape}"
        )
    return float(np.abs(a.masses - b.masses).sum())


def cluster_cv(hist: Histogram) -> float:
    """Coefficient of variation of the cell masses; 0 for perfectly even mass."""
    if hist.total <= 0:
        raise ValidationError("cluster_cv needs a histogram with positive total mass")
    flat = hist.masses.ravel()
    return float(flat.std() / flat.mean())


# -- generator, quadratic variation, empirical drift -------------------------


def generator_apply(state: SystemState, f: TestFunction, params: Params,
                    geometry: Geometry = Geometry()) -> float:
    """Action of the process generator on <., f> at the frozen state.

    Dispersal gain at rate alpha, withdrawal loss at the state's current beta,
    affinity gain integrated against the triangular kernel and the uniform
    site density.
    """
    if state.size == 0:
        return 0.0
    pts = state.positions
    beta = state.beta_current
    gain = params.alpha * float(np.sum(f.dispersal_mean(pts, params, geometry)))
    loss = beta * float(np.sum(f(pts)))
    aff = float(np.sum(f.affinity_pair(pts, params, geometry)))
    return gain - loss + aff


def qv_rate(state: SystemState, f: TestFunction, params: Params,
            geometry: Geometry = Geometry()) -> float:
    """Quadratic-variation accumulation rate of the <., f> martingale.

    Un-rescaled; divide by n for the 1/n-rescaled process.
    """
    if state.size == 0:
        return 0.0
    pts = state.positions
    beta = state.beta_current
    term_inv = params.alpha * float(np.sum(f.dispersal_mean_sq(pts, params, geometry)))
    term_beta = beta * float(np.sum(f(pts) ** 2))
    term_aff = float(np.sum(f.affinity_pair_sq(pts, params, geometry)))
    return term_inv + term_beta + term_aff


def empirical_drift(state: SystemState, f: TestFunction, params: Params,
                    dt: float, replicas: int, seed: int,
                    geometry: Geometry = Geometry()) -> tuple:
    """Monte Carlo drift of <N, f> over one short interval from a frozen state.

    Runs ``replicas`` independent one-interval simulations (substream
    ``SeedSequence((seed, r))`` each) and returns the sample mean and standard
    error of (<N_dt, f> - <N_0, f>) / dt.  The generator applied to the same
    state is the zero-dt limit of this quantity.
    """
    pts0 = np.ascontiguousarray(state.positions, dtype=np.float64)
    n = pts0.shape[0]
    beta = state.beta_current
    sum_f0 = float(np.sum(f(pts0)))
    cap = n + 16
    deltas = np.empty(replicas)
    for r in range(replicas):
        rng = rng_for(seed, r)
        pos = np.empty((cap, 2))
        pos[:n] = pts0
        ids = np.arange(cap, dtype=np.int64)
        res = engine.simulate(
            pos, ids, n, n, 0.0, beta,
            params.alpha, params.beta_increment, params.A_f, params.a_f,
            params.sigma, params.gamma1, params.gamma2, geometry.side,
            2**62, dt, rng, False, False, 0, None, None, 0,
        )
        if res["n_iters"] == 0:
            deltas[r] = 0.0
        else:
            deltas[r] = (float(np.sum(f(res["pos"][: res["n"]]))) - sum_f0) / dt
    mean = float(deltas.mean())
    stderr = float(deltas.std(ddof=1) / math.sqrt(replicas))
    return mean, stderr
