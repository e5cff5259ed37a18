"""Deterministic solver for the mean-field limit of the particle system.

The rescaled empirical measure converges to a measure with density ``f`` whose
evolution on the torus is

    df/dtau = alpha * (f * k)  -  beta(tau) * f  +  kaf * (f * aff)

with ``*`` the periodic convolution, ``k`` the Gaussian dispersal density,
``aff`` the triangular affinity kernel and ``kaf = 1/side^d`` the uniform site
density.  The solver discretizes the density on an L x L periodic grid,
evaluates the convolutions spectrally (contract: agrees with the direct
stencil sum to 1e-12 at L <= 128), and steps in time with explicit Euler or
classical RK4.

A per-step mass bound (Gronwall): total mass can grow at most at rate
``alpha + gamma_aff - beta`` with ``gamma_aff`` the discrete affinity-kernel
integral; violations raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Geometry, Params, validate_params
from .errors import InstabilityError, ShapeMismatchError, UnderResolvedKernelError, ValidationError


@dataclass
class DensityGrid:
    """Nonnegative density sampled at the centers of an L x L periodic grid."""

    values: np.ndarray
    side: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ShapeMismatchError("density grid must be square (L, L)")

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def cell_volume(self) -> float:
        return (self.side / self.L) ** 2

    @classmethod
    def uniform(cls, L: int, mass: float = 1.0, side: float = 1.0) -> "DensityGrid":
        return cls(np.full((L, L), mass / side**2), side)

    def copy(self) -> "DensityGrid":
        return DensityGrid(self.values.copy(), self.side)

    def cell_centers(self) -> tuple:
        h = self.side / self.L
        c = (np.arange(self.L) + 0.5) * h
        return np.meshgrid(c, c, indexing="ij")


def total_mass(grid: DensityGrid) -> float:
    """Integral of the density over the torus."""
    return float(grid.values.sum() * grid.cell_volume)


def _min_image_lags(L: int, side: float) -> tuple:
    """Signed minimum-image displacements of the lag grid, per axis."""
    h = side / L
    lag = np.arange(L) * h
    lag = np.mod(lag + side / 2, side) - side / 2
    return np.meshgrid(lag, lag, indexing="ij")


def discretize_kernels(params: Params, L: int, side: float = 1.0) -> tuple:
    """Periodic stencils for the dispersal and affinity convolutions.

    The dispersal stencil is the wrapped Gaussian sampled at lag-grid points
    and renormalized so its discrete integral is exactly 1 (absorbing the
    sampling bias).  The affinity stencil is the triangular kernel sampled the
    same way without renormalization: its integral is a physical rate.

    Raises when neither kernel spans at least 3 cells; a dispersal width below
    the grid scale is allowed (the renormalized stencil degrades gracefully to
    a discrete delta).
    """
    if L * max(params.sigma, params.a_f) < 3 * side:
        raise UnderResolvedKernelError(
            f"grid L={L} cannot resolve kernels with sigma={params.sigma}, a_f={params.a_f}"
        )
    h = side / L
    dx, dy = _min_image_lags(L, side)

    sigma = params.sigma
    # wrap enough Gaussian images for heavy tails relative to the torus
    n_img = max(1, int(math.ceil(6 * sigma / side)))
    disp = np.zeros((L, L))
    for mx in range(-n_img, n_img + 1):
        for my in range(-n_img, n_img + 1):
            r2 = (dx + mx * side) ** 2 + (dy + my * side) ** 2
            disp += np.exp(-0.5 * r2 / sigma**2)
    disp /= disp.sum() * h * h

    r = np.sqrt(dx * dx + dy * dy)
    aff = params.A_f * np.clip(1.0 - r / params.a_f, 0.0, None)
    return disp, aff


def spectral_convolver(stencil: np.ndarray, side: float):
    """Closure computing the periodic convolution ``(g * stencil)`` spectrally."""
    L = stencil.shape[0]
    h2 = (side / L) ** 2
    khat = np.fft.rfft2(stencil) * h2

    def conv(values: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(np.fft.rfft2(values) * khat, s=(L, L))

    return conv


def direct_convolve(values: np.ndarray, stencil: np.ndarray, side: float) -> np.ndarray:
    """Reference periodic convolution by explicit stencil sums (tests only)."""
    L = stencil.shape[0]
    h2 = (side / L) ** 2
    out = np.zeros_like(values)
    for a, b in zip(*np.nonzero(stencil)):
        out += stencil[a, b] * np.roll(values, (a, b), axis=(0, 1))
    return out * h2


@dataclass(frozen=True)
class SolverConfig:
    """Grid resolution, step size, scheme, and horizon for one solve."""

    L: int = 128
    dt: float = 0.01
    scheme: str = "rk4"
    T: float = 10.0

    def validated(self) -> "SolverConfig":
        problems = []
        if self.L < 2:
            problems.append("L must be >= 2")
        if not (math.isfinite(self.dt) and self.dt > 0):
            problems.append("dt must be a finite positive real")
        if self.scheme not in ("euler", "rk4"):
            problems.append(f"unknown scheme: {self.scheme!r}")
        if not (math.isfinite(self.T) and self.T >= 0):
            problems.append("T must be a finite nonnegative real")
        if problems:
            raise ValidationError(problems)
        return self


class LimitSolver:
    """Density evolution under the limit dynamics on a fixed grid.

    ``beta_slope`` makes the withdrawal rate time-varying,
    ``beta(tau) = beta0 + beta_slope * tau``, evaluated at the stage times of
    the scheme.
    """

    def __init__(self, params: Params, config: SolverConfig,
                 geometry: Geometry = Geometry(), beta_slope: float = 0.0):
        validate_params(params, geometry)
        config = config.validated()
        if geometry.d != 2:
            raise ValidationError("the limit solver supports d == 2 only")
        self.params = params
        self.config = config
        self.side = geometry.side
        self.beta_slope = beta_slope
        self.disp, self.aff = discretize_kernels(params, config.L, self.side)
        h2 = (self.side / config.L) ** 2
        self.gamma_disp = float(self.disp.sum() * h2)  # 1 by construction
        self.gamma_aff = float(self.aff.sum() * h2 / self.side**2)
        self._conv_disp = spectral_convolver(self.disp, self.side)
        self._conv_aff = spectral_convolver(self.aff, self.side)
        self._check_stability()

    def beta_at(self, tau: float) -> float:
        return self.params.beta0 + self.beta_slope * tau

    def _check_stability(self) -> None:
        # explicit schemes need the per-step contraction bounded away from -1
        beta_max = self.beta_at(self.config.T) if self.beta_slope > 0 else self.params.beta0
        rate = self.params.alpha * self.gamma_disp + beta_max + self.gamma_aff
        if self.config.dt * rate > 0.5:
            raise ValidationError(
                f"stability guard violated: dt*(alpha+beta+gamma_aff) = "
                f"{self.config.dt * rate:.3g} > 0.5"
            )

    def rhs(self, values: np.ndarray, tau: float) -> np.ndarray:
        """Rate field: dispersal gain - withdrawal loss + affinity gain."""
        gain = self.params.alpha * self._conv_disp(values)
        loss = self.beta_at(tau) * values
        aff_gain = self._conv_aff(values) / self.side**2
        return gain - loss + aff_gain

    def step(self, grid: DensityGrid, dt: float, tau: float) -> DensityGrid:
        """One explicit step; clamps roundoff negatives, raises on real ones."""
        g = grid.values
        if self.config.scheme == "euler":
            new = g + dt * self.rhs(g, tau)
        else:
            k1 = self.rhs(g, tau)
            k2 = self.rhs(g + 0.5 * dt * k1, tau + 0.5 * dt)
            k3 = self.rhs(g + 0.5 * dt * k2, tau + 0.5 * dt)
            k4 = self.rhs(g + dt * k3, tau + dt)
            new = g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        mn = new.min()
        if mn < 0:
            if -mn < 1e-12 * max(new.max(), 1e-300):
                new = np.clip(new, 0.0, None)
            else:
                raise InstabilityError(
                    f"materially negative density ({mn:.3g}) at tau={tau + dt:.6g}"
                )
        out = DensityGrid(new, grid.side)
        self._check_mass_bound(grid, out, dt, tau)
        return out

    def _check_mass_bound(self, before: DensityGrid, after: DensityGrid,
                          dt: float, tau: float) -> None:
        beta_min = min(self.beta_at(tau), self.beta_at(tau + dt))
        growth = self.params.alpha * self.gamma_disp + self.gamma_aff - beta_min
        bound = total_mass(before) * math.exp(growth * dt) * (1 + 1e-9) + 1e-300
        if total_mass(after) > bound:
            raise InstabilityError(
                f"mass bound violated at tau={tau + dt:.6g}: "
                f"{total_mass(after):.12g} > {bound:.12g}"
            )

    def solve(self, g0: DensityGrid, output_times=None) -> tuple:
        """March to the horizon; returns requested grids and the mass series.

        Output times snap to the nearest step boundary.  The mass series
        covers every step, starting at tau = 0.
        """
        cfg = self.config
        if g0.L != cfg.L:
            raise ShapeMismatchError(f"initial grid L={g0.L} does not match config L={cfg.L}")
        n_steps = int(round(cfg.T / cfg.dt))
        if abs(n_steps * cfg.dt - cfg.T) > 1e-9 * max(cfg.T, 1.0):
            n_steps = int(math.ceil(cfg.T / cfg.dt - 1e-12))
        wanted = {}
        if output_times is not None:
            for t_req in output_times:
                idx = min(n_steps, max(0, int(round(t_req / cfg.dt))))
                wanted.setdefault(idx, float(t_req))
        outputs = []
        grid = g0.copy()
        masses = np.empty(n_steps + 1)
        times = np.empty(n_steps + 1)
        masses[0] = total_mass(grid)
        times[0] = 0.0
        if 0 in wanted:
            outputs.append((0.0, grid.copy()))
        for k in range(n_steps):
            tau = k * cfg.dt
            dt = min(cfg.dt, cfg.T - tau)
            grid = self.step(grid, dt, tau)
            masses[k + 1] = total_mass(grid)
            times[k + 1] = tau + dt
            if (k + 1) in wanted:
                outputs.append((times[k + 1], grid.copy()))
        return outputs, (times, masses)


def integrate_to_cells(grid: DensityGrid, L_obs: int) -> np.ndarray:
    """Mass of the density in each cell of a coarser L_obs x L_obs grid."""
    if grid.L % L_obs != 0:
        raise ShapeMismatchError(
            f"solver grid L={grid.L} is not a multiple of observation grid L_obs={L_obs}"
        )
    f = grid.L // L_obs
    v = grid.values.reshape(L_obs, f, L_obs, f).sum(axis=(1, 3))
    return v * grid.cell_volume


def grid_to_csv(grid: DensityGrid, path) -> None:
    np.savetxt(path, grid.values, delimiter=",")
