"""Modal forward solver for i d^alpha y + L y = f with Dirichlet conditions,
plus the discrete fractional calculus (L1 Caputo derivative, Riemann-
Liouville integral) used to cross-check it.

The source convolution uses piecewise-constant modal coefficients with
exact subinterval integrals through the integral kernel
tau^alpha E_{alpha,alpha+1}, so the weakly singular factor (t-s)^(alpha-1)
is never sampled.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import causal_conv
from .errors import GridMismatchError, MLDomainError
from .gamma import rgamma_real
from .mlf import (
    Z_MAX_DEFAULT,
    FractionalOrder,
    integral_kernel_grid,
    state_kernel_grid,
)
from .spectral import EigenSystem, Grid1D, Tridiag, _freeze

# A modal vector is a plain complex array of expansion coefficients.
ModalVector = np.ndarray


@dataclass(frozen=True)
class TimeGrid:
    """Uniform times t_i = i*dt, i = 1..n_t; t = 0 is excluded from
    solution storage (the solution is continuous only on (0, T])."""

    T: float
    n_t: int

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise GridMismatchError(f"terminal time must be positive, got {self.T}")
        if self.n_t < 2:
            raise GridMismatchError(f"need at least 2 time steps, got {self.n_t}")

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, self.n_t + 1)


@dataclass(frozen=True)
class SourceSpec:
    """Source term: none, separable rho(t) g(x), or general samples."""

    kind: str
    rho: np.ndarray = None
    g: np.ndarray = None
    f_general: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("none", "separable", "general"):
            raise GridMismatchError(f"unknown source kind {self.kind!r}")
        if self.kind == "separable":
            if self.rho is None or self.g is None:
                raise GridMismatchError("separable source requires rho and g")
            object.__setattr__(self, "rho", _freeze(np.asarray(self.rho, np.complex128)))
            object.__setattr__(self, "g", _freeze(np.asarray(self.g, np.complex128)))
        if self.kind == "general":
            if self.f_general is None:
                raise GridMismatchError("general source requires field samples")
            object.__setattr__(
                self, "f_general", _freeze(np.asarray(self.f_general, np.complex128))
            )

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def separable(cls, rho, g):
        return cls("separable", rho=rho, g=g)

    @classmethod
    def general(cls, values):
        return cls("general", f_general=values)

    @property
    def rho_nonzero(self) -> bool:
        return self.kind == "separable" and float(np.max(np.abs(self.rho))) > 0.0

    def sample(self, i: int, tg: TimeGrid, grid: Grid1D) -> np.ndarray:
        """Spatial samples of f at time index i (0-based into tg.times)."""
        if self.kind == "none":
            return np.zeros(grid.m, dtype=np.complex128)
        if self.kind == "separable":
            return self.rho[i] * self.g
        return self.f_general[i]


@dataclass(frozen=True)
class SpaceTimeField:
    """Complex samples y(t_i, x_j) on the tensor grid; y(0, .) is kept by
    the caller where the Caputo derivative needs it."""

    values: np.ndarray
    tg: TimeGrid
    grid: Grid1D

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.tg.n_t, self.grid.m):
            raise GridMismatchError(
                f"field shape {vals.shape} vs (n_t={self.tg.n_t}, m={self.grid.m})"
            )
        if not np.all(np.isfinite(vals)):
            raise GridMismatchError("field contains non-finite samples")
        object.__setattr__(self, "values", _freeze(vals))


def project(samples: np.ndarray, eig: EigenSystem) -> ModalVector:
    """Modal coefficients <samples, phi_n>_h (conjugate-linear in phi_n;
    the eigenfunctions are real, so no conjugation is visible)."""
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.shape[0] != eig.grid.m:
        raise GridMismatchError(
            f"sample length {samples.shape[0]} vs grid m={eig.grid.m}"
        )
    return eig.grid.h * (eig.phis @ samples)


def synthesize(coeffs: ModalVector, eig: EigenSystem) -> np.ndarray:
    """Spatial samples sum_n c_n phi_n; left inverse of ``project`` on the
    truncated span."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape[0] != eig.n:
        raise GridMismatchError(f"{coeffs.shape[0]} coefficients vs {eig.n} modes")
    return coeffs @ eig.phis


def projection_tail_energy(samples: np.ndarray, eig: EigenSystem) -> float:
    """Energy of the component outside span{phi_1..phi_N}: the declared
    truncation approximation of a solve."""
    c = project(samples, eig)
    total = eig.grid.norm(samples) ** 2
    return max(0.0, total - float(np.sum(np.abs(c) ** 2)))


def solve_forward(y0: np.ndarray, src: SourceSpec, order: FractionalOrder,
                  eig: EigenSystem, tg: TimeGrid, *,
                  z_max: float = Z_MAX_DEFAULT) -> SpaceTimeField:
    """Modal solution: per mode,
    c_n(t) = c_n(0) E_{a,1}(p lam_n t^a) + p * conv(f_n, dW_n)(t)
    where p is the phase factor and W_n(tau) = tau^a E_{a,a+1}(p lam_n tau^a)
    integrates the impulse kernel exactly over grid subintervals."""
    order.require_strict("the forward evolution")
    y0 = np.asarray(y0, dtype=np.complex128)
    c0 = project(y0, eig)
    times = tg.times
    coeffs = np.empty((eig.n, tg.n_t), dtype=np.complex128)
    for n in range(eig.n):
        coeffs[n] = c0[n] * state_kernel_grid(order, eig.lambdas[n], times, z_max=z_max)
    if src.kind != "none":
        fmodal = _modal_source(src, eig, tg)
        pf = order.phase_factor
        taus = tg.dt * np.arange(tg.n_t + 1)
        for n in range(eig.n):
            if not np.any(fmodal[n]):
                continue
            w = integral_kernel_grid(order, eig.lambdas[n], taus, z_max=z_max)
            dw = np.diff(w)
            coeffs[n] += pf * causal_conv(fmodal[n], dw)
    values = coeffs.T @ eig.phis
    return SpaceTimeField(values, tg, eig.grid)


def _modal_source(src: SourceSpec, eig: EigenSystem, tg: TimeGrid) -> np.ndarray:
    if src.kind == "separable":
        if src.rho.shape[0] != tg.n_t:
            raise GridMismatchError(
                f"rho sampled at {src.rho.shape[0]} times, grid has {tg.n_t}"
            )
        return np.outer(project(src.g, eig), src.rho)
    if src.f_general.shape != (tg.n_t, eig.grid.m):
        raise GridMismatchError(
            f"general source shape {src.f_general.shape} vs "
            f"({tg.n_t}, {eig.grid.m})"
        )
    return np.array([project(row, eig) for row in src.f_general]).T


def eval_homogeneous(y0: np.ndarray, order: FractionalOrder, eig: EigenSystem,
                     times: np.ndarray, *, z_max: float = Z_MAX_DEFAULT) -> np.ndarray:
    """Homogeneous solution at arbitrary positive times (long-horizon
    experiments run outside any uniform grid)."""
    order.require_strict("the forward evolution")
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0.0):
        raise MLDomainError("evaluation times must be positive")
    c0 = project(np.asarray(y0, dtype=np.complex128), eig)
    coeffs = np.empty((eig.n, times.size), dtype=np.complex128)
    for n in range(eig.n):
        coeffs[n] = c0[n] * state_kernel_grid(order, eig.lambdas[n], times, z_max=z_max)
    return coeffs.T @ eig.phis


def caputo_l1(series: np.ndarray, alpha: float, tg: TimeGrid) -> np.ndarray:
    """L1 discretization of the Caputo derivative on the grid times.

    ``series`` holds the t = 0 value in row 0 followed by the n_t grid rows;
    the result is sampled on the grid times.  Exact on piecewise-linear
    input.
    """
    if not (0.0 < alpha < 1.0):
        raise MLDomainError(f"Caputo order must lie in (0, 1), got {alpha}")
    series = np.asarray(series, dtype=np.complex128)
    if series.shape[0] != tg.n_t + 1:
        raise GridMismatchError(
            f"series must include the t=0 row: got {series.shape[0]} rows "
            f"for n_t={tg.n_t}"
        )
    k = np.arange(tg.n_t)
    b = (k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)
    dy = np.diff(series, axis=0)
    scale = tg.dt ** (-alpha) * rgamma_real(2.0 - alpha)
    return scale * causal_conv(dy, b)


def rl_integral(series: np.ndarray, beta: float, tg: TimeGrid) -> np.ndarray:
    """Riemann-Liouville integral J^beta by product integration, exact on
    piecewise-constant input (right-endpoint sampling on each cell)."""
    if beta <= 0.0:
        raise MLDomainError(f"integral order must be positive, got {beta}")
    series = np.asarray(series, dtype=np.complex128)
    if series.shape[0] != tg.n_t:
        raise GridMismatchError(
            f"series has {series.shape[0]} rows, grid has {tg.n_t}"
        )
    j = np.arange(tg.n_t)
    weights = (j + 1.0) ** beta - j**beta
    scale = tg.dt**beta * rgamma_real(beta + 1.0)
    return scale * causal_conv(series, weights)


def pde_residual(field: SpaceTimeField, y0: np.ndarray, src: SourceSpec,
                 order: FractionalOrder, A: Tridiag) -> float:
    """Max over grid times of || e^{-i phase} d^alpha y - A y - f ||_{L2,h};
    A is the matrix of -L, so the standard-phase residual is
    i d^alpha y - A y - f."""
    order.require_strict("the residual")
    tg, grid = field.tg, field.grid
    if A.n != grid.m:
        raise GridMismatchError(f"operator size {A.n} vs grid m={grid.m}")
    y0 = np.asarray(y0, dtype=np.complex128)
    stacked = np.vstack([y0[None, :], field.values])
    dcap = caputo_l1(stacked, order.alpha, tg)
    rot = np.conj(order.phase_factor)  # unit modulus, so conj is e^{-i phi}
    worst = 0.0
    ay = A.matvec(field.values.T).T
    for i in range(tg.n_t):
        r = rot * dcap[i] - ay[i] - src.sample(i, tg, grid)
        worst = max(worst, grid.norm(r))
    return worst


def duhamel_check(g: np.ndarray, rho: np.ndarray, order: FractionalOrder,
                  eig: EigenSystem, tg: TimeGrid) -> float:
    """Discrepancy of the time-fractional Duhamel identity
    J^{1-alpha} y(g) = p * (rho * v(g)) (time convolution, p the source
    phase factor), with y(g) the source-driven solution and v(g) the
    homogeneous one.  Both sides are discretized independently; the value
    should vanish under time refinement.

    The phase factor belongs to the identity: per mode both sides reduce
    to multiples of t E_{a,2}(p lam t^a), the driven side carrying the
    extra p from the source coupling.
    """
    order.require_strict("the Duhamel identity")
    rho = np.asarray(rho, dtype=np.complex128)
    v = solve_forward(np.asarray(g, np.complex128), SourceSpec.none(), order, eig, tg)
    y = solve_forward(np.zeros(eig.grid.m), SourceSpec.separable(rho, g), order, eig, tg)
    lhs = rl_integral(y.values, 1.0 - order.alpha, tg)
    rhs = order.phase_factor * tg.dt * causal_conv(v.values, rho)
    diffs = lhs - rhs
    return max(eig.grid.norm(diffs[i]) for i in range(tg.n_t))


def decay_slope(y0: np.ndarray, order: FractionalOrder, eig: EigenSystem,
                indices: np.ndarray, t_lo: float = 1e2, t_hi: float = 1e4,
                n_pts: int = 25) -> float:
    """Log-log slope of t -> ||y(t,.)||_{L2(E),h} for the homogeneous
    solution over [t_lo, t_hi]; asymptotically -alpha, so decay is algebraic
    rather than faster than every polynomial."""
    times = np.geomspace(t_lo, t_hi, n_pts)
    lam_max = float(eig.lambdas[-1])
    cap = max(Z_MAX_DEFAULT, 2.0 * lam_max * t_hi**order.alpha)
    vals = eval_homogeneous(y0, order, eig, times, z_max=cap)
    norms = np.array(
        [math.sqrt(eig.grid.h) * np.linalg.norm(vals[i, indices]) for i in range(n_pts)]
    )
    slope = np.polyfit(np.log(times), np.log(norms), 1)[0]
    return float(slope)
