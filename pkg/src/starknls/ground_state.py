"""Ground-state solitary profiles of the focusing mass-critical equation.

The profile solves  lap(Q) - Q + Q^(1+4/n) = 0  with Q positive, radial and
decaying. Its L2 norm is the global-existence threshold; in one dimension the
profile has the closed form  3^(1/4) sech^(1/2)(2 x).

The solver is a Petviashvili (spectral renormalization) fixed point

    Q_{m+1} = S_m^gamma * (1 - lap)^(-1) (Q_m^p),
    S_m     = <Q_m, (1 - lap) Q_m> / <Q_m, Q_m^p>,
    gamma   = p / (p - 1),

which has S_m -> 1 at the solution; the stabilizing power gamma removes the
scaling degeneracy of the bare map.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateSeedError, IterationError, ResolutionError
from .spectral import Field, GridSpec, l2_norm_sq

DEFAULT_TOL = {1: 1e-10, 2: 1e-8, 3: 1e-8}

# dx above this cannot resolve the O(1)-width profile
MAX_RESOLVED_DX = 0.2

DEFAULT_GRIDS = {
    1: (1024, 20.0),
    2: (256, 15.0),
    3: (128, 10.0),
}


def ground_state_1d_exact(x) -> np.ndarray:
    """Closed-form 1D profile 3^(1/4) sech^(1/2)(2 x)."""
    x = np.asarray(x, dtype=float)
    return 3.0**0.25 / np.cosh(2.0 * x) ** 0.5


@dataclass(frozen=True)
class GroundState:
    """Converged profile with its basic functionals.

    Attributes:
        profile: real positive profile stored as a complex Field, peak at the
            box center.
        mass_sq: squared L2 norm.
        grad_sq: squared L2 norm of the gradient.
        residual: sup norm of lap(Q) - Q + Q^p on the grid.
        iterations: fixed-point iterations used.
    """

    profile: Field
    mass_sq: float
    grad_sq: float
    residual: float
    iterations: int

    @property
    def n(self) -> int:
        return self.profile.grid.n

    @property
    def threshold(self) -> float:
        """L2 norm of the profile (the global-existence threshold)."""
        return float(np.sqrt(self.mass_sq))


def _recenter_peak(q: np.ndarray) -> np.ndarray:
    """Roll the array so the maximum sits at index N/2 per axis."""
    peak = np.unravel_index(np.argmax(q), q.shape)
    shifts = [s // 2 - p for s, p in zip(q.shape, peak)]
    if any(shifts):
        q = np.roll(q, shifts, axis=tuple(range(q.ndim)))
    return q


def petviashvili(
    grid: GridSpec,
    n: int | None = None,
    tol: float | None = None,
    max_iter: int = 500,
    seed_width: float = 1.0,
) -> GroundState:
    """Compute the ground state on a grid by spectral renormalization.

    Args:
        grid: periodic grid; must satisfy dx < 0.2 on every axis.
        n: dimension (defaults to grid.n; must match).
        tol: stop when the sup-norm change between iterates falls below tol
            and the equation residual is below 10 * tol.
        max_iter: iteration budget.
        seed_width: width of the centered Gaussian seed exp(-|x|^2 / (2 w^2)).

    Raises:
        ResolutionError: tol <= 0 or the grid is too coarse.
        DegenerateSeedError: the iteration collapsed to the zero field.
        IterationError: no convergence within max_iter (carries the last
            residual).
    """
    if n is None:
        n = grid.n
    if n != grid.n:
        raise ResolutionError(f"grid dimension {grid.n} does not match n={n}")
    if tol is None:
        tol = DEFAULT_TOL[n]
    if tol <= 0:
        raise ResolutionError(f"tolerance must be positive, got {tol}")
    if max(grid.dx) >= MAX_RESOLVED_DX:
        raise ResolutionError(
            f"dx={max(grid.dx):.3f} too coarse for the unit-width profile "
            f"(need dx < {MAX_RESOLVED_DX})"
        )

    p = 1.0 + 4.0 / n
    gamma = p / (p - 1.0)
    ksq = grid.k_sq
    inv_helmholtz = 1.0 / (1.0 + ksq)
    vol = grid.cell_volume

    # the spectral residual cannot fall below the round-off floor of the
    # Laplacian evaluation, eps * k_max^2; accept the larger target
    resid_target = max(10.0 * tol, 4.0 * np.finfo(float).eps * (1.0 + ksq.max()))

    q = np.exp(-grid.radius_sq / (2.0 * seed_width**2))
    residual = np.inf
    for m in range(1, max_iter + 1):
        qh = np.fft.fftn(q, norm="ortho")
        num = np.sum((1.0 + ksq) * np.abs(qh) ** 2)
        qp = q**p
        den = np.sum(q * qp)
        if not den > 0:
            raise DegenerateSeedError("iteration collapsed to the zero field")
        stab = num / den
        q_new = np.fft.ifftn(
            stab**gamma * np.fft.fftn(qp, norm="ortho") * inv_helmholtz,
            norm="ortho",
        ).real
        q_new = _recenter_peak(q_new)
        change = float(np.max(np.abs(q_new - q)))
        q = q_new
        qh = np.fft.fftn(q, norm="ortho")
        lap_q = np.fft.ifftn(-ksq * qh, norm="ortho").real
        residual = float(np.max(np.abs(lap_q - q + q**p)))
        if change < tol and residual < resid_target:
            break
    else:
        raise IterationError(
            f"no convergence in {max_iter} iterations (residual {residual:.3e})",
            last_residual=residual,
        )

    # tail samples below the round-off floor eps * max(Q) carry no sign
    # information; genuine sign structure still fails here
    if q.min() <= -16.0 * np.finfo(float).eps * q.max():
        raise IterationError(
            "converged profile is not strictly positive", last_residual=residual
        )
    q = np.maximum(q, np.finfo(float).tiny)
    field = Field(grid, q.astype(np.complex128))
    mass_sq = l2_norm_sq(field)
    grad_sq = float(np.sum(ksq * np.abs(qh) ** 2) * vol)
    return GroundState(
        profile=field,
        mass_sq=mass_sq,
        grad_sq=grad_sq,
        residual=residual,
        iterations=m,
    )


def ground_state_energy(gs: GroundState) -> float:
    """Unperturbed energy  |grad Q|^2 - 2/(p+1) * int Q^(p+1);  zero for the
    mass-critical profile."""
    n = gs.n
    p = 1.0 + 4.0 / n
    q = gs.profile.data.real
    lp_sum = float(np.sum(q ** (p + 1.0)) * gs.profile.grid.cell_volume)
    return gs.grad_sq - 2.0 / (p + 1.0) * lp_sum


def radial_interpolant(gs: GroundState):
    """Cubic-spline evaluator r -> Q(r) built from the grid profile.

    Samples the profile along the first axis from the box center outward
    (the profile is radial, so one ray determines it). Evaluations beyond
    the sampled radius return 0, consistent with the exponential decay.
    """
    grid = gs.profile.grid
    center = tuple(s // 2 for s in grid.shape)
    ray = gs.profile.data.real[center[:-1] + (slice(center[-1], None),)]
    # values along the last axis at radius 0, dx, 2 dx, ...
    radii = np.arange(ray.size) * grid.dx[-1]
    spline = CubicSpline(radii, ray, bc_type=((1, 0.0), "natural"))
    r_max = radii[-1]

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        inside = r <= r_max
        out[inside] = spline(r[inside])
        return out

    return evaluate


_CACHE: dict[tuple, GroundState] = {}
_CACHE_LOCK = threading.Lock()


def cached_ground_state(
    n: int,
    N: int | None = None,
    L: float | None = None,
    tol: float | None = None,
) -> GroundState:
    """Per-dimension memoized ground state (exclusive write, shared read)."""
    if N is None or L is None:
        N_def, L_def = DEFAULT_GRIDS[n]
        N = N if N is not None else N_def
        L = L if L is not None else L_def
    if tol is None:
        tol = DEFAULT_TOL[n]
    key = (n, N, float(L), float(tol))
    gs = _CACHE.get(key)
    if gs is not None:
        return gs
    with _CACHE_LOCK:
        gs = _CACHE.get(key)
        if gs is None:
            gs = petviashvili(GridSpec.create(n, L, N), n=n, tol=tol)
            _CACHE[key] = gs
    return gs


def threshold_mass(n: int, **grid_kwargs) -> float:
    """L2 norm of the ground state for dimension n (cached)."""
    return cached_ground_state(n, **grid_kwargs).threshold
