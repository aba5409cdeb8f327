"""Exact field transforms: accelerated-frame (Avron-Herbst) maps and the
pseudo-conformal minimal-mass profile.

The Avron-Herbst transform converts solutions phi of the damped free equation
(E = 0) into solutions u of the equation with uniform-field potential E . x:

    u(t, x)   = phi(t, x + t^2 E) * exp(-i (t E.x + |E|^2 t^3 / 3))
    phi(t, x) = u(t, x - t^2 E)   * exp(+i (t E.x - 2 |E|^2 t^3 / 3))

Both maps are L2 isometries and exact mutual inverses at the same (t, E).
Spatial shifts by t^2 E are applied as Fourier phase ramps, which is exact
for band-limited fields and keeps the round trip tight to round-off. The
constant |E|^2 t^3 phases are physically unobservable but are retained so the
round-trip identities hold exactly as written.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError
from .ground_state import GroundState, radial_interpolant
from .spectral import Field, GridSpec


def _shift(field: Field, offsets) -> np.ndarray:
    """Sample field at x + offset per axis via spectral phase ramps."""
    grid = field.grid
    fh = np.fft.fftn(field.data, norm="ortho")
    for axis, s in enumerate(offsets):
        if s == 0.0:
            continue
        k = grid.axis_wavenumbers(axis)
        shape = [1] * grid.n
        shape[axis] = k.size
        fh = fh * np.exp(1j * k * s).reshape(shape)
    return np.fft.ifftn(fh, norm="ortho")


def _linear_phase(grid: GridSpec, coeffs) -> np.ndarray:
    """The pointwise field  sum_axis coeffs[axis] * x_axis  on the grid."""
    out = np.zeros(grid.shape)
    for xg, c in zip(grid.coordinate_grids, coeffs):
        if c != 0.0:
            out = out + c * xg
    return out


def ah_forward(phi: Field, t: float, E) -> Field:
    """Map an E = 0 frame field to the uniform-field solution at time t."""
    grid = phi.grid
    E = np.broadcast_to(np.asarray(E, dtype=float), (grid.n,))
    e_sq = float(np.dot(E, E))
    if e_sq == 0.0 or t == 0.0:
        shifted = _shift(phi, t * t * E) if t != 0.0 and e_sq > 0.0 else phi.data
        return Field(grid, shifted)
    shifted = _shift(phi, t * t * E)
    phase = t * _linear_phase(grid, E) + e_sq * t**3 / 3.0
    return Field(grid, shifted * np.exp(-1j * phase))


def ah_inverse(u: Field, t: float, E) -> Field:
    """Inverse map; exact inverse of ah_forward at the same (t, E)."""
    grid = u.grid
    E = np.broadcast_to(np.asarray(E, dtype=float), (grid.n,))
    e_sq = float(np.dot(E, E))
    if e_sq == 0.0 or t == 0.0:
        return Field(grid, u.data)
    shifted = _shift(u, -t * t * E)
    phase = t * _linear_phase(grid, E) - 2.0 * e_sq * t**3 / 3.0
    return Field(grid, shifted * np.exp(1j * phase))


@dataclass(frozen=True)
class PseudoConformalParams:
    """Parameters of the explicit minimal-mass collapsing profile.

    theta: global phase; T: collapse time; x0: collapse point; t: evaluation
    time, strictly less than T.
    """

    theta: float = 0.0
    T: float = 1.0
    x0: tuple[float, ...] = (0.0,)
    t: float = 0.0

    def __post_init__(self):
        if not self.T - self.t > 0:
            raise ValueError(f"need t < T, got t={self.t}, T={self.T}")


def pseudo_conformal_profile(
    grid: GridSpec, pc: PseudoConformalParams, gs: GroundState
) -> Field:
    """Explicit collapsing solution built from the ground-state profile:

        S(t, x) = e^{i theta} (T-t)^{-n/2} Q((x-x0)/(T-t))
                  * exp(-i |x-x0|^2 / (4 (T-t))) * exp(i / (T-t))

    An L2 isometry of Q for every admissible t; the gradient norm grows like
    (T-t)^{-1} as t approaches T.

    Raises ResolutionError when the squeezed profile width T-t falls below
    8 grid cells.
    """
    lam = pc.T - pc.t
    if lam < 8.0 * max(grid.dx):
        raise ResolutionError(
            f"profile width {lam:.4g} below 8 dx = {8 * max(grid.dx):.4g}"
        )
    x0 = np.broadcast_to(np.asarray(pc.x0, dtype=float), (grid.n,))
    r_sq = np.zeros(grid.shape)
    for xg, c in zip(grid.coordinate_grids, x0):
        r_sq = r_sq + (xg - c) ** 2
    q_of_r = radial_interpolant(gs)
    amplitude = q_of_r(np.sqrt(r_sq) / lam) / lam ** (grid.n / 2.0)
    phase = pc.theta - r_sq / (4.0 * lam) + 1.0 / lam
    return Field(grid, amplitude * np.exp(1j * phase))
