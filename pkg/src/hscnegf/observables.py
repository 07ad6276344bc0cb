"""Local density of states and electron densities from Green's function diagonals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResidualTooLarge, ShapeMismatch

#: allowed |Re G^<_jj| relative to the largest |G^<_jj| at the same energy
IMAG_RTOL = 1e-8


@dataclass(frozen=True)
class EnergyGrid:
    """Ordered energies (eV) with quadrature weights.

    Weights default to the trapezoid rule; a single point gets weight 1.
    """

    energies: np.ndarray
    weights: np.ndarray

    def __init__(self, energies, weights=None):
        e = np.asarray(energies, dtype=float).ravel()
        if e.size == 0:
            raise ValueError("energy grid is empty")
        if np.any(np.diff(e) <= 0):
            raise ValueError("energies must be strictly increasing")
        if weights is None:
            if e.size == 1:
                w = np.ones(1)
            else:
                h = np.diff(e)
                w = np.zeros_like(e)
                w[:-1] += h / 2
                w[1:] += h / 2
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if w.shape != e.shape:
                raise ValueError("one weight per energy is required")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, e_min: float, e_max: float, count: int) -> "EnergyGrid":
        return cls(np.linspace(e_min, e_max, count))

    def __len__(self):
        return self.energies.size


@dataclass
class DensityMap:
    """Per-dof density with the ``(Nx, Ny)`` geometry (dof = ``x + Nx y``).

    ``imag_residual`` is the largest relative real part seen in ``G^<_jj``.
    """

    values: np.ndarray
    shape: tuple
    imag_residual: float = 0.0

    def grid(self) -> np.ndarray:
        """Values as an ``(Nx, Ny)`` array, ``grid[x, y]``."""
        nx, ny = self.shape
        if self.values.size != nx * ny:
            raise ShapeMismatch(f"{self.values.size} values cannot form a {nx}x{ny} grid")
        return self.values.reshape(ny, nx).T


def ldos(gr_diag) -> np.ndarray:
    """``-Im(G^r_jj) / pi``."""
    return -np.imag(np.asarray(gr_diag)) / np.pi


def density_contribution(gless_diag, rtol: float = IMAG_RTOL) -> tuple:
    """``Im(G^<_jj)`` for one energy and its relative real-part residual.

    Raises
    ------
    ResidualTooLarge
        If ``max |Re G^<_jj| > rtol * max |G^<_jj|``.
    """
    g = np.asarray(gless_diag, dtype=np.complex128)
    scale = np.abs(g).max(initial=0.0)
    resid = float(np.abs(g.real).max(initial=0.0) / scale) if scale > 0 else 0.0
    if resid > rtol:
        raise ResidualTooLarge(f"diagonal of G^< has relative real part {resid:.3e}")
    return g.imag, resid


def electron_density(gless_diags, grid: EnergyGrid, shape: tuple) -> DensityMap:
    """``n_j = (1 / 2 pi) sum_k w_k Im G^<_jj(E_k)`` (per spin).

    ``gless_diags`` holds one per-dof vector per grid energy, in grid order;
    the sum runs in that order.
    """
    gless_diags = list(gless_diags)
    if len(gless_diags) != len(grid):
        raise ShapeMismatch(f"{len(gless_diags)} diagonals for {len(grid)} energies")
    total = None
    worst = 0.0
    for w, g in zip(grid.weights, gless_diags):
        im, resid = density_contribution(g)
        worst = max(worst, resid)
        total = w * im if total is None else total + w * im
    return DensityMap(total / (2 * np.pi), tuple(shape), worst)


def line_density_y(dmap: DensityMap) -> np.ndarray:
    """Sum over ``x`` for each ``y`` layer."""
    return dmap.grid().sum(axis=0)


def mirror_asymmetry(line, start: int, stop: int) -> np.ndarray:
    """Per-point ``|n(y) - n(y')| / max(|n(y)|, |n(y')|)`` inside ``[start, stop)``,
    ``y'`` being the mirror image of ``y`` about the range centre."""
    seg = np.asarray(line[start:stop], dtype=float)
    rev = seg[::-1]
    den = np.maximum(np.abs(seg), np.abs(rev))
    out = np.zeros_like(seg)
    nz = den > 0
    out[nz] = np.abs(seg - rev)[nz] / den[nz]
    return out
