"""Per-energy drivers tying devices, self-energies and solvers together."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .blocks import GreensDiagonal, assemble_system, group_by_partition
from .dense import FlopLedger
from .device import (Device, SyntheticSpec, build_synthetic_device, contact_self_energies,
                     group_lesser, lesser_dense, lesser_self_energy)
from .hsc import hsc_fold, hsc_gless, hsc_gr
from .oracle import dense_gless, dense_gr
from .partition import DEFAULT_MAX_LEAF, SeparatorTree, nested_dissection
from .rgf import LayeredSystem, rgf_gless, rgf_gr

SOLVERS = ("rgf", "hsc", "dense")


@dataclass
class Conditions:
    """Contact model and occupation parameters shared by all energies."""

    contact_model: str = "dense-lead"
    eta: float = 1e-6
    eta_phonon: float = 0.0
    mu_left: float = 0.0
    mu_right: float = 0.0
    temperature: float = 300.0


def device_tree(device: Device, max_leaf: int = DEFAULT_MAX_LEAF) -> SeparatorTree:
    """Nested-dissection tree keeping each contact layer inside one cluster."""
    groups = [device.layers[0], device.layers[-1]] if len(device.layers) > 1 else []
    return nested_dissection(device.adjacency, groups, max_leaf=max_leaf, coords=device.coords)


def phonon_vector(device: Device, eta_phonon: float):
    """Diagonal ``Sigma^r_phonon`` on interior dofs (``None`` when zero)."""
    if "eta" in device.extra:
        return -1j * device.extra["eta"]
    if eta_phonon == 0:
        return None
    s = np.full(device.n, -1j * eta_phonon)
    s[device.layers[0]] = 0
    s[device.layers[-1]] = 0
    return s


def system_at(device: Device, energy: float, cond: Conditions):
    """``A(E)`` and the block list of ``Sigma^<(E)``."""
    sl, sr = contact_self_energies(device, energy, cond.contact_model, cond.eta)
    sph = phonon_vector(device, cond.eta_phonon)
    a = assemble_system(device.h, sl, sr, sph, energy, device.layers)
    mu_ph = 0.5 * (cond.mu_left + cond.mu_right)
    lesser = lesser_self_energy(sl, sr, sph, energy, cond.mu_left, cond.mu_right,
                                cond.temperature, mu_ph)
    return a, lesser


def _layer_index(device: Device):
    owner = np.empty(device.n, dtype=np.int64)
    local = np.empty(device.n, dtype=np.int64)
    for k, layer in enumerate(device.layers):
        owner[layer] = k
        local[layer] = np.arange(layer.size)
    return owner, local, [l.size for l in device.layers]


@dataclass
class EnergyResult:
    energy: float
    gr_diag: np.ndarray
    gless_diag: np.ndarray
    ledger_gr: FlopLedger
    ledger_gless: FlopLedger


def solve_energy(device: Device, energy: float, solver: str, cond: Conditions,
                 tree: SeparatorTree | None = None, lesser: bool = True) -> EnergyResult:
    """Diagonals of ``G^r`` and ``G^<`` (global dof order) at one energy."""
    a, blocks = system_at(device, energy, cond)
    lg, ll = FlopLedger(), FlopLedger()
    n = device.n
    if solver == "rgf":
        owner, local, sizes = _layer_index(device)
        sys = LayeredSystem.from_sparse(a, device.layers, group_lesser(blocks, owner, local, sizes))
        gr = rgf_gr(sys, lg, keep=True)
        gless = rgf_gless(sys, ll, gr=gr) if lesser else None
        res = GreensDiagonal(energy, list(sys.dofs), gr[0], gless)
    elif solver == "hsc":
        if tree is None:
            tree = device_tree(device)
        cb = group_by_partition(a, tree)
        f = hsc_fold(cb, lg)
        g0 = hsc_gr(f, lg)
        ids = range(len(tree))
        gr = [g0[(c, c)] for c in ids]
        gless = None
        if lesser:
            sig = group_lesser(blocks, tree.owner, tree.local,
                               [c.size for c in tree.clusters])
            p = hsc_gless(f, g0, sig, ll, consume=True)
            gless = [p[c] for c in ids]
        res = GreensDiagonal(energy, [tree.clusters[c].dofs for c in ids], gr, gless)
    elif solver == "dense":
        g = dense_gr(a.to_dense())
        gl = dense_gless(g, lesser_dense(n, blocks)) if lesser else None
        dofs = [np.arange(n)]
        res = GreensDiagonal(energy, dofs, [g], [gl] if lesser else None)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    gless_diag = res.gless_diagonal() if lesser else np.zeros(n, dtype=np.complex128)
    return EnergyResult(energy, res.gr_diagonal(), gless_diag, lg, ll)


# ---------------------------------------------------------------------------
# benchmarking

@dataclass
class BenchRow:
    solver: str
    nx: int
    ny: int
    gr: FlopLedger
    gless: FlopLedger
    wall_seconds: float

    @property
    def multiply_ops(self) -> int:
        return self.gr.multiply_ops + self.gless.multiply_ops

    @property
    def inverse_ops(self) -> int:
        return self.gr.inverse_ops + self.gless.inverse_ops

    @property
    def total(self) -> int:
        return self.multiply_ops + self.inverse_ops


def bench_point(solver: str, nx: int, ny: int, seed: int = 0, max_leaf: int = DEFAULT_MAX_LEAF,
                energy: float = 0.0) -> BenchRow:
    """Ledger counts for one solver on a synthetic ``nx x ny`` five-point device."""
    device = build_synthetic_device(SyntheticSpec(Nx=nx, Ny=ny, seed=seed))
    cond = Conditions(contact_model="fixed", temperature=300.0)
    tree = device_tree(device, max_leaf) if solver == "hsc" else None
    t0 = time.perf_counter()
    res = solve_energy(device, energy, solver, cond, tree=tree)
    wall = time.perf_counter() - t0
    return BenchRow(solver, nx, ny, res.ledger_gr, res.ledger_gless, wall)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
