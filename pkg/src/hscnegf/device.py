"""Device Hamiltonians and self-energies.

Three device families are provided:

* a 2D effective-mass superlattice on a five-point grid,
* an armchair graphene nanoribbon in nearest-neighbour tight binding,
* a seeded random complex-symmetric five-point system for solver testing.

Dofs are numbered ``x + Nx * y`` so that each transport layer (fixed ``y``)
is a contiguous range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import constants
from scipy.special import expit

from .blocks import ContactBlock, SparseCoo
from .dense import inverse
from .errors import ConfigError, ConvergenceError

#: hbar^2 / (2 m_0) in eV nm^2
HBAR2_2M0 = constants.hbar ** 2 / (2 * constants.m_e) / constants.e * 1e18
#: Boltzmann constant in eV/K
KB_EV = constants.k / constants.e

DECIMATION_MAX_ITER = 200
DECIMATION_TOL = 1e-10


@dataclass
class Device:
    """A built device: Hamiltonian, connectivity, layers and lead cells.

    Iterating yields ``(h, adjacency, layers)``.
    """

    h: SparseCoo
    adjacency: sp.csr_matrix
    layers: list
    coords: np.ndarray
    shape: tuple
    lead_left: tuple | None = None
    lead_right: tuple | None = None
    potential: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.h, self.adjacency, self.layers))

    @property
    def n(self) -> int:
        return self.h.n


def _grid_edges(nx: int, ny: int):
    x, y = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    idx = (x + nx * y).ravel()
    xs, ys = x.ravel(), y.ravel()
    right = idx[xs + 1 < nx]
    up = idx[ys + 1 < ny]
    return right, right + 1, up, up + nx


def _adjacency(h: SparseCoo) -> sp.csr_matrix:
    off = h.rows != h.cols
    m = sp.csr_matrix((np.ones(off.sum(), dtype=bool), (h.rows[off], h.cols[off])),
                      shape=(h.n, h.n))
    return ((m + m.T) > 0).tocsr()


def _layers(nx: int, ny: int) -> list:
    return [np.arange(k * nx, (k + 1) * nx, dtype=np.int64) for k in range(ny)]


def _lead_cells(h: SparseCoo, layers, cell: int = 1):
    """Lead cells copied from the outermost ``cell`` layers of the device."""
    csr = h.to_csr()
    left = np.concatenate(layers[:cell])
    nxt = np.concatenate(layers[cell:2 * cell])
    right = np.concatenate(layers[-cell:])
    prv = np.concatenate(layers[-2 * cell:-cell])
    lead_l = (csr[left][:, left].toarray(), csr[left][:, nxt].toarray())
    lead_r = (csr[right][:, right].toarray(), csr[prv][:, right].toarray())
    return lead_l, lead_r


# ---------------------------------------------------------------------------
# superlattice

@dataclass
class SuperlatticeSpec:
    """Barrier/well stack along ``y``, hard walls in ``x``. Lengths in nm."""

    Nx: int = 250
    Ny: int = 200
    dx: float = 0.1
    dy: float = 0.1
    n_barriers: int = 8
    barrier_width: float = 1.0
    well_width: float = 1.0
    barrier_height: float = 0.4
    left_flat: float = 2.0
    right_flat: float = 3.0
    effective_mass: float = 0.067
    fermi_energy: float = 0.14
    temperature: float = 300.0
    energies: list = field(default_factory=lambda: np.linspace(0.0, 0.5, 500).tolist())

    def cells(self, length: float) -> int:
        c = length / self.dy
        if abs(c - round(c)) > 1e-6:
            raise ConfigError(f"length {length} nm is not a multiple of dy = {self.dy} nm")
        return int(round(c))

    def validate(self) -> None:
        if self.Nx < 1 or self.Ny < 1:
            raise ConfigError("grid counts must be positive")
        if self.dx <= 0 or self.dy <= 0 or self.effective_mass <= 0:
            raise ConfigError("dx, dy and effective mass must be positive")
        total = (self.left_flat + self.n_barriers * self.barrier_width
                 + max(self.n_barriers - 1, 0) * self.well_width + self.right_flat)
        if abs(total - self.Ny * self.dy) > self.dy / 2:
            raise ConfigError(f"stack length {total:g} nm differs from Ny*dy = "
                              f"{self.Ny * self.dy:g} nm")
        for w in (self.left_flat, self.barrier_width, self.well_width, self.right_flat):
            self.cells(w)

    def barrier_cells(self) -> list:
        """Half-open ``[start, stop)`` layer ranges of each barrier."""
        start = self.cells(self.left_flat)
        bw, ww = self.cells(self.barrier_width), self.cells(self.well_width)
        return [(start + k * (bw + ww), start + k * (bw + ww) + bw)
                for k in range(self.n_barriers)]

    def stack_cells(self) -> tuple:
        """Half-open layer range covered by the barrier/well stack."""
        b = self.barrier_cells()
        return (b[0][0], b[-1][1]) if b else (0, 0)

    def layer_potential(self) -> np.ndarray:
        """Potential of each layer (eV)."""
        v = np.zeros(self.Ny)
        for a, b in self.barrier_cells():
            v[a:b] = self.barrier_height
        return v

    def potential_at(self, y: float) -> float:
        """Potential at position ``y`` (nm); layer ``j`` spans ``[j dy, (j+1) dy)``."""
        j = int(np.floor(y / self.dy + 1e-9))
        if not 0 <= j < self.Ny:
            return 0.0
        return float(self.layer_potential()[j])

    def hopping(self) -> tuple:
        """``(t_x, t_y)`` in eV."""
        c = HBAR2_2M0 / self.effective_mass
        return c / self.dx ** 2, c / self.dy ** 2


def build_superlattice_hamiltonian(spec: SuperlatticeSpec) -> Device:
    """Five-point effective-mass Hamiltonian ``H_jj = 2t_x + 2t_y + V(y_j)``.

    Layers are rows of constant ``y``; the lead cells repeat the first and
    last layer.
    """
    spec.validate()
    nx, ny = spec.Nx, spec.Ny
    tx, ty = spec.hopping()
    n = nx * ny
    v = np.repeat(spec.layer_potential(), nx)
    r1, c1, r2, c2 = _grid_edges(nx, ny)
    rows = np.concatenate([np.arange(n), r1, c1, r2, c2])
    cols = np.concatenate([np.arange(n), c1, r1, c2, r2])
    vals = np.concatenate([2 * tx + 2 * ty + v, np.full(2 * r1.size, -tx),
                           np.full(2 * r2.size, -ty)])
    h = SparseCoo(n, rows, cols, vals)
    layers = _layers(nx, ny)
    xs, ys = np.meshgrid(np.arange(nx) * spec.dx, np.arange(ny) * spec.dy, indexing="xy")
    coords = np.column_stack([xs.ravel(), ys.ravel()])
    lead_l = lead_r = None
    if ny >= 2:
        lead_l, lead_r = _lead_cells(h, layers)
    return Device(h, _adjacency(h), layers, coords, (nx, ny), lead_l, lead_r, v,
                  {"kind": "superlattice"})


# ---------------------------------------------------------------------------
# graphene

@dataclass
class GrapheneSpec:
    """Armchair ribbon: ``Nx`` atoms per atom layer, ``Ny`` atom layers."""

    Nx: int = 20
    Ny: int = 40
    onsite: float = 0.0
    hopping: float = -3.1
    fermi_energy: float = 0.0
    temperature: float = 300.0
    bond_length: float = 0.142
    energies: list = field(default_factory=lambda: [0.5])

    def validate(self) -> None:
        if self.Nx < 1 or self.Ny < 1:
            raise ConfigError("ribbon needs at least one atom per direction")
        if self.hopping == 0:
            raise ConfigError("hopping must be nonzero")


def _graphene_bonds(nx: int, ny: int):
    """Nearest-neighbour bonds of an armchair ribbon.

    Atom layers repeat with period four: layers ``4c`` and ``4c+1`` sit at
    ``x = m sqrt(3) a``, layers ``4c+2`` and ``4c+3`` are shifted by half a
    cell. Bonds ``0-1`` and ``2-3`` are vertical (same ``m``); ``1-2`` joins
    ``m`` to ``m`` and ``m-1``; ``3-4`` joins ``m`` to ``m`` and ``m+1``.
    """
    m = np.arange(nx)
    src, dst = [], []
    for k in range(ny - 1):
        a, b = k * nx, (k + 1) * nx
        kind = k % 4
        if kind in (0, 2):
            src.append(a + m)
            dst.append(b + m)
        elif kind == 1:
            src += [a + m, a + m[1:]]
            dst += [b + m, b + m[1:] - 1]
        else:
            src += [a + m, a + m[:-1]]
            dst += [b + m, b + m[:-1] + 1]
    if not src:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(src), np.concatenate(dst)


def _graphene_coords(nx: int, ny: int, a: float) -> np.ndarray:
    offsets = np.array([0.0, 1.0, 1.5, 2.5]) * a
    y = np.array([3 * a * (k // 4) + offsets[k % 4] for k in range(ny)])
    shift = np.array([0.0, 0.0, 0.5, 0.5])
    xs = np.array([[(mm + shift[k % 4]) * np.sqrt(3) * a for mm in range(nx)]
                   for k in range(ny)])
    return np.column_stack([xs.ravel(), np.repeat(y, nx)])


def build_graphene_hamiltonian(spec: GrapheneSpec) -> Device:
    """Nearest-neighbour tight-binding Hamiltonian of an armchair ribbon.

    Each atom layer is one transport layer; only adjacent layers couple.
    Lead cells (four atom layers, the ribbon's period) are attached when
    ``Ny`` is a multiple of four and at least eight.
    """
    spec.validate()
    nx, ny = spec.Nx, spec.Ny
    n = nx * ny
    s, d = _graphene_bonds(nx, ny)
    rows = np.concatenate([np.arange(n), s, d])
    cols = np.concatenate([np.arange(n), d, s])
    vals = np.concatenate([np.full(n, spec.onsite, dtype=float),
                           np.full(2 * s.size, spec.hopping)])
    h = SparseCoo(n, rows, cols, vals)
    # SparseCoo drops explicit zeros, so a zero onsite energy leaves no
    # diagonal entries; the adjacency must come from the bonds alone
    adj = sp.csr_matrix((np.ones(2 * s.size, dtype=bool),
                         (np.concatenate([s, d]), np.concatenate([d, s]))), shape=(n, n))
    layers = _layers(nx, ny)
    lead_l = lead_r = None
    if ny % 4 == 0 and ny >= 8:
        cell = graphene_lead_cell(spec)
        lead_l = lead_r = cell
    return Device(h, adj, layers, _graphene_coords(nx, ny, spec.bond_length), (nx, ny),
                  lead_l, lead_r, None, {"kind": "graphene"})


def graphene_lead_cell(spec: GrapheneSpec) -> tuple:
    """``(H00, H01)`` of one four-layer ribbon period.

    ``H01`` couples a cell to the next one along transport.
    """
    nx = spec.Nx
    s, d = _graphene_bonds(nx, 8)
    h = np.zeros((8 * nx, 8 * nx))
    h[s, d] = spec.hopping
    h[d, s] = spec.hopping
    h[np.arange(8 * nx), np.arange(8 * nx)] = spec.onsite
    c = 4 * nx
    return h[:c, :c].astype(np.complex128), h[:c, c:].astype(np.complex128)


# ---------------------------------------------------------------------------
# synthetic random

@dataclass
class SyntheticSpec:
    """Seeded random complex-symmetric five-point system.

    ``A(E) = E I - H - Sigma_L - Sigma_R - Sigma_ph`` with real symmetric
    ``H``, dense complex-symmetric contact blocks on the first and last
    layers and a random diagonal broadening, so ``A`` is nonsingular at every
    real energy.
    """

    Nx: int = 16
    Ny: int = 16
    seed: int = 0
    coupling: float = 1.0
    broadening: tuple = (0.5, 1.5)
    fermi_energy: float = 0.0
    temperature: float = 300.0
    energies: list = field(default_factory=lambda: [0.0])


def build_synthetic_device(spec: SyntheticSpec) -> Device:
    if spec.Nx < 1 or spec.Ny < 2:
        raise ConfigError("synthetic device needs Nx >= 1 and Ny >= 2")
    rng = np.random.default_rng(spec.seed)
    nx, ny = spec.Nx, spec.Ny
    n = nx * ny
    r1, c1, r2, c2 = _grid_edges(nx, ny)
    er = np.concatenate([r1, r2])
    ec = np.concatenate([c1, c2])
    w = spec.coupling * rng.normal(size=er.size)
    onsite = rng.normal(size=n)
    h = SparseCoo(n, np.concatenate([np.arange(n), er, ec]),
                  np.concatenate([np.arange(n), ec, er]), np.concatenate([onsite, w, w]))
    contacts = []
    for _ in range(2):
        b = rng.normal(size=(nx, nx))
        re = 0.5 * (b + b.T) / np.sqrt(nx)
        c = rng.normal(size=(nx, nx)) / np.sqrt(nx)
        im = c @ c.T + 0.1 * np.eye(nx)
        contacts.append(re - 1j * im)
    lo, hi = spec.broadening
    eta = rng.uniform(lo, hi, size=n)
    layers = _layers(nx, ny)
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    coords = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    return Device(h, _adjacency(h), layers, coords, (nx, ny), None, None, None,
                  {"kind": "synthetic-random", "sigma_left": contacts[0],
                   "sigma_right": contacts[1], "eta": eta})


# ---------------------------------------------------------------------------
# self-energies

def surface_self_energy(lead, energy: float, eta: float, side: str = "left",
                        max_iter: int = DECIMATION_MAX_ITER, tol: float = DECIMATION_TOL):
    """Contact self-energy of a semi-infinite periodic lead.

    Parameters
    ----------
    lead : tuple
        ``(H00, H01)`` with ``H01`` the coupling from a cell to the next one
        along transport.
    side : {"left", "right"}
        A left lead extends to ``-inf`` and couples to the device's first
        layer; a right lead extends to ``+inf``.

    Returns
    -------
    ndarray
        ``Sigma = H01^dagger g_s H01`` (left) or ``H01 g_s H01^dagger``
        (right) with ``g_s`` the surface Green's function at ``E + i eta``,
        obtained by Lopez-Sancho decimation.

    Raises
    ------
    ConvergenceError
        If decimation does not converge in ``max_iter`` iterations.
    """
    if eta <= 0:
        raise ConfigError("eta must be positive")
    h00 = np.asarray(lead[0], dtype=np.complex128)
    h01 = np.asarray(lead[1], dtype=np.complex128)
    if side == "left":
        tau = h01
    elif side == "right":
        tau = h01.conj().T
    else:
        raise ValueError(f"unknown side {side!r}")
    g = surface_green(h00, tau, energy + 1j * eta, max_iter, tol)
    return tau.conj().T @ g @ tau


def surface_green(h00, tau, z: complex, max_iter: int = DECIMATION_MAX_ITER,
                  tol: float = DECIMATION_TOL) -> np.ndarray:
    """Solve ``g = (z - h00 - tau^dagger g tau)^{-1}`` by decimation.

    ``tau`` couples the surface cell's outer neighbour into the surface cell
    (so ``tau^dagger g tau`` is the self-energy of the rest of the lead).
    """
    k = h00.shape[0]
    eye = np.eye(k, dtype=np.complex128)
    # alpha: surface -> bulk coupling, beta: bulk -> surface
    alpha = tau.conj().T.copy()
    beta = tau.copy()
    eps_s = h00.copy()
    eps = h00.copy()
    scale = max(np.abs(h00).max(), np.abs(tau).max(), 1.0)
    for _ in range(max_iter):
        gb = inverse(z * eye - eps)
        agb = alpha @ gb
        bgb = beta @ gb
        eps_s = eps_s + agb @ beta
        eps = eps + agb @ beta + bgb @ alpha
        alpha = agb @ alpha
        beta = bgb @ beta
        if max(np.abs(alpha).max(), np.abs(beta).max()) < tol * scale * 1e-3:
            break
    else:
        raise ConvergenceError(f"surface decimation did not converge in {max_iter} iterations")
    g = inverse(z * eye - eps_s)
    return g


def contact_self_energies(device: Device, energy: float, model: str = "dense-lead",
                          eta: float = 1e-6):
    """``(Sigma_L, Sigma_R)`` as :class:`ContactBlock` on the first/last layer.

    ``model`` is ``"dense-lead"`` (decimated periodic leads), ``"diagonal"``
    (``-i eta I``) or ``"fixed"`` (energy-independent blocks stored on a
    synthetic device).
    """
    first, last = device.layers[0], device.layers[-1]
    if model == "diagonal":
        return (ContactBlock(first, -1j * eta * np.eye(first.size)),
                ContactBlock(last, -1j * eta * np.eye(last.size)))
    if model == "fixed":
        return (ContactBlock(first, device.extra["sigma_left"]),
                ContactBlock(last, device.extra["sigma_right"]))
    if model != "dense-lead":
        raise ConfigError(f"unknown contact model {model!r}")
    if device.lead_left is None or device.lead_right is None:
        raise ConfigError("device has no lead cells for the dense-lead model")
    sl = surface_self_energy(device.lead_left, energy, eta, "left")
    sr = surface_self_energy(device.lead_right, energy, eta, "right")
    # the lead couples only to the outermost atom layer of the device
    k = first.size
    return ContactBlock(first, sl[:k, :k]), ContactBlock(last, sr[-last.size:, -last.size:])


def fermi(energy, mu: float, temperature: float):
    """Fermi-Dirac occupation; ``temperature`` in kelvin (> 0)."""
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    return expit(-(np.asarray(energy, dtype=float) - mu) / (KB_EV * temperature))


def lesser_self_energy(sigma_r_L: ContactBlock | None, sigma_r_R: ContactBlock | None,
                       sigma_r_phonon, energy: float, mu_L: float, mu_R: float,
                       temperature: float, mu_phonon: float | None = None) -> list:
    """Block-diagonal ``Sigma^<`` as ``[(dofs, block), ...]``.

    Contacts: ``-f(E, mu_c) (Sigma_c - Sigma_c^dagger)``. Phonon part (one
    ``1 x 1`` block per dof with nonzero broadening):
    ``-f(E, mu_phonon) (Sigma_jj - conj(Sigma_jj))``; ``mu_phonon``
    defaults to the mean of the contact potentials.
    """
    out = []
    for c, mu in ((sigma_r_L, mu_L), (sigma_r_R, mu_R)):
        if c is None:
            continue
        f = float(fermi(energy, mu, temperature))
        m = c.matrix
        out.append((c.dofs, -f * (m - m.conj().T)))
    if sigma_r_phonon is not None:
        s = np.asarray(sigma_r_phonon, dtype=np.complex128)
        if mu_phonon is None:
            mu_phonon = 0.5 * (mu_L + mu_R)
        f = float(fermi(energy, mu_phonon, temperature))
        nz = np.flatnonzero(s.imag != 0)
        for j in nz:
            out.append((np.array([j]), np.array([[-f * (s[j] - np.conj(s[j]))]])))
    return out


def lesser_dense(n: int, blocks) -> np.ndarray:
    """Dense ``n x n`` matrix from ``[(dofs, block), ...]``."""
    out = np.zeros((n, n), dtype=np.complex128)
    for dofs, b in blocks:
        out[np.ix_(dofs, dofs)] += b
    return out


def group_lesser(blocks, owner: np.ndarray, local: np.ndarray, sizes) -> dict:
    """Sum ``[(dofs, block), ...]`` into ``{group: dense block}``.

    ``owner[d]`` is the group of dof ``d`` and ``local[d]`` its index inside
    the group. A block may span several groups only if its entries between
    different groups are exactly zero (e.g. a diagonal contact model).
    """
    out = {}
    for dofs, b in blocks:
        dofs = np.asarray(dofs, dtype=np.int64)
        g = owner[dofs]
        groups = np.unique(g)
        if groups.size > 1 and np.any(b[g[:, None] != g[None, :]] != 0):
            raise ConfigError("a lesser self-energy block couples two groups")
        for gidx in groups.tolist():
            sel = np.flatnonzero(g == gidx)
            tgt = out.get(gidx)
            if tgt is None:
                tgt = out[gidx] = np.zeros((sizes[gidx], sizes[gidx]), dtype=np.complex128)
            loc = local[dofs[sel]]
            tgt[np.ix_(loc, loc)] += b[np.ix_(sel, sel)]
    return out


def random_skew_hermitian_blocks(groups, rng, scale: float = 1.0) -> list:
    """Random skew-Hermitian block on each dof group: ``[(dofs, block), ...]``."""
    out = []
    for g in groups:
        g = np.asarray(g, dtype=np.int64)
        k = g.size
        if k == 0:
            continue
        m = scale * (rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)))
        out.append((g, m - m.conj().T))
    return out
