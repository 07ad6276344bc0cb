"""Recursive Green's function method on block-tridiagonal systems.

Layer ``i`` couples only to ``i - 1`` and ``i + 1``. Both Green's functions
use a forward sweep that folds the layers to the left into the current one
and a backward sweep that extracts the exact diagonal blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import GreensDiagonal, SparseCoo
from .dense import FlopLedger, inverse, matmul
from .errors import ConfigError, PartitionViolation, SingularBlock
from .hsc import check_skew_hermitian


@dataclass
class LayeredSystem:
    """Block-tridiagonal ``A`` with per-layer lesser self-energies.

    Attributes
    ----------
    diag : list of ndarray
        ``A_ii``.
    upper : list of ndarray
        ``A_{i,i+1}`` for ``i = 0..Ny-2``; ``A_{i+1,i}`` is its transpose.
    sigma_lesser : list
        ``Sigma^<_ii`` per layer, ``None`` for a zero block.
    dofs : list of ndarray
        Global dofs of each layer, in block order.
    """

    diag: list
    upper: list
    sigma_lesser: list
    dofs: list

    def __post_init__(self):
        ny = len(self.diag)
        if len(self.upper) != max(ny - 1, 0):
            raise ConfigError(f"{ny} layers need {ny - 1} coupling blocks, got {len(self.upper)}")
        if len(self.sigma_lesser) != ny:
            raise ConfigError("one lesser self-energy entry per layer is required")
        for k, u in enumerate(self.upper):
            if u.shape != (self.diag[k].shape[0], self.diag[k + 1].shape[0]):
                raise ConfigError(f"coupling block {k} has shape {u.shape}")

    @property
    def n_layers(self) -> int:
        return len(self.diag)

    @classmethod
    def from_sparse(cls, a: SparseCoo, layers, sigma_lesser=None) -> "LayeredSystem":
        """Slice ``a`` into layers.

        ``sigma_lesser`` is a ``{layer: block}`` map (layer-local dof order).

        Raises
        ------
        PartitionViolation
            If ``a`` couples two layers that are not adjacent.
        """
        layers = [np.sort(np.asarray(l, dtype=np.int64)) for l in layers]
        owner = np.full(a.n, -1, dtype=np.int64)
        for k, l in enumerate(layers):
            owner[l] = k
        if np.any(owner < 0):
            raise ConfigError("layers do not cover every dof")
        far = np.abs(owner[a.rows] - owner[a.cols]) > 1
        if far.any():
            edges = sorted({(min(u, v), max(u, v))
                            for u, v in zip(a.rows[far].tolist(), a.cols[far].tolist())})
            raise PartitionViolation(edges)
        local = np.empty(a.n, dtype=np.int64)
        for l in layers:
            local[l] = np.arange(l.size)
        ny = len(layers)
        diag = [np.zeros((l.size, l.size), dtype=np.complex128) for l in layers]
        upper = [np.zeros((layers[k].size, layers[k + 1].size), dtype=np.complex128)
                 for k in range(ny - 1)]
        # one pass over the triplets, grouped by (row layer, block kind)
        orow, ocol = owner[a.rows], owner[a.cols]
        kind = ocol - orow  # -1 lower, 0 diagonal, 1 upper
        key = 3 * orow + kind + 1
        order = np.argsort(key, kind="stable")
        bounds = np.searchsorted(key[order], np.arange(3 * ny + 1))
        for k in range(ny):
            for kd, target in ((0, diag[k]), (1, upper[k] if k < ny - 1 else None)):
                sel = order[bounds[3 * k + kd + 1]:bounds[3 * k + kd + 2]]
                if sel.size:
                    target[local[a.rows[sel]], local[a.cols[sel]]] = a.vals[sel]
        sigma_lesser = sigma_lesser or {}
        sig = [sigma_lesser.get(k) for k in range(len(layers))]
        return cls(diag, upper, sig, layers)


def _forward_gr(sys: LayeredSystem, ledger):
    g, q = [], [None]
    for i, aii in enumerate(sys.diag):
        try:
            if i == 0:
                g.append(inverse(aii, ledger))
                continue
            qi = matmul(sys.upper[i - 1].T, g[i - 1], ledger)
            q.append(qi)
            g.append(inverse(aii - matmul(qi, sys.upper[i - 1], ledger), ledger))
        except SingularBlock as exc:
            raise exc.located(layer=i) from None
    return g, q


def rgf_gr(sys: LayeredSystem, ledger: FlopLedger | None = None, keep: bool = False):
    """Diagonal and nearest off-diagonal blocks of ``G^r``.

    Returns
    -------
    gdiag : list of ndarray
        ``G_ii``.
    glower : list of ndarray
        ``G_{i+1,i}``; ``G_{i,i+1}`` is its transpose.
    state : dict, only when ``keep`` is true
        Forward-sweep quantities reused by :func:`rgf_gless`.
    """
    ny = sys.n_layers
    g, q = _forward_gr(sys, ledger)
    gdiag = [None] * ny
    glower = [None] * max(ny - 1, 0)
    gdiag[-1] = g[-1]
    for i in range(ny - 2, -1, -1):
        y = matmul(gdiag[i + 1], sys.upper[i].T, ledger)
        gl = -matmul(y, g[i], ledger)
        # g_i A_{i,i+1} equals Q_{i+1}^T for a complex-symmetric system
        gdiag[i] = g[i] - matmul(q[i + 1].T, gl, ledger)
        glower[i] = gl
    if keep:
        return gdiag, glower, {"g": g, "q": q}
    return gdiag, glower


def rgf_gless(sys: LayeredSystem, ledger: FlopLedger | None = None, gr=None) -> list:
    """Diagonal blocks of ``G^< = G^r Sigma^< (G^r)^dagger``.

    Forward sweep: ``g^<_i = g_i S_i g_i^dagger`` with
    ``S_i = Sigma^<_ii + A_{i,i-1} g^<_{i-1} A_{i,i-1}^dagger``.
    Backward sweep, with ``X_i = g_i A_{i,i+1}`` and ``W_i = G_ii S_i g_i^dagger``::

        G^<_ii = X_i G^<_{i+1,i+1} X_i^dagger + W_i - W_i^dagger - g^<_i

    (``W_i - g^<_i`` is the cross term ``X_i G_{i+1,i+1} A_{i+1,i} g^<_i``.)

    Parameters
    ----------
    gr : tuple, optional
        ``rgf_gr(sys, keep=True)`` output to reuse; computed (and charged
        to ``ledger``) when omitted.
    """
    sig = {k: s for k, s in enumerate(sys.sigma_lesser) if s is not None}
    check_skew_hermitian(sig)
    if gr is None:
        gr = rgf_gr(sys, ledger, keep=True)
    gdiag, _, state = gr
    g, q = state["g"], state["q"]
    ny = sys.n_layers
    gl_fwd = [None] * ny
    ug = [None] * ny  # S_i g_i^dagger
    for i in range(ny):
        s = sys.sigma_lesser[i]
        if i > 0 and gl_fwd[i - 1] is not None:
            a_lo = sys.upper[i - 1].T
            inc = matmul(matmul(a_lo, gl_fwd[i - 1], ledger), a_lo.conj().T, ledger)
            s = inc if s is None else s + inc
        if s is None:
            continue
        ug[i] = matmul(s, g[i].conj().T, ledger)
        gl_fwd[i] = matmul(g[i], ug[i], ledger)

    out = [None] * ny
    out[-1] = gl_fwd[-1]
    for i in range(ny - 2, -1, -1):
        acc = None
        if out[i + 1] is not None:
            x = q[i + 1].T
            acc = matmul(matmul(x, out[i + 1], ledger), x.conj().T, ledger)
        if ug[i] is not None:
            w = matmul(gdiag[i], ug[i], ledger)
            own = w - w.conj().T - gl_fwd[i]
            acc = own if acc is None else acc + own
        out[i] = acc
    return [np.zeros_like(gd) if b is None else b for gd, b in zip(gdiag, out)]


def rgf_solve(sys: LayeredSystem, ledger: FlopLedger | None = None, lesser: bool = True,
              energy: float = float("nan"), gless_ledger: FlopLedger | None = None) -> GreensDiagonal:
    """Both sweeps; ``G^<`` costs go to ``gless_ledger`` when given."""
    gr = rgf_gr(sys, ledger, keep=True)
    gless = None
    if lesser:
        gless = rgf_gless(sys, gless_ledger if gless_ledger is not None else ledger, gr=gr)
    return GreensDiagonal(energy, list(sys.dofs), gr[0], gless)
