"""Sparse system assembly and the cluster-block container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, PartitionViolation
from .partition import SeparatorTree


@dataclass
class SparseCoo:
    """Square sparse complex matrix as ``(row, col, value)`` triples.

    Duplicates are summed and explicit zeros dropped on construction, so two
    ``SparseCoo`` holding the same matrix compare equal entry for entry.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.vals, dtype=np.complex128).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("rows, cols and vals differ in length")
        if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= self.n):
            raise ValueError(f"indices outside 0..{self.n - 1}")
        m = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        coo = m.tocoo()
        self.rows, self.cols, self.vals = coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data

    @classmethod
    def from_scipy(cls, m) -> "SparseCoo":
        coo = sp.coo_matrix(m)
        return cls(coo.shape[0], coo.row, coo.col, coo.data)

    @classmethod
    def from_dense(cls, a) -> "SparseCoo":
        return cls.from_scipy(sp.coo_matrix(np.asarray(a)))

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def pattern(self) -> sp.csr_matrix:
        return sp.csr_matrix((np.ones(self.nnz, dtype=bool), (self.rows, self.cols)),
                             shape=(self.n, self.n))

    def structurally_symmetric(self) -> bool:
        p = self.pattern()
        return (p != p.T).nnz == 0

    def __eq__(self, other):
        if not isinstance(other, SparseCoo):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols) and np.array_equal(self.vals, other.vals))

    def write_text(self, path) -> None:
        """Plain-text dump: header line, then ``row col re im`` (0-based)."""
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"%coo complex n={self.n} nnz={self.nnz}\n")
            for r, c, v in zip(self.rows, self.cols, self.vals):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")

    @classmethod
    def read_text(cls, path) -> "SparseCoo":
        with open(path, encoding="ascii") as fh:
            header = fh.readline().split()
            fields = dict(tok.split("=") for tok in header if "=" in tok)
            data = np.loadtxt(fh, ndmin=2) if int(fields["nnz"]) else np.zeros((0, 4))
        return cls(int(fields["n"]), data[:, 0].astype(np.int64), data[:, 1].astype(np.int64),
                   data[:, 2] + 1j * data[:, 3])


@dataclass
class ContactBlock:
    """A dense self-energy block acting on ``dofs`` (ordered as the matrix)."""

    dofs: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        self.dofs = np.asarray(self.dofs, dtype=np.int64)
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        k = self.dofs.size
        if self.matrix.shape != (k, k):
            raise ConfigError(f"contact block shape {self.matrix.shape} does not match {k} dofs")


def _check_in_one_layer(contact: ContactBlock, layers, name: str) -> None:
    if layers is None or contact.dofs.size == 0:
        return
    hits = [k for k, layer in enumerate(layers) if np.isin(contact.dofs, layer).any()]
    if len(hits) != 1 or not np.isin(contact.dofs, layers[hits[0]]).all():
        raise ConfigError(f"{name} contact dofs are not contained in a single layer")


def assemble_system(h: SparseCoo, sigma_r_L: ContactBlock | None, sigma_r_R: ContactBlock | None,
                    sigma_phonon, energy: float, layers=None) -> SparseCoo:
    """``A = E I - H - Sigma_L - Sigma_R - Sigma_phonon``.

    ``sigma_phonon`` is a length-``n`` complex vector (zero on contact dofs)
    or ``None``. When ``layers`` is given, each contact must sit inside one
    layer.
    """
    n = h.n
    _check_in_one_layer(sigma_r_L, layers, "left") if sigma_r_L is not None else None
    _check_in_one_layer(sigma_r_R, layers, "right") if sigma_r_R is not None else None
    rows = [np.arange(n), h.rows]
    cols = [np.arange(n), h.cols]
    diag = np.full(n, energy, dtype=np.complex128)
    if sigma_phonon is not None:
        sigma_phonon = np.asarray(sigma_phonon, dtype=np.complex128)
        if sigma_phonon.shape != (n,):
            raise ConfigError(f"phonon self-energy needs {n} entries, got {sigma_phonon.shape}")
        diag = diag - sigma_phonon
    vals = [diag, -h.vals]
    for contact in (sigma_r_L, sigma_r_R):
        if contact is None:
            continue
        r, c = np.meshgrid(contact.dofs, contact.dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(-contact.matrix.ravel())
    return SparseCoo(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


class ClusterBlockMatrix:
    """Dense blocks keyed by cluster pairs; an absent block is an exact zero.

    Both ``(i, j)`` and ``(j, i)`` are stored explicitly.
    """

    SYMMETRIES = ("complex-symmetric", "general", "skew-hermitian")

    def __init__(self, tree: SeparatorTree, blocks=None, symmetry: str = "general"):
        if symmetry not in self.SYMMETRIES:
            raise ValueError(f"unknown symmetry {symmetry!r}")
        self.tree = tree
        self.blocks = dict(blocks or {})
        self.symmetry = symmetry

    def shape_of(self, i: int, j: int) -> tuple[int, int]:
        return self.tree.clusters[i].size, self.tree.clusters[j].size

    def get(self, i: int, j: int):
        return self.blocks.get((i, j))

    def block(self, i: int, j: int) -> np.ndarray:
        b = self.blocks.get((i, j))
        return np.zeros(self.shape_of(i, j), dtype=np.complex128) if b is None else b

    def __contains__(self, key):
        return key in self.blocks

    def copy(self) -> "ClusterBlockMatrix":
        return ClusterBlockMatrix(self.tree, {k: v.copy() for k, v in self.blocks.items()},
                                  self.symmetry)

    def to_dense(self) -> np.ndarray:
        n = self.tree.n
        out = np.zeros((n, n), dtype=np.complex128)
        for (i, j), b in self.blocks.items():
            out[np.ix_(self.tree.clusters[i].dofs, self.tree.clusters[j].dofs)] = b
        return out

    def scatter(self) -> SparseCoo:
        """Back to global ``(row, col, value)`` form."""
        rows, cols, vals = [], [], []
        for (i, j), b in self.blocks.items():
            r, c = np.nonzero(b)
            rows.append(self.tree.clusters[i].dofs[r])
            cols.append(self.tree.clusters[j].dofs[c])
            vals.append(b[r, c])
        if not rows:
            return SparseCoo(self.tree.n, [], [], [])
        return SparseCoo(self.tree.n, np.concatenate(rows), np.concatenate(cols),
                         np.concatenate(vals))


def group_by_partition(a: SparseCoo, tree: SeparatorTree,
                       symmetry: str = "complex-symmetric") -> ClusterBlockMatrix:
    """Scatter the nonzeros of ``a`` into dense cluster blocks.

    Raises
    ------
    PartitionViolation
        If a nonzero couples two clusters neither of which is an ancestor of
        the other; the exception lists the offending edges ``(u, v)``, ``u < v``.
    """
    if a.n != tree.n:
        raise ConfigError(f"matrix has {a.n} dofs, tree covers {tree.n}")
    ci = tree.owner[a.rows]
    cj = tree.owner[a.cols]
    pair_ok = {}
    bad = set()
    keys = ci * len(tree) + cj
    for key in np.unique(keys).tolist():
        i, j = divmod(key, len(tree))
        pair_ok[(i, j)] = tree.related(i, j)
    for (i, j), ok in pair_ok.items():
        if not ok:
            sel = (ci == i) & (cj == j)
            for u, v in zip(a.rows[sel].tolist(), a.cols[sel].tolist()):
                bad.add((min(u, v), max(u, v)))
    if bad:
        raise PartitionViolation(sorted(bad))

    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    starts = np.flatnonzero(np.r_[True, keys_sorted[1:] != keys_sorted[:-1]])
    ends = np.r_[starts[1:], keys_sorted.size]
    blocks = {}
    for s, e in zip(starts, ends):
        idx = order[s:e]
        i, j = divmod(int(keys_sorted[s]), len(tree))
        b = np.zeros((tree.clusters[i].size, tree.clusters[j].size), dtype=np.complex128)
        b[tree.local[a.rows[idx]], tree.local[a.cols[idx]]] = a.vals[idx]
        blocks[(i, j)] = b
    return ClusterBlockMatrix(tree, blocks, symmetry)


@dataclass
class GreensDiagonal:
    """Diagonal blocks of ``G^r`` and ``G^<`` at one energy.

    ``dofs[k]`` lists the global dofs of block ``k`` in block order.
    """

    energy: float
    dofs: list
    gr: list
    gless: list | None = None
    extra: dict = field(default_factory=dict)

    def _diag(self, blocks) -> np.ndarray:
        n = sum(d.size for d in self.dofs)
        out = np.zeros(n, dtype=np.complex128)
        for d, b in zip(self.dofs, blocks):
            out[d] = np.diagonal(b)
        return out

    def gr_diagonal(self) -> np.ndarray:
        return self._diag(self.gr)

    def gless_diagonal(self) -> np.ndarray:
        if self.gless is None:
            raise ValueError("no lesser Green's function was computed")
        return self._diag(self.gless)

    def symmetry_errors(self) -> tuple[float, float]:
        """Worst relative violation of ``G^r = (G^r)^T`` and ``G^< = -(G^<)^dagger``."""
        def rel(x, y):
            s = np.linalg.norm(y)
            return float(np.linalg.norm(x - y) / s) if s > 0 else float(np.linalg.norm(x - y))
        er = max((rel(b, b.T) for b in self.gr), default=0.0)
        el = 0.0
        if self.gless is not None:
            el = max((rel(b, -b.conj().T) for b in self.gless), default=0.0)
        return er, el
