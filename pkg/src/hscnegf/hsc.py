"""Hierarchical Schur complement solver for diagonal blocks of G^r and G^<.

The three passes work over a :class:`~hscnegf.partition.SeparatorTree`:

``hsc_fold``
    Eliminates clusters level by level (leaves first), storing the
    elimination blocks ``Psi[i, j] = -inv(A_ii) A_ij`` for each ancestor
    ``j`` that ``i`` couples to.
``hsc_gr``
    Inverts the root block and extracts ``G_ii`` together with every
    ancestor-pair block ``G_ij`` from the top down.
``hsc_gless``
    Forms ``N = Sigma^< (G^(0))^dagger``, folds it with the same ``Psi``,
    applies the block-diagonal inverse, and extracts ``P`` from the top down
    using the skew-Hermitian relation ``P_ji = -P_ij^dagger``.

Block maps are plain ``dict`` objects keyed by ``(i, j)``; an absent key is
an exact zero. Within a level, clusters are visited in ascending id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import ClusterBlockMatrix, GreensDiagonal
from .dense import FlopLedger, inverse, matmul
from .errors import NonSkewHermitianInput, SingularBlock
from .partition import SeparatorTree

#: relative tolerance for the skew-Hermitian check on Sigma^< blocks
SKEW_RTOL = 1e-10


def _copy_map(blocks: dict) -> dict:
    return {k: v.copy() for k, v in blocks.items()}


def _accumulate(target: dict, key, value) -> None:
    cur = target.get(key)
    target[key] = value if cur is None else cur + value


@dataclass
class HscFactorization:
    """Elimination data produced by :func:`hsc_fold`.

    Attributes
    ----------
    psi : dict
        ``psi[(i, j)]`` for ``j`` an ancestor of ``i`` coupled to it at
        elimination time.
    inv : dict
        ``inv[i]`` is the inverse of ``A_ii`` at the level ``i`` was
        eliminated; the root entry is filled in by :func:`hsc_gr`.
    coupled : dict
        ``coupled[i]`` lists the ancestors ``j`` with a stored ``psi[(i, j)]``,
        ordered from the parent upwards.
    a_top : dict
        Blocks of ``A^(L-1)`` (block diagonal).
    """

    tree: SeparatorTree
    psi: dict
    inv: dict
    coupled: dict
    a_top: dict
    n_levels: int = field(init=False)

    def __post_init__(self):
        self.n_levels = self.tree.n_levels

    def root_inverse(self, ledger: FlopLedger | None = None) -> np.ndarray:
        r = self.tree.root
        if r not in self.inv:
            a = self.a_top.get((r, r))
            if a is None:
                a = np.zeros((self.tree.clusters[r].size,) * 2, dtype=np.complex128)
            try:
                self.inv[r] = inverse(a, ledger)
            except SingularBlock as exc:
                raise exc.located(cluster=r, level=self.n_levels) from None
        return self.inv[r]


def hsc_fold(a: ClusterBlockMatrix, ledger: FlopLedger | None = None,
             snapshots: dict | None = None) -> HscFactorization:
    """Fold every non-root level onto its ancestors.

    Parameters
    ----------
    a : ClusterBlockMatrix
        ``A(E)`` grouped over the separator tree; left untouched.
    ledger : FlopLedger, optional
    snapshots : dict, optional
        If given, receives ``"A<l>"`` copies of ``A^(l)`` for ``l = 1..L-1``.

    Raises
    ------
    SingularBlock
        If a diagonal block is singular; carries the cluster id and level.
    """
    tree = a.tree
    work = dict(a.blocks)
    psi, inv, coupled = {}, {}, {}
    for level in range(1, tree.n_levels):
        for i in tree.by_level[level]:
            aii = work.get((i, i))
            if aii is None:
                aii = np.zeros((tree.clusters[i].size,) * 2, dtype=np.complex128)
            try:
                inv_i = inverse(aii, ledger)
            except SingularBlock as exc:
                raise exc.located(cluster=i, level=level) from None
            inv[i] = inv_i
            s_i = [j for j in tree.ancestors[i] if (i, j) in work]
            coupled[i] = s_i
            for j in s_i:
                psi[(i, j)] = -matmul(inv_i, work[(i, j)], ledger)
            for p, j in enumerate(s_i):
                for k in s_i[p:]:
                    upd = matmul(psi[(i, j)].T, work[(i, k)], ledger)
                    cur = work.get((j, k))
                    new = upd if cur is None else cur + upd
                    work[(j, k)] = new
                    if j != k:
                        work[(k, j)] = new.T
            for j in tree.ancestors[i]:
                work.pop((i, j), None)
                work.pop((j, i), None)
        if snapshots is not None:
            snapshots[f"A{level}"] = _copy_map(work)
    return HscFactorization(tree, psi, inv, coupled, work)


def hsc_gr(f: HscFactorization, ledger: FlopLedger | None = None,
           snapshots: dict | None = None) -> dict:
    """Extract ``G^(0)``: diagonal and ancestor-pair blocks of ``G^r``.

    Returns a block map holding ``(i, i)`` for every cluster and both
    ``(i, j)`` and ``(j, i)`` for every ancestor ``j`` of ``i``.
    ``snapshots`` (optional) receives ``"G<l>"`` for ``l = L-1..0``.
    """
    tree = f.tree
    f.root_inverse(ledger)
    g = {(c, c): f.inv[c] for c in range(len(tree))}
    top = tree.n_levels
    if snapshots is not None:
        snapshots[f"G{top - 1}"] = _copy_map(g)
    # clusters on level l+1 produce G^(l)
    for level in range(top - 1, 0, -1):
        for i in tree.by_level[level]:
            s_i = f.coupled[i]
            ni = tree.clusters[i].size
            for j in tree.ancestors[i]:
                acc = np.zeros((ni, tree.clusters[j].size), dtype=np.complex128)
                for k in s_i:
                    acc += matmul(f.psi[(i, k)], g[(k, j)], ledger)
                g[(i, j)] = acc
                g[(j, i)] = acc.T
            gii = g[(i, i)]
            for j in s_i:
                gii = gii + matmul(f.psi[(i, j)], g[(j, i)], ledger)
            g[(i, i)] = gii
        if snapshots is not None:
            snapshots[f"G{level - 1}"] = _copy_map(g)
    return g


def check_skew_hermitian(sigma_lesser: dict, rtol: float = SKEW_RTOL) -> None:
    """Raise :class:`NonSkewHermitianInput` unless every block satisfies
    ``||S + S^dagger|| <= rtol * ||S||``."""
    for c, s in sigma_lesser.items():
        scale = np.linalg.norm(s)
        if np.linalg.norm(s + s.conj().T) > rtol * max(scale, np.finfo(float).tiny):
            raise NonSkewHermitianInput(f"lesser self-energy block of cluster {c} "
                                        "is not skew-Hermitian")


def hsc_gless(f: HscFactorization, g0: dict, sigma_lesser: dict,
              ledger: FlopLedger | None = None, snapshots: dict | None = None,
              full: bool = False, consume: bool = False) -> dict:
    """Diagonal blocks of ``G^< = G^r Sigma^< (G^r)^dagger``.

    Parameters
    ----------
    f : HscFactorization
    g0 : dict
        Output of :func:`hsc_gr` on the same factorization.
    sigma_lesser : dict
        ``{cluster: block}``; clusters missing from the map have a zero block.
    full : bool
        Also carry the blocks ``N_ji``, ``P_ji`` with ``i`` a descendant of
        ``j``. They never feed a diagonal block, so the default skips them;
        ``full=True`` reproduces every intermediate block of the worked
        three-level example. Without it the blocks ``P_ji`` above the
        diagonal are not stored but formed as ``-P_ij^dagger`` when read.
    consume : bool
        Remove the off-diagonal blocks from ``g0`` once ``N`` is formed
        (lowers peak memory on large trees; diagonal blocks are kept).
    snapshots : dict, optional
        Receives ``"N<l>"`` (``l = 0..L-1``) and ``"P<l>"`` (``l = L-1..0``).

    Returns
    -------
    dict
        ``{cluster: P_ii}`` for every cluster.
    """
    tree = f.tree
    check_skew_hermitian(sigma_lesser)
    top = tree.n_levels

    def wanted(i, k):
        return full or i == k or tree.is_ancestor(k, i)

    # Step 1: N = Sigma^< conj(G^(0)) block by block (G^(0) is symmetric)
    n_map = {}
    for (i, k) in list(g0):
        gik = g0[(i, k)] if i == k or not consume else g0.pop((i, k))
        s = sigma_lesser.get(i)
        if s is None or not wanted(i, k):
            continue
        n_map[(i, k)] = matmul(s, gik.conj(), ledger)
    gik = None
    if snapshots is not None:
        snapshots["N0"] = _copy_map(n_map)

    # Step 2: fold N with the same elimination blocks
    for level in range(1, top):
        for i in tree.by_level[level]:
            for j in f.coupled[i]:
                psi_t = f.psi[(i, j)].T
                for k in tree.ancestors[i]:
                    nik = n_map.get((i, k))
                    if nik is None or not wanted(j, k):
                        continue
                    _accumulate(n_map, (j, k), matmul(psi_t, nik, ledger))
        if snapshots is not None:
            snapshots[f"N{level}"] = _copy_map(n_map)

    # Step 3: P^(L-1) = G^(L-1) N^(L-1), block diagonal on the left
    f.root_inverse(ledger)
    p_map = {}
    for key in list(n_map):
        p_map[key] = matmul(f.inv[key[0]], n_map.pop(key), ledger)
    if snapshots is not None:
        snapshots[f"P{top - 1}"] = _copy_map(p_map)

    def p_get(k, j):
        # finalized P_kj with k an ancestor of j is -P_jk^dagger
        if not full and k != j and tree.is_ancestor(k, j):
            pjk = p_map.get((j, k))
            return None if pjk is None else -pjk.conj().T
        return p_map.get((k, j))

    # Step 4: extract from the top down
    for level in range(top - 1, 0, -1):
        for i in tree.by_level[level]:
            s_i = f.coupled[i]
            ni = tree.clusters[i].size
            down = {}
            for j in tree.ancestors[i]:
                acc = p_map.get((i, j))
                acc = (np.zeros((ni, tree.clusters[j].size), dtype=np.complex128)
                       if acc is None else acc.copy())
                for k in s_i:
                    pkj = p_get(k, j)
                    if pkj is not None:
                        acc += matmul(f.psi[(i, k)], pkj, ledger)
                p_map[(i, j)] = acc
                down[j] = -acc.conj().T
                if full:
                    p_map[(j, i)] = down[j]
            pii = p_map.get((i, i))
            pii = np.zeros((ni, ni), dtype=np.complex128) if pii is None else pii
            for j in s_i:
                pii = pii + matmul(f.psi[(i, j)], down[j], ledger)
            p_map[(i, i)] = pii
        if snapshots is not None:
            snapshots[f"P{level - 1}"] = _copy_map(p_map)

    out = {}
    for c in range(len(tree)):
        b = p_map.get((c, c))
        out[c] = np.zeros((tree.clusters[c].size,) * 2, dtype=np.complex128) if b is None else b
    return out


def hsc_solve(a: ClusterBlockMatrix, sigma_lesser: dict | None = None,
              ledger: FlopLedger | None = None, energy: float = float("nan")) -> GreensDiagonal:
    """Convenience driver: fold, extract ``G^r`` and (optionally) ``G^<``.

    The returned :class:`GreensDiagonal` is ordered by cluster id.
    """
    f = hsc_fold(a, ledger)
    g0 = hsc_gr(f, ledger)
    tree = a.tree
    ids = range(len(tree))
    gr = [g0[(c, c)] for c in ids]
    gless = None
    if sigma_lesser is not None:
        p = hsc_gless(f, g0, sigma_lesser, ledger)
        gless = [p[c] for c in ids]
    return GreensDiagonal(energy, [tree.clusters[c].dofs for c in ids], gr, gless)
