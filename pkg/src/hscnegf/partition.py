"""Separator trees: nested dissection, the layered (RGF) chain, validation.

Levels are counted from the bottom: leaves sit on level 1 and a cluster's
level is one more than the highest level among its children, so every
cluster is processed after all of its descendants. The root alone sits on
level ``L``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import ConfigError

DEFAULT_MAX_LEAF = 64


@dataclass(frozen=True)
class Cluster:
    id: int
    level: int
    dofs: np.ndarray
    parent: int | None

    @property
    def size(self) -> int:
        return int(self.dofs.size)


class SeparatorTree:
    """Cluster hierarchy with ancestor (``P_i``) and descendant (``C_i``) sets.

    Parameters
    ----------
    dofs : list of array_like
        Degrees of freedom of each cluster; together they must partition
        ``0..n-1``. Stored sorted ascending.
    parents : list of int or None
        Parent cluster id for each cluster; exactly one ``None`` (the root).
    """

    def __init__(self, dofs, parents):
        if len(dofs) != len(parents):
            raise ConfigError("dofs and parents differ in length")
        m = len(dofs)
        roots = [i for i, p in enumerate(parents) if p is None]
        if len(roots) != 1:
            raise ConfigError(f"tree needs exactly one root, found {len(roots)}")
        self.root = roots[0]
        children = [[] for _ in range(m)]
        for i, p in enumerate(parents):
            if p is not None:
                if not 0 <= p < m or p == i:
                    raise ConfigError(f"cluster {i} has invalid parent {p}")
                children[p].append(i)
        self.children = children

        # heights, iteratively from the root to avoid deep recursion
        order, stack, seen = [], [self.root], set()
        while stack:
            c = stack.pop()
            if c in seen:
                raise ConfigError("parent links contain a cycle")
            seen.add(c)
            order.append(c)
            stack.extend(children[c])
        if len(order) != m:
            raise ConfigError("parent links do not form a single tree")
        level = [1] * m
        for c in reversed(order):
            if children[c]:
                level[c] = 1 + max(level[k] for k in children[c])

        self.clusters = [
            Cluster(i, level[i], np.sort(np.asarray(d, dtype=np.int64)), parents[i])
            for i, d in enumerate(dofs)
        ]
        self.n_levels = level[self.root]
        self.n = int(sum(c.size for c in self.clusters))

        owner = np.full(self.n, -1, dtype=np.int64)
        for c in self.clusters:
            if c.size and (c.dofs.min() < 0 or c.dofs.max() >= self.n):
                raise ConfigError(f"cluster {c.id} has dofs outside 0..{self.n - 1}")
            if np.any(owner[c.dofs] >= 0):
                raise ConfigError(f"cluster {c.id} shares dofs with another cluster")
            owner[c.dofs] = c.id
        self.owner = owner
        # local index of each dof inside its cluster
        local = np.empty(self.n, dtype=np.int64)
        for c in self.clusters:
            local[c.dofs] = np.arange(c.size)
        self.local = local

        self.ancestors = []
        for i in range(m):
            chain, p = [], parents[i]
            while p is not None:
                chain.append(p)
                p = parents[p]
            self.ancestors.append(tuple(chain))
        self._ancestor_sets = [frozenset(a) for a in self.ancestors]
        desc = [set() for _ in range(m)]
        for i in range(m):
            for a in self.ancestors[i]:
                desc[a].add(i)
        self.descendants = [tuple(sorted(d)) for d in desc]
        self.by_level = {l: [] for l in range(1, self.n_levels + 1)}
        for c in self.clusters:
            self.by_level[c.level].append(c.id)

    def __len__(self):
        return len(self.clusters)

    def __repr__(self):
        return f"SeparatorTree(n={self.n}, clusters={len(self)}, levels={self.n_levels})"

    def is_ancestor(self, a: int, i: int) -> bool:
        """True when cluster ``a`` is a strict ancestor of cluster ``i``."""
        return a in self._ancestor_sets[i]

    def related(self, i: int, j: int) -> bool:
        return i == j or self.is_ancestor(i, j) or self.is_ancestor(j, i)

    def leaves(self):
        return [c.id for c in self.clusters if not self.children[c.id]]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "levels": self.n_levels,
            "clusters": [
                {"id": c.id, "level": c.level, "parent": c.parent, "dofs": c.dofs.tolist()}
                for c in self.clusters
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "SeparatorTree":
        clusters = sorted(data["clusters"], key=lambda c: c["id"])
        if [c["id"] for c in clusters] != list(range(len(clusters))):
            raise ConfigError("cluster ids must be 0..m-1")
        return cls([c["dofs"] for c in clusters], [c["parent"] for c in clusters])


# ---------------------------------------------------------------------------
# graphs

def as_adjacency(graph, n: int | None = None) -> sp.csr_matrix:
    """Symmetric boolean CSR pattern without the diagonal.

    ``graph`` may be a scipy sparse matrix, a dense array, or an iterable of
    ``(u, v)`` edges (then ``n`` is required).
    """
    if sp.issparse(graph) or isinstance(graph, np.ndarray):
        a = sp.csr_matrix(graph)
    else:
        edges = np.asarray(list(graph), dtype=np.int64).reshape(-1, 2)
        if n is None:
            raise ValueError("n is required when passing an edge list")
        a = sp.csr_matrix((np.ones(len(edges), dtype=bool), (edges[:, 0], edges[:, 1])),
                          shape=(n, n))
    a = (a != 0)
    a = (a + a.T).tocsr()
    a.setdiag(False)
    a.eliminate_zeros()
    a.sort_indices()
    return a


def _edges(adj: sp.csr_matrix):
    coo = sp.triu(adj, k=1).tocoo()
    return coo.row, coo.col


def _distances(adj: sp.csr_matrix, start: int) -> np.ndarray:
    d = csgraph.shortest_path(adj, unweighted=True, directed=False, indices=start)
    return d


def _pseudo_peripheral(adj: sp.csr_matrix) -> np.ndarray:
    """BFS distances from a pseudo-peripheral node of a connected graph."""
    start = 0
    d = _distances(adj, start)
    ecc = d.max()
    for _ in range(8):
        far = np.flatnonzero(d == d.max())
        # among the farthest nodes prefer the lowest degree, then lowest index
        deg = np.diff(adj.indptr)[far]
        cand = int(far[np.argmin(deg)])
        d2 = _distances(adj, cand)
        if d2.max() <= ecc:
            break
        start, d, ecc = cand, d2, d2.max()
    return d


# ---------------------------------------------------------------------------
# nested dissection

@dataclass
class _Node:
    dofs: np.ndarray
    children: list = field(default_factory=list)


def nested_dissection(adjacency, atomic_groups=(), max_leaf: int = DEFAULT_MAX_LEAF,
                      coords=None) -> SeparatorTree:
    """Recursive bisection into width-1 separators.

    Each region is cut along a coordinate class: with ``coords`` (an
    ``(n, d)`` array) the axis of larger extent is tried first and the class
    holding the median dof becomes the separator; without coordinates the
    BFS level sets from a pseudo-peripheral node play that role. Nodes of
    the smaller side that still touch the other side are added to the
    separator so that removing it always disconnects the two halves.

    Atomic groups (e.g. the dofs carrying a dense contact self-energy) are
    never split and never placed in a separator; a cut that would do either
    is skipped in favour of the next class. A region holding an atomic group
    is first cut around that group (the separator is the group's neighbour
    set, at most ``2 |group| + 2`` dofs), which leaves the group alone in a
    leaf instead of at the end of a chain of halving cuts. A region with no
    admissible cut becomes a leaf even if it exceeds ``max_leaf``.

    Disconnected regions are split between their components under an empty
    separator cluster.
    """
    adj = as_adjacency(adjacency)
    n = adj.shape[0]
    if max_leaf < 1:
        raise ConfigError("max_leaf must be positive")
    group_of = np.full(n, -1, dtype=np.int64)
    for g, members in enumerate(atomic_groups):
        members = np.asarray(list(members), dtype=np.int64)
        if members.size and (members.min() < 0 or members.max() >= n):
            raise ConfigError(f"atomic group {g} has dofs outside 0..{n - 1}")
        if np.any(group_of[members] >= 0):
            raise ConfigError(f"atomic group {g} overlaps another group")
        group_of[members] = g
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.shape[0] != n:
            raise ConfigError("coords must have one row per dof")

    def split(region: np.ndarray) -> _Node:
        node = _Node(region)
        if region.size <= max_leaf:
            return node
        sub = adj[region][:, region]
        ncomp, labels = csgraph.connected_components(sub, directed=False)
        if ncomp > 1:
            sizes = np.bincount(labels, minlength=ncomp)
            left_mask = np.zeros(ncomp, dtype=bool)
            tot_l = tot_r = 0
            for c in np.argsort(-sizes, kind="stable"):
                if tot_l <= tot_r:
                    left_mask[c] = True
                    tot_l += sizes[c]
                else:
                    tot_r += sizes[c]
            in_left = left_mask[labels]
            empty = _Node(np.zeros(0, dtype=np.int64))
            empty.children = [split(region[in_left]), split(region[~in_left])]
            return empty
        cut = _isolate_group(region, sub)
        if cut is None:
            cut = _find_cut(region, sub)
        if cut is None:
            return node
        left, sep, right = cut
        node = _Node(sep)
        node.children = [split(part) for part in (left, right) if part.size]
        return node

    def _isolate_group(region, sub):
        gids = group_of[region]
        present = np.unique(gids[gids >= 0])
        if present.size == 0:
            return None
        sizes = [(-(gids == g).sum(), g) for g in present.tolist()]
        for negsize, g in sorted(sizes):
            in_g = gids == g
            if in_g.all():
                return None
            touch = np.asarray(sub[in_g].sum(axis=0)).ravel() > 0
            in_sep = touch & ~in_g
            rest = ~in_g & ~in_sep
            if (not in_sep.any() or not rest.any() or in_sep.sum() > 2 * (-negsize) + 2
                    or np.any(gids[in_sep] >= 0)):
                continue
            return region[in_g], region[in_sep], region[rest]
        return None

    def _find_cut(region, sub):
        if coords is not None:
            keys = coords[region]
            extent = keys.max(axis=0) - keys.min(axis=0)
            axes = [keys[:, a] for a in np.argsort(-extent, kind="stable") if extent[a] > 0]
        else:
            axes = [_pseudo_peripheral(sub)]
        candidates = []
        for rank, key in enumerate(axes):
            classes, inverse = np.unique(np.round(key, 9), return_inverse=True)
            if classes.size < 2:
                continue
            order = np.lexsort((region, key))
            med = inverse[order[(region.size - 1) // 2]]
            for c in range(classes.size):
                candidates.append((abs(c - med), rank, c, inverse))
        candidates.sort(key=lambda t: t[:3])
        for _, _, c, inverse in candidates:
            cut = _try_class(region, sub, inverse, c)
            if cut is not None:
                return cut
        return None

    def _try_class(region, sub, inverse, c):
        in_sep = inverse == c
        lo = inverse < c
        hi = inverse > c
        # grow the separator with boundary nodes if the class does not cut
        cross = sub[lo][:, hi]
        if cross.nnz:
            lo_touch = np.flatnonzero(np.asarray(cross.sum(axis=1)).ravel() > 0)
            hi_touch = np.flatnonzero(np.asarray(cross.sum(axis=0)).ravel() > 0)
            lo_idx, hi_idx = np.flatnonzero(lo), np.flatnonzero(hi)
            options = [lo_idx[lo_touch], hi_idx[hi_touch]]
            if lo.sum() > hi.sum():
                options.reverse()
            for extra in options:
                if not np.any(group_of[region[extra]] >= 0):
                    in_sep = in_sep.copy()
                    in_sep[extra] = True
                    lo = lo & ~in_sep
                    hi = hi & ~in_sep
                    break
            else:
                return None
        if not in_sep.any() or in_sep.all():
            return None
        gsep = group_of[region[in_sep]]
        if np.any(gsep >= 0):
            return None
        glo = set(group_of[region[lo]].tolist()) - {-1}
        ghi = set(group_of[region[hi]].tolist()) - {-1}
        if glo & ghi:
            return None
        return region[lo], region[in_sep], region[hi]

    for g, members in enumerate(atomic_groups):
        if len(members) > n:
            raise ConfigError(f"atomic group {g} larger than the graph")

    sys.setrecursionlimit(max(sys.getrecursionlimit(), 10 * n + 100))
    root = split(np.arange(n, dtype=np.int64))

    # post-order numbering: children before parents, left before right
    dofs, parents = [], []

    def number(node):
        ids = [number(ch) for ch in node.children]
        me = len(dofs)
        dofs.append(node.dofs)
        parents.append(None)
        for i in ids:
            parents[i] = me
        return me

    number(root)
    tree = SeparatorTree(dofs, parents)
    for g, members in enumerate(atomic_groups):
        owners = set(tree.owner[np.asarray(list(members), dtype=np.int64)].tolist())
        if len(owners) > 1:
            raise ConfigError(f"atomic group {g} could not be kept inside one cluster")
    return tree


def rgf_chain_partition(layers) -> SeparatorTree:
    """Maximally unbalanced tree: layer ``k`` is the only child of layer ``k+1``.

    Folding this tree layer by layer from the first layer is exactly the
    left-to-right sweep of the recursive Green's function method.
    """
    layers = [np.asarray(l, dtype=np.int64) for l in layers]
    if not layers:
        raise ConfigError("need at least one layer")
    parents = [k + 1 for k in range(len(layers) - 1)] + [None]
    return SeparatorTree(layers, parents)


# ---------------------------------------------------------------------------
# validation

@dataclass
class PartitionReport:
    violations: list
    n_clusters: int
    n_levels: int
    separator_sizes: list
    leaf_sizes: list

    @property
    def valid(self) -> bool:
        return not self.violations

    def summary(self) -> dict:
        def stats(xs):
            if not xs:
                return {"count": 0, "min": 0, "max": 0, "mean": 0.0}
            return {"count": len(xs), "min": int(min(xs)), "max": int(max(xs)),
                    "mean": float(np.mean(xs))}
        return {
            "valid": self.valid,
            "violations": len(self.violations),
            "clusters": self.n_clusters,
            "levels": self.n_levels,
            "separators": stats(self.separator_sizes),
            "leaves": stats(self.leaf_sizes),
        }

    def to_text(self) -> str:
        lines = [f"violations: {len(self.violations)}"]
        lines += [f"  edge {u} {v}" for u, v in self.violations]
        s = self.summary()
        lines.append(f"clusters: {s['clusters']}")
        lines.append(f"levels: {s['levels']}")
        for name in ("separators", "leaves"):
            st = s[name]
            lines.append(f"{name}: count={st['count']} min={st['min']} max={st['max']} "
                         f"mean={st['mean']:.17g}")
        return "\n".join(lines) + "\n"


def crossing_edges(tree: SeparatorTree, adjacency) -> list:
    """Edges ``(u, v)``, ``u < v``, joining clusters that are not ancestor-related."""
    adj = as_adjacency(adjacency)
    if adj.shape[0] != tree.n:
        raise ConfigError(f"graph has {adj.shape[0]} dofs, tree has {tree.n}")
    rows, cols = _edges(adj)
    ci, cj = tree.owner[rows], tree.owner[cols]
    bad = []
    pairs = {}
    for u, v, a, b in zip(rows.tolist(), cols.tolist(), ci.tolist(), cj.tolist()):
        if a == b:
            continue
        key = (a, b)
        ok = pairs.get(key)
        if ok is None:
            ok = pairs[key] = tree.related(a, b)
        if not ok:
            bad.append((u, v))
    bad.sort()
    return bad


def validate_partition(tree: SeparatorTree, adjacency) -> PartitionReport:
    """Check that no edge joins two unrelated clusters; report size statistics."""
    bad = crossing_edges(tree, adjacency)
    leaves = set(tree.leaves())
    return PartitionReport(
        violations=bad,
        n_clusters=len(tree),
        n_levels=tree.n_levels,
        separator_sizes=[c.size for c in tree.clusters if c.id not in leaves],
        leaf_sizes=[c.size for c in tree.clusters if c.id in leaves],
    )


def separates(tree: SeparatorTree, adjacency, cluster: int) -> bool:
    """Flood-fill check that removing ``cluster`` and its ancestors disconnects
    the subtrees hanging below ``cluster``."""
    adj = as_adjacency(adjacency)
    kids = tree.children[cluster]
    if len(kids) < 2:
        return True
    blocks = []
    for k in kids:
        ids = (k,) + tree.descendants[k]
        blocks.append(np.concatenate([tree.clusters[i].dofs for i in ids]))
    region = np.concatenate(blocks)
    label = np.concatenate([np.full(b.size, t) for t, b in enumerate(blocks)])
    sub = adj[region][:, region]
    _, comp = csgraph.connected_components(sub, directed=False)
    for t in range(len(blocks)):
        mine = set(comp[label == t].tolist())
        others = set(comp[label != t].tolist())
        if mine & others:
            return False
    return True
