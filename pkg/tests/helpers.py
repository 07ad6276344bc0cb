"""Shared builders for solver tests."""

from __future__ import annotations

import numpy as np

from hscnegf.blocks import SparseCoo, group_by_partition
from hscnegf.device import SyntheticSpec, build_synthetic_device, group_lesser
from hscnegf.hsc import hsc_fold, hsc_gless, hsc_gr
from hscnegf.partition import SeparatorTree
from hscnegf.rgf import LayeredSystem, rgf_gless, rgf_gr
from hscnegf.simulate import Conditions, device_tree, system_at


def rel(x, ref) -> float:
    x, ref = np.asarray(x), np.asarray(ref)
    scale = np.linalg.norm(ref)
    return float(np.linalg.norm(x - ref) / (scale if scale > 0 else 1.0))


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def cs_block(rng, k, shift=0.0):
    m = crandn(rng, k, k)
    return m + m.T + shift * np.eye(k)


def skew_block(rng, k):
    m = crandn(rng, k, k)
    return m - m.conj().T


def synthetic_system(nx, ny, seed, max_leaf=16):
    """``A`` (dense contacts), its device and nested-dissection tree."""
    dev = build_synthetic_device(SyntheticSpec(Nx=nx, Ny=ny, seed=seed))
    a, _ = system_at(dev, 0.0, Conditions(contact_model="fixed"))
    tree = device_tree(dev, max_leaf)
    return a, dev, tree


def cluster_layer_groups(tree, layers):
    """Dof sets lying in one cluster and one layer (block-diagonal for both solvers)."""
    layer_of = np.empty(tree.n, dtype=np.int64)
    for k, l in enumerate(layers):
        layer_of[l] = k
    key = tree.owner * (len(layers) + 1) + layer_of
    order = np.argsort(key, kind="stable")
    _, starts = np.unique(key[order], return_index=True)
    return [np.sort(g) for g in np.split(order, starts[1:])]


def layer_index(layers, n):
    owner = np.empty(n, dtype=np.int64)
    local = np.empty(n, dtype=np.int64)
    for k, l in enumerate(layers):
        owner[l] = k
        local[l] = np.arange(len(l))
    return owner, local, [len(l) for l in layers]


def run_hsc(a, tree, blocks=None, ledger=None, **kw):
    cb = group_by_partition(a, tree)
    f = hsc_fold(cb, ledger)
    g0 = hsc_gr(f, ledger)
    p = None
    if blocks is not None:
        sig = group_lesser(blocks, tree.owner, tree.local, [c.size for c in tree.clusters])
        p = hsc_gless(f, g0, sig, ledger, **kw)
    return f, g0, p


def run_rgf(a, layers, blocks=None, ledger=None):
    owner, local, sizes = layer_index(layers, a.n)
    sig = group_lesser(blocks, owner, local, sizes) if blocks is not None else None
    sys = LayeredSystem.from_sparse(a, layers, sig)
    gr = rgf_gr(sys, ledger, keep=True)
    gl = rgf_gless(sys, ledger, gr=gr) if blocks is not None else None
    return sys, gr, gl


def five_cluster_instance(seed, sizes=(3, 4, 3, 3, 2)):
    """Random complex-symmetric ``A`` on the five-cluster three-level layout.

    Clusters 0, 1 and 3 are leaves, 2 separates 0 from 1 and 4 is the root;
    cluster ``k`` here is region ``k + 1`` of the worked three-level example.
    """
    rng = np.random.default_rng(seed)
    off = np.concatenate([[0], np.cumsum(sizes)])
    sl = [slice(off[k], off[k + 1]) for k in range(5)]
    n = int(off[-1])
    a = np.zeros((n, n), dtype=np.complex128)
    for k in range(5):
        a[sl[k], sl[k]] = cs_block(rng, sizes[k], shift=6.0)
    for i, j in ((0, 2), (0, 4), (1, 2), (1, 4), (2, 4), (3, 4)):
        b = crandn(rng, sizes[i], sizes[j])
        a[sl[i], sl[j]] = b
        a[sl[j], sl[i]] = b.T
    tree = SeparatorTree([np.arange(off[k], off[k + 1]) for k in range(5)], [2, 2, 4, 4, None])
    sigma = {k: skew_block(rng, sizes[k]) for k in range(5)}
    return SparseCoo.from_dense(a), tree, sl, sigma


def _dag(m):
    return m.conj().T


def three_cluster_instance(seed, nl=4, nr=3, ns=5, couple=True):
    """Random complex-symmetric ``A`` split as L, R (leaves) and separator S."""
    rng = np.random.default_rng(seed)
    n = nl + nr + ns
    L, R, S = np.arange(nl), np.arange(nl, nl + nr), np.arange(nl + nr, n)
    a = np.zeros((n, n), dtype=np.complex128)
    for d in (L, R, S):
        a[np.ix_(d, d)] = cs_block(rng, d.size, shift=6.0)
    if couple:
        for d in (L, R):
            b = crandn(rng, d.size, ns)
            a[np.ix_(d, S)] = b
            a[np.ix_(S, d)] = b.T
    tree = SeparatorTree([L, R, S], [2, 2, None])
    sigma = {0: skew_block(rng, nl), 1: skew_block(rng, nr), 2: skew_block(rng, ns)}
    return a, tree, (L, R, S), sigma


def three_cluster_residuals(seed, **sizes):
    """Relative errors of HSC against the three-cluster closed forms."""
    inv = np.linalg.inv
    a, tree, (L, R, S), sigma = three_cluster_instance(seed, **sizes)
    f, g0, p = run_hsc(SparseCoo.from_dense(a), tree,
                       [(tree.clusters[c].dofs, s) for c, s in sigma.items()])
    out = {}
    for x, xs, c, s_xx in ((L, "L", 0, sigma[0]), (R, "R", 1, sigma[1])):
        axx, axs, ass = a[np.ix_(x, x)], a[np.ix_(x, S)], a[np.ix_(S, S)]
        y = R if xs == "L" else L
        ayy, ays, s_yy = a[np.ix_(y, y)], a[np.ix_(y, S)], sigma[1 - c]
        a_hat = ass - axs.T @ inv(axx) @ axs - ays.T @ inv(ayy) @ ays
        gss = inv(a_hat)
        gxs = -inv(axx) @ axs @ gss
        gys = -inv(ayy) @ ays @ gss
        gxx = inv(axx) + inv(axx) @ axs @ gss @ axs.T @ inv(axx)
        gl_ss = gss @ (sigma[2] @ _dag(gss) - axs.T @ inv(axx) @ s_xx @ _dag(gxs.T)
                       - ays.T @ inv(ayy) @ s_yy @ _dag(gys.T))
        gl_xs = -inv(axx) @ axs @ gl_ss + inv(axx) @ s_xx @ _dag(gxs.T)
        # the cross term enters with a plus sign (the dense oracle agrees)
        gl_xx = inv(axx) @ s_xx @ _dag(gxx) + inv(axx) @ axs @ _dag(gl_xs)
        out["A_SS"] = rel(f.a_top[(2, 2)], a_hat)
        out["Gr_SS"] = rel(g0[(2, 2)], gss)
        out[f"Gr_{xs}S"] = rel(g0[(c, 2)], gxs)
        out[f"Gr_{xs}{xs}"] = rel(g0[(c, c)], gxx)
        out["Gl_SS"] = rel(p[2], gl_ss)
        out[f"Gl_{xs}{xs}"] = rel(p[c], gl_xx)
        # G^<_XS is not a diagonal block; compare it with the dense product
        sig = np.zeros_like(a)
        for k, s in sigma.items():
            sig[np.ix_(tree.clusters[k].dofs, tree.clusters[k].dofs)] = s
        g = inv(a)
        out[f"Gl_{xs}S"] = rel(gl_xs, (g @ sig @ _dag(g))[np.ix_(x, S)])
    return out


def five_cluster_residuals(seed, sizes=(3, 4, 3, 3, 2)):
    """Relative errors of every intermediate block of the five-cluster
    three-level example against direct evaluation, plus the final diagonals
    against the dense oracle (keys ``final_*``)."""
    inv = np.linalg.inv
    a, tree, sl, sigma = five_cluster_instance(seed, sizes)
    d = a.to_dense()
    A = lambda i, j: d[sl[i], sl[j]]  # noqa: E731
    s = {}
    f = hsc_fold(group_by_partition(a, tree), snapshots=s)
    g0 = hsc_gr(f, snapshots=s)
    p = hsc_gless(f, g0, sigma, snapshots=s, full=True)
    ps = f.psi
    out = {}
    i1, i2, i4 = inv(A(0, 0)), inv(A(1, 1)), inv(A(3, 3))
    a33 = A(2, 2) - A(0, 2).T @ i1 @ A(0, 2) - A(1, 2).T @ i2 @ A(1, 2)
    a35 = A(2, 4) - A(0, 2).T @ i1 @ A(0, 4) - A(1, 2).T @ i2 @ A(1, 4)
    a55 = (A(4, 4) - A(0, 4).T @ i1 @ A(0, 4) - A(1, 4).T @ i2 @ A(1, 4)
           - A(3, 4).T @ i4 @ A(3, 4))
    out["A33^(1)"] = rel(s["A1"][(2, 2)], a33)
    out["A35^(1)"] = rel(s["A1"][(2, 4)], a35)
    out["A55^(1)"] = rel(s["A1"][(4, 4)], a55)
    out["A55^(2)"] = rel(s["A2"][(4, 4)], a55 - a35.T @ inv(a33) @ a35)

    g2, g1, g = s["G2"], s["G1"], s["G0"]
    out["G55^(2)"] = rel(g2[(4, 4)], inv(a55 - a35.T @ inv(a33) @ a35))
    g35 = ps[(2, 4)] @ g2[(4, 4)]
    out["G35^(1)"] = rel(g1[(2, 4)], g35)
    out["G33^(1)"] = rel(g1[(2, 2)], g2[(2, 2)] + ps[(2, 4)] @ g35.T)
    out["G45^(0)"] = rel(g[(3, 4)], ps[(3, 4)] @ g[(4, 4)])
    out["G44^(0)"] = rel(g[(3, 3)], i4 + ps[(3, 4)] @ g[(3, 4)].T)
    g15 = ps[(0, 4)] @ g[(4, 4)] + ps[(0, 2)] @ g[(2, 4)]
    g13 = ps[(0, 2)] @ g[(2, 2)] + ps[(0, 4)] @ g[(2, 4)].T
    out["G15^(0)"] = rel(g[(0, 4)], g15)
    out["G13^(0)"] = rel(g[(0, 2)], g13)
    out["G11^(0)"] = rel(g[(0, 0)], i1 + ps[(0, 2)] @ g13.T + ps[(0, 4)] @ g15.T)

    n0, n1, n2 = s["N0"], s["N1"], s["N2"]
    out["N31"] = rel(n0[(2, 0)], sigma[2] @ _dag(g0[(0, 2)]))
    n33 = n0[(2, 2)] - A(0, 2).T @ i1 @ n0[(0, 2)] - A(1, 2).T @ i2 @ n0[(1, 2)]
    n35 = n0[(2, 4)] - A(0, 2).T @ i1 @ n0[(0, 4)] - A(1, 2).T @ i2 @ n0[(1, 4)]
    n53 = n0[(4, 2)] - A(0, 4).T @ i1 @ n0[(0, 2)] - A(1, 4).T @ i2 @ n0[(1, 2)]
    n55 = (n0[(4, 4)] - A(0, 4).T @ i1 @ n0[(0, 4)] - A(1, 4).T @ i2 @ n0[(1, 4)]
           - A(3, 4).T @ i4 @ n0[(3, 4)])
    out["N33^(1)"] = rel(n1[(2, 2)], n33)
    out["N35^(1)"] = rel(n1[(2, 4)], n35)
    out["N53^(1)"] = rel(n1[(4, 2)], n53)
    out["N55^(1)"] = rel(n1[(4, 4)], n55)
    out["N55^(2)"] = rel(n2[(4, 4)], n55 - a35.T @ inv(a33) @ n35)

    p2, p1, p0 = s["P2"], s["P1"], s["P0"]
    out["P^(2)"] = max(rel(p2[k], f.inv[k[0]] @ v) for k, v in n2.items())
    p35 = p2[(2, 4)] + ps[(2, 4)] @ p2[(4, 4)]
    out["P35^(1)"] = rel(p1[(2, 4)], p35)
    out["P53^(1)"] = rel(p1[(4, 2)], -_dag(p35))
    out["P33^(1)"] = rel(p1[(2, 2)], p2[(2, 2)] - ps[(2, 4)] @ _dag(p35))
    p45 = p1[(3, 4)] + ps[(3, 4)] @ p1[(4, 4)]
    out["P45^(0)"] = rel(p0[(3, 4)], p45)
    out["P44^(0)"] = rel(p0[(3, 3)], p1[(3, 3)] + i4 @ A(3, 4) @ _dag(p45))
    p15 = p1[(0, 4)] + ps[(0, 4)] @ p1[(4, 4)] + ps[(0, 2)] @ p1[(2, 4)]
    p13 = p1[(0, 2)] + ps[(0, 2)] @ p1[(2, 2)] - ps[(0, 4)] @ _dag(p1[(2, 4)])
    out["P15^(0)"] = rel(p0[(0, 4)], p15)
    out["P13^(0)"] = rel(p0[(0, 2)], p13)
    out["P11^(0)"] = rel(p0[(0, 0)], p1[(0, 0)] - ps[(0, 2)] @ _dag(p13) - ps[(0, 4)] @ _dag(p15))

    g = inv(d)
    sig = np.zeros_like(d)
    for c, b in sigma.items():
        sig[sl[c], sl[c]] = b
    gl = g @ sig @ _dag(g)
    out["final_Gr"] = max(rel(b, g[sl[i], sl[j]]) for (i, j), b in g0.items())
    out["final_Gl"] = max(rel(p[c], gl[sl[c], sl[c]]) for c in range(5))
    return out
