"""Fold and extract on the smallest separator tree.

Two leaves L and R share a separator S. After folding, the root block is the
Schur complement of S; extraction then recovers G_LL, G_RR and the
couplings to S. Everything is compared with the dense inverse.
"""

import numpy as np

from hscnegf import (FlopLedger, SeparatorTree, SparseCoo, dense_gless, dense_gr,
                     group_by_partition, hsc_fold, hsc_gless, hsc_gr)

rng = np.random.default_rng(0)
sizes = {"L": 4, "R": 3, "S": 2}
n = sum(sizes.values())
L, R, S = np.arange(0, 4), np.arange(4, 7), np.arange(7, 9)

a = np.zeros((n, n), dtype=complex)
for d in (L, R, S):
    m = rng.normal(size=(d.size, d.size)) + 1j * rng.normal(size=(d.size, d.size))
    a[np.ix_(d, d)] = m + m.T + 6 * np.eye(d.size)
for d in (L, R):
    b = rng.normal(size=(d.size, S.size)) + 1j * rng.normal(size=(d.size, S.size))
    a[np.ix_(d, S)] = b
    a[np.ix_(S, d)] = b.T

tree = SeparatorTree([L, R, S], [2, 2, None])
led = FlopLedger()
f = hsc_fold(group_by_partition(SparseCoo.from_dense(a), tree), led)
g0 = hsc_gr(f, led)

inv = np.linalg.inv
a_hat = (a[np.ix_(S, S)] - a[np.ix_(L, S)].T @ inv(a[np.ix_(L, L)]) @ a[np.ix_(L, S)]
         - a[np.ix_(R, S)].T @ inv(a[np.ix_(R, R)]) @ a[np.ix_(R, S)])
print("root block vs Schur complement:", np.abs(f.a_top[(2, 2)] - a_hat).max())

g = dense_gr(a)
for c, name in enumerate("LRS"):
    d = tree.clusters[c].dofs
    print(f"G_{name}{name} error: {np.abs(g0[(c, c)] - g[np.ix_(d, d)]).max():.2e}")
print("G_LS error:", f"{np.abs(g0[(0, 2)] - g[np.ix_(L, S)]).max():.2e}")

# lesser self-energy on the two leaves only (the contacts)
sigma = {}
for c, d in ((0, L), (1, R)):
    m = rng.normal(size=(d.size, d.size)) + 1j * rng.normal(size=(d.size, d.size))
    sigma[c] = m - m.conj().T
p = hsc_gless(f, g0, sigma, led)
sig = np.zeros_like(a)
for c, b in sigma.items():
    d = tree.clusters[c].dofs
    sig[np.ix_(d, d)] = b
gl = dense_gless(g, sig)
for c, name in enumerate("LRS"):
    d = tree.clusters[c].dofs
    print(f"G^<_{name}{name} error: {np.abs(p[c] - gl[np.ix_(d, d)]).max():.2e}")
print("ledger:", led.multiply_ops, "multiply,", led.inverse_ops, "inverse")
