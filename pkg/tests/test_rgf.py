import numpy as np
import pytest

from hscnegf.dense import FlopLedger
from hscnegf.errors import NonSkewHermitianInput, PartitionViolation, SingularBlock
from hscnegf.oracle import dense_gless, dense_gr
from hscnegf.rgf import LayeredSystem, rgf_gless, rgf_gr, rgf_solve
from helpers import crandn, cs_block, rel, skew_block, synthetic_system


def random_layered(rng, sizes, sigma_layers=(), couple=True):
    diag = [cs_block(rng, k, shift=8.0) for k in sizes]
    upper = [crandn(rng, sizes[k], sizes[k + 1]) * (1.0 if couple else 0.0)
             for k in range(len(sizes) - 1)]
    sig = [skew_block(rng, sizes[k]) if k in sigma_layers else None for k in range(len(sizes))]
    off = np.concatenate([[0], np.cumsum(sizes)])
    dofs = [np.arange(off[k], off[k + 1]) for k in range(len(sizes))]
    return LayeredSystem(diag, upper, sig, dofs)


def to_dense(sys):
    n = sum(d.size for d in sys.dofs)
    a = np.zeros((n, n), dtype=complex)
    s = np.zeros((n, n), dtype=complex)
    for k, d in enumerate(sys.dofs):
        a[np.ix_(d, d)] = sys.diag[k]
        if sys.sigma_lesser[k] is not None:
            s[np.ix_(d, d)] = sys.sigma_lesser[k]
    for k, u in enumerate(sys.upper):
        a[np.ix_(sys.dofs[k], sys.dofs[k + 1])] = u
        a[np.ix_(sys.dofs[k + 1], sys.dofs[k])] = u.T
    return a, s


def test_single_layer(rng):
    sys = random_layered(rng, [5], sigma_layers=[0])
    gd, gl = rgf_gr(sys)
    assert gl == []
    np.testing.assert_allclose(gd[0], np.linalg.inv(sys.diag[0]), rtol=1e-12, atol=1e-14)
    inv = np.linalg.inv(sys.diag[0])
    ref = inv @ sys.sigma_lesser[0] @ inv.conj().T
    assert rel(rgf_gless(sys)[0], ref) <= 1e-12


def test_block_diagonal_system(rng):
    sys = random_layered(rng, [3, 4, 2], couple=False)
    gd, gl = rgf_gr(sys)
    for k in range(3):
        assert rel(gd[k], np.linalg.inv(sys.diag[k])) <= 1e-12
    assert all(not b.any() for b in gl)


def test_three_layer_against_dense(rng):
    sys = random_layered(rng, [4, 4, 4])
    gd, gl = rgf_gr(sys)
    ref = dense_gr(to_dense(sys)[0])
    for k, d in enumerate(sys.dofs):
        assert rel(gd[k], ref[np.ix_(d, d)]) <= 1e-10
    for k in range(2):
        assert rel(gl[k], ref[np.ix_(sys.dofs[k + 1], sys.dofs[k])]) <= 1e-10


def test_gless_zero_sigma(rng):
    sys = random_layered(rng, [3, 3, 3])
    assert all(not b.any() for b in rgf_gless(sys))


def test_gless_four_layer_contacts_against_dense(rng):
    sys = random_layered(rng, [4, 3, 5, 4], sigma_layers=(0, 3))
    a, s = to_dense(sys)
    ref = dense_gless(dense_gr(a), s)
    out = rgf_gless(sys)
    for k, d in enumerate(sys.dofs):
        assert rel(out[k], ref[np.ix_(d, d)]) <= 1e-9


def test_gless_every_layer_and_properties(rng):
    sys = random_layered(rng, [2, 5, 3, 4, 2, 3], sigma_layers=range(6))
    a, s = to_dense(sys)
    ref = dense_gless(dense_gr(a), s)
    gd, gl = rgf_solve(sys).gr, rgf_solve(sys).gless
    for k, d in enumerate(sys.dofs):
        assert rel(gl[k], ref[np.ix_(d, d)]) <= 1e-9
        assert np.linalg.norm(gl[k] + gl[k].conj().T) <= 1e-10 * np.linalg.norm(gl[k])
        assert np.linalg.norm(gd[k] - gd[k].T) <= 1e-10 * np.linalg.norm(gd[k])


def test_non_skew_sigma_rejected(rng):
    sys = random_layered(rng, [3, 3])
    sys.sigma_lesser[1] = np.eye(3) * (1 + 1j)
    with pytest.raises(NonSkewHermitianInput):
        rgf_gless(sys)


def test_singular_block_carries_layer():
    eye = np.eye(2, dtype=complex)
    sys = LayeredSystem([eye, eye.copy()], [eye.copy()], [None, None],
                        [np.arange(2), np.arange(2, 4)])
    with pytest.raises(SingularBlock) as exc:
        rgf_gr(sys)
    assert exc.value.layer == 1


def test_from_sparse_matches_dense_layers():
    a, dev, _ = synthetic_system(5, 6, 11)
    sys = LayeredSystem.from_sparse(a, dev.layers)
    gd, _ = rgf_gr(sys)
    ref = dense_gr(a.to_dense())
    for k, d in enumerate(dev.layers):
        assert rel(gd[k], ref[np.ix_(d, d)]) <= 1e-10


def test_from_sparse_rejects_far_coupling():
    from hscnegf.blocks import SparseCoo
    a = SparseCoo.from_dense(np.eye(3) + np.eye(3, k=2) + np.eye(3, k=-2))
    with pytest.raises(PartitionViolation) as exc:
        LayeredSystem.from_sparse(a, [[0], [1], [2]])
    assert exc.value.edges == [(0, 2)]


def test_gless_ledger_is_separate(rng):
    sys = random_layered(rng, [4, 4, 4, 4], sigma_layers=(0, 3))
    gr_led, gl_led = FlopLedger(), FlopLedger()
    rgf_solve(sys, gr_led, gless_ledger=gl_led)
    assert gr_led.total > 0 and gl_led.total > 0 and gl_led.inverse_ops == 0
