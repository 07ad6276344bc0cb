import numpy as np
import pytest
from scipy.integrate import trapezoid

from hscnegf.device import fermi
from hscnegf.errors import ResidualTooLarge, ShapeMismatch
from hscnegf.observables import (DensityMap, EnergyGrid, density_contribution, electron_density,
                                 ldos, line_density_y, mirror_asymmetry)


def test_ldos_examples():
    assert ldos([-1j / np.pi])[0] == pytest.approx(1 / np.pi ** 2)
    assert not ldos([2.0, -3.5]).any()


def test_ldos_lorentzian():
    eps, eta = 0.1, 0.02
    e = np.linspace(-0.5, 0.5, 41)
    gr = 1.0 / (e - eps + 1j * eta)
    ref = eta / np.pi / ((e - eps) ** 2 + eta ** 2)
    np.testing.assert_allclose(ldos(gr), ref, rtol=1e-12)


def test_density_single_point():
    dmap = electron_density([np.array([2j, 2j])], EnergyGrid([0.3]), (2, 1))
    np.testing.assert_allclose(dmap.values, 1 / np.pi)
    assert dmap.imag_residual == 0.0


def test_density_zero_map():
    grid = EnergyGrid.uniform(0, 1, 5)
    dmap = electron_density([np.zeros(6, complex)] * 5, grid, (3, 2))
    assert not dmap.values.any()


def test_density_one_dof_quadrature():
    eps, eta, mu, temp = 0.2, 0.01, 0.25, 300.0
    grid = EnergyGrid.uniform(0.0, 0.5, 500)
    e = grid.energies
    diags = []
    for ek in e:
        gr = 1.0 / (ek - eps + 1j * eta)
        sig = 2j * eta * fermi(ek, mu, temp)
        diags.append(np.array([gr * sig * np.conj(gr)]))
    dmap = electron_density(diags, grid, (1, 1))
    f = 1.0 / (1.0 + np.exp((e - mu) / (8.617333262e-5 * temp)))
    ref = trapezoid(2 * eta * f / ((e - eps) ** 2 + eta ** 2), e) / (2 * np.pi)
    assert dmap.values[0] == pytest.approx(ref, rel=1e-10)


def test_density_rejects_real_part():
    with pytest.raises(ResidualTooLarge):
        density_contribution(np.array([1e-3 + 1j]))
    im, resid = density_contribution(np.array([1e-12 + 1j, 0.5j]))
    assert resid == pytest.approx(1e-12) and im[1] == 0.5


def test_density_length_mismatch():
    with pytest.raises(ShapeMismatch):
        electron_density([np.zeros(2, complex)], EnergyGrid.uniform(0, 1, 3), (2, 1))


def test_grid_weights():
    g = EnergyGrid.uniform(0.0, 0.5, 500)
    assert g.weights.sum() == pytest.approx(0.5)
    assert np.all(g.weights > 0)
    with pytest.raises(ValueError):
        EnergyGrid([0.1, 0.1])
    with pytest.raises(ValueError):
        EnergyGrid([0.1, 0.2], [1.0, -1.0])


def test_line_density_uniform_and_delta():
    nx, ny = 4, 3
    uni = DensityMap(np.full(nx * ny, 0.5), (nx, ny))
    np.testing.assert_allclose(line_density_y(uni), nx * 0.5)
    v = np.zeros(nx * ny)
    v[2 + nx * 1] = 3.0
    np.testing.assert_array_equal(line_density_y(DensityMap(v, (nx, ny))), [0, 3.0, 0])
    with pytest.raises(ShapeMismatch):
        line_density_y(DensityMap(np.zeros(5), (2, 3)))


def test_line_density_conserves_total(rng):
    v = rng.uniform(size=7 * 9)
    line = line_density_y(DensityMap(v, (7, 9)))
    assert line.sum() == pytest.approx(v.sum(), rel=1e-13)


def test_mirror_asymmetry():
    line = np.array([9.0, 1.0, 2.0, 2.0, 1.0, 7.0])
    assert not mirror_asymmetry(line, 1, 5).any()
    out = mirror_asymmetry(np.array([1.0, 2.0]), 0, 2)
    np.testing.assert_allclose(out, [0.5, 0.5])
