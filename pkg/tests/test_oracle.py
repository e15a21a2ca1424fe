import numpy as np
import pytest
from scipy import integrate

from qaggregates.bath import BathKernel, LorentzianMode
from qaggregates.grid import TimeGrid
from qaggregates.model import AggregateModel, RingSpec, build_ring
from qaggregates.observables import spectrum_moments
from qaggregates.oracle import (
    CutoffError,
    PseudomodeConfig,
    free_ring_populations,
    lineshape_function,
    monomer_exact_autocorrelation,
    monomer_exact_spectrum,
    pseudomode_dimer,
)


def _dimer(v):
    return AggregateModel([0.0, 0.0], [[0.0, v], [v, 0.0]])


def test_lineshape_single_exponential_value():
    c = monomer_exact_autocorrelation(BathKernel([1.0], [1.0]), [0.0, 1.0])
    assert c[0] == pytest.approx(1.0)
    assert c[1] == pytest.approx(np.exp(-1 / np.e), abs=1e-12)
    assert c[1] == pytest.approx(0.6922, abs=1e-4)


@pytest.mark.parametrize("t", [0.5, 3.0, 17.0, 50.0])
def test_lineshape_matches_double_quadrature(t):
    kernel = BathKernel([0.3, 0.1], [0.2 + 1.0j, 0.05 - 0.4j])

    def part(f):
        return integrate.dblquad(lambda s2, s: f(kernel(s2)), 0, t, 0, lambda s: s, epsabs=1e-12, epsrel=1e-12)[0]

    brute = part(np.real) + 1j * part(np.imag)
    assert lineshape_function(kernel, t) == pytest.approx(brute, abs=1e-8)


def test_monomer_exact_spectrum_moments():
    kernel = BathKernel([0.25, 0.15], [0.3 + 1.0j, 0.5 - 0.5j])
    s = monomer_exact_spectrum(kernel)
    assert spectrum_moments(s, 0) == pytest.approx(1.0, abs=1e-9)
    # mean = i c'(0) = 0 and variance = -c''(0) = a(0)
    assert spectrum_moments(s, 1) == pytest.approx(0.0, abs=1e-3)
    assert spectrum_moments(s, 2, central=True) == pytest.approx(0.4, rel=1e-2)


def test_monomer_exact_spectrum_rejects_nondecaying():
    with pytest.raises(ValueError):
        monomer_exact_spectrum(BathKernel.zero())


def test_pseudomode_uncoupled_mode_gives_rabi():
    v = -0.7
    grid = TimeGrid(0.05, 120)
    res = pseudomode_dimer(_dimer(v), LorentzianMode(0.0, 1.0, 0.1), PseudomodeConfig(3), grid)
    np.testing.assert_allclose(res.populations[:, 0], np.cos(v * res.times) ** 2, atol=1e-8)
    period = np.pi / abs(v)
    k = int(round(period / grid.step))
    assert res.populations[k, 0] == pytest.approx(1.0, abs=1e-3)


def test_pseudomode_monomer_limit():
    mode = LorentzianMode(0.25, 1.0, 0.2)
    grid = TimeGrid(0.05, 200)
    res = pseudomode_dimer(_dimer(0.0), mode, PseudomodeConfig(20), grid, populations=False, autocorrelation=True)
    exact = monomer_exact_autocorrelation(BathKernel([0.25], [0.2 + 1.0j]), res.times)
    np.testing.assert_allclose(res.autocorrelation, exact, atol=1e-4)


def test_pseudomode_population_conservation():
    res = pseudomode_dimer(_dimer(-0.5), LorentzianMode(0.25, 1.0, 0.2), PseudomodeConfig(10), TimeGrid(0.05, 100))
    np.testing.assert_allclose(res.populations.sum(axis=1), 1.0, atol=1e-8)


def test_pseudomode_cutoff_convergence():
    mode = LorentzianMode(0.25, 1.0, 0.2)
    grid = TimeGrid(0.05, 100)
    lo = pseudomode_dimer(_dimer(-0.5), mode, PseudomodeConfig(10), grid)
    hi = pseudomode_dimer(_dimer(-0.5), mode, PseudomodeConfig(14), grid)
    np.testing.assert_allclose(lo.populations, hi.populations, atol=1e-5)


def test_pseudomode_cutoff_error():
    with pytest.raises(CutoffError):
        pseudomode_dimer(_dimer(-0.5), LorentzianMode(1.0, 1.0, 0.1), PseudomodeConfig(3), TimeGrid(0.05, 40))
    with pytest.raises(ValueError):
        PseudomodeConfig(1)


def test_pseudomode_dimer_only():
    with pytest.raises(ValueError):
        pseudomode_dimer(build_ring(RingSpec(3, 1.0)), LorentzianMode(0.1, 1.0, 0.1), PseudomodeConfig(4), TimeGrid(0.1, 2))


def test_free_ring_populations():
    model = build_ring(RingSpec(6, -0.8))
    t = np.linspace(0, 20, 81)
    p = free_ring_populations(model, 2, t)
    np.testing.assert_allclose(p[0], np.eye(6)[1], atol=1e-14)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    d = free_ring_populations(_dimer(0.9), 1, t)
    np.testing.assert_allclose(d[:, 1], np.sin(0.9 * t) ** 2, atol=1e-12)
    with pytest.raises(ValueError):
        free_ring_populations(model, 7, t)
