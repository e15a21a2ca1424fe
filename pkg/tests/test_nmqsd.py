import numpy as np
import pytest

from qaggregates.bath import BathKernel, SpectralDensity, kernel_from_spectral_density
from qaggregates.grid import TimeGrid
from qaggregates.model import AggregateModel, RingSpec, bright_state, build_ring, electronic_hamiltonian
from qaggregates.nmqsd import (
    AuxOperatorSet,
    PropagationError,
    StepSizeError,
    aux_rhs,
    default_step,
    is_translation_invariant,
    propagate_batch,
    propagate_linear,
    propagate_nonlinear,
    propagate_zero_noise,
    zofe_master_equation,
)
from qaggregates.noise import NoiseTrajectory, generate_noise
from qaggregates.observables import autocorrelation, ensemble_transfer, linear_ensemble
from qaggregates.oracle import free_ring_populations, history_memory_operators, monomer_exact_autocorrelation

SINGLE = BathKernel([0.8], [0.6 + 1.1j])


def _random_instance(seed, n=3, n_terms=2):
    r = np.random.default_rng(seed)
    v = r.normal(scale=0.5, size=(n, n))
    v = v + v.T
    np.fill_diagonal(v, 0.0)
    model = AggregateModel(r.normal(scale=0.3, size=n), v)
    kernel = BathKernel(r.uniform(0.1, 0.5, n_terms), r.uniform(0.2, 1.0, n_terms) + 1j * r.uniform(-2, 2, n_terms))
    return model, kernel


def test_aux_rhs_at_zero():
    model, kernel = _random_instance(0)
    d = aux_rhs(model, kernel, AuxOperatorSet.zeros(3, kernel.n_terms)).ops
    for m in range(3):
        for j in range(kernel.n_terms):
            expected = np.zeros((3, 3), complex)
            expected[m, m] = -kernel.amplitudes[j]
            np.testing.assert_array_equal(d[m, j], expected)


def test_aux_monomer_closed_form():
    grid = TimeGrid(0.01, 500)
    res = propagate_zero_noise(AggregateModel.monomer(), SINGLE, [1.0], grid, keep_aux=True)
    g, w = SINGLE.amplitudes[0], SINGLE.rates[0]
    got = np.array([a.total[0, 0, 0] for a in res.aux])
    np.testing.assert_allclose(got, -(g / w) * (1 - np.exp(-w * grid.times)), atol=1e-10)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_aux_ode_matches_history_integration(seed):
    model, kernel = _random_instance(seed)
    grid = TimeGrid.covering(5.0, 0.01)
    hist = history_memory_operators(model, kernel, grid)
    res = propagate_batch(model, kernel, np.array([1, 0, 0]), grid, None, keep_aux=True, reduced=False)
    ode = np.array([a.total for a in res.aux])
    assert np.max(np.abs(hist - ode)) <= 1e-4


def test_free_evolution_zero_kernel():
    grid = TimeGrid(0.05, 100)
    res = propagate_zero_noise(AggregateModel.monomer(), BathKernel.zero(), [1.0], grid)
    np.testing.assert_allclose(res.states[:, 0], 1.0, atol=1e-14)


def test_zero_kernel_ring_is_unitary_and_free():
    model = build_ring(RingSpec(5, -1.0))
    grid = TimeGrid(0.02, 200)
    psi0 = np.array([1, 0, 0, 0, 0], complex)
    res = propagate_zero_noise(model, BathKernel.zero(), psi0, grid)
    pops = np.abs(res.states) ** 2
    np.testing.assert_allclose(pops, free_ring_populations(model, 1, grid.times), rtol=0, atol=1e-6)


def test_bright_eigenstate_autocorrelation_modulus():
    model = build_ring(RingSpec(3, 1.0))
    psi0 = bright_state(model, [1, 0, 0])
    res = propagate_zero_noise(model, BathKernel.zero(), psi0, TimeGrid(0.02, 300))
    c = autocorrelation(res, psi0)
    np.testing.assert_allclose(np.abs(c), np.vdot(psi0, psi0).real, rtol=0, atol=1e-6)
    np.testing.assert_allclose(c, 3 * np.exp(-2j * res.times), rtol=0, atol=1e-6)


def test_monomer_single_term_exact():
    grid = TimeGrid(0.01, 1000)
    res = propagate_zero_noise(AggregateModel.monomer(), SINGLE, [1.0], grid)
    np.testing.assert_allclose(res.states[:, 0], monomer_exact_autocorrelation(SINGLE, grid.times), atol=1e-9)


def test_monomer_default_bath_exact(default_kernel):
    grid = TimeGrid.covering(50.0, 0.02)
    res = propagate_zero_noise(AggregateModel.monomer(), default_kernel, [1.0], grid)
    np.testing.assert_allclose(res.states[:, 0], monomer_exact_autocorrelation(default_kernel, grid.times), atol=1e-6)


def test_v0_factorization(default_kernel):
    # uncoupled sites: bright-state autocorrelation is the weighted monomer result
    model = AggregateModel([0, 0, 0], np.zeros((3, 3)), [[1, 0, 0], [0.5, 0.5, 0], [0, 1, 0]])
    psi0 = bright_state(model, [1, 0.3, 0])
    grid = TimeGrid.covering(20.0, 0.02)
    c = autocorrelation(propagate_zero_noise(model, default_kernel, psi0, grid), psi0)
    expected = np.sum(np.abs(psi0) ** 2) * monomer_exact_autocorrelation(default_kernel, grid.times)
    np.testing.assert_allclose(c, expected, atol=1e-8)


def _final(model, kernel, psi0, h, t_end):
    return propagate_zero_noise(model, kernel, psi0, TimeGrid.covering(t_end, h)).states[-1]


def test_rk4_convergence_order():
    model, kernel = _random_instance(7)
    psi0 = np.array([1, 0, 0], complex)
    h = 0.2
    a, b, c = (_final(model, kernel, psi0, h / 2**k, 4.0) for k in range(3))
    order = np.log2(np.linalg.norm(a - b) / np.linalg.norm(b - c))
    assert order >= 3.5


def test_reduced_matches_full_on_ring(default_kernel):
    model = build_ring(RingSpec(5, -1.2, dipole_tilt=2 * np.pi / 5))
    assert is_translation_invariant(model)
    psi0 = bright_state(model, [1, 0, 0])
    grid = TimeGrid.covering(8.0, 0.02)
    full = propagate_batch(model, default_kernel, psi0, grid, None, reduced=False, keep_aux=True, record_stride=50)
    red = propagate_batch(model, default_kernel, psi0, grid, None, reduced=True, keep_aux=True, record_stride=50)
    np.testing.assert_allclose(red.states, full.states, atol=1e-12)
    for a, b in zip(red.aux, full.aux):
        np.testing.assert_allclose(a.ops, b.ops, atol=1e-12)


def test_translation_invariance_detection():
    assert not is_translation_invariant(AggregateModel([0, 0.5, 0], [[0, 1, 0], [1, 0, 1], [0, 1, 0]]))


def test_linear_uses_noise_with_sign():
    # N = 1, zero kernel: d psi = -z* psi, so psi(t) = exp(-int z*)
    grid = TimeGrid(0.01, 100)
    samples = np.full((1, 201), 0.3 - 0.2j)
    noise = NoiseTrajectory(grid, samples, 0, 0)
    res = propagate_linear(AggregateModel.monomer(), BathKernel.zero(), noise, [1.0], grid)
    np.testing.assert_allclose(res.states[:, 0], np.exp(-(0.3 - 0.2j) * grid.times), rtol=1e-10)


def test_nonlinear_single_site_keeps_population():
    grid = TimeGrid(0.02, 200)
    noise = generate_noise(SINGLE, 1, grid, 4, 0)
    res = propagate_nonlinear(AggregateModel.monomer(), SINGLE, noise, [1.0], grid)
    np.testing.assert_allclose(np.abs(res.states[:, 0]) ** 2, 1.0, atol=1e-12)


def test_nonlinear_zero_kernel_is_free():
    model = build_ring(RingSpec(4, 0.7))
    grid = TimeGrid(0.02, 200)
    noise = NoiseTrajectory.zeros(grid, 4)
    res = propagate_nonlinear(model, BathKernel.zero(), noise, np.eye(4)[1], grid)
    np.testing.assert_allclose(np.abs(res.states) ** 2, free_ring_populations(model, 2, grid.times), atol=1e-9)


def test_nonlinear_states_normalised(default_kernel):
    model = build_ring(RingSpec(3, -1.0))
    grid = TimeGrid(0.02, 300)
    noise = generate_noise(default_kernel, 3, grid, 8, 2)
    res = propagate_nonlinear(model, default_kernel, noise, np.eye(3)[0], grid)
    np.testing.assert_allclose(np.linalg.norm(res.states, axis=1), 1.0, atol=1e-12)


def test_nonlinear_requires_normalised_start():
    grid = TimeGrid(0.02, 10)
    with pytest.raises(ValueError):
        propagate_nonlinear(AggregateModel.monomer(), SINGLE, NoiseTrajectory.zeros(grid, 1), [2.0], grid)


def test_step_size_error():
    model = build_ring(RingSpec(2, 1.0))
    grid = TimeGrid(0.5, 4)
    samples = np.zeros((2, 9), complex)
    samples[0] = 50.0
    with pytest.raises(StepSizeError):
        propagate_nonlinear(model, BathKernel.zero(), NoiseTrajectory(grid, samples, 0, 0), np.array([1, 1]) / np.sqrt(2), grid)


def test_blow_up_reports_time():
    grid = TimeGrid(0.1, 2000)
    samples = np.full((1, 4001), -2000.0 + 0j)
    with pytest.raises(PropagationError) as info:
        propagate_linear(AggregateModel.monomer(), BathKernel.zero(), NoiseTrajectory(grid, samples, 0, 0), [1.0], grid)
    assert 0 < info.value.time <= grid.t_max


def test_failed_rows_flagged_without_raising():
    grid = TimeGrid(0.1, 2000)
    noise = np.zeros((2, 1, 4001), complex)
    noise[1] = -2000.0
    res = propagate_batch(AggregateModel.monomer(), BathKernel.zero(), [1.0], grid, noise, raise_on_failure=False)
    assert list(res.failed) == [False, True]
    assert np.isnan(res.states[1]).all() and np.isfinite(res.states[0]).all()
    assert np.isfinite(res.failure_times[1]) and np.isnan(res.failure_times[0])


def test_stop_below_zero_fills_tail(default_kernel):
    grid = TimeGrid.covering(200.0, 0.05)
    res = propagate_zero_noise(AggregateModel.monomer(), default_kernel, [1.0], grid, stop_below=1e-8)
    live = np.abs(res.states[:, 0]) > 0
    last = np.nonzero(live)[0][-1]
    assert last < len(grid.times) - 1
    assert not live[last + 1 :].any()
    np.testing.assert_allclose(res.states[: last + 1, 0], monomer_exact_autocorrelation(default_kernel, res.times[: last + 1]), atol=1e-6)


def test_default_step():
    model = build_ring(RingSpec(3, -8.0))
    h = default_step(model, BathKernel([0.1], [0.1 + 0.5j]))
    assert h == pytest.approx(0.1 / 16.0)
    assert default_step(AggregateModel.monomer(), BathKernel.zero()) == 0.02


def test_zofe_master_equation_preserves_trace(default_kernel):
    model = build_ring(RingSpec(3, -1.0))
    _, rho = zofe_master_equation(model, default_kernel, np.diag([1.0, 0, 0]).astype(complex), TimeGrid(0.02, 500))
    np.testing.assert_allclose(np.trace(rho, axis1=1, axis2=2), 1.0, atol=1e-10)
    np.testing.assert_allclose(rho, np.conj(np.transpose(rho, (0, 2, 1))), atol=1e-12)


WEAK = kernel_from_spectral_density(SpectralDensity.from_triples([(0.05, 1.0, 0.3)]))
DIMER = AggregateModel([0.0, 0.0], [[0.0, -0.5], [-0.5, 0.0]])


@pytest.fixture(scope="module")
def weak_ensembles():
    grid = TimeGrid.covering(10.0, 0.02)
    lin = linear_ensemble(DIMER, WEAK, np.array([1, 0], complex), 2000, grid, 5, record_stride=25)
    nl = ensemble_transfer(DIMER, WEAK, 1, 2000, grid, 6, record_stride=25)
    _, rho = zofe_master_equation(DIMER, WEAK, np.diag([1.0, 0]).astype(complex), grid, record_stride=25)
    return lin, nl, rho


def test_linear_mean_norm_is_one(weak_ensembles):
    lin, _, _ = weak_ensembles
    z = np.abs(lin.mean_norm[1:] - 1.0) / lin.norm_stderr[1:]
    assert np.max(z) < 5.0


def test_linear_mean_matches_master_equation(weak_ensembles):
    lin, _, rho = weak_ensembles
    dev = np.abs(lin.density_matrices[1:, 0, 0].real - rho[1:, 0, 0].real)
    assert np.max(dev / lin.density_stderr[1:, 0, 0].real) < 5.0


def test_nonlinear_matches_linear_density(weak_ensembles):
    lin, nl, _ = weak_ensembles
    rho_lin = lin.density_matrices / lin.mean_norm[:, None, None]
    for i, j in ((0, 0), (0, 1)):
        for part in ("real", "imag"):
            a = getattr(rho_lin[1:, i, j], part)
            b = getattr(nl.density_matrices[1:, i, j], part)
            se = np.hypot(getattr(lin.density_stderr[1:, i, j], part), getattr(nl.density_stderr[1:, i, j], part))
            assert np.max(np.abs(a - b) / se) < 5.0, (i, j, part)
