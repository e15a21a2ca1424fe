"""Reference solvers that share no propagation code with :mod:`qaggregates.nmqsd`.

* closed-form cumulant lineshape of a single monomer,
* full-quantum dimer with one damped pseudomode per site (Lindblad, Fock-truncated),
* purely electronic ring dynamics by exact diagonalisation,
* brute-force two-time integration of the memory operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .bath import BathKernel, LorentzianMode
from .grid import TimeGrid
from .model import AggregateModel, electronic_hamiltonian
from .observables import Spectrum


class CutoffError(RuntimeError):
    pass


def lineshape_function(kernel: BathKernel, times) -> np.ndarray:
    """g(t) = int_0^t ds int_0^s ds' a(s'), closed form per exponential term."""
    t = np.asarray(times, dtype=float)[..., None]
    g, w = kernel.amplitudes, kernel.rates
    return np.sum(g / w * t + g / w**2 * np.expm1(-w * t), axis=-1)


def monomer_exact_autocorrelation(kernel: BathKernel, times) -> np.ndarray:
    return np.exp(-lineshape_function(kernel, times))


def monomer_exact_spectrum(kernel: BathKernel, dt: float | None = None, decay_budget: float = 40.0) -> Spectrum:
    """Unbroadened monomer lineshape from the exact autocorrelation.

    The autocorrelation decays as exp(-Re g(t)); it is sampled until that
    exponent reaches ``decay_budget`` so no artificial window is needed.
    """
    rate = float(np.sum((kernel.amplitudes / kernel.rates).real))
    if not rate > 0:
        raise ValueError("monomer autocorrelation does not decay")
    fastest = float(np.max(np.abs(kernel.rates)) + np.sqrt(np.abs(np.sum(kernel.amplitudes))))
    if dt is None:
        dt = min(0.05, 0.1 / fastest)
    # the asymptotic rate underestimates the time needed while g(t) is still quadratic
    t_max = decay_budget / rate
    while lineshape_function(kernel, t_max).real < decay_budget:
        t_max *= 1.5
    n = int(np.ceil(t_max / dt))
    if n > 2**24:
        raise ValueError("monomer autocorrelation decays too slowly to resolve")
    n_fft = 1 << int(np.ceil(np.log2(2 * n)))
    t = dt * np.arange(n)
    c = monomer_exact_autocorrelation(kernel, t)
    # two-sided sum over t = -(n-1)..(n-1) dt with c(-t) = conj(c(t))
    full = np.zeros(n_fft, dtype=complex)
    full[:n] = c
    full[n_fft - n + 1 :] = np.conj(c[1:][::-1])
    # I(nu) = 1/(2 pi) int c(t) exp(i nu t) dt
    vals = np.fft.fftshift(np.fft.ifft(full)).real * n_fft * dt / (2 * np.pi)
    freqs = np.fft.fftshift(np.fft.fftfreq(n_fft, d=dt)) * 2 * np.pi
    area = vals.sum() * (freqs[1] - freqs[0])
    return Spectrum(freqs, vals / area, damping_time=None, window="none", normalization="area")


@dataclass(frozen=True)
class PseudomodeConfig:
    fock_cutoff: int = 12
    cutoff_tolerance: float = 1e-6

    def __post_init__(self):
        if self.fock_cutoff < 2:
            raise ValueError("Fock cutoff must be at least 2")


@dataclass
class PseudomodeResult:
    times: np.ndarray
    populations: np.ndarray | None  # (n_t, 2)
    autocorrelation: np.ndarray | None
    top_level_weight: float


def _mode_ops(cutoff: int):
    a = sp.diags(np.sqrt(np.arange(1, cutoff)), 1, format="csr", dtype=complex)
    eye = sp.identity(cutoff, format="csr", dtype=complex)
    return a, eye


def _dimer_operators(model: AggregateModel, mode: LorentzianMode, cutoff: int):
    """Operators on (electronic 2) x (mode 1) x (mode 2), with electronic index slowest."""
    a, i_m = _mode_ops(cutoff)
    i_e = sp.identity(2, format="csr", dtype=complex)
    p1 = sp.csr_matrix(np.diag([1.0, 0.0]).astype(complex))
    p2 = sp.csr_matrix(np.diag([0.0, 1.0]).astype(complex))
    a1 = sp.kron(i_e, sp.kron(a, i_m), format="csr")
    a2 = sp.kron(i_e, sp.kron(i_m, a), format="csr")
    h_el = sp.kron(sp.csr_matrix(electronic_hamiltonian(model)), sp.identity(cutoff**2), format="csr")
    kappa = np.sqrt(mode.weight)
    h = h_el + mode.center * (a1.conj().T @ a1 + a2.conj().T @ a2)
    h = h - kappa * sp.kron(p1, sp.identity(cutoff**2), format="csr") @ (a1 + a1.conj().T)
    h = h - kappa * sp.kron(p2, sp.identity(cutoff**2), format="csr") @ (a2 + a2.conj().T)
    return h.tocsr(), [np.sqrt(2 * mode.width) * a1, np.sqrt(2 * mode.width) * a2]


def _block_liouvillian(h_left, h_right, jumps_left, jumps_right):
    """Generator for X -> -i(H_l X - X H_r) + sum c_l X c_r^dag - 1/2 {...}; column-stacked vec."""
    il = sp.identity(h_left.shape[0], format="csr")
    ir = sp.identity(h_right.shape[0], format="csr")
    gen = -1j * (sp.kron(ir, h_left) - sp.kron(h_right.T, il))
    for cl, cr in zip(jumps_left, jumps_right):
        gen = gen + sp.kron(cr.conj(), cl)
        gen = gen - 0.5 * sp.kron(ir, cl.conj().T @ cl) - 0.5 * sp.kron((cr.conj().T @ cr).T, il)
    return gen.tocsc()


def pseudomode_dimer(
    model: AggregateModel,
    mode: LorentzianMode,
    config: PseudomodeConfig,
    grid: TimeGrid,
    initial=None,
    *,
    populations: bool = True,
    autocorrelation: bool = False,
    record_stride: int = 1,
) -> PseudomodeResult:
    """Exact dimer dynamics for a single real-line Lorentzian per site at T = 0.

    Each site's bath is replaced by one harmonic mode (frequency = centre,
    coupling sqrt(weight)) damped at rate 2 * width, which reproduces the
    correlation function weight * exp(-(width + i centre) tau).

    ``initial`` is an electronic state vector (default: site 1).  Populations
    start from |initial><initial| normalised; the autocorrelation uses the
    unnormalised vector.
    """
    if model.n_sites != 2:
        raise ValueError("pseudomode oracle handles dimers only")
    n = config.fock_cutoff
    psi0 = np.array([1.0, 0.0], dtype=complex) if initial is None else np.asarray(initial, dtype=complex)
    h, jumps = _dimer_operators(model, mode, n)
    dim = h.shape[0]
    vac = np.zeros(n * n, dtype=complex)
    vac[0] = 1.0
    times = grid.times[::record_stride]
    n_t = times.size
    top = 0.0
    pops = None
    corr = None

    if populations:
        start = np.kron(psi0 / np.linalg.norm(psi0), vac)
        rho0 = np.outer(start, start.conj())
        gen = _block_liouvillian(h, h, jumps, jumps)
        vecs = expm_multiply(gen, rho0.ravel(order="F"), start=0.0, stop=times[-1], num=n_t, endpoint=True)
        pops = np.empty((n_t, 2))
        for k, v in enumerate(vecs):
            rho = v.reshape(dim, dim, order="F")
            d = np.diag(rho).real.reshape(2, n * n)
            pops[k] = d.sum(axis=1)
        top = max(top, _top_weight_density(vecs, dim, n))

    if autocorrelation:
        a, i_m = _mode_ops(n)
        a1g = sp.kron(a, i_m, format="csr")
        a2g = sp.kron(i_m, a, format="csr")
        h_g = (mode.center * (a1g.conj().T @ a1g + a2g.conj().T @ a2g)).tocsr()
        jg = [np.sqrt(2 * mode.width) * a1g, np.sqrt(2 * mode.width) * a2g]
        gen = _block_liouvillian(h, h_g, jumps, jg)
        x0 = np.outer(np.kron(psi0, vac), vac)
        vecs = expm_multiply(gen, x0.ravel(order="F"), start=0.0, stop=times[-1], num=n_t, endpoint=True)
        corr = np.empty(n_t, dtype=complex)
        for k, v in enumerate(vecs):
            x = v.reshape(dim, n * n, order="F").reshape(2, n * n, n * n)
            corr[k] = np.einsum("e,ekk->", psi0.conj(), x)
        top = max(top, _top_weight_block(vecs, dim, n))

    if top > config.cutoff_tolerance:
        raise CutoffError(f"highest Fock level carries weight {top:.2e}; raise fock_cutoff")
    return PseudomodeResult(times, pops, corr, top)


def _top_weight_density(vecs, dim, n) -> float:
    worst = 0.0
    for v in vecs:
        d = np.diag(v.reshape(dim, dim, order="F")).real.reshape(2, n, n)
        worst = max(worst, float(d[:, -1, :].sum()), float(d[:, :, -1].sum()))
    return worst


def _top_weight_block(vecs, dim, n) -> float:
    worst = 0.0
    for v in vecs:
        x = v.reshape(dim, n * n, order="F").reshape(2, n, n, n * n)
        w1 = np.sum(np.abs(x[:, -1]) ** 2)
        w2 = np.sum(np.abs(x[:, :, -1]) ** 2)
        worst = max(worst, float(w1), float(w2))
    return worst


def free_ring_populations(model: AggregateModel, initial_site: int, times) -> np.ndarray:
    """|<n| exp(-i H t) |initial>|^2 by exact diagonalisation, shape (n_t, N)."""
    if not 1 <= initial_site <= model.n_sites:
        raise ValueError("initial site out of range")
    evals, evecs = np.linalg.eigh(electronic_hamiltonian(model))
    t = np.asarray(times, dtype=float)
    coeff = evecs.conj()[initial_site - 1]  # <k|initial>
    amps = np.einsum("nk,tk->tn", evecs, coeff[None, :] * np.exp(-1j * np.outer(t, evals)))
    return np.abs(amps) ** 2


def history_memory_operators(model: AggregateModel, kernel: BathKernel, grid: TimeGrid) -> np.ndarray:
    """Obar_m(t) from the two-time propagator D_m(t, s) and a memory quadrature.

    D_m(t, s) is carried for every past time s on the grid and advanced by
    conjugation with exp(h A) where A = -i H + sum_l P_l Obar_l is taken at
    the step midpoint (predictor-corrector).  Obar_m(t) = int_0^t a(t-s) D_m(t,s) ds
    is evaluated by the trapezoid rule.  Cost is quadratic in the number of
    steps; this is a test reference only.  Returns shape (n_steps + 1, M, N, N).
    """
    n = model.n_sites
    h = grid.step
    minus_ih = -1j * electronic_hamiltonian(model)
    proj = np.zeros((n, n, n), dtype=complex)
    proj[np.arange(n), np.arange(n), np.arange(n)] = 1.0
    out = np.zeros((grid.n_steps + 1, n, n, n), dtype=complex)
    d_hist = np.empty((grid.n_steps + 1, n, n, n), dtype=complex)  # [s index, m]
    d_hist[0] = -proj

    def obar(k_now: int, d_stack: np.ndarray) -> np.ndarray:
        lags = h * (k_now - np.arange(k_now + 1))
        wts = np.full(k_now + 1, h)
        wts[0] = wts[-1] = 0.5 * h
        if k_now == 0:
            return np.zeros((n, n, n), dtype=complex)
        a = kernel(lags) * wts
        return np.einsum("s,smij->mij", a, d_stack[: k_now + 1])

    def generator(ob: np.ndarray) -> np.ndarray:
        return minus_ih + ob[np.arange(n), np.arange(n)]

    a_now = generator(out[0])
    for k in range(grid.n_steps):
        live = d_hist[: k + 1]
        # predictor with the generator frozen at t_k
        u = expm(h * a_now)
        ui = np.linalg.inv(u)
        pred = np.empty((k + 2, n, n, n), dtype=complex)
        pred[: k + 1] = u @ live @ ui
        pred[k + 1] = -proj
        a_next = generator(obar(k + 1, pred))
        # corrector with the midpoint generator
        u = expm(0.5 * h * (a_now + a_next))
        ui = np.linalg.inv(u)
        d_hist[: k + 1] = u @ live @ ui
        d_hist[k + 1] = -proj
        out[k + 1] = obar(k + 1, d_hist)
        a_now = generator(out[k + 1])
    return out
