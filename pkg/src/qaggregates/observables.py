"""Spectra, spectral moments and ensemble-averaged transfer observables."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.signal import find_peaks

from .bath import BathKernel
from .grid import TimeGrid

log = logging.getLogger(__name__)

EXCLUSION_BUDGET = 1e-3
BLOCK_SIZE = 50


class AmbiguousPeakError(ValueError):
    pass


class EnsembleFailure(RuntimeError):
    pass


@dataclass
class Spectrum:
    """Lineshape on a uniform frequency grid (units of Delta, relative to the monomer transition).

    ``window`` names the damping applied to the autocorrelation before the
    transform: ``exponential`` broadens with a Lorentzian of HWHM
    1/damping_time, ``gaussian`` with a Gaussian of standard deviation
    1/damping_time, ``none`` leaves the lineshape unbroadened.
    """

    frequencies: np.ndarray
    values: np.ndarray
    damping_time: float | None = None
    window: str = "exponential"
    normalization: str = "area"

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def area(self) -> float:
        return float(np.trapezoid(self.values, self.frequencies))


def frequency_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def autocorrelation(traj, psi0) -> np.ndarray:
    """c(t) = <psi0 | psi(t)> along a zero-noise trajectory."""
    psi0 = np.asarray(psi0, dtype=complex)
    if traj.states.shape[1] != psi0.shape[0]:
        raise ValueError("initial state does not match trajectory dimension")
    if not np.allclose(traj.states[0], psi0, rtol=0, atol=1e-12):
        raise ValueError("trajectory does not start from psi0")
    return traj.states @ psi0.conj()


def _window(times: np.ndarray, damping_time: float, kind: str) -> np.ndarray:
    if kind == "exponential":
        return np.exp(-times / damping_time)
    if kind == "gaussian":
        return np.exp(-0.5 * (times / damping_time) ** 2)
    if kind == "none":
        return np.ones_like(times)
    raise ValueError(f"unknown window {kind!r}")


def spectrum_from_autocorrelation(
    c,
    times,
    damping_time: float,
    freq_grid,
    *,
    window: str = "exponential",
    normalize: bool = True,
) -> Spectrum:
    """Half-range transform (1/pi) Re int_0^T dt exp(i nu t) c(t) window(t).

    The optical frequency prefactor and physical constants are dropped; the
    result is normalised to unit area on ``freq_grid`` unless ``normalize``
    is false.
    """
    if not damping_time > 0:
        raise ValueError("damping_time must be positive")
    c = np.asarray(c, dtype=complex)
    t = np.asarray(times, dtype=float)
    if c.shape != t.shape:
        raise ValueError("autocorrelation and time grid differ in length")
    dt = t[1] - t[0]
    wts = np.full(t.shape, dt)
    wts[0] = wts[-1] = 0.5 * dt
    f = c * _window(t, damping_time, window) * wts
    nu = np.asarray(freq_grid, dtype=float)
    vals = np.empty(nu.shape)
    chunk = max(1, 2_000_000 // t.size)
    for lo in range(0, nu.size, chunk):
        ph = np.exp(1j * np.outer(nu[lo : lo + chunk], t))
        vals[lo : lo + chunk] = (ph @ f).real / np.pi
    spec = Spectrum(nu, vals, damping_time, window, "area" if normalize else "none")
    if normalize:
        area = spec.area()
        if area == 0:
            raise ValueError("spectrum has zero area")
        spec.values = vals / area
    return spec


def _raw_moments(s: Spectrum, k_max: int) -> np.ndarray:
    w = s.values
    norm = np.trapezoid(w, s.frequencies)
    if norm == 0:
        raise ValueError("spectrum has zero total weight")
    return np.array([np.trapezoid(s.frequencies**k * w, s.frequencies) / norm for k in range(k_max + 1)])


def _moments_to_cumulants(mu: np.ndarray) -> np.ndarray:
    kap = np.zeros_like(mu)
    for n in range(1, mu.size):
        kap[n] = mu[n] - sum(comb(n - 1, m - 1) * kap[m] * mu[n - m] for m in range(1, n))
    return kap


def _cumulants_to_moments(kap: np.ndarray) -> np.ndarray:
    mu = np.zeros_like(kap)
    mu[0] = 1.0
    for n in range(1, kap.size):
        mu[n] = sum(comb(n - 1, m - 1) * kap[m] * mu[n - m] for m in range(1, n + 1))
    return mu


def spectrum_moments(s: Spectrum, k: int, *, central: bool = False, deconvolve: bool = True) -> float:
    """k-th normalised moment (k = 0..5) of the lineshape.

    For a Gaussian-windowed spectrum the window's contribution (variance
    1/damping_time**2) is removed exactly when ``deconvolve`` is set.  An
    exponential window adds Lorentzian tails whose variance diverges, so
    second and higher moments of such spectra depend on the grid extent.
    """
    if not 0 <= k <= 5:
        raise ValueError("moments are available for k = 0..5")
    mu = _raw_moments(s, 5)
    if deconvolve and s.window == "gaussian" and s.damping_time:
        kap = _moments_to_cumulants(mu)
        kap[2] -= 1.0 / s.damping_time**2
        mu = _cumulants_to_moments(kap)
    if not central or k < 2:
        return float(mu[k]) if not (central and k == 1) else 0.0
    mean = mu[1]
    return float(sum(comb(k, i) * mu[i] * (-mean) ** (k - i) for i in range(k + 1)))


@dataclass(frozen=True)
class PeakWidth:
    center: float
    fwhm: float
    std_dev: float


def peak_width(s: Spectrum, window: tuple[float, float], *, min_prominence: float = 0.01) -> PeakWidth:
    """FWHM and standard deviation of the single peak inside ``window``.

    Local maxima whose prominence is below ``min_prominence`` of the window
    maximum are treated as ripple.
    """
    lo, hi = window
    sel = (s.frequencies >= lo) & (s.frequencies <= hi)
    nu = s.frequencies[sel]
    y = s.values[sel]
    if nu.size < 3:
        raise ValueError("window holds fewer than three grid points")
    top = y.max()
    peaks, _ = find_peaks(y, prominence=min_prominence * abs(top))
    if peaks.size == 0:
        raise ValueError("no local maximum inside the window")
    if peaks.size > 1:
        raise AmbiguousPeakError(f"{peaks.size} maxima inside window {window}: {nu[peaks]}")
    ip = peaks[0]
    half = 0.5 * y[ip]
    left = np.nonzero(y[:ip] < half)[0]
    right = np.nonzero(y[ip:] < half)[0]
    if left.size == 0 or right.size == 0:
        raise ValueError("half-maximum crossing lies outside the window")
    il = left[-1]
    ir = ip + right[0]
    x_l = nu[il] + (half - y[il]) * (nu[il + 1] - nu[il]) / (y[il + 1] - y[il])
    x_r = nu[ir - 1] + (half - y[ir - 1]) * (nu[ir] - nu[ir - 1]) / (y[ir] - y[ir - 1])
    w = y / np.trapezoid(y, nu)
    mean = np.trapezoid(nu * w, nu)
    std = np.sqrt(np.trapezoid((nu - mean) ** 2 * w, nu))
    return PeakWidth(float(nu[ip]), float(x_r - x_l), float(std))


@dataclass
class EnsembleResult:
    times: np.ndarray
    populations: np.ndarray  # (n_t, N)
    population_stderr: np.ndarray
    n_trajectories: int
    master_seed: int
    density_matrices: np.ndarray | None = None  # (n_t, N, N)
    density_stderr: np.ndarray | None = None  # elementwise SE of real and imag parts, packed complex
    excluded: int = 0
    traces: dict[int, np.ndarray] = field(default_factory=dict)


def _run_block(args):
    from .nmqsd import propagate_batch
    from .noise import generate_noise

    model, kernel, psi0, grid, seed, indices, stride, nonlinear, want_traces = args
    noise = np.stack([generate_noise(kernel, model.n_sites, grid, seed, i).samples for i in indices])
    res = propagate_batch(
        model,
        kernel,
        np.repeat(psi0[None], len(indices), axis=0),
        grid,
        noise,
        nonlinear=nonlinear,
        record_stride=stride,
        raise_on_failure=False,
    )
    ok = ~res.failed
    st = res.states[ok]
    pops = np.abs(st) ** 2
    rho = np.einsum("bti,btj->tij", st, st.conj())
    outer = st[:, :, :, None] * st[:, :, None, :].conj()
    second = (outer.real**2).sum(axis=0) + 1j * (outer.imag**2).sum(axis=0)
    norms = np.sum(pops, axis=2)
    traces = {i: res.states[b] for b, i in enumerate(indices) if i in want_traces}
    return {
        "n": int(ok.sum()),
        "pop_sum": pops.sum(axis=0),
        "pop_sq": (pops**2).sum(axis=0),
        "rho_sum": rho,
        "rho_sq": second,
        "norm_sum": norms.sum(axis=0),
        "norm_sq": (norms**2).sum(axis=0),
        "failed": int(res.failed.sum()),
        "traces": traces,
        "times": res.times,
    }


def run_ensemble(
    model,
    kernel: BathKernel,
    psi0,
    n_traj: int,
    grid: TimeGrid,
    master_seed: int,
    *,
    nonlinear: bool = True,
    record_stride: int = 1,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
    trace_indices=(0, 1, 2),
):
    """Propagate ``n_traj`` trajectories in fixed blocks and combine them in index order.

    Results depend only on the inputs, not on ``workers``.  Returns the
    raw accumulated sums.
    """
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    psi0 = np.asarray(psi0, dtype=complex)
    blocks = [list(range(lo, min(lo + block_size, n_traj))) for lo in range(0, n_traj, block_size)]
    tasks = [
        (model, kernel, psi0, grid, master_seed, idx, record_stride, nonlinear, set(trace_indices)) for idx in blocks
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, tasks))
    else:
        parts = [_run_block(t) for t in tasks]
    total = {key: sum(p[key] for p in parts) for key in ("n", "pop_sum", "pop_sq", "rho_sum", "rho_sq", "norm_sum", "norm_sq", "failed")}
    total["traces"] = {}
    for p in parts:
        total["traces"].update(p["traces"])
    total["times"] = parts[0]["times"]
    if total["failed"] > EXCLUSION_BUDGET * n_traj:
        raise EnsembleFailure(f"{total['failed']} of {n_traj} trajectories diverged (budget {EXCLUSION_BUDGET:.1%})")
    if total["failed"]:
        log.warning("excluded %d diverged trajectories", total["failed"])
    return total


def _mean_se(s1, s2, n):
    mean = s1 / n
    if n < 2:
        return mean, np.full_like(mean, np.inf)
    var = np.maximum(s2 - n * mean**2, 0.0) / (n - 1)
    return mean, np.sqrt(var / n)


def _complex_mean_se(s1, s2, n):
    mean = s1 / n
    re_m, re_se = _mean_se(s1.real, s2.real, n)
    im_m, im_se = _mean_se(s1.imag, s2.imag, n)
    return mean, re_se + 1j * im_se


def ensemble_transfer(
    model,
    kernel: BathKernel,
    initial_site: int,
    n_traj: int,
    grid: TimeGrid,
    master_seed: int,
    *,
    record_stride: int = 1,
    workers: int = 1,
    n_traces: int = 3,
) -> EnsembleResult:
    """Site populations from nonlinear trajectories started on ``initial_site`` (1-based)."""
    if not 1 <= initial_site <= model.n_sites:
        raise ValueError("initial site out of range")
    psi0 = np.zeros(model.n_sites, dtype=complex)
    psi0[initial_site - 1] = 1.0
    tot = run_ensemble(
        model,
        kernel,
        psi0,
        n_traj,
        grid,
        master_seed,
        nonlinear=True,
        record_stride=record_stride,
        workers=workers,
        trace_indices=range(n_traces),
    )
    n = tot["n"]
    pops, pop_se = _mean_se(tot["pop_sum"], tot["pop_sq"], n)
    rho, rho_se = _complex_mean_se(tot["rho_sum"], tot["rho_sq"], n)
    return EnsembleResult(
        tot["times"],
        pops,
        pop_se,
        n_traj,
        master_seed,
        rho,
        rho_se,
        tot["failed"],
        {i: np.abs(tr) ** 2 for i, tr in sorted(tot["traces"].items())},
    )


@dataclass
class LinearEnsembleResult:
    times: np.ndarray
    mean_norm: np.ndarray
    norm_stderr: np.ndarray
    density_matrices: np.ndarray
    density_stderr: np.ndarray
    n_trajectories: int


def linear_ensemble(model, kernel, psi0, n_traj, grid, master_seed, *, record_stride=1, workers=1):
    """Unnormalised average of |psi><psi| over linear trajectories."""
    tot = run_ensemble(
        model, kernel, psi0, n_traj, grid, master_seed, nonlinear=False, record_stride=record_stride, workers=workers, trace_indices=()
    )
    n = tot["n"]
    nm, nse = _mean_se(tot["norm_sum"], tot["norm_sq"], n)
    rho, rse = _complex_mean_se(tot["rho_sum"], tot["rho_sq"], n)
    return LinearEnsembleResult(tot["times"], nm, nse, rho, rse, n_traj)


def convergence_probe(a: EnsembleResult, b: EnsembleResult) -> float:
    if a.populations.shape != b.populations.shape or not np.allclose(a.times, b.times):
        raise ValueError("ensembles live on different grids")
    return float(np.max(np.abs(a.populations - b.populations)))


def transfer_fidelity(populations: np.ndarray, reference: np.ndarray) -> float:
    """1 - max |P - P_ref| over sites and times."""
    if populations.shape != reference.shape:
        raise ValueError("population arrays differ in shape")
    return float(1.0 - np.max(np.abs(populations - reference)))


def absorption_spectrum(
    model,
    kernel: BathKernel,
    freq_grid,
    *,
    polarization=(1.0, 0.0, 0.0),
    damping_time: float = 50.0,
    t_max: float | None = None,
    step: float | None = None,
    window: str = "exponential",
    record_dt: float = 0.05,
    stop_below: float = 1e-8,
    max_halvings: int = 3,
) -> Spectrum:
    """Zero-noise absorption lineshape of ``model`` on ``freq_grid``.

    ``polarization`` is a 3-vector or ``"isotropic"``, which sums the
    spectra of the three Cartesian polarizations before normalising.
    ``t_max`` defaults to five damping times.  With ``step=None`` the
    default step is halved (at most ``max_halvings`` times) when the
    memory operators overflow, since they stiffen the generator as they
    grow; an explicit step is used as given.
    """
    from .nmqsd import PropagationError, default_step

    if t_max is None:
        t_max = 5.0 * damping_time
    if step is not None:
        return _absorption(model, kernel, freq_grid, polarization, damping_time, t_max, step, window, record_dt, stop_below)
    step = default_step(model, kernel)
    for attempt in range(max_halvings + 1):
        try:
            return _absorption(model, kernel, freq_grid, polarization, damping_time, t_max, step, window, record_dt, stop_below)
        except PropagationError as exc:
            if attempt == max_halvings:
                raise
            log.warning("%s at step %.4g; retrying with half the step", exc, step)
            step *= 0.5


def _absorption(model, kernel, freq_grid, polarization, damping_time, t_max, step, window, record_dt, stop_below):
    from .model import bright_state
    from .nmqsd import propagate_zero_noise

    # sample the autocorrelation about every record_dt whatever the step
    stride = max(1, int(round(record_dt / step)))
    grid = TimeGrid.covering(t_max, step)
    if isinstance(polarization, str):
        if polarization != "isotropic":
            raise ValueError(f"unknown polarization {polarization!r}")
        pols = np.eye(3)
    else:
        pols = [np.asarray(polarization, dtype=float)]
    total = None
    for e in pols:
        psi = bright_state(model, e)
        if not np.any(psi):
            continue  # polarization normal to every dipole
        tr = propagate_zero_noise(model, kernel, psi, grid, record_stride=stride, stop_below=stop_below)
        part = spectrum_from_autocorrelation(
            autocorrelation(tr, psi), tr.times, damping_time, freq_grid, window=window, normalize=False
        )
        total = part if total is None else Spectrum(part.frequencies, total.values + part.values, damping_time, window, "none")
    if total is None:
        raise ValueError("no polarization couples to the aggregate")
    area = total.area()
    if area == 0:
        raise ValueError("spectrum has zero area")
    return Spectrum(total.frequencies, total.values / area, damping_time, window, "area")
