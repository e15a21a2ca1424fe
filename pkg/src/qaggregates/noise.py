"""Complex coloured Gaussian drivers z*_m(t) for the stochastic propagators.

The driver of site m satisfies

    E[z*_m(t)]            = 0
    E[z*_m(t) z*_n(s)]    = 0
    E[z_m(t) z*_n(s)]     = a(t - s) delta_mn

i.e. E[z*_m(t) z_m(s)] = conj(a(t - s)).  This is the covariance implied by
z*_m(t) = -i sum_j kappa_mj z*_mj exp(i w_mj t) with Bargmann labels of unit
variance, and it is the one for which the linear ensemble reproduces the
reduced density matrix.

For a kernel term g exp(-w tau) the z* component is a stationary complex
Ornstein-Uhlenbeck process with rate conj(w), generated by its exact
discrete recursion on the half-step lattice.  Each (master_seed,
trajectory_index, site) triple owns a PCG64 stream spawned from
``SeedSequence(master_seed, spawn_key=(trajectory_index, site))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .bath import BathKernel
from .grid import TimeGrid

RNG_DESCRIPTION = "numpy PCG64; stream = SeedSequence(master_seed, spawn_key=(trajectory_index, site))"


class InvalidKernelError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseTrajectory:
    grid: TimeGrid
    samples: np.ndarray  # (n_sites, 2 * n_steps + 1), values of z*_m at half steps
    master_seed: int
    trajectory_index: int

    @property
    def n_sites(self) -> int:
        return self.samples.shape[0]

    @property
    def full_steps(self) -> np.ndarray:
        return self.samples[:, ::2]

    @classmethod
    def zeros(cls, grid: TimeGrid, n_sites: int) -> "NoiseTrajectory":
        return cls(grid, np.zeros((n_sites, 2 * grid.n_steps + 1), dtype=complex), 0, 0)


def stream(master_seed: int, trajectory_index: int, site: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trajectory_index), int(site)))
    return np.random.Generator(np.random.PCG64(ss))


def _check_kernel(kernel: BathKernel):
    g, w = kernel.amplitudes, kernel.rates
    if np.any(w.real <= 0):
        raise InvalidKernelError("every kernel term must decay (Re w > 0)")
    if np.any(np.abs(g.imag) > 1e-14 * np.maximum(1.0, np.abs(g))) or np.any(g.real < 0):
        raise InvalidKernelError("noise generation needs real non-negative term amplitudes")


def _site_process(kernel: BathKernel, grid: TimeGrid, rng: np.random.Generator) -> np.ndarray:
    n_half = 2 * grid.n_steps + 1
    n_terms = kernel.n_terms
    xi = rng.standard_normal((2, n_terms, n_half))
    xi = (xi[0] + 1j * xi[1]) * np.sqrt(0.5)
    out = np.zeros(n_half, dtype=complex)
    for j in range(n_terms):
        g = kernel.amplitudes[j].real
        if g == 0.0:
            continue
        a = np.exp(-np.conj(kernel.rates[j]) * 0.5 * grid.step)
        drive = np.sqrt(g * (1.0 - abs(a) ** 2)) * xi[j]
        drive[0] = np.sqrt(g) * xi[j, 0]
        out += lfilter([1.0], [1.0, -a], drive)
    return out


def generate_noise(
    kernel: BathKernel, n_sites: int, grid: TimeGrid, master_seed: int, trajectory_index: int
) -> NoiseTrajectory:
    _check_kernel(kernel)
    samples = np.stack(
        [_site_process(kernel, grid, stream(master_seed, trajectory_index, m)) for m in range(n_sites)]
    )
    return NoiseTrajectory(grid, samples, int(master_seed), int(trajectory_index))


@dataclass(frozen=True)
class CovarianceEstimate:
    """Lag-resolved second moments, averaged over time origins.

    ``conj_cov[k]`` estimates E[z*_a(t + lag_k) z_b(t)] and ``plain_cov[k]``
    estimates E[z_a(t + lag_k) z_b(t)].  Standard errors are given
    separately for real and imaginary parts, packed as ``re + 1j * im``.
    """

    lags: np.ndarray
    conj_cov: np.ndarray
    conj_stderr: np.ndarray
    plain_cov: np.ndarray
    plain_stderr: np.ndarray
    n_samples: int


def _mean_and_stderr(per_traj: np.ndarray):
    m = per_traj.shape[0]
    mean = per_traj.mean(axis=0)
    if m < 2:
        return mean, np.full(mean.shape, np.inf + 1j * np.inf)
    se = per_traj.real.std(axis=0, ddof=1) + 1j * per_traj.imag.std(axis=0, ddof=1)
    return mean, se / np.sqrt(m)


def empirical_covariance(
    ensemble: Sequence[NoiseTrajectory], site_a: int, site_b: int, lag_steps: Sequence[int]
) -> CovarianceEstimate:
    """Estimate driver covariances at lags given in units of the full grid step.

    Each trajectory contributes one time-origin average, so the standard
    errors come from independent samples.
    """
    if not ensemble:
        raise ValueError("empty ensemble")
    grid = ensemble[0].grid
    if any(tr.grid != grid for tr in ensemble):
        raise ValueError("ensemble members live on different grids")
    lags = np.asarray(lag_steps, dtype=int)
    if np.any(lags < 0) or np.any(lags > grid.n_steps):
        raise ValueError("lags must lie in 0..n_steps")
    zs_a = np.stack([tr.full_steps[site_a] for tr in ensemble])  # z*_a
    zs_b = np.stack([tr.full_steps[site_b] for tr in ensemble])  # z*_b
    n_t = zs_a.shape[1]
    conj_pt = np.empty((len(ensemble), len(lags)), dtype=complex)
    plain_pt = np.empty_like(conj_pt)
    for k, lag in enumerate(lags):
        late_a = zs_a[:, lag:]
        early_b = zs_b[:, : n_t - lag]
        conj_pt[:, k] = np.mean(late_a * np.conj(early_b), axis=1)
        plain_pt[:, k] = np.mean(np.conj(late_a) * np.conj(early_b), axis=1)
    cc, cc_se = _mean_and_stderr(conj_pt)
    pc, pc_se = _mean_and_stderr(plain_pt)
    return CovarianceEstimate(lags * grid.step, cc, cc_se, pc, pc_se, len(ensemble))
