"""Lorentzian spectral densities and the zero-temperature bath kernel.

Each Lorentzian lives on the whole real frequency line, so its Fourier
transform is a single damped exponential:

    J(w)   = sum_j (p_j / pi) * g_j / ((w - W_j)**2 + g_j**2)
    a(tau) = int dw J(w) exp(-i w tau) = sum_j p_j exp(-(g_j + i W_j) tau),  tau >= 0
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LorentzianMode:
    weight: float  # contribution to int J dw
    center: float
    width: float  # HWHM

    def __post_init__(self):
        vals = (self.weight, self.center, self.width)
        if not all(np.isfinite(vals)):
            raise ValueError("Lorentzian parameters must be finite")
        if self.weight < 0:
            raise ValueError("Lorentzian weight must be >= 0")
        if self.width <= 0:
            raise ValueError("Lorentzian width must be > 0")


@dataclass(frozen=True)
class SpectralDensity:
    modes: tuple[LorentzianMode, ...]

    def __post_init__(self):
        modes = tuple(m if isinstance(m, LorentzianMode) else LorentzianMode(*m) for m in self.modes)
        if not modes:
            raise ValueError("spectral density needs at least one mode")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def from_triples(cls, triples: Sequence[Sequence[float]]) -> "SpectralDensity":
        return cls(tuple(LorentzianMode(*map(float, t)) for t in triples))

    def as_triples(self) -> list[tuple[float, float, float]]:
        return [(m.weight, m.center, m.width) for m in self.modes]

    @property
    def total_weight(self) -> float:
        return float(sum(m.weight for m in self.modes))

    def scaled(self, factor: float) -> "SpectralDensity":
        """Re-express in an energy unit ``1/factor`` times the current one."""
        return SpectralDensity(
            tuple(LorentzianMode(m.weight * factor**2, m.center * factor, m.width * factor) for m in self.modes)
        )

    def __call__(self, omega):
        return evaluate_spectral_density(self, omega)


@dataclass(frozen=True)
class BathKernel:
    """a(tau) = sum_j amplitudes[j] * exp(-rates[j] * tau) for tau >= 0."""

    amplitudes: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        w = np.atleast_1d(np.asarray(self.rates, dtype=complex))
        if g.shape != w.shape or g.ndim != 1:
            raise ValueError("amplitudes and rates must be 1-d arrays of equal length")
        for name, arr in (("amplitudes", g), ("rates", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_terms(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def zero(cls) -> "BathKernel":
        return cls(np.zeros(1), np.ones(1))

    def is_zero(self) -> bool:
        return not np.any(self.amplitudes)

    def __call__(self, tau):
        """Correlation function, extended to tau < 0 by a(-tau) = conj(a(tau))."""
        tau = np.asarray(tau, dtype=float)
        at = np.abs(tau)[..., None]
        val = np.sum(self.amplitudes * np.exp(-self.rates * at), axis=-1)
        return np.where(tau >= 0, val, np.conj(val))


def evaluate_spectral_density(sd: SpectralDensity, omega):
    omega = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega)
    for m in sd.modes:
        out = out + (m.weight / np.pi) * m.width / ((omega - m.center) ** 2 + m.width**2)
    return out


def kernel_from_spectral_density(sd: SpectralDensity) -> BathKernel:
    p = np.array([m.weight for m in sd.modes], dtype=complex)
    w = np.array([m.width + 1j * m.center for m in sd.modes])
    return BathKernel(p, w)


def huang_rhys_coupling(omega: float, huang_rhys: float) -> float:
    """Coupling kappa = omega * sqrt(X) of a discrete mode."""
    if omega <= 0 or huang_rhys < 0:
        raise ValueError("need omega > 0 and Huang-Rhys factor >= 0")
    return float(omega * np.sqrt(huang_rhys))


def calibrate_delta(sd: SpectralDensity) -> float:
    """Scale factor that gives the exact monomer spectrum unit standard deviation.

    ``sd.scaled(calibrate_delta(sd))`` is the same bath expressed in units of Delta.
    """
    from .oracle import monomer_exact_spectrum
    from .observables import spectrum_moments

    kernel = kernel_from_spectral_density(sd)
    fastest = float(np.max(np.abs(kernel.rates)) + np.sqrt(sd.total_weight))
    dt = min(0.05, 0.1 / fastest)
    try:
        # sampled-lineshape variance carries an O(dt) error from the t**3 kink
        # of the autocorrelation at t = 0; Richardson-extrapolate it away
        coarse = spectrum_moments(monomer_exact_spectrum(kernel, dt=dt), 2, central=True)
        fine = spectrum_moments(monomer_exact_spectrum(kernel, dt=0.5 * dt), 2, central=True)
        var = 2.0 * fine - coarse
    except (ValueError, FloatingPointError) as exc:
        raise CalibrationError(f"monomer spectrum moments unavailable: {exc}") from exc
    if not np.isfinite(var) or var <= 0:
        raise CalibrationError(f"monomer spectrum variance {var!r} is not positive and finite")
    return float(1.0 / np.sqrt(var))


# Broad low-frequency mode plus two narrow modes near 1.5 Delta. Weights sum to
# one so the stated centres survive calibration unchanged.
_DEFAULT_TRIPLES = (
    (0.16 / 0.76, 0.2, 0.2),
    (0.30 / 0.76, 1.4, 0.08),
    (0.30 / 0.76, 1.7, 0.08),
)


def default_spectral_density(calibrate: bool = True) -> SpectralDensity:
    sd = SpectralDensity.from_triples(_DEFAULT_TRIPLES)
    if calibrate:
        sd = sd.scaled(calibrate_delta(sd))
    return sd
