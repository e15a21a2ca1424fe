"""Electronic part of the Holstein aggregate.

Energies are in units of the monomer spectral width (Delta) and measured
relative to the monomer electronic transition; hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidSpecError(ValueError):
    """Raised for aggregate definitions that violate their invariants."""


@dataclass(frozen=True)
class AggregateModel:
    """N sites sharing one electronic excitation.

    Attributes
    ----------
    site_energies : (N,) float array
    coupling : (N, N) real symmetric matrix with zero diagonal
    dipoles : (N, 3) transition dipoles
    """

    site_energies: np.ndarray
    coupling: np.ndarray
    dipoles: np.ndarray = field(default=None)

    def __post_init__(self):
        eps = np.atleast_1d(np.asarray(self.site_energies, dtype=float))
        n = eps.shape[0]
        if n < 1:
            raise InvalidSpecError("aggregate needs at least one site")
        v = np.asarray(self.coupling, dtype=float).reshape(n, n)
        if self.dipoles is None:
            mu = np.tile([1.0, 0.0, 0.0], (n, 1))
        else:
            mu = np.asarray(self.dipoles, dtype=float).reshape(n, 3)
        if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(v)) and np.all(np.isfinite(mu))):
            raise InvalidSpecError("non-finite entry in aggregate model")
        if np.any(np.diag(v) != 0.0):
            raise InvalidSpecError("coupling matrix must have a zero diagonal")
        if not np.array_equal(v, v.T):
            raise InvalidSpecError("coupling matrix must be symmetric")
        for name, arr in (("site_energies", eps), ("coupling", v), ("dipoles", mu)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_sites(self) -> int:
        return self.site_energies.shape[0]

    @classmethod
    def monomer(cls, energy: float = 0.0) -> "AggregateModel":
        return cls(np.array([energy]), np.zeros((1, 1)))


@dataclass(frozen=True)
class RingSpec:
    """Identical monomers on a ring with nearest-neighbour coupling.

    ``dipole_tilt`` is the in-plane angle between neighbouring dipoles.
    """

    n_sites: int
    nn_coupling: float
    dipole_tilt: float = 0.0
    site_energy: float = 0.0

    @property
    def shift(self) -> float:
        """Energy C of the k = 1 exciton, bright when dipoles turn by 2 pi / N per site.

        C = 2 V cos(2 pi / N) for N >= 3.  The dimer has a single bond, so
        its k = 1 (antisymmetric) state sits at -V rather than -2 V.
        """
        return _shift_factor(self.n_sites) * self.nn_coupling

    @classmethod
    def from_shift(cls, n_sites: int, shift: float, **kw) -> "RingSpec":
        c = _shift_factor(n_sites)
        if abs(c) < 1e-12:
            raise InvalidSpecError(f"N={n_sites} ring has C=0 for every V")
        return cls(n_sites, shift / c, **kw)


def _shift_factor(n: int) -> float:
    if n == 2:
        return -1.0
    return 2.0 * np.cos(2.0 * np.pi / n)


def build_ring(spec: RingSpec) -> AggregateModel:
    n = int(spec.n_sites)
    if n < 2:
        raise InvalidSpecError("a ring needs N >= 2 sites")
    v = np.zeros((n, n))
    for k in range(n):
        # for N=2 both bonds join the same pair; keep a single bond
        v[k, (k + 1) % n] = v[(k + 1) % n, k] = spec.nn_coupling
    angles = spec.dipole_tilt * np.arange(n)
    dipoles = np.stack([np.cos(angles), np.sin(angles), np.zeros(n)], axis=1)
    return AggregateModel(np.full(n, float(spec.site_energy)), v, dipoles)


def electronic_hamiltonian(model: AggregateModel) -> np.ndarray:
    return (np.diag(model.site_energies) + model.coupling).astype(complex)


def bright_state(model: AggregateModel, polarization) -> np.ndarray:
    """Unnormalised optically prepared state with amplitudes E . mu_n."""
    e = np.asarray(polarization, dtype=float).reshape(3)
    if not np.any(e):
        raise ValueError("polarization must be nonzero")
    return (model.dipoles @ e).astype(complex)


def site_state(model: AggregateModel, site: int) -> np.ndarray:
    """Excitation localised on ``site`` (1-based)."""
    if not 1 <= site <= model.n_sites:
        raise ValueError(f"site {site} outside 1..{model.n_sites}")
    psi = np.zeros(model.n_sites, dtype=complex)
    psi[site - 1] = 1.0
    return psi
