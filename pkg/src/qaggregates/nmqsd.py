"""Stochastic Schroedinger propagators with noise-independent memory operators.

The electronic state obeys

    d/dt psi = -i H psi - sum_m P_m (z*_m(t) - Obar_m(t)) psi

with Obar_m(t) = int_0^t a(t - s) D_m(t, s) ds.  Splitting the kernel into
exponential terms a = sum_j g_j exp(-w_j tau) turns the memory integral into
the local ODE

    d/dt Obar_mj = -g_j P_m - w_j Obar_mj + [A, Obar_mj],
    A = -i H + sum_l P_l Obar_l,

which is integrated jointly with psi by fixed-step RK4.  Because D_m does
not depend on the noise, a single set of memory operators serves a whole
batch of trajectories.

Translation-invariant rings only carry the operators of site 0; the other
sites are cyclic shifts of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bath import BathKernel
from .grid import TimeGrid
from .model import AggregateModel, electronic_hamiltonian
from .noise import NoiseTrajectory


class PropagationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class StepSizeError(PropagationError):
    pass


NORM_DRIFT_LIMIT = 0.1
STOP_CHECK_EVERY = 16


@dataclass(frozen=True)
class AuxOperatorSet:
    """Memory operators resolved by site m and kernel term j: shape (M, J, N, N)."""

    ops: np.ndarray

    @classmethod
    def zeros(cls, n_sites: int, n_terms: int) -> "AuxOperatorSet":
        return cls(np.zeros((n_sites, n_terms, n_sites, n_sites), dtype=complex))

    @property
    def total(self) -> np.ndarray:
        """Obar_m summed over kernel terms, shape (M, N, N)."""
        return self.ops.sum(axis=1)


@dataclass
class TrajectoryResult:
    times: np.ndarray
    states: np.ndarray  # (n_recorded, N)
    norms: np.ndarray
    master_seed: int | None = None
    trajectory_index: int | None = None
    aux: list[AuxOperatorSet] | None = None

    @property
    def grid_step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


@dataclass
class BatchResult:
    times: np.ndarray
    states: np.ndarray  # (B, n_recorded, N)
    failed: np.ndarray  # (B,) bool
    failure_times: np.ndarray  # (B,) nan where not failed
    aux: list[AuxOperatorSet] | None = field(default=None)


def aux_rhs(model: AggregateModel, kernel: BathKernel, aux: AuxOperatorSet) -> AuxOperatorSet:
    """Time derivative of the term-resolved memory operators."""
    engine = _AuxEngine(model, kernel, reduced=False)
    return AuxOperatorSet(engine.deriv(aux.ops))


def is_translation_invariant(model: AggregateModel) -> bool:
    n = model.n_sites
    if n < 2:
        return False
    h = electronic_hamiltonian(model)
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return bool(np.array_equal(h, h[0][idx]))


class _AuxEngine:
    """Evaluates memory-operator derivatives, optionally in cyclic-reduced form."""

    def __init__(self, model: AggregateModel, kernel: BathKernel, reduced: bool | None = None):
        self.n = n = model.n_sites
        self.h = electronic_hamiltonian(model)
        self.minus_ih = -1j * self.h
        self.g = kernel.amplitudes
        self.w = kernel.rates
        self.n_terms = kernel.n_terms
        if reduced is None:
            reduced = is_translation_invariant(model)
        self.reduced = reduced
        self.n_ops = 1 if reduced else n
        ar = np.arange(n)
        # projector source term -g_j P_m for every carried site
        proj = np.zeros((self.n_ops, n, n))
        proj[ar[: self.n_ops], ar[: self.n_ops], ar[: self.n_ops]] = 1.0
        self.source = -self.g[None, :, None, None] * proj[:, None]
        self.decay = self.w[None, :, None, None]
        # cyclic index tables: site m operator [i, k] = site-0 operator [(i-m)%n, (k-m)%n]
        self.row_idx = (ar[:, None] - ar[None, :]) % n  # [m, i]

    def initial(self) -> np.ndarray:
        return np.zeros((self.n_ops, self.n_terms, self.n, self.n), dtype=complex)

    def rows(self, ops: np.ndarray) -> np.ndarray:
        """R = sum_l P_l Obar_l; row l of R is row l of Obar_l."""
        tot = ops.sum(axis=1)
        if self.reduced:
            # R[l, k] = Obar_0[0, (k - l) % n]
            return tot[0, 0][self.row_idx.T]
        return tot[np.arange(self.n), np.arange(self.n)]

    def expand(self, ops: np.ndarray) -> np.ndarray:
        """Full (M, N, N) stack of term-summed operators."""
        tot = ops.sum(axis=1)
        if not self.reduced:
            return tot
        ri = self.row_idx.T  # [m, i] -> (i - m) % n
        return tot[0][ri[:, :, None], ri[:, None, :]]

    def deriv(self, ops: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
        return self.deriv_and_generator(ops, rows)[0]

    def deriv_and_generator(self, ops: np.ndarray, rows: np.ndarray | None = None):
        """Operator derivative together with the state generator A = -iH + R."""
        if rows is None:
            rows = self.rows(ops)
        a = self.minus_ih + rows
        d = self.source - self.decay * ops
        if self.n > 1:  # 1 x 1 operators commute
            d += a @ ops - ops @ a
        return d, a


def _ensure_batch(psi0) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex)
    return psi[None, :] if psi.ndim == 1 else psi


# overflow is detected explicitly below and reported as PropagationError
@np.errstate(over="ignore", invalid="ignore")
def propagate_batch(
    model: AggregateModel,
    kernel: BathKernel,
    psi0,
    grid: TimeGrid,
    noise: np.ndarray | None = None,
    *,
    nonlinear: bool = False,
    record_stride: int = 1,
    keep_aux: bool = False,
    reduced: bool | None = None,
    raise_on_failure: bool = True,
    stop_below: float | None = None,
) -> BatchResult:
    """Jointly integrate a batch of states and the shared memory operators.

    ``noise`` holds z*_m on the half-step lattice, shape (B, N, 2 n_steps + 1);
    ``None`` means zero noise.  In nonlinear mode states are renormalised
    after each step and the recorded states have unit norm.

    ``stop_below`` (linear mode only) ends the integration once every state
    norm has decayed below that fraction of its initial value; the remaining
    records are set to zero.  The norm test runs every ``STOP_CHECK_EVERY`` steps.  Absorption runs use it so that long-time growth
    of the memory operators cannot spoil an already-vanished signal.
    """
    psi = _ensure_batch(psi0).copy()
    if stop_below is not None and nonlinear:
        raise ValueError("stop_below applies to linear propagation only")
    if noise is not None:
        noise = np.asarray(noise)
        if psi.shape[0] == 1 and noise.ndim == 3:
            psi = np.repeat(psi, noise.shape[0], axis=0)
    b, n = psi.shape
    if n != model.n_sites:
        raise ValueError("state dimension does not match the model")
    if noise is not None:
        if noise.shape != (b, n, 2 * grid.n_steps + 1):
            raise ValueError(f"noise shape {noise.shape} does not match batch/grid")
    engine = _AuxEngine(model, kernel, reduced)
    ops = engine.initial()
    h = grid.step
    half, sixth = 0.5 * h, h / 6.0
    mih_t = engine.minus_ih.T
    g_c = np.conj(kernel.amplitudes)
    w_c = np.conj(kernel.rates)

    if nonlinear:
        nrm = np.linalg.norm(psi, axis=1)
        if np.any(np.abs(nrm - 1.0) > 1e-8):
            raise ValueError("nonlinear propagation needs normalised initial states")
    shift = np.zeros((b, n, kernel.n_terms), dtype=complex) if nonlinear else None

    rec_idx = np.arange(0, grid.n_steps + 1, record_stride)
    states = np.zeros((b, rec_idx.size, n), dtype=complex)
    norm0 = np.linalg.norm(psi, axis=1)
    states[:, 0] = psi
    aux_snaps = [AuxOperatorSet(ops.copy())] if keep_aux else None
    failed = np.zeros(b, dtype=bool)
    no_bad = np.zeros(b, dtype=bool)
    fail_t = np.full(b, np.nan)
    next_rec = 1

    def linear_rhs(p, z, gen):
        d = p @ gen.T
        if z is not None:
            d -= z * p
        return d

    def nonlinear_rhs(p, sh, z, rows):
        nrm2 = np.einsum("bi,bi->b", p.conj(), p).real
        pop = (p.conj() * p).real / nrm2[:, None]  # <P_m>
        zt = sh.sum(axis=2)
        if z is not None:
            zt = zt + z
        mean_z = np.sum(pop * zt, axis=1)
        d = p @ mih_t - (zt - mean_z[:, None]) * p
        # memory part: sum_m P_m Obar_m psi minus its expectation
        x = p @ rows.T
        mean_x = np.einsum("bi,bi->b", p.conj(), x) / nrm2
        d += x - mean_x[:, None] * p
        dsh = -w_c * sh - g_c[None, None, :] * pop[:, :, None]
        return d, dsh

    for k in range(grid.n_steps):
        t = k * h
        if noise is not None:
            z0, z1, z2 = noise[:, :, 2 * k], noise[:, :, 2 * k + 1], noise[:, :, 2 * k + 2]
        else:
            z0 = z1 = z2 = None
        r1 = engine.rows(ops)
        o1, a1 = engine.deriv_and_generator(ops, r1)
        ops2 = ops + half * o1
        r2 = engine.rows(ops2)
        o2, a2 = engine.deriv_and_generator(ops2, r2)
        ops3 = ops + half * o2
        r3 = engine.rows(ops3)
        o3, a3 = engine.deriv_and_generator(ops3, r3)
        ops4 = ops + h * o3
        r4 = engine.rows(ops4)
        o4, a4 = engine.deriv_and_generator(ops4, r4)
        if not nonlinear:
            k1 = linear_rhs(psi, z0, a1)
            k2 = linear_rhs(psi + half * k1, z1, a2)
            k3 = linear_rhs(psi + half * k2, z1, a3)
            k4 = linear_rhs(psi + h * k3, z2, a4)
            psi = psi + sixth * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            k1, s1 = nonlinear_rhs(psi, shift, z0, r1)
            k2, s2 = nonlinear_rhs(psi + 0.5 * h * k1, shift + 0.5 * h * s1, z1, r2)
            k3, s3 = nonlinear_rhs(psi + 0.5 * h * k2, shift + 0.5 * h * s2, z1, r3)
            k4, s4 = nonlinear_rhs(psi + h * k3, shift + h * s3, z2, r4)
            psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            shift = shift + (h / 6.0) * (s1 + 2 * s2 + 2 * s3 + s4)
        ops = ops + sixth * (o1 + 2 * (o2 + o3) + o4)

        # a scalar sum is non-finite whenever any entry is; inspect rows only then
        bad = ~np.all(np.isfinite(psi), axis=1) if not np.isfinite(psi.sum()) else no_bad
        if nonlinear:
            nrm = np.linalg.norm(psi, axis=1)
            drift = np.abs(nrm - 1.0)
            if np.any(drift[~bad] > NORM_DRIFT_LIMIT):
                raise StepSizeError("norm drift per step exceeds 0.1; reduce the time step", t + h)
            psi = psi / np.where(bad, 1.0, nrm)[:, None]
        if np.any(bad):
            newly = bad & ~failed
            if raise_on_failure:
                raise PropagationError("non-finite amplitude", t + h)
            fail_t[newly] = t + h
            failed |= bad
            psi[bad] = 0.0
            if shift is not None:
                shift[bad] = 0.0
        if not np.isfinite(ops.sum()):
            raise PropagationError("non-finite memory operator", t + h)
        if next_rec < rec_idx.size and k + 1 == rec_idx[next_rec]:
            states[:, next_rec] = psi
            if keep_aux:
                aux_snaps.append(AuxOperatorSet(ops.copy()))
            next_rec += 1
        if stop_below is not None and k % STOP_CHECK_EVERY == 0:
            if np.all(np.linalg.norm(psi, axis=1) < stop_below * norm0):
                break

    if keep_aux and engine.reduced:
        aux_snaps = [AuxOperatorSet(_expand_terms(engine, a.ops)) for a in aux_snaps]
    states[failed] = np.nan
    return BatchResult(grid.times[rec_idx], states, failed, fail_t, aux_snaps)


def _expand_terms(engine: _AuxEngine, ops: np.ndarray) -> np.ndarray:
    ri = engine.row_idx.T
    return ops[0][:, ri[:, :, None], ri[:, None, :]].transpose(1, 0, 2, 3)


def _single(batch: BatchResult, noise: NoiseTrajectory | None) -> TrajectoryResult:
    st = batch.states[0]
    return TrajectoryResult(
        batch.times,
        st,
        np.linalg.norm(st, axis=1),
        None if noise is None else noise.master_seed,
        None if noise is None else noise.trajectory_index,
        batch.aux,
    )


def _check_noise(noise: NoiseTrajectory, model: AggregateModel, grid: TimeGrid):
    if noise.grid != grid:
        raise ValueError("noise grid does not match the propagation grid")
    if noise.n_sites != model.n_sites:
        raise ValueError("noise has the wrong number of sites")


def propagate_linear(
    model: AggregateModel,
    kernel: BathKernel,
    noise: NoiseTrajectory,
    psi0,
    grid: TimeGrid,
    *,
    record_stride: int = 1,
    keep_aux: bool = False,
) -> TrajectoryResult:
    _check_noise(noise, model, grid)
    res = propagate_batch(
        model, kernel, psi0, grid, noise.samples[None], record_stride=record_stride, keep_aux=keep_aux
    )
    return _single(res, noise)


def propagate_zero_noise(
    model: AggregateModel,
    kernel: BathKernel,
    psi0,
    grid: TimeGrid,
    *,
    record_stride: int = 1,
    keep_aux: bool = False,
    stop_below: float | None = None,
) -> TrajectoryResult:
    res = propagate_batch(
        model, kernel, psi0, grid, None, record_stride=record_stride, keep_aux=keep_aux, stop_below=stop_below
    )
    return _single(res, None)


def propagate_nonlinear(
    model: AggregateModel,
    kernel: BathKernel,
    noise: NoiseTrajectory,
    psi0,
    grid: TimeGrid,
    *,
    record_stride: int = 1,
) -> TrajectoryResult:
    _check_noise(noise, model, grid)
    res = propagate_batch(
        model, kernel, psi0, grid, noise.samples[None], nonlinear=True, record_stride=record_stride
    )
    return _single(res, noise)


def default_step(model: AggregateModel, kernel: BathKernel) -> float:
    """RK4 step small against the fastest scale of the problem."""
    radius = float(np.max(np.abs(np.linalg.eigvalsh(electronic_hamiltonian(model)))))
    bath = float(np.max(np.abs(kernel.rates.imag) + kernel.rates.real)) if not kernel.is_zero() else 0.0
    amp = float(np.sqrt(abs(np.sum(kernel.amplitudes))))
    fastest = max(radius, bath, amp, 1.0)
    return min(0.02, 0.1 / fastest)


def zofe_master_equation(
    model: AggregateModel, kernel: BathKernel, rho0, grid: TimeGrid, *, record_stride: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic equation for the mean of |psi><psi| over linear trajectories.

    d/dt rho = A rho + rho A^dag - sum_m (P_m rho Obar_m^dag + Obar_m rho P_m),
    A = -i H + sum_m P_m Obar_m.  Returns (times, rho[t]).
    """
    engine = _AuxEngine(model, kernel)
    n = model.n_sites
    ops = engine.initial()
    rho = np.array(rho0, dtype=complex)
    h = grid.step
    proj_idx = np.arange(n)

    def rhs(r, o):
        full = engine.expand(o)
        rows = engine.rows(o)
        a = engine.minus_ih + rows
        d = a @ r + r @ a.conj().T
        # P_m rho Obar_m^dag: row m of rho times Obar_m^dag
        pr = np.zeros((n, n, n), dtype=complex)
        pr[proj_idx, proj_idx, :] = r
        cross = np.einsum("mik,mjk->ij", pr, full.conj())
        return d - cross - cross.conj().T

    rec = list(range(0, grid.n_steps + 1, record_stride))
    out = [rho.copy()]
    for k in range(grid.n_steps):
        o1 = engine.deriv(ops)
        q1 = rhs(rho, ops)
        ops2 = ops + 0.5 * h * o1
        o2 = engine.deriv(ops2)
        q2 = rhs(rho + 0.5 * h * q1, ops2)
        ops3 = ops + 0.5 * h * o2
        o3 = engine.deriv(ops3)
        q3 = rhs(rho + 0.5 * h * q2, ops3)
        ops4 = ops + h * o3
        o4 = engine.deriv(ops4)
        q4 = rhs(rho + h * q3, ops4)
        rho = rho + (h / 6.0) * (q1 + 2 * q2 + 2 * q3 + q4)
        ops = ops + (h / 6.0) * (o1 + 2 * o2 + 2 * o3 + o4)
        if k + 1 in rec:
            out.append(rho.copy())
    return grid.times[rec], np.array(out)
