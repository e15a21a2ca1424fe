"""Command-line experiment runner.

Usage::

    python -m qaggregates run CONFIG
    python -m qaggregates validate CONFIG
    python -m qaggregates seed-info

Configuration files are INI-style: ``[section]`` headers followed by
``key = value`` lines, ``#`` or ``;`` comments.  Every key is optional, but
unknown sections or keys are errors.  See README.md for the full grammar.

Exit status: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bath import BathKernel, CalibrationError, SpectralDensity, calibrate_delta, kernel_from_spectral_density
from .bath import _DEFAULT_TRIPLES
from .grid import TimeGrid
from .model import AggregateModel, InvalidSpecError, RingSpec, bright_state, build_ring
from .nmqsd import PropagationError, default_step
from .noise import RNG_DESCRIPTION, InvalidKernelError, empirical_covariance, generate_noise
from .observables import (
    AmbiguousPeakError,
    EnsembleFailure,
    absorption_spectrum,
    ensemble_transfer,
    frequency_grid,
    peak_width,
    spectrum_from_autocorrelation,
    spectrum_moments,
)
from .oracle import CutoffError, PseudomodeConfig, free_ring_populations, pseudomode_dimer

log = logging.getLogger(__name__)

EXPERIMENTS = ("monomer-spectrum", "aggregate-spectrum", "transfer", "noise-check", "oracle-compare")


class ConfigError(ValueError):
    pass


# --- value parsers -------------------------------------------------------


def _float(text: str) -> float:
    v = float(text)
    if not np.isfinite(v):
        raise ValueError("must be finite")
    return v


def _positive(text: str) -> float:
    v = _float(text)
    if v <= 0:
        raise ValueError("must be > 0")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _auto(parser):
    def parse(text: str):
        return None if text.strip().lower() == "auto" else parser(text)

    return parse


def _choice(*options):
    def parse(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    return parse


def _int_list(text: str) -> tuple[int, ...]:
    vals = tuple(int(x) for x in re.split(r"[,\s]+", text.strip()) if x)
    if not vals:
        raise ValueError("empty list")
    return vals


def _triples(text: str):
    t = text.strip().lower()
    if t in ("default", "none"):
        return t
    out = []
    for chunk in t.split(";"):
        if not chunk.strip():
            continue
        parts = [float(x) for x in chunk.split(",")]
        if len(parts) != 3:
            raise ValueError(f"Lorentzian {chunk.strip()!r} needs weight, center, width")
        out.append(tuple(parts))
    if not out:
        raise ValueError("no Lorentzians given")
    SpectralDensity.from_triples(out)  # range checks
    return tuple(out)


def _polarization(text: str):
    t = text.strip().lower()
    axes = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
    if t == "isotropic":
        return t
    if t in axes:
        return axes[t]
    vec = tuple(float(x) for x in t.split(","))
    if len(vec) != 3 or not any(vec):
        raise ValueError("expected x, y, z, isotropic or a nonzero 3-vector")
    return vec


_SCHEMA = {
    "run": {
        "experiment": (_choice(*EXPERIMENTS), "transfer"),
        "output": (str, "results"),
    },
    "model": {
        "n_sites": (_count, "15"),
        "shift": (_auto(_float), "auto"),
        "coupling": (_auto(_float), "auto"),
        "dipole_tilt": (_auto(_float), "auto"),
        "site_energy": (_float, "0.0"),
    },
    "bath": {
        "lorentzians": (_triples, "default"),
        "calibrate": (_bool, "true"),
    },
    "numerics": {
        "step": (_auto(_positive), "auto"),
        "t_max": (_auto(_positive), "auto"),
        "record_every": (_auto(_count), "auto"),
        "damping_time": (_positive, "50.0"),
        "window": (_choice("exponential", "gaussian"), "exponential"),
        "freq_min": (_float, "-10.0"),
        "freq_max": (_float, "10.0"),
        "freq_step": (_positive, "0.01"),
    },
    "ensemble": {
        "n_traj": (_count, "1000"),
        "master_seed": (_seed, "1"),
        "initial_site": (_auto(_count), "auto"),
        "workers": (_count, "1"),
        "density_matrices": (_bool, "false"),
        "n_traces": (_seed, "3"),
    },
    "spectrum": {
        "polarization": (_polarization, "x"),
        "n_sweep": (_int_list, "2, 3, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15"),
    },
    "noise": {
        "n_samples": (_count, "10000"),
        "n_sites": (_count, "2"),
        "max_lag": (_auto(_positive), "auto"),
        "step": (_auto(_positive), "auto"),
        "sigma_band": (_positive, "5.0"),
    },
    "oracle": {
        "fock_cutoff": (_count, "12"),
        "spectra": (_bool, "false"),
    },
}


@dataclass
class RunConfig:
    raw: dict[str, dict[str, str]]  # resolved textual values, defaults filled in
    values: dict[str, dict[str, object]]
    path: Path

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    @property
    def experiment(self) -> str:
        return self.values["run"]["experiment"]

    @property
    def output_dir(self) -> Path:
        out = Path(self.values["run"]["output"])
        return out if out.is_absolute() else self.path.parent / out

    def render(self) -> str:
        lines = []
        for sec, keys in self.raw.items():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in keys.items())
            lines.append("")
        return "\n".join(lines)


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None:
            m = re.match(r"([^=:]+)[=:]", s)
            if m and m.group(1).strip().lower() == key:
                return no
    return None


def _where(path: Path, text: str, section: str, key: str | None = None) -> str:
    no = _line_of(text, section, key)
    loc = f"{path}:{no}" if no else str(path)
    field = f"[{section}] {key}" if key else f"[{section}]"
    return f"{loc}: {field}"


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    cp = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from exc
    errors = []
    for sec in cp.sections():
        if sec not in _SCHEMA:
            errors.append(f"{_where(path, text, sec)}: unknown section")
            continue
        for key in cp[sec]:
            if key not in _SCHEMA[sec]:
                errors.append(f"{_where(path, text, sec, key)}: unknown key")
    raw: dict[str, dict[str, str]] = {}
    values: dict[str, dict[str, object]] = {}
    for sec, fields in _SCHEMA.items():
        raw[sec] = {}
        values[sec] = {}
        for key, (parser, default) in fields.items():
            given = cp.has_option(sec, key)
            text_val = cp.get(sec, key) if given else default
            try:
                values[sec][key] = parser(text_val)
            except ValueError as exc:
                errors.append(f"{_where(path, text, sec, key)}: invalid value {text_val!r} ({exc})")
            raw[sec][key] = " ".join(text_val.split())
    if errors:
        raise ConfigError("\n".join(errors))
    cfg = RunConfig(raw, values, path)
    _cross_checks(cfg, text)
    return cfg


def _cross_checks(cfg: RunConfig, text: str):
    errors = []
    m = cfg["model"]
    if m["shift"] is not None and m["coupling"] is not None:
        errors.append(f"{_where(cfg.path, text, 'model', 'coupling')}: give either shift or coupling, not both")
    nm = cfg["numerics"]
    if nm["freq_max"] <= nm["freq_min"]:
        errors.append(f"{_where(cfg.path, text, 'numerics', 'freq_max')}: must exceed freq_min")
    exp = cfg.experiment
    if exp in ("transfer", "oracle-compare"):
        try:
            _model(cfg, cfg["model"]["n_sites"] if exp == "transfer" else 2)
        except (InvalidSpecError, ValueError) as exc:
            errors.append(f"{_where(cfg.path, text, 'model', 'n_sites')}: {exc}")
        init = cfg["ensemble"]["initial_site"]
        n = cfg["model"]["n_sites"] if exp == "transfer" else 2
        if init is not None and init > n:
            errors.append(f"{_where(cfg.path, text, 'ensemble', 'initial_site')}: exceeds n_sites = {n}")
    if exp == "aggregate-spectrum":
        for n in cfg["spectrum"]["n_sweep"]:
            try:
                _model(cfg, n)
            except (InvalidSpecError, ValueError) as exc:
                errors.append(f"{_where(cfg.path, text, 'spectrum', 'n_sweep')}: N={n}: {exc}")
    if exp == "oracle-compare":
        lor = cfg["bath"]["lorentzians"]
        if not isinstance(lor, tuple) or len(lor) != 1:
            errors.append(f"{_where(cfg.path, text, 'bath', 'lorentzians')}: oracle-compare needs exactly one Lorentzian")
    if exp == "noise-check" and cfg["bath"]["lorentzians"] == "none":
        errors.append(f"{_where(cfg.path, text, 'bath', 'lorentzians')}: noise-check needs a nonzero bath")
    if errors:
        raise ConfigError("\n".join(errors))


# --- model and bath ------------------------------------------------------


def _model(cfg: RunConfig, n: int) -> AggregateModel:
    m = cfg["model"]
    if n == 1:
        return AggregateModel([m["site_energy"]], [[0.0]], [[1.0, 0.0, 0.0]])
    tilt = m["dipole_tilt"] if m["dipole_tilt"] is not None else 2.0 * np.pi / n
    if m["coupling"] is not None:
        spec = RingSpec(n, m["coupling"], tilt, m["site_energy"])
    else:
        shift = -2.6 if m["shift"] is None else m["shift"]
        spec = RingSpec.from_shift(n, shift, dipole_tilt=tilt, site_energy=m["site_energy"])
    return build_ring(spec)


def _bath(cfg: RunConfig) -> tuple[BathKernel, SpectralDensity | None, float]:
    lor = cfg["bath"]["lorentzians"]
    if lor == "none":
        return BathKernel.zero(), None, 1.0
    sd = SpectralDensity.from_triples(_DEFAULT_TRIPLES if lor == "default" else lor)
    factor = calibrate_delta(sd) if cfg["bath"]["calibrate"] else 1.0
    sd = sd.scaled(factor)
    return kernel_from_spectral_density(sd), sd, factor


# --- CSV output ----------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(r if isinstance(r, str) else (str(r) if isinstance(r, (int, np.integer)) else _fmt(r)) for r in row) + "\n")


def write_spectrum(path: Path, spec) -> None:
    _write_csv(path, ["frequency", "intensity"], zip(spec.frequencies, spec.values))


def write_populations(path: Path, times, pops, stderr) -> None:
    n_t, n = pops.shape
    rows = ((times[i], j + 1, pops[i, j], stderr[i, j]) for i in range(n_t) for j in range(n))
    _write_csv(path, ["time", "site", "P", "stderr"], rows)


def write_density(path: Path, times, rho) -> None:
    n = rho.shape[1]
    rows = (
        (times[i], r + 1, c + 1, rho[i, r, c].real, rho[i, r, c].imag)
        for i in range(len(times))
        for r in range(n)
        for c in range(n)
    )
    _write_csv(path, ["time", "row", "col", "re", "im"], rows)


# --- experiments ---------------------------------------------------------


def _freq_grid(cfg):
    nm = cfg["numerics"]
    return frequency_grid(nm["freq_min"], nm["freq_max"], nm["freq_step"])


def _spectrum(cfg, model, kernel, window=None, t_max=None):
    nm = cfg["numerics"]
    return absorption_spectrum(
        model,
        kernel,
        _freq_grid(cfg),
        polarization=cfg["spectrum"]["polarization"],
        damping_time=nm["damping_time"],
        t_max=t_max or nm["t_max"],
        step=nm["step"],
        window=window or nm["window"],
    )


def _exp_monomer(cfg, kernel, out):
    model = _model(cfg, 1)
    spec = _spectrum(cfg, model, kernel)
    write_spectrum(out / "spectrum.csv", spec)
    g = _spectrum(cfg, model, kernel, window="gaussian")
    return {
        "mean": spectrum_moments(g, 1),
        "std_dev": float(np.sqrt(spectrum_moments(g, 2, central=True))),
    }, ["spectrum.csv"]


def _exp_aggregate(cfg, kernel, out):
    files = []
    mono = _spectrum(cfg, _model(cfg, 1), kernel, window="gaussian")
    mono_mean = spectrum_moments(mono, 1)
    rows = []
    for n in cfg["spectrum"]["n_sweep"]:
        model = _model(cfg, n)
        spec = _spectrum(cfg, model, kernel)
        name = f"spectrum_N{n:02d}.csv"
        write_spectrum(out / name, spec)
        files.append(name)
        g = _spectrum(cfg, model, kernel, window="gaussian")
        shift = spectrum_moments(g, 1) - mono_mean
        fwhm = _lowest_peak_fwhm(spec, shift)
        rows.append((n, shift, float(np.sqrt(spectrum_moments(g, 2, central=True))), fwhm))
    _write_csv(out / "summary.csv", ["n_sites", "mean_shift", "std_dev", "fwhm_main_peak"], rows)
    files.append("summary.csv")
    return {"n_spectra": len(rows)}, files


def _lowest_peak_fwhm(spec, shift: float) -> float:
    """FWHM of the dominant peak within 1.5 of the mean shift (nan if unresolved)."""
    nu = spec.frequencies
    sel = (nu > shift - 1.5) & (nu < shift + 1.5)
    if not np.any(sel):
        return float("nan")
    centre = nu[sel][np.argmax(spec.values[sel])]
    try:
        return peak_width(spec, (centre - 0.5, centre + 0.5), min_prominence=0.05).fwhm
    except (ValueError, AmbiguousPeakError):
        return float("nan")


def _stride(cfg, grid: TimeGrid, target: int = 400) -> int:
    every = cfg["numerics"]["record_every"]
    return every if every is not None else max(1, grid.n_steps // target)


def _exp_transfer(cfg, kernel, out):
    n = cfg["model"]["n_sites"]
    model = _model(cfg, n)
    step = cfg["numerics"]["step"] or default_step(model, kernel)
    shift = abs(RingSpec(n, model.coupling[0, 1]).shift) if n > 1 else 0.0
    t_max = cfg["numerics"]["t_max"] or (30.0 / shift if shift > 0 else 30.0)
    grid = TimeGrid.covering(t_max, step)
    ens = cfg["ensemble"]
    init = ens["initial_site"] or (n + 1) // 2
    res = ensemble_transfer(
        model,
        kernel,
        init,
        ens["n_traj"],
        grid,
        ens["master_seed"],
        record_stride=_stride(cfg, grid),
        workers=ens["workers"],
        n_traces=ens["n_traces"],
    )
    files = ["populations.csv", "populations_free.csv"]
    write_populations(out / "populations.csv", res.times, res.populations, res.population_stderr)
    free = free_ring_populations(model, init, res.times)
    write_populations(out / "populations_free.csv", res.times, free, np.zeros_like(free))
    if ens["density_matrices"]:
        write_density(out / "density.csv", res.times, res.density_matrices)
        files.append("density.csv")
    if res.traces:
        rows = (
            (idx, res.times[i], j + 1, tr[i, j])
            for idx, tr in sorted(res.traces.items())
            for i in range(len(res.times))
            for j in range(n)
        )
        _write_csv(out / "traces.csv", ["trajectory", "time", "site", "P"], rows)
        files.append("traces.csv")
    return {
        "step": step,
        "t_max": grid.t_max,
        "initial_site": init,
        "excluded_trajectories": res.excluded,
    }, files


def _exp_noise(cfg, kernel, out):
    nz = cfg["noise"]
    gamma_min = float(np.min(kernel.rates.real))
    max_lag = nz["max_lag"] or 5.0 / gamma_min
    # the recursion is exact for any step; the step only sets the lag spacing
    step = nz["step"] or max_lag / 100.0
    grid = TimeGrid.covering(2.0 * max_lag, step)
    n_lag = int(np.floor(max_lag / step + 1e-9))
    lags = np.arange(n_lag + 1)
    seed = cfg["ensemble"]["master_seed"]
    ensemble = [generate_noise(kernel, nz["n_sites"], grid, seed, i) for i in range(nz["n_samples"])]
    band = nz["sigma_band"]
    rows = []
    worst = 0.0

    def add(kind, est, se, expected):
        nonlocal worst
        for lag, e, s, ex in zip(est_lags, est, se, expected):
            z = max(_z(e.real, ex.real, s.real), _z(e.imag, ex.imag, s.imag))
            worst = max(worst, float(z))
            rows.append((kind, lag, e.real, e.imag, s.real, s.imag, ex.real, ex.imag, z))

    same = empirical_covariance(ensemble, 0, 0, lags)
    est_lags = same.lags
    # E[z*(t + tau) z(s)] = conj(a(tau)), see noise module
    add("conj_same_site", same.conj_cov, same.conj_stderr, np.conj(kernel(est_lags)))
    add("plain_same_site", same.plain_cov, same.plain_stderr, np.zeros(len(lags), complex))
    if nz["n_sites"] > 1:
        cross = empirical_covariance(ensemble, 0, 1, lags)
        add("conj_cross_site", cross.conj_cov, cross.conj_stderr, np.zeros(len(lags), complex))
        add("plain_cross_site", cross.plain_cov, cross.plain_stderr, np.zeros(len(lags), complex))
    _write_csv(
        out / "covariance.csv",
        ["kind", "lag", "re", "im", "stderr_re", "stderr_im", "expected_re", "expected_im", "max_z"],
        rows,
    )
    return {
        "n_samples": nz["n_samples"],
        "max_lag": float(est_lags[-1]),
        "worst_z": worst,
        "sigma_band": band,
        "noise_check": "pass" if worst <= band else "fail",
    }, ["covariance.csv"]


def _z(est, expected, se) -> float:
    if abs(est - expected) < 1e-12:  # e.g. the imaginary part of |z|^2
        return 0.0
    if se == 0:
        return 0.0 if est == expected else float("inf")
    return abs(est - expected) / se


def _exp_oracle(cfg, kernel, sd, out):
    model = _model(cfg, 2)
    mode = sd.modes[0]
    step = cfg["numerics"]["step"] or default_step(model, kernel)
    grid = TimeGrid.covering(cfg["numerics"]["t_max"] or 20.0, step)
    stride = _stride(cfg, grid, 200)
    ens = cfg["ensemble"]
    init = ens["initial_site"] or 1
    psi0 = np.zeros(2, dtype=complex)
    psi0[init - 1] = 1.0
    pm_cfg = PseudomodeConfig(cfg["oracle"]["fock_cutoff"])
    exact = pseudomode_dimer(model, mode, pm_cfg, grid, psi0, record_stride=stride)
    res = ensemble_transfer(
        model, kernel, init, ens["n_traj"], grid, ens["master_seed"], record_stride=stride, workers=ens["workers"]
    )
    write_populations(out / "populations_oracle.csv", exact.times, exact.populations, np.zeros_like(exact.populations))
    write_populations(out / "populations.csv", res.times, res.populations, res.population_stderr)
    info = {
        "step": step,
        "max_population_deviation": float(np.max(np.abs(res.populations - exact.populations))),
        "excluded_trajectories": res.excluded,
    }
    files = ["populations_oracle.csv", "populations.csv"]
    if cfg["oracle"]["spectra"]:
        nm = cfg["numerics"]
        pol = cfg["spectrum"]["polarization"]
        pol = (1.0, 0.0, 0.0) if isinstance(pol, str) else pol
        psi = bright_state(model, pol)
        sgrid = TimeGrid.covering(5.0 * nm["damping_time"], step)
        spec_nm = _spectrum(cfg, model, kernel, t_max=sgrid.t_max)
        ex = pseudomode_dimer(
            model, mode, pm_cfg, sgrid, psi, populations=False, autocorrelation=True,
            record_stride=max(1, int(round(0.05 / step))),
        )
        spec_ex = spectrum_from_autocorrelation(ex.autocorrelation, ex.times, nm["damping_time"], _freq_grid(cfg), window=nm["window"])
        write_spectrum(out / "spectrum.csv", spec_nm)
        write_spectrum(out / "spectrum_oracle.csv", spec_ex)
        files += ["spectrum.csv", "spectrum_oracle.csv"]
        info["spectrum_l1_distance"] = float(np.trapezoid(np.abs(spec_nm.values - spec_ex.values), spec_nm.frequencies))
    return info, files


# --- driver --------------------------------------------------------------


def run(cfg: RunConfig) -> dict:
    start = time.perf_counter()
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    kernel, sd, factor = _bath(cfg)
    exp = cfg.experiment
    if exp == "monomer-spectrum":
        info, files = _exp_monomer(cfg, kernel, out)
    elif exp == "aggregate-spectrum":
        info, files = _exp_aggregate(cfg, kernel, out)
    elif exp == "transfer":
        info, files = _exp_transfer(cfg, kernel, out)
    elif exp == "noise-check":
        info, files = _exp_noise(cfg, kernel, out)
    else:
        info, files = _exp_oracle(cfg, kernel, sd, out)
    wall = time.perf_counter() - start
    manifest = [
        "# run manifest",
        cfg.render(),
        "[provenance]",
        f"code_version = {__version__}",
        f"numpy_version = {np.__version__}",
        f"calibration_factor = {factor!r}",
        f"master_seed = {cfg['ensemble']['master_seed']}",
        f"rng = {RNG_DESCRIPTION}",
        f"excluded_trajectories = {info.get('excluded_trajectories', 0)}",
        f"wall_time_s = {wall:.3f}",
        f"outputs = {', '.join(files)}",
        "",
        "[results]",
        *(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in info.items()),
        "",
    ]
    (out / "manifest.txt").write_text("\n".join(manifest))
    info["files"] = files
    info["calibration_factor"] = factor
    return info


def _seed_info() -> str:
    return "\n".join(
        [
            f"rng = {RNG_DESCRIPTION}",
            f"numpy = {np.__version__}",
            "each (master_seed, trajectory_index, site) owns an independent stream;",
            "trajectory indices start at 0 and sites at 0, so results do not depend on worker count.",
        ]
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qaggregates", description="NMQSD aggregate experiments")
    sub = ap.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="execute the experiment described by a config file")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a config file and print its resolved form")
    p_val.add_argument("config")
    sub.add_parser("seed-info", help="describe the random number streams")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.verb == "seed-info":
        print(_seed_info())
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return 1
    if args.verb == "validate":
        print(cfg.render(), end="")
        return 0
    try:
        info = run(cfg)
    except (PropagationError, EnsembleFailure, CalibrationError, CutoffError, InvalidKernelError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.experiment}: wrote {', '.join(info['files'])} and manifest.txt to {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
