import csv
import textwrap

import pytest

from qaggregates.cli import ConfigError, load_config, main


def _write(tmp_path, body, name="run.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body).lstrip())
    return p


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_validate_prints_resolved_config(tmp_path, capsys):
    p = _write(tmp_path, """
        [run]
        experiment = transfer
        [model]
        n_sites = 5
        shift = -1.0
    """)
    assert main(["validate", str(p)]) == 0
    out = capsys.readouterr().out
    assert "n_sites = 5" in out and "n_traj = 1000" in out


def test_invalid_value_reports_line_and_field(tmp_path, capsys):
    p = _write(tmp_path, """
        [run]
        experiment = transfer

        [model]
        n_sites = zero
    """)
    assert main(["validate", str(p)]) == 1
    err = capsys.readouterr().err
    assert f"{p}:5: [model] n_sites" in err


def test_unknown_key_and_section_rejected(tmp_path):
    p = _write(tmp_path, """
        [model]
        n_site = 4
        [extras]
        x = 1
    """)
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    msg = str(exc.value)
    assert ":2: [model] n_site: unknown key" in msg
    assert ":3: [extras]: unknown section" in msg


def test_cross_checks(tmp_path):
    p = _write(tmp_path, """
        [model]
        shift = -1.0
        coupling = 0.5
    """)
    with pytest.raises(ConfigError, match="either shift or coupling"):
        load_config(p)
    p = _write(tmp_path, """
        [run]
        experiment = transfer
        [model]
        n_sites = 4
        shift = -1.0
    """)
    with pytest.raises(ConfigError, match="C=0"):
        load_config(p)


def test_seed_info(capsys):
    assert main(["seed-info"]) == 0
    assert "master_seed" in capsys.readouterr().out


def test_missing_file_exits_1(tmp_path):
    assert main(["validate", str(tmp_path / "absent.ini")]) == 1


def test_transfer_run_and_rerun_identical(tmp_path):
    p = _write(tmp_path, """
        [run]
        experiment = transfer
        output = out
        [model]
        n_sites = 3
        shift = -1.0
        [numerics]
        t_max = 2.0
        [ensemble]
        n_traj = 20
        master_seed = 3
        density_matrices = true
        n_traces = 1
    """)
    assert main(["run", str(p)]) == 0
    out = tmp_path / "out"
    first = {f.name: f.read_bytes() for f in out.glob("*.csv")}
    assert {"populations.csv", "density.csv", "traces.csv"} <= set(first)
    header, *body = _rows(out / "populations.csv")
    assert header == ["time", "site", "P", "stderr"]
    totals = {}
    for t, _, pop, _ in body:
        totals[t] = totals.get(t, 0.0) + float(pop)
    assert len(totals) > 10
    assert all(v == pytest.approx(1.0, abs=1e-10) for v in totals.values())
    manifest = (out / "manifest.txt").read_text()
    assert "master_seed = 3" in manifest and "calibration_factor" in manifest
    assert main(["run", str(p)]) == 0
    assert {f.name: f.read_bytes() for f in out.glob("*.csv")} == first


def test_monomer_spectrum_run(tmp_path):
    p = _write(tmp_path, """
        [run]
        experiment = monomer-spectrum
        output = out
        [numerics]
        damping_time = 10
        freq_step = 0.05
    """)
    assert main(["run", str(p)]) == 0
    header, *body = _rows(tmp_path / "out" / "spectrum.csv")
    assert len(body) > 100
    assert "std_dev" in (tmp_path / "out" / "manifest.txt").read_text()


def test_aggregate_spectrum_run(tmp_path):
    p = _write(tmp_path, """
        [run]
        experiment = aggregate-spectrum
        output = out
        [model]
        shift = -2.6
        [numerics]
        damping_time = 10
        freq_step = 0.05
        [spectrum]
        n_sweep = 2, 3
    """)
    assert main(["run", str(p)]) == 0
    header, *body = _rows(tmp_path / "out" / "summary.csv")
    assert header == ["n_sites", "mean_shift", "std_dev", "fwhm_main_peak"]
    assert [int(r[0]) for r in body] == [2, 3]
    for r in body:
        assert float(r[1]) == pytest.approx(-2.6, abs=0.01)


def test_noise_check_run(tmp_path, capsys):
    p = _write(tmp_path, """
        [run]
        experiment = noise-check
        output = out
        [noise]
        n_samples = 400
        n_sites = 1
        max_lag = 2.0
    """)
    assert main(["run", str(p)]) == 0
    assert (tmp_path / "out" / "covariance.csv").exists()


def test_oracle_compare_run(tmp_path):
    p = _write(tmp_path, """
        [run]
        experiment = oracle-compare
        output = out
        [model]
        coupling = -0.5
        [bath]
        lorentzians = 0.05, 1.0, 0.3
        calibrate = false
        [numerics]
        t_max = 2.0
        [ensemble]
        n_traj = 50
        [oracle]
        fock_cutoff = 6
    """)
    assert main(["run", str(p)]) == 0
    assert (tmp_path / "out" / "manifest.txt").exists()


def test_numerical_failure_exits_2(tmp_path, capsys):
    p = _write(tmp_path, """
        [run]
        experiment = transfer
        output = out
        [model]
        n_sites = 3
        shift = -1.0
        [numerics]
        step = 3.0
        t_max = 30.0
        [ensemble]
        n_traj = 4
    """)
    assert main(["run", str(p)]) == 2
    assert "numerical failure" in capsys.readouterr().err
