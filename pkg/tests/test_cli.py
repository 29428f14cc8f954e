from __future__ import annotations

import json

import numpy as np
import pytest

from beltrami_lab.cli import main
from beltrami_lab.config import ConfigError, ExperimentConfig
from beltrami_lab.grid import GridSpec, read_field

GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestConfig:
    def test_default_round_trip(self):
        cfg = ExperimentConfig()
        again = ExperimentConfig.parse(cfg.serialize())
        assert again == cfg
        assert again.serialize() == cfg.serialize()

    def test_every_field_set_round_trips(self):
        cfg = ExperimentConfig(
            command="bers", n=64, half_width=3.25, tol=1.5e-9, max_iter=77, out="x/y", seed=9, jobs=3,
            mu="radial:alpha=0.3", a="bump:center=0.1+0.2i,amp=0.7,radius=0.6",
            mu1="bump:center=0+1.5i,amp=0.3,radius=1", mu2="zero", k=2, p=3.5, s=2e-4,
            s_list="0.2,0.1", cases=4, q_list="4", p_list="2", trials=3,
        )
        assert ExperimentConfig.parse(cfg.serialize()) == cfg

    def test_comments_and_blank_lines(self):
        cfg = ExperimentConfig.parse("# header\n\ncommand = theta  # trailing\nn = 64\n")
        assert cfg.command == "theta" and cfg.n == 64 and cfg.half_width is None

    @pytest.mark.parametrize("text,key", [
        ("bogus = 1", "bogus"),
        ("n = twelve", "n"),
        ("n = 100", "n"),
        ("mu = gaussian:amp=1.5", "mu"),
        ("mu1 = nosuch", "mu1"),
        ("s_list = 0.1,x", "s_list"),
        ("just words", "just words"),
    ])
    def test_malformed_names_key(self, text, key):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.parse(text)
        assert info.value.key == key

    def test_auto_half_width(self):
        assert ExperimentConfig(command="bers").grid_half_width == 8.0
        assert ExperimentConfig(command="estimate").grid_half_width == 6.0
        assert ExperimentConfig(command="solve").grid_half_width == 4.0
        assert ExperimentConfig(command="bers", half_width=5.0).grid_half_width == 5.0

    def test_digest_tracks_content(self):
        a = ExperimentConfig()
        assert a.digest() == ExperimentConfig().digest()
        assert a.digest() != a.replace(seed=1).digest()


class TestExitCodes:
    def test_malformed_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("n = 64\nwidth = 3\n")
        code, out, err = run_cli(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 2
        assert "key=width" in err and err.startswith("status=2 kind=config")
        assert not (tmp_path / "o").exists()

    def test_unknown_flag(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--frobnicate", "1")
        assert code == 2 and "key=argv" in err

    def test_bad_flag_value(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "solve", "--n", "abc", "--out", str(tmp_path))
        assert code == 2 and "key=n" in err

    def test_nonconvergence(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "solve", "--n", "64", "--mu", "gaussian:amp=0.9,width=0.25",
                               "--max-iter", "2", "--out", str(tmp_path))
        assert code == 3 and "kind=nonconvergence" in err

    def test_invariant_violation(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "bers", "--n", "64", "--mu1", "bump:center=0+0.2i,amp=0.3,radius=0.5",
                               "--mu2", "zero", "--out", str(tmp_path))
        assert code == 4 and "kind=invariant" in err

    def test_config_file_then_flags(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("n = 32\nmu = zero\n")
        code, out, _ = run_cli(capsys, "solve", "--config", str(cfg), "--n", "64", "--out", str(tmp_path / "o"))
        assert code == 0
        m = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert "n = 64" in m["config"]


def test_solve_zero_is_identity(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "solve", "--n", "64", "--mu", "zero", "--out", str(tmp_path))
    assert code == 0
    assert json.loads(out)["iterations"] == 1
    f = read_field(tmp_path / "solution.fld")
    assert f.spec == GridSpec(0j, 4.0, 64)
    assert np.abs(f.samples - f.spec.nodes()).max() <= 1e-12


def test_manifest_fields(tmp_path, capsys):
    assert run_cli(capsys, "solve", "--n", "32", "--out", str(tmp_path))[0] == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    for key in ("config", "config_sha256", "versions", "conventions", "artifacts", "summary"):
        assert key in m
    assert set(m["conventions"]) == {"grid", "fourier", "metric"}
    assert m["artifacts"] == ["report.json", "solution.fld"]
    assert m["config_sha256"] == ExperimentConfig.parse(m["config"]).digest()


def test_bers_zero_pipeline(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "bers", "--n", "128", "--mu1", "zero", "--mu2", "zero", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["hyperbolic_defect"] <= 1e-3
    meta = json.loads((tmp_path / "metric.json").read_text())
    assert meta["convention"].startswith("h = g_zz dz^2")


def test_theta_and_fixtures(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "theta", "--n", "64", "--out", str(tmp_path / "t"))
    assert code == 0 and json.loads(out)["theta_residual"] < 1e-6
    code, out, _ = run_cli(capsys, "fixtures", "--n", "256", "--trials", "2", "--out", str(tmp_path / "f"))
    summary = json.loads(out)
    assert code == 0 and summary["isometry_max_deviation"] < 1e-10


@pytest.mark.slow
def test_estimate_matches_golden(tmp_path, capsys):
    golden = json.loads((GOLDEN / "estimate_k1_p2.json").read_text())
    code, out, _ = run_cli(capsys, "estimate", "--n", str(golden["n"]), "--k", "1", "--p", "2",
                           "--seed", str(golden["seed"]), "--cases", str(golden["cases"]), "--out", str(tmp_path))
    assert code == 0
    assert json.loads(out)["max_ratio"] == pytest.approx(golden["max_ratio"], rel=0.05)


def test_estimate_deterministic_across_jobs(tmp_path, capsys):
    args = ["estimate", "--n", "256", "--cases", "3", "--seed", "3"]
    assert run_cli(capsys, *args, "--jobs", "1", "--out", str(tmp_path / "a"))[0] == 0
    assert run_cli(capsys, *args, "--jobs", "3", "--out", str(tmp_path / "b"))[0] == 0
    for name in ("estimate.csv", "manifest.json"):
        a = (tmp_path / "a" / name).read_text()
        b = (tmp_path / "b" / name).read_text()
        if name == "manifest.json":
            a, b = json.loads(a), json.loads(b)
            a.pop("config"), b.pop("config"), a.pop("config_sha256"), b.pop("config_sha256")
        assert a == b


def test_repeat_runs_identical(tmp_path, capsys):
    args = ["fixtures", "--n", "256", "--trials", "2"]
    run_cli(capsys, *args, "--out", str(tmp_path / "a"))
    run_cli(capsys, *args, "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "fixtures.json").read_bytes() == (tmp_path / "b" / "fixtures.json").read_bytes()
    ma, mb = (json.loads((tmp_path / d / "manifest.json").read_text()) for d in "ab")
    for m in (ma, mb):
        m.pop("config"), m.pop("config_sha256")
    assert ma == mb
