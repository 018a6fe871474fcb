"""Tests for the command-line front end.

Covers config precedence (defaults < file < flags), validation exit codes,
artifact round-trips, byte-identical re-runs, and the planted-fault path of
the verify command.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from quotspec.cli import (
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    RunConfig,
    ValidationError,
    build_parser,
    config_hash,
    load_config,
    main,
)
from quotspec.jmaps import JMap


def run(argv):
    return main(argv)


def tree_digest(root):
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture(scope="module")
def family_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_family")
    rc = run(["family", "gen", "--m", "3", "--t-values", "0,0.05",
              "--output-dir", str(out)])
    assert rc == EXIT_OK
    return out


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"m": 4, "N": 500, "k": 3}))
    parser = build_parser()
    args = parser.parse_args(["strata", "--config", str(cfg_file), "--N", "700"])
    cfg = load_config(args)
    assert cfg.m == 4          # from file
    assert cfg.N == 700        # flag beats file
    assert cfg.k == 3          # from file
    assert cfg.seed == 0       # default


def test_config_rejects_unknown_keys(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"banana": 1}))
    parser = build_parser()
    args = parser.parse_args(["strata", "--config", str(cfg_file)])
    with pytest.raises(ValidationError):
        load_config(args)


def test_config_validation_bounds():
    cfg = RunConfig(m=3, r=9)
    with pytest.raises(ValidationError):
        cfg.validate()
    cfg2 = RunConfig(manifold="stiefel")
    with pytest.raises(ValidationError):
        cfg2.validate()
    cfg3 = RunConfig(m=2)
    cfg3.validate()  # fine for non-generation commands
    with pytest.raises(ValidationError):
        cfg3.validate_family_generation()


def test_tol_flag_overrides_every_tolerance(tmp_path):
    parser = build_parser()
    args = parser.parse_args(["strata", "--tol", "1e-5"])
    cfg = load_config(args)
    assert set(cfg.tolerances.values()) == {1e-5}


def test_config_hash_stable_and_sensitive():
    a = config_hash(RunConfig())
    b = config_hash(RunConfig())
    c = config_hash(RunConfig(N=3001))
    assert a == b and a != c


def test_output_dir_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("QUOTSPEC_OUTPUT_DIR", str(tmp_path / "envout"))
    parser = build_parser()
    cfg = load_config(parser.parse_args(["strata"]))
    assert cfg.output_dir == str(tmp_path / "envout")


# ---------------------------------------------------------------------------
# commands and exit codes
# ---------------------------------------------------------------------------

def test_family_gen_validation_exit():
    assert run(["family", "gen", "--m", "2"]) == EXIT_VALIDATION


def test_family_gen_and_check_artifacts(family_out):
    members = sorted((family_out / "family").glob("member_*.json"))
    assert len(members) == 2
    # artifact round-trip is a fixed point
    j = JMap.load(members[0])
    assert json.loads(members[0].read_text()) == j.to_dict()
    report = json.loads((family_out / "family_report.json").read_text())
    assert report["command"] == "family gen"
    assert report["results"]["ok"]
    assert report["config_hash"]
    assert run(["family", "check", "--output-dir", str(family_out)]) == EXIT_OK


def test_missing_family_is_io_error(tmp_path):
    assert run(["family", "check", "--output-dir", str(tmp_path)]) == EXIT_IO


def test_strata_report(tmp_path):
    rc = run(["strata", "--manifold", "stiefel", "--r", "3", "--m", "3",
              "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "strata.json").read_text())
    tags = {r["manifold"]: r for r in rep["results"]["reports"]}
    assert not tags["sphere"]["is_orbifold"]
    assert tags["stiefel"]["is_orbifold"] and tags["stiefel"]["is_manifold"]


def test_spectrum_k_vs_N_parameter_error(family_out):
    rc = run(["spectrum", "estimate", "--N", "10", "--k", "10",
              "--output-dir", str(family_out)])
    assert rc == EXIT_VALIDATION


def test_spectrum_estimate_artifacts(tmp_path, family_out):
    rc = run(["spectrum", "estimate", "--N", "80", "--k", "3", "--member", "0",
              "--family", str(family_out / "family"),
              "--epsilon", "1.4", "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    csv = (tmp_path / "spectrum.csv").read_text().strip().split("\n")
    assert csv[0] == "index,eigenvalue,normalization,N,epsilon,seed"
    assert len(csv) == 4
    assert (tmp_path / "cloud.txt").exists()
    assert (tmp_path / "spectrum.svg").read_text().startswith("<?xml")
    rep = json.loads((tmp_path / "spectrum_estimate.json").read_text())
    assert len(rep["results"]["eigenvalues"]) == 3


def test_calibrate_rerun_byte_identical(tmp_path):
    argv = ["spectrum", "calibrate", "--N", "250", "--k", "4", "--seeds", "0,1",
            "--output-dir", str(tmp_path)]
    assert run(argv) == EXIT_OK
    first = tree_digest(tmp_path)
    assert run(argv) == EXIT_OK
    assert tree_digest(tmp_path) == first
    rep = json.loads((tmp_path / "calibration.json").read_text())
    assert rep["results"]["analytic"][:4] == [0.0, 2.0, 2.0, 2.0]


def test_verify_green_and_planted_fault(tmp_path, family_out):
    rc = run(["verify", "--family", str(family_out / "family"), "--n-points",
              "30", "--r", "1", "--output-dir", str(tmp_path / "good")])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "good" / "verify_report.json").read_text())
    assert rep["results"]["ok"] and not rep["results"]["failures"]
    assert rep["results"]["nonisometry"]["verdict"] == "non-isometric"

    bad = tmp_path / "bad_family"
    bad.mkdir()
    for p in (family_out / "family").glob("member_*.json"):
        (bad / p.name).write_text(p.read_text())
    target = bad / "member_01.json"
    data = json.loads(target.read_text())
    data["J2"] = [[[1.1 * re, 1.1 * im] for re, im in row] for row in data["J2"]]
    target.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    rc = run(["verify", "--family", str(bad), "--n-points", "30", "--r", "1",
              "--output-dir", str(tmp_path / "bad")])
    assert rc == EXIT_NUMERICAL
    rep = json.loads((tmp_path / "bad" / "verify_report.json").read_text())
    assert any(f.startswith("intertwining") for f in rep["results"]["failures"])


def test_verify_stiefel_r3_reports_refusal(tmp_path, family_out):
    rc = run(["verify", "--family", str(family_out / "family"),
              "--manifold", "stiefel", "--r", "3", "--n-points", "20",
              "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "verify_report.json").read_text())
    orb = {r["manifold"]: r for r in rep["results"]["orbifold"]}
    assert orb["stiefel"]["is_orbifold"]
    assert "refused" in rep["results"]["nonisometry"]


def test_nonisometry_command(tmp_path, family_out):
    rc = run(["nonisometry", "--family", str(family_out / "family"),
              "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "nonisometry.json").read_text())
    assert rep["results"]["verdict"] == "non-isometric"
    assert rep["results"]["separation_ok"]

    rc = run(["nonisometry", "--family", str(family_out / "family"),
              "--manifold", "stiefel", "--r", "2",
              "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "nonisometry.json").read_text())
    assert "refused" in rep["results"]


def test_compare_small_smoke(tmp_path, family_out):
    rc = run(["spectrum", "compare", "--N", "60", "--k", "3", "--seeds", "0",
              "--family", str(family_out / "family"), "--epsilon", "1.6",
              "--pair", "0,1", "--output-dir", str(tmp_path)])
    # tiny clouds may or may not beat the control; both exits are legitimate
    assert rc in (EXIT_OK, EXIT_NUMERICAL)
    rep = json.loads((tmp_path / "spectrum_compare.json").read_text())
    assert rep["results"]["isospectral_input"]
    csv = (tmp_path / "spectrum_compare.csv").read_text().strip().split("\n")
    assert csv[0] == "seed,index,lambda_a,lambda_b,lambda_control"
    assert len(csv) == 4
