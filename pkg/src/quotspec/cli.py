"""Reproducible command-line front end.

One JSON config file is the single source of truth; every key can be
overridden by a flag of the same name.  All randomness is seeded and echoed
into the reports together with a hash of the effective config, so re-running
any command with the same config reproduces every CSV/JSON artifact byte for
byte.  Wall-clock timings go to the console only, never into artifacts.

Commands:  family gen | family check | verify | strata |
           spectrum calibrate | spectrum estimate | spectrum compare |
           nonisometry

Exit codes: 0 success, 2 validation failure, 3 numerical-check failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (
    Sphere,
    Stiefel,
    check_admissible,
    kappa_sphere,
    sphere_form,
    stiefel_form,
    verify_intertwining,
    volume_distortion,
)
from .jmaps import (
    GENERATOR_VERSION,
    JMap,
    commutant_dimension,
    generate_family,
    invariant_separation,
    is_isospectral,
)
from .nonisometry import nonisometry_report
from .plots import staircase
from .quotient import orbifold_report
from .spectral import (
    calibrate_round,
    compare_spectra,
    eigenvalues_to_csv,
    estimate_quotient_spectrum,
    round_sphere_spectrum,
    sample_uniform,
    save_cloud,
)

ENV_OUTPUT_DIR = "QUOTSPEC_OUTPUT_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

INTERTWINING_WEIGHTS = ((1, 0), (0, 1), (1, 1), (2, -1), (3, 5))


class ValidationError(ValueError):
    """Bad configuration or parameters (exit code 2)."""


class NumericalCheckError(RuntimeError):
    """A residual or contrast check failed (exit code 3)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _default_tolerances():
    return {
        "isospectral": 1e-9,
        "separation": 1e-6,
        "intertwining": 1e-8,
        "volume": 1e-10,
        "reduction": 1e-12,
        "admissible": 1e-10,
    }


@dataclass
class RunConfig:
    """Effective parameters of one command run (defaults < file < flags)."""

    m: int = 3
    r: int | None = None
    manifold: str = "sphere"
    t_values: list = field(default_factory=lambda: [0.0, 0.05, 0.1])
    N: int = 3000
    epsilon: float | None = None
    k: int = 8
    seed: int = 0
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    norm: float = 1.0
    n_points: int = 200
    member: int = 0
    pair: list = field(default_factory=lambda: [0, -1])
    calibration_n: int = 2
    control_scale: float = 1.2
    tolerances: dict = field(default_factory=_default_tolerances)
    output_dir: str = "quotspec-out"
    family: str | None = None
    workers: int = 1

    def validate(self):
        if self.manifold not in ("sphere", "stiefel"):
            raise ValidationError(f"unknown manifold {self.manifold!r}")
        if self.manifold == "stiefel" and self.r is None:
            raise ValidationError("stiefel runs need the frame width r")
        if self.r is not None and not 1 <= self.r <= self.m + 2:
            raise ValidationError(
                f"frame width out of range: need 1 <= r <= m+2, got r={self.r}, m={self.m}")
        if self.N < 2:
            raise ValidationError("need N >= 2")
        if self.k < 1:
            raise ValidationError("need k >= 1")
        if not self.t_values:
            raise ValidationError("t_values must be nonempty")
        if not self.seeds:
            raise ValidationError("seeds must be nonempty")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.calibration_n not in (2, 3):
            raise ValidationError("calibration_n must be 2 or 3")

    def validate_family_generation(self):
        if self.m < 3:
            raise ValidationError(
                f"family generation requires m >= 3 (got m={self.m})")

    def manifolds(self):
        """The manifolds a verification run covers."""
        out = [Sphere(self.m)]
        if self.r is not None:
            out.append(Stiefel(self.m, self.r))
        return out

    def run_manifold(self):
        if self.manifold == "stiefel":
            return Stiefel(self.m, self.r)
        return Sphere(self.m)

    def to_dict(self):
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, dict):
                val = {k: float(v) for k, v in val.items()}
            elif isinstance(val, (list, tuple)):
                val = [float(x) if isinstance(x, float) else x for x in val]
            out[f.name] = val
        return out


def load_config(args):
    """defaults < JSON config file < explicit flags."""
    cfg = RunConfig()
    env_out = os.environ.get(ENV_OUTPUT_DIR)
    if env_out:
        cfg.output_dir = env_out
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as err:
            raise ValidationError(f"config is not valid JSON: {err}") from err
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        for key, val in data.items():
            if key == "tolerances":
                tols = _default_tolerances()
                tols.update(val)
                val = tols
            setattr(cfg, key, val)
    overrides = {
        "m": args.m, "r": args.r, "manifold": args.manifold,
        "t_values": args.t_values, "N": args.N, "epsilon": args.epsilon,
        "k": args.k, "seed": args.seed, "seeds": args.seeds,
        "norm": args.norm, "n_points": args.n_points, "member": args.member,
        "pair": args.pair, "calibration_n": args.calibration_n,
        "control_scale": args.control_scale, "output_dir": args.output_dir,
        "family": args.family, "workers": args.workers,
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    if args.tol is not None:
        cfg.tolerances = {k: args.tol for k in cfg.tolerances}
    cfg.validate()
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def canonical_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    Path(path).write_text(canonical_json(obj))


def make_report(command, cfg, results):
    return {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "versions": {"quotspec": __version__,
                     "family_generator": GENERATOR_VERSION},
        "results": results,
    }


def out_dir(cfg):
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def family_dir(cfg):
    if cfg.family is not None:
        return Path(cfg.family)
    return Path(cfg.output_dir) / "family"


def load_family(cfg):
    d = family_dir(cfg)
    paths = sorted(d.glob("member_*.json"))
    if not paths:
        raise FileNotFoundError(f"no family members under {d}")
    members = tuple(JMap.load(p) for p in paths)
    if any(j.m != members[0].m for j in members):
        raise ValidationError("family members disagree on m")
    return members, paths


def pick_pair(cfg, members):
    i, j = cfg.pair
    try:
        jA, jB = members[i], members[j]
    except IndexError:
        raise ValidationError(
            f"pair indices {cfg.pair} out of range for {len(members)} members")
    return jA, jB


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_family_gen(cfg):
    cfg.validate_family_generation()
    fam = generate_family(cfg.m, cfg.t_values, cfg.seed, norm=cfg.norm)
    d = family_dir(cfg)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for i, member in enumerate(fam.members):
        name = f"member_{i:02d}.json"
        member.save(d / name)
        names.append(name)
    results = {
        "members": names,
        "t_values": [float(t) for t in fam.t_values],
        "seed": fam.seed,
        "norm": float(cfg.norm),
        "isospectral_max_discrepancy": float(fam.isospectral_max),
        "min_separation": float(fam.min_separation),
        "separations": [float(s) for s in fam.separations],
        "commutant_dims": [int(c) for c in fam.commutant_dims],
        "ok": bool(fam.ok),
    }
    write_json(out_dir(cfg) / "family_report.json", make_report("family gen", cfg, results))
    print(f"family: {len(names)} members -> {d}")
    print(f"isospectral max discrepancy: {fam.isospectral_max:.3e}")
    print(f"min invariant separation:    {fam.min_separation:.3e}")
    if not fam.ok:
        raise NumericalCheckError("family generation failed its own validation")
    return EXIT_OK


def cmd_family_check(cfg):
    members, paths = load_family(cfg)
    tol = cfg.tolerances
    iso_worst, sep_worst = 0.0, float("inf")
    per_pair = []
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            iso = is_isospectral(members[i], members[j], tol=tol["isospectral"])
            sep = invariant_separation(members[i], members[j])
            iso_worst = max(iso_worst, iso.max_discrepancy)
            sep_worst = min(sep_worst, sep)
            per_pair.append({"pair": [i, j],
                             "isospectral_discrepancy": float(iso.max_discrepancy),
                             "separation": float(sep)})
    dims = [commutant_dimension(j) for j in members]
    ok = (iso_worst < tol["isospectral"] and sep_worst > tol["separation"]
          and all(d == 0 for d in dims))
    results = {
        "members": [p.name for p in paths],
        "per_pair": per_pair,
        "isospectral_max_discrepancy": float(iso_worst),
        "min_separation": float(sep_worst) if per_pair else None,
        "commutant_dims": [int(d) for d in dims],
        "ok": bool(ok),
    }
    write_json(out_dir(cfg) / "family_check.json", make_report("family check", cfg, results))
    print(f"checked {len(members)} members: "
          f"iso<{iso_worst:.2e} sep>{sep_worst:.2e} dims={dims}")
    if not ok:
        raise NumericalCheckError("family check failed; see family_check.json")
    return EXIT_OK


def _forms_for(j, manifold):
    if isinstance(manifold, Sphere):
        return sphere_form(j, manifold.m)
    return stiefel_form(j, manifold.r, manifold.m)


def cmd_verify(cfg):
    members, paths = load_family(cfg)
    tol = cfg.tolerances
    failures = []
    results = {"members": [p.name for p in paths]}

    admissibility = []
    volumes = []
    for M in cfg.manifolds():
        tag = "sphere" if isinstance(M, Sphere) else f"stiefel r={M.r}"
        for i, j in enumerate(members):
            form = _forms_for(j, M)
            adm = check_admissible(form, n_points=min(cfg.n_points, 50),
                                   seed=cfg.seed, tol=tol["admissible"])
            worst = float(max(adm.residuals.values()))
            admissibility.append({"manifold": tag, "member": i,
                                  "ok": bool(adm.ok), "max_residual": worst,
                                  "failed": list(adm.failed)})
            if not adm.ok:
                failures.append(f"admissibility[{tag}, member {i}]")
            rngv = np.random.default_rng(cfg.seed)
            vworst = max(volume_distortion(form, M.random_point(rngv))
                         for _ in range(max(cfg.n_points // 4, 10)))
            volumes.append({"manifold": tag, "member": i,
                            "max_det_gap": float(vworst)})
            if vworst > tol["volume"]:
                failures.append(f"volume[{tag}, member {i}]")
    results["admissibility"] = admissibility
    results["volume"] = volumes

    intertwining = []
    for M in cfg.manifolds():
        tag = "sphere" if isinstance(M, Sphere) else f"stiefel r={M.r}"
        for i in range(len(members) - 1):
            for mu in INTERTWINING_WEIGHTS:
                rep = verify_intertwining(members[i], members[i + 1], mu, M,
                                          n_points=cfg.n_points, seed=cfg.seed,
                                          tol=tol["intertwining"])
                intertwining.append({
                    "manifold": tag, "pair": [i, i + 1], "mu": list(mu),
                    "ok": bool(rep.ok),
                    "max_residual": float(rep.max_residual),
                    "isospectral_ok": bool(rep.isospectral_ok),
                })
                if not rep.ok:
                    failures.append(f"intertwining[{tag}, pair ({i},{i + 1}), mu={mu}]")
    results["intertwining"] = intertwining

    # width-1 frames against the sphere closed formula
    rng = np.random.default_rng(cfg.seed)
    V1 = Stiefel(cfg.m, 1)
    red_worst = 0.0
    for i, j in enumerate(members):
        form1 = stiefel_form(j, 1, cfg.m)
        for _ in range(cfg.n_points):
            Q = V1.random_point(rng)
            X = V1.random_tangent(Q, rng)
            gap = np.max(np.abs(form1.kappa(Q, X)
                                - kappa_sphere(j, Q.ravel(), X.ravel())))
            red_worst = max(red_worst, float(gap))
    results["width1_reduction_max_gap"] = red_worst
    if red_worst > tol["reduction"]:
        failures.append("width1-reduction")

    results["orbifold"] = [orbifold_report(M).to_dict() for M in cfg.manifolds()]

    jA, jB = members[0], members[-1]
    if cfg.manifold == "stiefel":
        try:
            nonisometry_report(jA, jB, manifold=Stiefel(cfg.m, cfg.r))
        except NotImplementedError as err:
            results["nonisometry"] = {"refused": str(err)}
    else:
        results["nonisometry"] = nonisometry_report(jA, jB).to_dict()

    results["failures"] = failures
    results["ok"] = not failures
    write_json(out_dir(cfg) / "verify_report.json", make_report("verify", cfg, results))
    print(f"admissibility max residual: "
          f"{max(a['max_residual'] for a in admissibility):.3e}")
    print(f"volume max det gap:         "
          f"{max(v['max_det_gap'] for v in volumes):.3e}")
    print(f"intertwining max residual:  "
          f"{max(x['max_residual'] for x in intertwining):.3e}")
    print(f"width-1 reduction max gap:  {red_worst:.3e}")
    if failures:
        raise NumericalCheckError(f"verification failures: {failures}")
    print("verify: all green")
    return EXIT_OK


def cmd_strata(cfg):
    reports = [orbifold_report(M).to_dict() for M in cfg.manifolds()]
    write_json(out_dir(cfg) / "strata.json",
               make_report("strata", cfg, {"reports": reports}))
    for rep in reports:
        print(f"{rep['manifold']}: quotient dim {rep['quotient_dim']}, "
              f"codim {rep['codim']}, orbifold={rep['is_orbifold']}")
    return EXIT_OK


def cmd_spectrum_calibrate(cfg):
    if cfg.k >= cfg.N:
        raise ValidationError(f"need k < N (k={cfg.k}, N={cfg.N})")
    reports = [calibrate_round(cfg.calibration_n, cfg.N, cfg.epsilon,
                               cfg.k, seed) for seed in cfg.seeds]
    med = np.median([r.estimate.eigenvalues for r in reports], axis=0)
    analytic = round_sphere_spectrum(cfg.calibration_n, cfg.k)
    d = out_dir(cfg)
    lines = ["seed,index,eigenvalue,analytic"]
    for rep in reports:
        for i, val in enumerate(rep.estimate.eigenvalues):
            lines.append(f"{rep.seed},{i},{float(val)!r},{float(analytic[i])!r}")
    (d / "calibration.csv").write_text("\n".join(lines) + "\n")
    staircase(d / "calibration.svg",
              [("estimated (median)", med), ("analytic", analytic)],
              f"round S^{cfg.calibration_n} calibration, N={cfg.N}")
    results = {
        "per_seed": [r.to_dict() for r in reports],
        "median_eigenvalues": [float(x) for x in med],
        "analytic": [float(x) for x in analytic],
        "median_relative_errors": [
            float(abs(m - a) / a) if a > 0 else float(abs(m))
            for m, a in zip(med, analytic)],
    }
    write_json(d / "calibration.json",
               make_report("spectrum calibrate", cfg, results))
    print("median estimate:", np.round(med, 4).tolist())
    print("analytic:       ", analytic.tolist())
    return EXIT_OK


def cmd_spectrum_estimate(cfg):
    if cfg.k >= cfg.N:
        raise ValidationError(f"need k < N (k={cfg.k}, N={cfg.N})")
    members, _ = load_family(cfg)
    try:
        j = members[cfg.member]
    except IndexError:
        raise ValidationError(
            f"member {cfg.member} out of range for {len(members)} members")
    M = cfg.run_manifold()
    est = estimate_quotient_spectrum(j, M, cfg.N, cfg.epsilon, cfg.k,
                                     cfg.seed, workers=cfg.workers)
    d = out_dir(cfg)
    save_cloud(sample_uniform(M, cfg.N, cfg.seed), d / "cloud.txt")
    eigenvalues_to_csv(est, d / "spectrum.csv")
    staircase(d / "spectrum.svg",
              [(f"member {cfg.member}", est.eigenvalues)],
              f"quotient spectrum estimate, N={cfg.N}")
    results = {
        "member": cfg.member,
        "eigenvalues": [float(x) for x in est.eigenvalues],
        "diagnostics": est.diagnostics,
    }
    write_json(d / "spectrum_estimate.json",
               make_report("spectrum estimate", cfg, results))
    print("eigenvalues:", np.round(est.eigenvalues, 5).tolist())
    return EXIT_OK


def cmd_spectrum_compare(cfg):
    if cfg.k >= cfg.N:
        raise ValidationError(f"need k < N (k={cfg.k}, N={cfg.N})")
    members, _ = load_family(cfg)
    jA, jB = pick_pair(cfg, members)
    rep = compare_spectra(jA, jB, cfg.run_manifold(), cfg.N, cfg.epsilon,
                          cfg.k, seeds=cfg.seeds,
                          control_scale=cfg.control_scale, workers=cfg.workers)
    d = out_dir(cfg)
    lines = ["seed,index,lambda_a,lambda_b,lambda_control"]
    for s in rep.per_seed:
        for i in range(cfg.k):
            lines.append(f"{s['seed']},{i},{s['eigenvalues_a'][i]!r},"
                         f"{s['eigenvalues_b'][i]!r},{s['eigenvalues_control'][i]!r}")
    (d / "spectrum_compare.csv").write_text("\n".join(lines) + "\n")
    s0 = rep.per_seed[0]
    staircase(d / "spectrum_compare.svg",
              [("member A", s0["eigenvalues_a"]),
               ("member B (isospectral)", s0["eigenvalues_b"]),
               (f"control ({cfg.control_scale} x B)", s0["eigenvalues_control"])],
              f"coupled spectra, seed {s0['seed']}, N={cfg.N}")
    write_json(d / "spectrum_compare.json",
               make_report("spectrum compare", cfg, rep.to_dict()))
    print(f"pair median max-rel-diff:    {rep.pair_median:.3e}")
    print(f"control median max-rel-diff: {rep.control_median:.3e}")
    print(f"contrast_ok: {rep.contrast_ok}")
    if not rep.contrast_ok:
        raise NumericalCheckError(
            "isospectral pair does not beat the control contrast")
    return EXIT_OK


def cmd_nonisometry(cfg):
    members, _ = load_family(cfg)
    jA, jB = pick_pair(cfg, members)
    manifold = cfg.run_manifold()
    d = out_dir(cfg)
    try:
        rep = nonisometry_report(jA, jB, manifold=manifold,
                                 separation_tol=cfg.tolerances["separation"],
                                 seed=cfg.seed)
    except NotImplementedError as err:
        write_json(d / "nonisometry.json",
                   make_report("nonisometry", cfg, {"refused": str(err)}))
        print(f"refused: {err}")
        return EXIT_OK
    write_json(d / "nonisometry.json",
               make_report("nonisometry", cfg, rep.to_dict()))
    print(f"verdict: {rep.verdict}")
    print(f"separation: {rep.separation:.3e}  "
          f"commutant dim (B): {rep.genericity_b.commutant_dim}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _comma_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _comma_ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--workers", type=int, help="parallel worker cap")
    common.add_argument("--tol", type=float,
                        help="override every tolerance with one value")
    common.add_argument("--m", type=int)
    common.add_argument("--r", type=int)
    common.add_argument("--manifold", choices=["sphere", "stiefel"])
    common.add_argument("--t-values", dest="t_values", type=_comma_floats,
                        metavar="T0,T1,...")
    common.add_argument("--N", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--seeds", type=_comma_ints, metavar="S0,S1,...")
    common.add_argument("--norm", type=float)
    common.add_argument("--n-points", dest="n_points", type=int)
    common.add_argument("--member", type=int)
    common.add_argument("--pair", type=_comma_ints, metavar="I,J")
    common.add_argument("--calibration-n", dest="calibration_n", type=int)
    common.add_argument("--control-scale", dest="control_scale", type=float)
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--family", help="directory of member_*.json files")

    parser = argparse.ArgumentParser(
        prog="quotspec",
        description="isospectral circle quotients: generation, verification, spectra")
    sub = parser.add_subparsers(dest="command", required=True)

    fam = sub.add_parser("family", help="deformation-map families")
    fam_sub = fam.add_subparsers(dest="subcommand", required=True)
    fam_sub.add_parser("gen", parents=[common], help="generate and persist a family")
    fam_sub.add_parser("check", parents=[common], help="re-validate a persisted family")

    sub.add_parser("verify", parents=[common],
                   help="admissibility, intertwining, volume, reduction, strata")
    sub.add_parser("strata", parents=[common], help="quotient stratification report")

    spec = sub.add_parser("spectrum", help="Laplace-spectrum estimation")
    spec_sub = spec.add_subparsers(dest="subcommand", required=True)
    spec_sub.add_parser("calibrate", parents=[common],
                        help="round-sphere calibration against the analytic spectrum")
    spec_sub.add_parser("estimate", parents=[common],
                        help="spectrum of one family member's quotient")
    spec_sub.add_parser("compare", parents=[common],
                        help="coupled isospectral pair vs scaled control")

    sub.add_parser("nonisometry", parents=[common],
                   help="non-isometry certificate for a family pair")
    return parser


_DISPATCH = {
    ("family", "gen"): cmd_family_gen,
    ("family", "check"): cmd_family_check,
    ("verify", None): cmd_verify,
    ("strata", None): cmd_strata,
    ("spectrum", "calibrate"): cmd_spectrum_calibrate,
    ("spectrum", "estimate"): cmd_spectrum_estimate,
    ("spectrum", "compare"): cmd_spectrum_compare,
    ("nonisometry", None): cmd_nonisometry,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    key = (args.command, getattr(args, "subcommand", None))
    handler = _DISPATCH[key]
    started = time.perf_counter()
    try:
        cfg = load_config(args)
        code = handler(cfg)
    except (ValidationError, ValueError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeError as err:
        # NumericalCheckError plus solver/continuation failures
        print(f"numerical check failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    label = " ".join(k for k in key if k)
    print(f"[{label}] wall time {time.perf_counter() - started:.1f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
