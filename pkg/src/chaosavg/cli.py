"""Experiment runner: JSON configs in, CSV rows + JSON verdicts out.

Subcommands
-----------
``special-check``  run the special-function invariant suite
``bm``             spatial-average experiment with normality diagnostics
``she``            heat-equation quantities (first chaos, limiting covariance,
                   power-decay constant, second-chaos share, moments)
``tail-bound``     higher-chaos tail bounds and the admissibility gate
``report``         merge run CSVs into a summary with figures

Exit codes: 0 pass, 1 statistical or numerical failure, 2 config error.
Outputs are deterministic given (config, master seed): every row carries the
stream fingerprint that produced it, and thread count only affects wall time.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import breuer_major as bm
from . import reporting, rng as rngmod, she
from .errors import ChaosAvgError, InvalidArgumentError, InvalidConfigError
from .field import GridSpec
from .functionals import HermiteSeries
from .kernels import (
    ball_fourier,
    ball_volume,
    bessel_j,
    ell_r_total_mass,
    gaussian_model,
    model_from_id,
    temporal_from_config,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _load_schema() -> dict:
    with resources.files("chaosavg.schemas").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


def _validate_config(config: dict, command: str) -> None:
    import jsonschema

    schema = _load_schema()
    sub = {"$defs": schema["$defs"], **schema["$defs"][command]}
    try:
        jsonschema.validate(config, sub)
    except jsonschema.ValidationError as exc:
        raise InvalidConfigError(f"config does not match the {command} schema: {exc.message}") from exc


def _read_config(path: str | None, command: str, default: dict | None = None) -> dict:
    if path is None:
        if default is None:
            raise InvalidConfigError(f"{command} requires --config")
        config = dict(default)
    else:
        try:
            config = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    _validate_config(config, command)
    return config


def _thread_count(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("CHAOSAVG_THREADS")
    return int(env) if env else 1


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# special-check
# ---------------------------------------------------------------------------

_SPECIAL_DEFAULTS = {
    "n_points": 1000,
    "seed": 0,
    "tolerances": {},
}

_SPECIAL_TOL = {
    "ball_fourier": 1e-10,
    "ell1_mass": 1e-3,
    "bessel_half": 1e-9,
    "bessel_crossover": 1e-9,
    "gaussian_mass": 1e-8,
}


def cmd_special_check(args) -> int:
    config = _read_config(args.config, "special-check", default=_SPECIAL_DEFAULTS)
    tol = {**_SPECIAL_TOL, **config.get("tolerances", {})}
    n_points = config.get("n_points", 1000)
    rng = rngmod.stream(config.get("seed", 0), 0)
    checks = []

    # d = 1 ball transform against the elementary closed form
    xi = np.logspace(-3, 3, n_points)
    bf = np.array([ball_fourier(1, 1.0, float(x)) for x in xi])
    target = 2.0 * np.sin(xi) / xi
    err = float(np.max(np.abs(bf - target) / np.maximum(np.abs(target), 1e-30)))
    checks.append(("ball_fourier_identity_d1", err, tol["ball_fourier"]))

    # unit mass of the squared-Bessel identity
    mass_err = abs(ell_r_total_mass(1) - 1.0)
    checks.append(("ell1_total_mass", mass_err, tol["ell1_mass"]))

    # half-order Bessel: defining quadrature vs the elementary closed form
    xs = np.linspace(0.05, 25.0, 257)
    closed = np.sqrt(2.0 / (math.pi * xs)) * np.sin(xs)
    err_b = float(np.max(np.abs(bessel_j(0.5, xs) - closed)))
    checks.append(("bessel_half_order", err_b, tol["bessel_half"]))

    # crossover agreement between the two Bessel branches
    from .kernels import _bessel_asymptotic, _bessel_quadrature

    xs2 = np.linspace(25.0, 35.0, 101)
    err_c = float(np.max(np.abs(_bessel_quadrature(1.0, xs2) - _bessel_asymptotic(1.0, xs2))))
    checks.append(("bessel_crossover_overlap", err_c, tol["bessel_crossover"]))

    # symmetry and nonnegativity of catalog kernels at random points
    worst_sym = 0.0
    worst_phi = 0.0
    for mid in ("gaussian:scale=1", "exponential:scale=1", "riesz:beta=0.5"):
        m = model_from_id(mid)
        pts = rng.uniform(-20, 20, size=2000)
        pts = pts[pts != 0.0]
        worst_sym = max(worst_sym, float(np.max(np.abs(
            m.gamma_radial(np.abs(pts)) - m.gamma_radial(np.abs(-pts))))))
        worst_phi = max(worst_phi, float(-np.min(m.phi_radial(np.abs(pts)))))
    checks.append(("kernel_symmetry", worst_sym, 1e-15))
    checks.append(("spectral_nonnegative", max(worst_phi, 0.0), 1e-15))

    # gaussian spectral mass equals gamma(0)
    g = gaussian_model()
    from scipy.integrate import quad as _quad

    mass, _ = _quad(lambda r: float(g.phi_radial(np.asarray(r))), -np.inf, np.inf)
    checks.append(("gaussian_spectral_mass", abs(mass - 1.0), tol["gaussian_mass"]))

    report = {
        "checks": [
            {"name": name, "measured": measured, "tolerance": tolerance,
             "pass": bool(measured <= tolerance)}
            for name, measured, tolerance in checks
        ],
    }
    report["pass"] = all(c["pass"] for c in report["checks"])
    out = _out_dir(args)
    (out / "special_check.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    for c in report["checks"]:
        status = "pass" if c["pass"] else "FAIL"
        print(f"[{status}] {c['name']}: measured {c['measured']:.3e} vs tol {c['tolerance']:.1e}")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# bm
# ---------------------------------------------------------------------------


def cmd_bm(args) -> int:
    config = _read_config(args.config, "bm")
    d = config.get("d", 1)
    model = model_from_id(config["model"], d=d)
    series = HermiteSeries.from_dict(config["series"])
    grid = GridSpec(d=d, half_extent=config["grid"]["half_extent"],
                    spacing=config["grid"]["spacing"])
    seed = args.seed if args.seed is not None else config["master_seed"]
    exp = bm.BMExperiment(
        model=model,
        series=series,
        radii=[float(r) for r in config["radii"]],
        grid=grid,
        n_reps=config["n_reps"],
        master_seed=seed,
        sampler=config.get("sampler", "circulant"),
        freq_cutoff=config.get("freq_cutoff"),
        n_modes_per_axis=config.get("n_modes_per_axis", 2048),
        n_threads=_thread_count(args),
    )
    exp.validate()
    result = bm.run_bm(exp)
    diag = bm.clt_diagnostics(result.ensemble, sigma2=result.sigma2_theory)

    tolerances = config.get("tolerances", {})
    var_rtol = tolerances.get("var_rtol", 0.10)
    ks_p_min = tolerances.get("ks_p_min", 0.01)
    m4_window = tolerances.get("fourth_moment_window", [2.8, 3.2])

    verdict = {
        "sigma2_theory": result.sigma2_theory,
        "sigma_source": result.sigma_source,
        "master_seed": seed,
        "radii": {},
    }
    ok = True
    for R in exp.radii:
        summ = result.summaries[R]
        dg = diag["groups"][R]
        entry = {
            "sigma2_empirical": summ["var"],
            "ks_p": dg["ks_p"],
            "fourth_moment": dg["fourth_moment_ratio"],
            "n": dg["n"],
        }
        if result.sigma2_theory is not None:
            entry["var_rel_err"] = abs(summ["var"] / result.sigma2_theory - 1.0)
            entry["var_pass"] = bool(entry["var_rel_err"] <= var_rtol)
        else:
            entry["var_pass"] = True
        entry["ks_pass"] = bool(dg["ks_p"] > ks_p_min)
        entry["fourth_moment_pass"] = bool(m4_window[0] <= dg["fourth_moment_ratio"] <= m4_window[1])
        entry["pass"] = entry["var_pass"] and entry["ks_pass"] and entry["fourth_moment_pass"]
        ok = ok and entry["pass"]
        verdict["radii"][str(R)] = entry
    verdict["pass"] = ok

    out = _out_dir(args)
    result.ensemble.save_csv(out / "bm_rows.csv")
    (out / "bm_verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True))
    for R, entry in verdict["radii"].items():
        status = "pass" if entry["pass"] else "FAIL"
        print(f"[{status}] R={R}: var {entry['sigma2_empirical']:.4f} "
              f"ks_p {entry['ks_p']:.3f} m4 {entry['fourth_moment']:.3f}")
    return EXIT_PASS if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# she
# ---------------------------------------------------------------------------


def _she_config(config: dict, seed_override: int | None) -> she.SHEConfig:
    d = config.get("d", 1)
    cfg = she.SHEConfig(
        d=d,
        gamma0=temporal_from_config(config["gamma0"]),
        gamma1=model_from_id(config["gamma1"], d=d),
        times=[float(t) for t in config.get("times", [1.0])],
        radii=[float(r) for r in config.get("radii", [10.0])],
        bm_steps=config.get("bm_steps", 256),
        n_paths=config.get("n_paths", 100),
        n_z=config.get("n_z", 1000),
        z_proposal_scale=config.get("z_proposal_scale"),
        master_seed=seed_override if seed_override is not None else config["master_seed"],
        chaos_cutoff_N_freq=config.get("chaos_cutoff_N_freq", 2.0),
        require_part1=config.get("require_part1", False),
    )
    cfg.validate()
    return cfg


def cmd_she(args) -> int:
    config = _read_config(args.config, "she")
    cfg = _she_config(config, args.seed)
    kind = config["kind"]
    rows: list[tuple] = []
    verdict: dict = {"kind": kind, "master_seed": cfg.master_seed, "pass": True}
    token = rngmod.stream_token(cfg.master_seed)

    if kind == "first-chaos":
        values = {}
        for t in cfg.times:
            for s_ in cfg.times:
                if s_ > t:
                    continue
                for R in cfg.radii:
                    v = she.first_chaos_covariance(R, t, s_, cfg.gamma0, cfg.gamma1)
                    rows.append(("first_chaos_cov", t, s_, R, v, 0.0, 0, token))
                    values[(t, s_, R)] = v
        # symmetry is structural here; record the limit consistency when it exists
        if cfg.gamma1.finite_at_zero:
            t0 = cfg.times[0]
            lim = she.first_chaos_limit(t0, t0, cfg.gamma0, cfg.gamma1)
            largest = max(cfg.radii)
            ratio = values[(t0, t0, largest)] / largest**cfg.d / lim
            verdict["limit_ratio_at_largest_R"] = ratio
            verdict["pass"] = bool(abs(ratio - 1.0) < 0.05)
        else:
            beta = cfg.gamma1.params["beta"]
            kb = she.kappa_beta(cfg.d, beta, cfg.times[0], cfg.gamma0)
            seq = [values[(cfg.times[0], cfg.times[0], R)] * R ** (-2 * cfg.d + beta)
                   for R in sorted(cfg.radii)]
            verdict["kappa_beta"] = kb
            verdict["normalized_sequence"] = seq
            increasing = all(seq[i] < seq[i + 1] for i in range(len(seq) - 1))
            close = abs(seq[-1] / kb - 1.0) < 0.05
            verdict["pass"] = bool(increasing and close)

    elif kind == "sigma-limit":
        ests = {}
        for t in cfg.times:
            for s_ in cfg.times:
                est = she.sigma_limit(s_, t, cfg)
                rows.append(("sigma_limit", t, s_, "", est.estimate, est.std_error, est.n, token))
                ests[(s_, t)] = est
                verdict["pass"] = verdict["pass"] and not est.inconclusive and est.estimate > 0
        if len(cfg.times) >= 2:
            a, b = cfg.times[0], cfg.times[1]
            diff = abs(ests[(a, b)].estimate - ests[(b, a)].estimate)
            tol = 2.0 * math.hypot(ests[(a, b)].std_error, ests[(b, a)].std_error)
            verdict["symmetry_diff"] = diff
            verdict["symmetry_tol"] = tol
            verdict["pass"] = verdict["pass"] and diff <= tol

    elif kind == "kappa-beta":
        if cfg.gamma1.kind != "riesz":
            raise InvalidConfigError("kappa-beta needs a riesz spatial kernel")
        beta = cfg.gamma1.params["beta"]
        for t in cfg.times:
            v = she.kappa_beta(cfg.d, beta, t, cfg.gamma0)
            rows.append(("kappa_beta", t, t, "", v, 0.0, 0, token))
            verdict["pass"] = verdict["pass"] and v > 0

    elif kind == "riesz-share":
        if cfg.gamma1.kind != "riesz":
            raise InvalidConfigError("riesz-share needs a riesz spatial kernel")
        beta = cfg.gamma1.params["beta"]
        t = cfg.times[0]
        share = she.riesz_second_chaos_share(t, beta, cfg.gamma0, cfg.radii, cfg)
        for R, (est, se) in share["estimates"].items():
            rows.append(("second_chaos_share", t, t, R, est, se, cfg.n_paths * cfg.n_z, token))
        verdict["estimates"] = {str(R): v for R, v in share["estimates"].items()}
        for (r_small, r_large), (diff, dse) in share["paired"].items():
            verdict["decrease_z"] = diff / dse if dse > 0 else math.inf
            verdict["pass"] = verdict["pass"] and diff > 2.0 * dse

    elif kind == "beta-moment":
        p = config.get("moment_order", 1)
        z = config.get("moment_shift", 0.0)
        for t in cfg.times:
            est = she.moment_beta_p(t, z, p, cfg)
            rows.append((f"beta_moment_p{p}", t, t, "", est.estimate, est.std_error, est.n, token))
            verdict["pass"] = verdict["pass"] and not est.inconclusive

    out = _out_dir(args)
    with (out / "she_rows.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "t", "s", "R", "estimate", "std_error", "n", "seed"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], row[3], repr(float(row[4])),
                             repr(float(row[5])), row[6], row[7]])
    (out / "she_verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True))
    print(f"[{'pass' if verdict['pass'] else 'FAIL'}] she {kind}: {len(rows)} row(s)")
    return EXIT_PASS if verdict["pass"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# tail-bound
# ---------------------------------------------------------------------------


def cmd_tail_bound(args) -> int:
    config = _read_config(args.config, "tail-bound")
    d = config.get("d", 1)
    model = model_from_id(config["model"], d=d)
    gamma0 = temporal_from_config(config["gamma0"])
    tb = she.chaos_tail_bound(
        config["t"], model, config["N"], gamma0,
        mode=config.get("mode", "standard"), p_max=config.get("p_max", 6),
    )
    verdict = {
        "t": tb.t, "N": tb.N, "mode": tb.mode, "C_N": tb.C_N, "D_N": tb.D_N,
        "Gamma_t": tb.big_gamma, "gate_ok": tb.gate_ok,
        "per_p_bound": {str(p): v for p, v in tb.per_p.items()},
        "geometric_sum": tb.geometric_sum,
        "admissible_N": tb.admissible_N,
        "pass": bool(tb.gate_ok or tb.admissible_N is not None),
    }
    out = _out_dir(args)
    (out / "tail_bound.json").write_text(json.dumps(verdict, indent=2, sort_keys=True))
    with (out / "tail_bound_rows.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "t", "s", "R", "estimate", "std_error", "n", "seed"])
        writer.writerow(["C_N", tb.t, tb.t, "", repr(tb.C_N), repr(0.0), 0, 0])
        writer.writerow(["D_N", tb.t, tb.t, "", repr(tb.D_N), repr(0.0), 0, 0])
        for p, v in tb.per_p.items():
            writer.writerow([f"tail_bound_p{p}", tb.t, tb.t, "", repr(v), repr(0.0), 0, 0])
    status = "pass" if verdict["pass"] else "FAIL"
    print(f"[{status}] tail-bound: gate {'holds' if tb.gate_ok else 'fails'} at N={tb.N}"
          + (f", admissible N={tb.admissible_N:.4f}" if tb.admissible_N else ""))
    return EXIT_PASS if verdict["pass"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args) -> int:
    summary = reporting.build_report(args.inputs, args.out, figures=not args.no_figures)
    print(f"merged {len(args.inputs)} file(s): {len(summary['groups'])} group row(s), "
          f"{len(summary['estimates'])} estimate row(s)"
          + (f", {len(summary.get('figures', []))} figure(s)" if not args.no_figures else ""))
    return EXIT_PASS


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaosavg",
        description="Desk-scale experiments on averaged Gaussian functionals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (or CHAOSAVG_THREADS)")
        p.add_argument("--out", default=".", help="output directory")

    common(sub.add_parser("special-check", help="special-function invariant suite"))
    common(sub.add_parser("bm", help="spatial-average experiment"))
    common(sub.add_parser("she", help="heat-equation quantities"))
    common(sub.add_parser("tail-bound", help="higher-chaos tail bounds"))
    rep = sub.add_parser("report", help="merge CSVs into a summary with figures")
    rep.add_argument("inputs", nargs="+", help="input CSV files")
    rep.add_argument("--out", default=".", help="output directory")
    rep.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    return parser


_COMMANDS = {
    "special-check": cmd_special_check,
    "bm": cmd_bm,
    "she": cmd_she,
    "tail-bound": cmd_tail_bound,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InvalidConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChaosAvgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
