"""Command-line front end.

One experiment = one JSON config (see ``config``) + a master seed.  Every
number emitted is a deterministic function of (config, master seed): all
stream seeds are derived from the master seed and labeled by experiment,
trial and stream.  CSV payloads carry no timestamps (those live only in the
metadata sidecar).

Exit status: 0 success, 2 validation failure, 3 estimation failure,
4 completed with capped runs.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from ._rng import derive_seed
from .config import ExperimentConfig
from .engines import StopRule, export_trajectory_csv, run_adaptive, run_one_type
from .errors import (
    ConfigError,
    EstimationFailedError,
    ProviderGapError,
    ValidationError,
)
from .evolution import validate_schedule
from .limit import (
    AcceptanceTable,
    LimitParams,
    RateTable,
    check_nonexplosive,
    compare_paths,
    ks_two_sample,
    sample_limit_path,
)
from .observables import (
    estimate_acceptance,
    estimate_R,
    estimate_Sbox,
    sample_landscape_at_birth,
)
from .oracle import (
    full_start_distribution,
    occupancy_marginal,
    onetype_generator,
    transient_distribution,
)
from .parallel import run_indexed
from .torus import TorusSpec, default_density_radius
from .traits import extract_Z, run_rounds

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ESTIMATION = 3
EXIT_CAPPED = 4


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


class ResultsBundle:
    """Output directory: results table, metadata sidecar, per-kind tables."""

    def __init__(self, directory):
        os.makedirs(directory, exist_ok=True)
        self.directory = directory
        self.result_rows = []
        self.capped = False
        self.truncated = False

    def add_result(self, estimator, params, result, seed):
        self.result_rows.append(
            [
                estimator,
                json.dumps(params, sort_keys=True),
                _fmt(float(result.estimate)),
                _fmt(float(result.se)),
                result.count,
                result.diagnostics.get("censored", 0),
                seed,
            ]
        )

    def write_table(self, name, header, rows):
        path = os.path.join(self.directory, name)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([_fmt(v) for v in row])
        return path

    def finalize(self, metadata):
        self.write_table(
            "results.csv",
            ["estimator", "parameters", "estimate", "se", "count", "censored", "seed"],
            self.result_rows,
        )
        metadata = dict(metadata)
        metadata["tool_version"] = __version__
        metadata["written_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        if self.truncated:
            metadata["truncated"] = True
        with open(os.path.join(self.directory, "metadata.json"), "w") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _config_hash(cfg):
    blob = json.dumps(cfg.raw, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _spec(cfg, N=None):
    return TorusSpec(int(cfg.model["d"]), int(N if N is not None else cfg.model["N"]))


def _providers(cfg):
    prov = cfg.model.get("providers") or {}
    if "R" not in prov or "S" not in prov:
        raise ConfigError("limit sampling needs model.providers.R and .S")
    r = prov["R"]
    rt = RateTable(r["grid"], r["values"], r.get("ses"), interpolate=True)
    entries = {}
    for row in prov["S"]["entries"]:
        lam, lp, val = row[0], row[1], row[2]
        se = row[3] if len(row) > 3 else 0.0
        entries[(lam, lp)] = (val, se)
    return rt, AcceptanceTable(entries, interpolate=True)


# --------------------------------------------------------------------------
# experiment runners


def _run_simulate_adaptive(cfg, bundle, seed):
    spec = _spec(cfg)
    sched = cfg.schedule()
    delta = sched.delta(spec.N)
    horizon = cfg.run.get("horizon")
    if horizon is None:
        horizon = 5.0 / (delta * spec.n_sites)
    traj = run_adaptive(
        spec,
        delta,
        cfg.rate_function(),
        cfg.kernel(),
        np.full(spec.n_sites, float(cfg.model["lambda0"])),
        StopRule(horizon=float(horizon), max_events=int(cfg.run["event_cap"])),
        derive_seed(seed, "simulate", 0),
        record_events=bool(cfg.output["trajectory"]),
    )
    if traj.capped:
        bundle.capped = True
    if traj.events is not None:
        export_trajectory_csv(
            traj,
            os.path.join(bundle.directory, "trajectory.csv"),
            os.path.join(bundle.directory, "trajectory_meta.json"),
            parameters={"delta": delta, "lambda0": cfg.model["lambda0"]},
        )
    path, ledger = extract_Z(traj, delta, spec)
    bundle.write_table(
        "trait_path.csv",
        ["rescaled_time", "value", "provenance"],
        [(t, v, p or "") for t, v, p in path.jumps],
    )
    return {
        "status": traj.status,
        "n_events": traj.n_events,
        "star_raw_time": traj.star_raw_time,
        "star_rescaled": ledger.rescaled,
        "mutations": len(traj.mutations),
    }


def _run_rounds(cfg, bundle, seed):
    sched = cfg.schedule()
    over = cfg.overrides()
    n_runs = int(cfg.run["trials"])
    n_rounds = int(cfg.run.get("rounds") or 1)
    rows = []
    path_rows = []
    info = {}
    for N in cfg.n_values():
        spec = _spec(cfg, N)
        delta = sched.delta(N)
        t_res = float(over.get("t_resolution") or sched.t_resolution(N))
        radius = int(over.get("density_radius") or default_density_radius(N))
        ell = int(over.get("landscape_ell") or 3)

        def one_run(i, spec=spec, delta=delta, t_res=t_res, radius=radius, ell=ell):
            return run_rounds(
                spec,
                delta,
                cfg.rate_function(),
                cfg.kernel(),
                float(cfg.model["lambda0"]),
                n_rounds,
                t_res,
                derive_seed(seed, "rounds", spec.N, i),
                density_radius=radius,
                ell=ell,
                max_events=int(cfg.run["event_cap"]),
            )

        results = run_indexed(one_run, n_runs, int(cfg.run["parallel"]))
        for i, res in enumerate(results):
            if res.capped:
                bundle.capped = True
            for rec, eflag, sig, lam in zip(
                res.records, res.e_flags, res.sigmas, res.lambdas
            ):
                rows.append(
                    [
                        N,
                        i,
                        rec.index,
                        rec.T_raw,
                        rec.T_rescaled,
                        "" if rec.T_prime_raw is None else rec.T_prime_raw,
                        rec.T_dprime_raw,
                        rec.parent_type,
                        rec.mutant_type,
                        str(rec.site),
                        rec.outcome,
                        int(rec.landscape_in_class),
                        "" if rec.support_in_class_at_dprime is None
                        else int(rec.support_in_class_at_dprime),
                        int(eflag),
                        sig,
                        lam,
                    ]
                )
            t = 0.0
            for sig, lam, flag in zip(res.sigmas, res.lambdas, res.e_flags):
                if not flag or math.isnan(sig):
                    break
                t += sig
                path_rows.append([N, i, t, lam])
        info[str(N)] = {
            "delta": delta,
            "t_resolution": t_res,
            "density_radius": radius,
        }
    bundle.write_table(
        "rounds.csv",
        [
            "N",
            "run",
            "round",
            "T_raw",
            "T_rescaled",
            "T_prime_raw",
            "T_dprime_raw",
            "parent_type",
            "mutant_type",
            "site",
            "outcome",
            "landscape_in_class",
            "support_in_class_at_dprime",
            "e_flag",
            "sigma",
            "lambda",
        ],
        rows,
    )
    bundle.write_table(
        "trait_path.csv", ["N", "run", "rescaled_time", "value"], path_rows
    )
    return info


def _run_estimate_r(cfg, bundle, seed):
    spec = _spec(cfg)
    lam = float(cfg.model.get("lam") or cfg.model["lambda0"])
    warmup = float(cfg.run.get("warmup") or 50.0)
    window = float(cfg.run.get("window") or 50.0)
    trials = int(cfg.run["trials"])
    res = estimate_R(lam, spec, warmup, window, trials, derive_seed(seed, "R"))
    bundle.add_result(
        "estimate_R",
        {"lam": lam, "N": spec.N, "d": spec.d, "warmup": warmup, "window": window},
        res,
        seed,
    )
    return {"estimate": res.estimate, "se": res.se}


def _run_landscape(cfg, bundle, seed):
    spec = _spec(cfg)
    over = cfg.overrides()
    ell = int(over.get("landscape_ell") or 3)
    lam = float(cfg.model.get("lam") or cfg.model["lambda0"])
    samples = int(cfg.run.get("samples") or 1000)
    sample = sample_landscape_at_birth(
        lam, spec, ell, float(cfg.run["burn_in"]), samples, derive_seed(seed, "land")
    )
    freqs = sample.frequencies()
    bundle.write_table(
        "landscape.csv",
        ["pattern_code", "frequency", "count"],
        [[code, f, int(round(f * sample.n))] for code, f in sorted(freqs.items())],
    )
    return {"samples": sample.n, "ell": ell, "distinct_patterns": len(freqs)}


def _run_estimate_acceptance(cfg, bundle, seed):
    spec = _spec(cfg)
    over = cfg.overrides()
    lam = float(cfg.model.get("lam") or cfg.model["lambda0"])
    lam_prime = float(cfg.model["lam_prime"])
    r = int(over.get("box_radius") or 10)
    res = estimate_acceptance(
        lam,
        lam_prime,
        spec,
        r,
        int(cfg.run.get("samples") or 100),
        int(cfg.run.get("inner_trials") or 100),
        derive_seed(seed, "acc"),
        ell=over.get("landscape_ell"),
        burn_in=float(cfg.run["burn_in"]),
    )
    bundle.add_result(
        "estimate_acceptance",
        {"lam": lam, "lam_prime": lam_prime, "r": r, "N": spec.N},
        res,
        seed,
    )
    return {"estimate": res.estimate, "se": res.se}


def _run_sbox(cfg, bundle, seed):
    over = cfg.overrides()
    lam = float(cfg.model.get("lam") or cfg.model["lambda0"])
    lam_prime = float(cfg.model["lam_prime"])
    r = int(over.get("box_radius") or 10)
    sites = over.get("type1_sites") or []
    sites = [tuple(s) if isinstance(s, list) else s for s in sites]
    res = estimate_Sbox(
        lam,
        lam_prime,
        sites,
        r,
        int(cfg.run["trials"]),
        derive_seed(seed, "sbox"),
        d=int(cfg.model["d"]),
    )
    bundle.add_result(
        "estimate_Sbox",
        {"lam": lam, "lam_prime": lam_prime, "r": r, "type1_sites": len(sites)},
        res,
        seed,
    )
    return {"estimate": res.estimate, "se": res.se}


def _run_limit_sample(cfg, bundle, seed):
    rt, st = _providers(cfg)
    params = LimitParams(
        lambda0=float(cfg.model["lambda0"]),
        b=cfg.rate_function(),
        kernel=cfg.kernel(),
        R=rt,
        S=st,
    )
    horizon = float(cfg.run.get("horizon") or 10.0)
    n_paths = int(cfg.run.get("limit_paths") or cfg.run["trials"])
    path_rows = []
    attempt_rows = []
    for i in range(n_paths):
        path, attempts = sample_limit_path(
            params, horizon, derive_seed(seed, "limit", i)
        )
        for t, v, _ in path.jumps:
            path_rows.append([i, t, v])
        for j, a in enumerate(attempts):
            attempt_rows.append(
                [i, j, a.sigma, a.proposal, int(a.accepted), a.location]
            )
    bundle.write_table(
        "limit_paths.csv", ["path", "rescaled_time", "value"], path_rows
    )
    bundle.write_table(
        "limit_attempts.csv",
        ["path", "attempt", "sigma", "proposal", "accepted", "location"],
        attempt_rows,
    )
    report = check_nonexplosive(params, horizon, min(n_paths, 200), derive_seed(seed, "ne"))
    return {"paths": n_paths, "nonexplosive": report}


def _run_compare(cfg, bundle, seed):
    """Micro rounds vs limit sampler with plug-in estimates."""
    spec = _spec(cfg)
    sched = cfg.schedule()
    over = cfg.overrides()
    lam0 = float(cfg.model["lambda0"])
    delta = sched.delta(spec.N)
    t_res = float(over.get("t_resolution") or sched.t_resolution(spec.N))
    radius = int(over.get("density_radius") or default_density_radius(spec.N))
    kernel = cfg.kernel()
    b = cfg.rate_function()
    r_box = int(over.get("box_radius") or 15)

    r_hat = estimate_R(
        lam0,
        spec,
        float(cfg.run.get("warmup") or 50.0),
        float(cfg.run.get("window") or 50.0),
        max(20, int(cfg.run["trials"]) // 50),
        derive_seed(seed, "cmp-R"),
    )
    bundle.add_result("estimate_R", {"lam": lam0, "N": spec.N}, r_hat, seed)

    entries = {}
    for value, _mass in kernel.support(lam0) or []:
        if value > lam0:
            acc = estimate_acceptance(
                lam0,
                value,
                spec,
                r_box,
                int(cfg.run.get("samples") or 100),
                int(cfg.run.get("inner_trials") or 100),
                derive_seed(seed, "cmp-S", value),
                burn_in=float(cfg.run["burn_in"]),
            )
            entries[(lam0, value)] = (acc.estimate, acc.se)
            bundle.add_result(
                "estimate_acceptance",
                {"lam": lam0, "lam_prime": value, "r": r_box},
                acc,
                seed,
            )

    n_rounds = int(cfg.run["trials"])

    def one_round(i):
        return run_rounds(
            spec,
            delta,
            b,
            kernel,
            lam0,
            1,
            t_res,
            derive_seed(seed, "cmp-round", i),
            density_radius=radius,
            max_events=int(cfg.run["event_cap"]),
        )

    results = run_indexed(one_round, n_rounds, int(cfg.run["parallel"]))
    micro_sigma = []
    micro_lambda = []
    for res in results:
        if res.capped:
            bundle.capped = True
        if res.records and res.e_flags[0]:
            micro_sigma.append(res.sigmas[0])
            micro_lambda.append(res.lambdas[0])

    grid = sorted({lam0} | {v for (_, v) in entries})
    rt = RateTable(
        [lam0], [r_hat.estimate], [r_hat.se], interpolate=False
    )
    # the limit sampler only visits lam0 in first-round comparisons
    params = LimitParams(lambda0=lam0, b=b, kernel=kernel, R=rt, S=AcceptanceTable(entries))
    n_limit = int(cfg.run.get("limit_paths") or 10000)
    limit_sigma = []
    limit_lambda = []
    for i in range(n_limit):
        _, attempts = sample_limit_path(
            params, math.inf, derive_seed(seed, "cmp-lim", i), max_attempts=1
        )
        if attempts:
            limit_sigma.append(attempts[0].sigma)
            limit_lambda.append(attempts[0].location)

    rows = compare_paths(
        micro_sigma, micro_lambda, limit_sigma, limit_lambda, seed=derive_seed(seed, "cmp")
    )
    bundle.write_table(
        "compare.csv",
        ["statistic", "value", "band95", "n_micro", "n_limit"],
        [[r["statistic"], r["value"], r["band95"], r["n_micro"], r["n_limit"]] for r in rows],
    )
    return {
        "rounds_used": len(micro_sigma),
        "grid": grid,
        "ks_sigma1": rows[0]["value"],
    }


def _run_oracle_check(cfg, bundle, seed):
    d = int(cfg.model["d"])
    N = int(cfg.model["N"])
    spec = TorusSpec(d, N)
    lam = float(cfg.model.get("lam") or cfg.model["lambda0"])
    t = float(cfg.run.get("t") or 1.0)
    trials = int(cfg.run["trials"])
    Q = onetype_generator(spec, lam)
    dist = transient_distribution(Q, full_start_distribution(spec), t)
    exact = occupancy_marginal(spec, dist, 0)
    hits = 0
    for i in range(trials):
        traj = run_one_type(
            spec,
            lam,
            np.ones(spec.n_sites),
            t,
            derive_seed(seed, "oracle", i),
            record_events=False,
        )
        if traj.final[0] > 0:
            hits += 1
    emp = hits / trials
    sigma = math.sqrt(max(exact * (1 - exact), 1e-12) / trials)
    ok = abs(emp - exact) <= 3 * sigma
    bundle.write_table(
        "oracle_check.csv",
        ["oracle", "empirical", "sigma", "pass"],
        [[exact, emp, sigma, int(ok)]],
    )
    return {"oracle": exact, "empirical": emp, "sigma": sigma, "pass": bool(ok)}


def _run_diagnostics(cfg, bundle, seed):
    from .observables import density_and_coupling_diagnostics

    spec = _spec(cfg)
    lam = float(cfg.model.get("lam") or cfg.model["lambda0"])
    horizon = float(cfg.run.get("horizon") or 20.0)
    report = density_and_coupling_diagnostics(
        lam, spec, horizon, derive_seed(seed, "diag")
    )
    with open(os.path.join(bundle.directory, "diagnostics.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return {k: v for k, v in report.items() if k != "coupling_times"}


_RUNNERS = {
    "simulate-adaptive": _run_simulate_adaptive,
    "rounds": _run_rounds,
    "estimate-r": _run_estimate_r,
    "landscape": _run_landscape,
    "estimate-acceptance": _run_estimate_acceptance,
    "sbox": _run_sbox,
    "limit-sample": _run_limit_sample,
    "compare": _run_compare,
    "oracle-check": _run_oracle_check,
    "diagnostics": _run_diagnostics,
}


def run_experiment(cfg, out_dir=None, seed=None, parallel=None):
    """Dispatch an experiment; returns (bundle, exit_code)."""
    if seed is not None:
        cfg.run["seed"] = int(seed)
    if parallel is not None:
        cfg.run["parallel"] = int(parallel)
    if out_dir is not None:
        cfg.output["directory"] = out_dir
    master = int(cfg.run["seed"])
    bundle = ResultsBundle(cfg.output["directory"])
    sched_report = validate_schedule(
        cfg.schedule(), int(cfg.model["d"]), cfg.n_values()
    )
    meta = {
        "config": cfg.resolved(),
        "config_hash": _config_hash(cfg),
        "master_seed": master,
        "schedule_report": {
            "separation_ok": sched_report.separation_ok,
            "lower_bound_ok": sched_report.lower_bound_ok,
        },
    }
    try:
        summary = _RUNNERS[cfg.kind](cfg, bundle, master)
        meta["summary"] = summary
    except KeyboardInterrupt:
        bundle.truncated = True
        meta["summary"] = {"interrupted": True}
        bundle.finalize(meta)
        raise
    bundle.finalize(meta)
    return bundle, (EXIT_CAPPED if bundle.capped else EXIT_OK)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="adaptcp",
        description="Adaptive contact process laboratory: run one configured "
        "experiment and write a results bundle.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--parallel", type=int, default=None, help="trial fan-out width")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path config override, e.g. model.N=100 (repeatable)",
    )
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        for item in args.override:
            if "=" not in item:
                raise ConfigError(f"--override needs KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            cfg.apply_override(key, value)
        bundle, code = run_experiment(
            cfg, out_dir=args.out, seed=args.seed, parallel=args.parallel
        )
    except (ConfigError, ValidationError, ProviderGapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EstimationFailedError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    print(f"bundle written to {bundle.directory}")
    return code


if __name__ == "__main__":
    sys.exit(main())
