"""Benchmark the hot kernels under both backends.

Runs each workload twice: once in the current process (numba-jitted unless
ADAPTCP_DISABLE_NUMBA is set) and once in a subprocess with the fallback
forced, then prints a side-by-side table.  The two backends execute the same
source and produce bit-identical results; only the speed differs.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def workloads(quick):
    scale = 0.1 if quick else 1.0
    return {
        "adaptive_events_n200": int(2_000_000 * scale),
        "twotype_events_n101": int(1_000_000 * scale),
        "window_sweeps_n6": int(20_000 * scale),
        "insulation_r50": int(80 * scale),
    }


def run_workloads(quick):
    import numpy as np

    from adaptcp import JIT_ENABLED
    from adaptcp.engines import run_one_type, run_two_type
    from adaptcp.torus import BoxSpec, TorusSpec
    from adaptcp.windows import PathQuery, generate_window, is_insulated, reaches

    sizes = workloads(quick)
    results = {"jit": JIT_ENABLED}

    spec = TorusSpec(1, 200)
    run_one_type(spec, 2.0, np.ones(200), 1.0, 0, record_events=False)  # warm
    t0 = time.perf_counter()
    traj = run_one_type(
        spec,
        2.0,
        np.ones(200),
        1e9,
        7,
        record_events=False,
        max_events=sizes["adaptive_events_n200"],
    )
    dt = time.perf_counter() - t0
    results["adaptive_events_n200"] = {
        "events": traj.n_events,
        "seconds": dt,
        "mev_per_s": traj.n_events / dt / 1e6,
    }

    box = BoxSpec(1, 50)
    state = np.ones(box.n_sites, dtype=np.int8)
    state[box.n_sites // 2 :] = 2
    t0 = time.perf_counter()
    traj = run_two_type(
        box,
        1.0,
        2.0,
        state,
        1e9,
        3,
        record_events=False,
        max_events=sizes["twotype_events_n101"],
    )
    dt = time.perf_counter() - t0
    results["twotype_events_n101"] = {
        "events": traj.n_events,
        "seconds": dt,
        "mev_per_s": traj.n_events / dt / 1e6,
    }

    small = TorusSpec(1, 6)
    t0 = time.perf_counter()
    hits = 0
    for i in range(sizes["window_sweeps_n6"]):
        w = generate_window(small, 1.5, None, 0.0, 2.0, seed=i)
        hits += reaches(w, PathQuery({0}, 0.0, {2, 3}, 2.0))
    dt = time.perf_counter() - t0
    results["window_sweeps_n6"] = {
        "windows": sizes["window_sweeps_n6"],
        "seconds": dt,
        "kwin_per_s": sizes["window_sweeps_n6"] / dt / 1e3,
    }

    t0 = time.perf_counter()
    for i in range(sizes["insulation_r50"]):
        w = generate_window(box, 2.0, 2.0, 0.0, 7.0, seed=i)
        is_insulated(w, 7.0)
    dt = time.perf_counter() - t0
    results["insulation_r50"] = {
        "windows": sizes["insulation_r50"],
        "seconds": dt,
        "win_per_s": sizes["insulation_r50"] / dt,
    }
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="10%% workloads")
    parser.add_argument(
        "--emit-json", action="store_true", help=argparse.SUPPRESS
    )
    args = parser.parse_args()

    if args.emit_json:
        print(json.dumps(run_workloads(args.quick)))
        return

    here = run_workloads(args.quick)

    env = dict(os.environ)
    if here["jit"]:
        env["ADAPTCP_DISABLE_NUMBA"] = "1"
        other_name = "pure-python"
    else:
        env.pop("ADAPTCP_DISABLE_NUMBA", None)
        other_name = "numba"
    cmd = [sys.executable, os.path.abspath(__file__), "--emit-json"]
    if args.quick:
        cmd.append("--quick")
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    other = json.loads(out.stdout.strip().splitlines()[-1])

    this_name = "numba" if here["jit"] else "pure-python"
    print(f"{'workload':28s} {this_name:>14s} {other_name:>14s} {'ratio':>8s}")
    for key in ("adaptive_events_n200", "twotype_events_n101", "window_sweeps_n6", "insulation_r50"):
        a, b = here[key]["seconds"], other[key]["seconds"]
        print(f"{key:28s} {a:12.3f}s {b:12.3f}s {b / a:7.1f}x")


if __name__ == "__main__":
    main()
