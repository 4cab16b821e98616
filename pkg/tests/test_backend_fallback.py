"""The pure-Python fallback must emit bit-identical numbers to the jitted
path: same RNG streams, same event sequences, same estimates."""

import json
import os
import subprocess
import sys
import textwrap

import pytest

from adaptcp import JIT_ENABLED

_SCRIPT = textwrap.dedent(
    """
    import json
    import numpy as np
    from adaptcp import JIT_ENABLED
    from adaptcp.engines import run_adaptive, StopRule
    from adaptcp.evolution import MutationKernel, RateFunction
    from adaptcp.torus import TorusSpec
    from adaptcp.windows import generate_window

    spec = TorusSpec(1, 12)
    traj = run_adaptive(
        spec, 0.05, RateFunction(), MutationKernel("two-point", h_up=1, h_down=0.5, p=0.5),
        np.full(12, 2.0), StopRule(horizon=8.0), 2024,
    )
    w = generate_window(spec, 1.5, 2.5, 0.3, 4.0, seed=99)
    print(json.dumps({
        "jit": JIT_ENABLED,
        "times": traj.events["time"].tolist(),
        "sites": traj.events["site"].tolist(),
        "new": traj.events["new"].tolist(),
        "mutations": traj.mutations,
        "wt": w.basic_times.tolist(),
        "marks": w.basic_marks.tolist(),
    }))
    """
)


def _run(disable):
    env = dict(os.environ)
    if disable:
        env["ADAPTCP_DISABLE_NUMBA"] = "1"
    else:
        env.pop("ADAPTCP_DISABLE_NUMBA", None)
    out = subprocess.run(
        [sys.executable, "-c", _SCRIPT], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    return json.loads(out.stdout.strip().splitlines()[-1])


@pytest.mark.skipif(not JIT_ENABLED, reason="numba unavailable; single backend only")
def test_fallback_bit_identical():
    jit = _run(disable=False)
    pure = _run(disable=True)
    assert jit["jit"] is True and pure["jit"] is False
    assert jit["times"] == pure["times"]
    assert jit["sites"] == pure["sites"]
    assert jit["new"] == pure["new"]
    assert jit["mutations"] == pure["mutations"]
    assert jit["wt"] == pure["wt"]
    assert jit["marks"] == pure["marks"]
