"""Experiment configuration: a single JSON file with nested sections.

Parsing is strict: unknown keys anywhere fail fast with the offending path.
Every field is either set or defaulted, and the resolved values (including
the computed delta_N, t_N and radius defaults) are echoed into the output
metadata by the harness.

Schema (all keys optional unless stated):

    kind                       required; one of the experiment kinds
    model.d, model.N           lattice (N_list for sweeps)
    model.lambda0              initial/resident trait
    model.lam, model.lam_prime explicit rates where an estimator needs them
    model.schedule             {gamma, c, epsilon0, a}
    model.kernel               {variant, h_up, h_down, p, sigma, floor}
    model.rate_function        {variant, c, c_max}
    model.providers            {R: {grid, values, ses}, S: {entries}} for the
                               limit sampler (entries rows: [lam, lam', value, se])
    model.overrides            {t_resolution, density_radius, sub_radius,
                               landscape_ell, box_radius, lookback, type1_sites}
    run                        {trials, rounds, horizon, warmup, window, seed,
                               parallel, event_cap, samples, inner_trials,
                               burn_in, t, probe_times, limit_paths}
    output                     {directory, trajectory, dump_windows}
"""

import json

from .errors import ConfigError
from .evolution import MutationKernel, RateFunction, ScalingSchedule, default_schedule

KINDS = (
    "simulate-adaptive",
    "rounds",
    "estimate-r",
    "landscape",
    "estimate-acceptance",
    "sbox",
    "limit-sample",
    "compare",
    "oracle-check",
    "diagnostics",
)

_SCHEMA = {
    "kind": None,
    "model": {
        "d": None,
        "N": None,
        "N_list": None,
        "lambda0": None,
        "lam": None,
        "lam_prime": None,
        "schedule": {"gamma": None, "c": None, "epsilon0": None, "a": None},
        "kernel": {
            "variant": None,
            "h_up": None,
            "h_down": None,
            "p": None,
            "sigma": None,
            "floor": None,
        },
        "rate_function": {"variant": None, "c": None, "c_max": None},
        "providers": {
            "R": {"grid": None, "values": None, "ses": None},
            "S": {"entries": None},
        },
        "overrides": {
            "t_resolution": None,
            "density_radius": None,
            "sub_radius": None,
            "landscape_ell": None,
            "box_radius": None,
            "lookback": None,
            "type1_sites": None,
        },
    },
    "run": {
        "trials": None,
        "rounds": None,
        "horizon": None,
        "warmup": None,
        "window": None,
        "seed": None,
        "parallel": None,
        "event_cap": None,
        "samples": None,
        "inner_trials": None,
        "burn_in": None,
        "t": None,
        "probe_times": None,
        "limit_paths": None,
    },
    "output": {"directory": None, "trajectory": None, "dump_windows": None},
}

_DEFAULTS = {
    "model": {"d": 1, "N": 50, "lambda0": 2.0},
    "run": {
        "trials": 1,
        "seed": 0,
        "parallel": 1,
        "event_cap": 10**9,
        "burn_in": 20.0,
    },
    "output": {"directory": "adaptcp-out", "trajectory": True, "dump_windows": False},
}


def _check_keys(data, schema, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a section (object)")
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown configuration key: {where}")
        sub = schema[key]
        if isinstance(sub, dict):
            _check_keys(value, sub, where)


class ExperimentConfig:
    """Validated, defaulted view over the raw configuration mapping."""

    def __init__(self, data):
        _check_keys(data, _SCHEMA, "")
        kind = data.get("kind")
        if kind not in KINDS:
            raise ConfigError(
                f"kind must be one of {', '.join(KINDS)}; got {kind!r}"
            )
        self.kind = kind
        self.raw = data
        self.model = {**_DEFAULTS["model"], **data.get("model", {})}
        self.run = {**_DEFAULTS["run"], **data.get("run", {})}
        self.output = {**_DEFAULTS["output"], **data.get("output", {})}

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls(data)

    def apply_override(self, dotted, value):
        """--override model.N=100 style dotted-path assignment."""
        parts = dotted.split(".")
        target = self.raw
        schema = _SCHEMA
        for p in parts[:-1]:
            if p not in schema or not isinstance(schema[p], dict):
                raise ConfigError(f"unknown override path: {dotted}")
            schema = schema[p]
            target = target.setdefault(p, {})
        if parts[-1] not in schema:
            raise ConfigError(f"unknown override path: {dotted}")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        target[parts[-1]] = parsed
        self.__init__(self.raw)

    # -- resolved model objects ------------------------------------------

    def schedule(self):
        s = self.model.get("schedule")
        if s is None:
            return default_schedule(self.model["d"])
        return ScalingSchedule(
            gamma=s["gamma"],
            c=s.get("c", 1.0),
            epsilon0=s.get("epsilon0", 0.5),
            a=s.get("a"),
        )

    def kernel(self):
        k = dict(self.model.get("kernel") or {"variant": "two-point"})
        return MutationKernel(**k)

    def rate_function(self):
        r = dict(self.model.get("rate_function") or {"variant": "constant", "c": 1.0})
        return RateFunction(**r)

    def overrides(self):
        return dict(self.model.get("overrides") or {})

    def n_values(self):
        if self.model.get("N_list"):
            return [int(n) for n in self.model["N_list"]]
        return [int(self.model["N"])]

    def resolved(self):
        """Every effective parameter, for the metadata echo."""
        sched = self.schedule()
        out = {
            "kind": self.kind,
            "model": dict(self.model),
            "run": dict(self.run),
            "output": dict(self.output),
            "resolved_schedule": {
                "gamma": sched.gamma,
                "c": sched.c,
                "epsilon0": sched.epsilon0,
                "a": sched.a,
                "delta_N": {str(n): sched.delta(n) for n in self.n_values()},
                "t_N": {str(n): sched.t_resolution(n) for n in self.n_values()},
            },
        }
        return out
