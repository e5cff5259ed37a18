"""Scenario configuration: versioned JSON schema, fail-closed validation.

A scenario file fully determines a pipeline run: model parameters, initial
condition, event budget, seed, what to observe, optionally a mean-field solve
and an empirical-vs-limit comparison.  Unknown fields anywhere in the file are
errors, so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Geometry, Params
from .errors import ValidationError
from .meanfield import SolverConfig
from .simulator import RunConfig

SCHEMA_VERSION = 1

_ALLOWED = {
    "schema": None,
    "name": None,
    "geometry": {"d": None, "side": None},
    "run": {
        "params": {
            "alpha": None, "beta0": None, "A_f": None, "a_f": None, "sigma": None,
            "beta_increment": None, "gamma1": None, "gamma2": None,
        },
        "init": {"n0": None, "distribution": None, "positions": None},
        "max_events": None,
        "time_horizon": None,
        "seed": None,
        "record_rejections": None,
    },
    "kernels": {
        "invitation": {"type": None, "sigma": None},
        "affinity_site": {"type": None},
        "affinity": {"type": None, "A_f": None, "a_f": None},
    },
    "observe": {
        "L_obs": None,
        "size_sample_times": None,
        "snapshot_times": None,
        "test_functions": None,
        "graph_export": None,
    },
    "meanfield": {
        "L": None, "dt": None, "scheme": None, "T": None,
        "init": None, "mass0": None, "output_times": None, "beta_slope": None,
    },
    "compare": {"n_values": None, "T": None, "L_obs": None, "replicas": None},
    "replicas": None,
    "out_dir": None,
}

_KERNEL_TYPES = {"invitation": "gaussian", "affinity_site": "uniform", "affinity": "triangular"}


def _check_keys(obj, allowed, path, problems):
    if not isinstance(obj, dict):
        return
    for key, val in obj.items():
        if key not in allowed:
            problems.append(f"unknown config field: {path}{key}")
        elif isinstance(allowed[key], dict):
            _check_keys(val, allowed[key], f"{path}{key}.", problems)


@dataclass
class Scenario:
    """Validated scenario plus helpers to build the runtime objects."""

    raw: dict
    name: str
    geometry: Geometry
    run_config: RunConfig
    replicas: int
    observe: dict = field(default_factory=dict)
    meanfield: dict | None = None
    compare: dict | None = None
    out_dir: str | None = None

    @property
    def config_sha256(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def solver_config(self) -> SolverConfig:
        if self.meanfield is None:
            raise ValidationError("scenario has no 'meanfield' section")
        mf = self.meanfield
        return SolverConfig(
            L=int(mf.get("L", 128)), dt=float(mf.get("dt", 0.01)),
            scheme=mf.get("scheme", "rk4"), T=float(mf.get("T", 10.0)),
        ).validated()


def _cross_check_kernels(kernels: dict, params: Params, problems: list) -> None:
    for section, expected in _KERNEL_TYPES.items():
        sub = kernels.get(section)
        if sub is None:
            continue
        ktype = sub.get("type", expected)
        if ktype != expected:
            problems.append(
                f"kernels.{section}.type must be {expected!r} (got {ktype!r}); "
                "alternative kernels are not shipped"
            )
    inv = kernels.get("invitation", {})
    if "sigma" in inv and not math.isclose(inv["sigma"], params.sigma, rel_tol=0, abs_tol=0):
        problems.append("kernels.invitation.sigma disagrees with run.params.sigma")
    aff = kernels.get("affinity", {})
    for key, val in (("A_f", params.A_f), ("a_f", params.a_f)):
        if key in aff and aff[key] != val:
            problems.append(f"kernels.affinity.{key} disagrees with run.params.{key}")


def parse_scenario(doc: dict, seed_override: int | None = None,
                   replicas_override: int | None = None) -> Scenario:
    """Validate a scenario document and construct the runtime configuration."""
    problems: list[str] = []
    _check_keys(doc, _ALLOWED, "", problems)
    if problems:
        raise ValidationError(problems)

    if doc.get("schema") != SCHEMA_VERSION:
        raise ValidationError(f"config schema must be {SCHEMA_VERSION} (got {doc.get('schema')!r})")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ValidationError("config needs a nonempty 'name'")

    geo = doc.get("geometry", {})
    geometry = Geometry(d=int(geo.get("d", 2)), side=float(geo.get("side", 1.0)))

    run_doc = doc.get("run")
    if not isinstance(run_doc, dict):
        raise ValidationError("config needs a 'run' section")
    params = Params.from_dict(run_doc.get("params", {}))
    _cross_check_kernels(doc.get("kernels", {}), params, problems)
    if problems:
        raise ValidationError(problems)

    init = run_doc.get("init", {})
    positions = init.get("positions")
    run_config = RunConfig(
        params=params,
        n0=init.get("n0"),
        init_positions=None if positions is None else np.asarray(positions, dtype=np.float64),
        distribution=init.get("distribution", "uniform"),
        max_events=int(run_doc.get("max_events", 100_000)),
        time_horizon=run_doc.get("time_horizon"),
        seed=int(seed_override if seed_override is not None else run_doc.get("seed", 0)),
        record_rejections=bool(run_doc.get("record_rejections", True)),
        geometry=geometry,
    ).validated()

    replicas = int(replicas_override if replicas_override is not None else doc.get("replicas", 1))
    if replicas < 1:
        raise ValidationError("replicas must be >= 1")

    observe = doc.get("observe", {})
    meanfield = doc.get("meanfield")
    compare = doc.get("compare")
    if compare is not None:
        n_values = compare.get("n_values")
        if not n_values or any(int(n) < 1 for n in n_values):
            raise ValidationError("compare.n_values must be a nonempty list of positive sizes")
        if meanfield is None:
            raise ValidationError("compare requires a 'meanfield' section for the limit solve")

    return Scenario(
        raw=doc, name=name, geometry=geometry, run_config=run_config,
        replicas=replicas, observe=observe, meanfield=meanfield, compare=compare,
        out_dir=doc.get("out_dir"),
    )


def load_scenario(path, seed_override=None, replicas_override=None) -> Scenario:
    with open(path) as fobj:
        doc = json.load(fobj)
    return parse_scenario(doc, seed_override, replicas_override)
