"""Command-line scenario runner.

Subcommands: ``simulate`` (Monte Carlo replicas with full artifact export),
``meanfield`` (deterministic limit solve), ``compare`` (empirical-vs-limit
L1 histogram distances over a list of initial sizes), ``graph`` (geometric
graph extraction from a saved state), ``validate`` (config check only).

Exit codes: 0 success, 2 validation, 3 runtime/numerical, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, engine
from .errors import (
    AffinetError,
    EnvelopeViolationError,
    InstabilityError,
    UnderResolvedKernelError,
    ValidationError,
)
from .graph import snapshot
from .meanfield import DensityGrid, LimitSolver, grid_to_csv
from .observables import density_histogram, spatial_histogram
from .scenario import Scenario, load_scenario, parse_scenario
from .simulator import GENERATOR_ID, EventLog, Simulation, run
from .state import SystemState


def _manifest(scn: Scenario, command: str, out_dir: Path) -> None:
    doc = {
        "schema": 1,
        "command": command,
        "name": scn.name,
        "config": scn.raw,
        "config_sha256": scn.config_sha256,
        "seed": scn.run_config.seed,
        "replicas": scn.replicas,
        "generator": GENERATOR_ID,
        "backend": engine.BACKEND,
        "numpy_version": np.__version__,
        "package_version": __version__,
    }
    with open(out_dir / "manifest.json", "w") as fobj:
        json.dump(doc, fobj, indent=1, sort_keys=True)


def _write_size_series(path: Path, n0: int, log: EventLog) -> None:
    with open(path, "w", newline="\n") as fobj:
        fobj.write("time,size\n")
        fobj.write(f"0.0,{n0}\n")
        times = log.times
        sizes = log.sizes
        for i in range(len(log)):
            fobj.write(f"{float(times[i])!r},{sizes[i]}\n")


def _write_hist(path: Path, masses: np.ndarray) -> None:
    np.savetxt(path, masses, delimiter=",")


def simulate_replica(scn: Scenario, replica: int, out_dir: Path) -> dict:
    """Run one replica and write all its artifacts; returns the summary."""
    observe = scn.observe
    l_obs = int(observe.get("L_obs", 10))
    snap_times = sorted(observe.get("snapshot_times") or [])
    sample_times = observe.get("size_sample_times")

    sim = Simulation(scn.run_config, replica=replica)
    tag = f"r{replica:03d}"

    init_state = SystemState.from_positions(
        sim.initial_positions, geometry=scn.geometry,
        cell_side=scn.run_config.params.a_f,
    )
    _write_hist(out_dir / f"hist_initial_{tag}.csv",
                spatial_histogram(init_state, l_obs, scn.geometry).masses)

    sample_arr = None
    sample_out = None
    sample_pos = 0
    if sample_times:
        sample_arr = np.ascontiguousarray(sample_times, dtype=np.float64)
        sample_out = np.zeros(len(sample_arr), dtype=np.int64)

    horizon = scn.run_config.time_horizon
    budget = scn.run_config.max_events
    segments = []
    for i_snap, t_snap in enumerate(snap_times):
        if horizon is not None and t_snap > horizon:
            break
        if budget <= 0 or sim.extinct:
            break
        seg = sim.advance(max_events=budget, horizon=t_snap, record=True,
                          sample_times=sample_arr, sample_out=sample_out,
                          sample_pos=sample_pos)
        sample_pos = sim._last_sample_pos
        segments.append(seg)
        budget = scn.run_config.max_events - sim.k
        state = sim.state
        with open(out_dir / f"state_{tag}_snap{i_snap}.json", "w") as fobj:
            json.dump(state.snapshot_dict(), fobj, sort_keys=True)
        _write_hist(out_dir / f"hist_{tag}_snap{i_snap}.csv",
                    spatial_histogram(state, l_obs, scn.geometry).masses)
    if budget > 0 and not sim.extinct:
        seg = sim.advance(max_events=budget, horizon=horizon, record=True,
                          sample_times=sample_arr, sample_out=sample_out,
                          sample_pos=sample_pos)
        segments.append(seg)

    log = EventLog.concat(segments)
    log.to_csv(out_dir / f"events_{tag}.csv")
    _write_size_series(out_dir / f"size_series_{tag}.csv",
                       sim.initial_positions.shape[0], log)
    if sample_arr is not None:
        with open(out_dir / f"size_samples_{tag}.csv", "w", newline="\n") as fobj:
            fobj.write("time,size\n")
            for t, n in zip(sample_arr, sample_out):
                fobj.write(f"{float(t)!r},{n}\n")

    final_state = sim.state
    with open(out_dir / f"final_state_{tag}.json", "w") as fobj:
        json.dump(final_state.snapshot_dict(), fobj, sort_keys=True)
    _write_hist(out_dir / f"hist_final_{tag}.csv",
                spatial_histogram(final_state, l_obs, scn.geometry).masses)

    if observe.get("graph_export"):
        g = snapshot(final_state, scn.run_config.params.a_f)
        g.to_json(out_dir / f"graph_final_{tag}.json")
        g.edges_to_csv(out_dir / f"graph_edges_{tag}.csv")

    summary = {
        "replica": replica,
        "seed": scn.run_config.seed,
        "params": scn.run_config.params.to_dict(),
        "event_count": sim.k,
        "final_N": final_state.size,
        "sup_size": sim.sup_size,
        "extinct_at": sim.extinct_at,
        "final_time": sim.time,
    }
    with open(out_dir / f"summary_{tag}.json", "w") as fobj:
        json.dump(summary, fobj, indent=1, sort_keys=True)
    return summary


def _replica_worker(doc: dict, replica: int, out_dir: str) -> dict:
    scn = parse_scenario(doc)
    return simulate_replica(scn, replica, Path(out_dir))


def simulate_pipeline(scn: Scenario, out_dir: Path, threads: int = 1) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _manifest(scn, "simulate", out_dir)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_replica_worker, scn.raw, r, str(out_dir))
                for r in range(scn.replicas)
            ]
            for fut in futures:
                fut.result()
    else:
        for r in range(scn.replicas):
            simulate_replica(scn, r, out_dir)


def meanfield_pipeline(scn: Scenario, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _manifest(scn, "meanfield", out_dir)
    mf = scn.meanfield
    if mf is None:
        raise ValidationError("scenario has no 'meanfield' section")
    config = scn.solver_config()
    solver = LimitSolver(scn.run_config.params, config, scn.geometry,
                         beta_slope=float(mf.get("beta_slope", 0.0)))
    init_kind = mf.get("init", "uniform")
    if init_kind != "uniform":
        raise ValidationError(f"unknown mean-field init {init_kind!r}")
    g0 = DensityGrid.uniform(config.L, mass=float(mf.get("mass0", 1.0)), side=scn.geometry.side)
    out_times = mf.get("output_times")
    if out_times is None:
        out_times = [config.T]
    grids, (times, masses) = solver.solve(g0, output_times=out_times)
    with open(out_dir / "mass_series.csv", "w", newline="\n") as fobj:
        fobj.write("time,mass\n")
        for t, m in zip(times, masses):
            fobj.write(f"{float(t)!r},{float(m)!r}\n")
    for i, (t, grid) in enumerate(grids):
        grid_to_csv(grid, out_dir / f"grid_out{i}.csv")
        with open(out_dir / f"grid_out{i}.json", "w") as fobj:
            json.dump({"L": grid.L, "side": grid.side, "time": t}, fobj, sort_keys=True)


def compare_pipeline(scn: Scenario, out_dir: Path, threads: int = 1) -> None:
    """Median L1 histogram distance between rescaled empirical states and the
    limit density, across a list of initial sizes."""
    out_dir.mkdir(parents=True, exist_ok=True)
    _manifest(scn, "compare", out_dir)
    cmp_doc = scn.compare
    if cmp_doc is None:
        raise ValidationError("scenario has no 'compare' section")
    l_obs = int(cmp_doc.get("L_obs", 20))
    horizon = float(cmp_doc["T"])
    n_values = [int(n) for n in cmp_doc["n_values"]]
    replicas = int(cmp_doc.get("replicas", scn.replicas))

    config = scn.solver_config()
    config = replace(config, T=horizon)
    if config.L % l_obs != 0:
        raise ValidationError(
            f"meanfield.L={config.L} must be a multiple of compare.L_obs={l_obs}"
        )
    solver = LimitSolver(scn.run_config.params, config, scn.geometry)
    g0 = DensityGrid.uniform(config.L, mass=1.0, side=scn.geometry.side)
    grids, _ = solver.solve(g0, output_times=[horizon])
    limit_hist = density_histogram(grids[-1][1], l_obs)

    rows = []
    medians = []
    for i_n, n in enumerate(n_values):
        seed_n = scn.run_config.seed + 1_000_003 * i_n
        cfg = replace(scn.run_config, n0=n, init_positions=None, seed=seed_n,
                      time_horizon=horizon, max_events=2**40)
        dists = []
        for r in range(replicas):
            traj = run(cfg, replica=r, record=False)
            hist = spatial_histogram(traj.final_state, l_obs, scn.geometry)
            emp = hist.masses / n
            dists.append(float(np.abs(emp - limit_hist.masses).sum()))
        for r, dist in enumerate(dists):
            rows.append((n, r, dist))
        medians.append((n, statistics.median(dists)))

    with open(out_dir / "distances.csv", "w", newline="\n") as fobj:
        fobj.write("n,replica,l1\n")
        for n, r, dist in rows:
            fobj.write(f"{n},{r},{dist!r}\n")
    with open(out_dir / "medians.csv", "w", newline="\n") as fobj:
        fobj.write("n,median_l1\n")
        for n, med in medians:
            fobj.write(f"{n},{med!r}\n")


def graph_pipeline(state_path: Path, radius: float, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(state_path) as fobj:
        doc = json.load(fobj)
    positions = [p["pos"] for p in doc["particles"]]
    ids = [p["id"] for p in doc["particles"]]
    state = SystemState.from_positions(
        positions, cell_side=max(radius, 1e-9), time=doc.get("time", 0.0),
        beta_current=doc.get("beta_current", 1.0),
        ids=ids if ids else None,
    )
    g = snapshot(state, radius)
    g.to_json(out_dir / "graph.json")
    g.edges_to_csv(out_dir / "graph_edges.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affinet",
        description="spatial invitation/affinity/withdrawal network simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="scenario JSON path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--replicas", type=int, default=None, help="override replica count")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes for replica-level parallelism")

    p_sim = sub.add_parser("simulate", help="run Monte Carlo replicas")
    add_common(p_sim)
    p_mf = sub.add_parser("meanfield", help="solve the deterministic limit equation")
    add_common(p_mf)
    p_cmp = sub.add_parser("compare", help="empirical-vs-limit histogram distances")
    add_common(p_cmp)
    p_graph = sub.add_parser("graph", help="extract a geometric graph from a saved state")
    p_graph.add_argument("--state", required=True, help="state snapshot JSON")
    p_graph.add_argument("--radius", type=float, required=True)
    p_graph.add_argument("--out", default="graph_out")
    p_val = sub.add_parser("validate", help="validate a scenario config")
    p_val.add_argument("--config", required=True)
    return parser


def _resolve_out(scn: Scenario, args) -> Path:
    if args.out is not None:
        return Path(args.out)
    if scn.out_dir:
        return Path(scn.out_dir)
    return Path("runs") / scn.name


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            scn = load_scenario(args.config)
            print(f"config ok: scenario {scn.name!r}, params {scn.run_config.params.to_dict()}")
            return 0
        if args.command == "graph":
            graph_pipeline(Path(args.state), args.radius, Path(args.out))
            return 0
        scn = load_scenario(args.config, seed_override=args.seed,
                            replicas_override=args.replicas)
        out_dir = _resolve_out(scn, args)
        if args.command == "simulate":
            simulate_pipeline(scn, out_dir, threads=args.threads)
        elif args.command == "meanfield":
            meanfield_pipeline(scn, out_dir)
        elif args.command == "compare":
            compare_pipeline(scn, out_dir, threads=args.threads)
        return 0
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (InstabilityError, UnderResolvedKernelError, EnvelopeViolationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except AffinetError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
