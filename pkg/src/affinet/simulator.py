"""Exact event-driven simulation: global clock, thinning, state mutation.

One candidate event ("update") per iteration of the scheme: an exponential
waiting time at the global rate ``H = (alpha + A_f + beta) * N``, a kind
choice proportional to the three rates, and an acceptance/rejection step that
makes the realized jump rates exact.  Withdrawals are always accepted;
invitations are accepted with ``1/gamma1`` (identically 1 for the shipped
translation-invariant Gaussian); affinity recruitments are accepted with
``aff(x_i, y) / (A_f * gamma2)`` against a uniformly drawn vertex ``x_i``.

Randomness: one PCG64 stream per replica, seeded by
``SeedSequence((seed, replica))``.  The draw order within a candidate event is
fixed (waiting time, kind, vertex, kernel draw, acceptance), so a (seed,
config) pair replays to a bit-identical event log on any backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .domain import Geometry, Params, torus_wrap, validate_params
from .errors import EmptySystemError, SystemHalted, ValidationError
from .kernels import KernelSet
from .state import SystemState

KIND_NAMES = ("invitation", "affinity", "withdrawal")
GENERATOR_ID = "numpy-pcg64 seeded by SeedSequence((seed, replica))"

_LOG_FIELDS = ("k", "time", "kind", "accepted", "actor", "new_x", "new_y", "removed", "size")
CSV_HEADER = "k,time,kind,accepted,actor_id,new_x,new_y,removed_id,size_after"


def rng_for(seed: int, replica: int = 0) -> np.random.Generator:
    """The pinned generator for one replica of a run."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, replica))))


@dataclass(frozen=True)
class Model:
    """Validated parameters plus the kernels they induce."""

    params: Params
    geometry: Geometry = Geometry()
    kernels: KernelSet = None

    @classmethod
    def build(cls, params: Params, geometry: Geometry = Geometry()) -> "Model":
        validate_params(params, geometry)
        return cls(params=params, geometry=geometry, kernels=KernelSet.from_params(params, geometry))


@dataclass(frozen=True)
class EventRecord:
    """One iteration of the scheme (accepted or rejected candidate)."""

    k: int
    time: float
    kind: str
    accepted: bool
    actor_id: int
    new_pos: tuple | None
    removed_id: int | None
    size_after: int


class EventLog:
    """Columnar event log; indexable as :class:`EventRecord`, exportable as CSV."""

    def __init__(self, arrays: dict | None = None):
        if arrays is None:
            arrays = {name: np.empty(0, dtype=_EMPTY_DTYPES[name]) for name in _LOG_FIELDS}
        self.arrays = arrays

    @classmethod
    def concat(cls, segments: list) -> "EventLog":
        segs = [s for s in segments if s is not None and len(s["k"])]
        if not segs:
            return cls()
        return cls({name: np.concatenate([s[name] for s in segs]) for name in _LOG_FIELDS})

    def __len__(self) -> int:
        return len(self.arrays["k"])

    def __getitem__(self, i: int) -> EventRecord:
        a = self.arrays
        accepted = bool(a["accepted"][i])
        kind = int(a["kind"][i])
        new_pos = None
        if accepted and kind != 2:
            new_pos = (float(a["new_x"][i]), float(a["new_y"][i]))
        removed = int(a["removed"][i])
        return EventRecord(
            k=int(a["k"][i]),
            time=float(a["time"][i]),
            kind=KIND_NAMES[kind],
            accepted=accepted,
            actor_id=int(a["actor"][i]),
            new_pos=new_pos,
            removed_id=removed if removed >= 0 else None,
            size_after=int(a["size"][i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def times(self) -> np.ndarray:
        return self.arrays["time"]

    @property
    def sizes(self) -> np.ndarray:
        return self.arrays["size"]

    def write_csv(self, fobj) -> None:
        """Deterministic CSV export; floats use shortest round-trip reprs."""
        a = self.arrays
        fobj.write(CSV_HEADER + "\n")
        for i in range(len(self)):
            accepted = bool(a["accepted"][i])
            kind = int(a["kind"][i])
            recruit = accepted and kind != 2
            removed = int(a["removed"][i])
            nx = repr(float(a["new_x"][i])) if recruit else ""
            ny = repr(float(a["new_y"][i])) if recruit else ""
            rm = str(removed) if removed >= 0 else ""
            fobj.write(
                f'{a["k"][i]},{float(a["time"][i])!r},{KIND_NAMES[kind]},'
                f'{"true" if accepted else "false"},{a["actor"][i]},'
                f"{nx},{ny},{rm},{a['size'][i]}\n"
            )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fobj:
            self.write_csv(fobj)

    @classmethod
    def from_records(cls, records: list) -> "EventLog":
        arrays = {
            "k": np.array([r.k for r in records], dtype=np.int64),
            "time": np.array([r.time for r in records], dtype=np.float64),
            "kind": np.array([KIND_NAMES.index(r.kind) for r in records], dtype=np.int8),
            "accepted": np.array([r.accepted for r in records], dtype=np.int8),
            "actor": np.array([r.actor_id for r in records], dtype=np.int64),
            "new_x": np.array(
                [r.new_pos[0] if r.new_pos is not None else math.nan for r in records]
            ),
            "new_y": np.array(
                [r.new_pos[1] if r.new_pos is not None else math.nan for r in records]
            ),
            "removed": np.array(
                [r.removed_id if r.removed_id is not None else -1 for r in records], dtype=np.int64
            ),
            "size": np.array([r.size_after for r in records], dtype=np.int64),
        }
        return cls(arrays)


_EMPTY_DTYPES = {
    "k": np.int64, "time": np.float64, "kind": np.int8, "accepted": np.int8,
    "actor": np.int64, "new_x": np.float64, "new_y": np.float64,
    "removed": np.int64, "size": np.int64,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run."""

    params: Params
    n0: int | None = None
    init_positions: np.ndarray | None = None
    distribution: str = "uniform"
    max_events: int = 100_000
    time_horizon: float | None = None
    seed: int = 0
    record_rejections: bool = True
    geometry: Geometry = field(default_factory=Geometry)

    def validated(self) -> "RunConfig":
        validate_params(self.params, self.geometry)
        problems = []
        if self.init_positions is None:
            if self.n0 is None or int(self.n0) < 1:
                problems.append("n0 must be >= 1 (or explicit init_positions given)")
            if self.distribution != "uniform":
                problems.append(f"unknown init distribution: {self.distribution!r}")
        else:
            arr = np.asarray(self.init_positions, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != self.geometry.d or arr.shape[0] < 1:
                problems.append("init_positions must be a nonempty (N, d) array")
        if int(self.max_events) < 1:
            problems.append("max_events must be >= 1")
        if self.time_horizon is not None and not (
            math.isfinite(self.time_horizon) and self.time_horizon > 0
        ):
            problems.append("time_horizon must be a finite positive real")
        if not (0 <= int(self.seed) < 2**64):
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ValidationError(problems)
        return self


@dataclass
class Trajectory:
    """Result of a run: event log, final state, extinction marker."""

    events: EventLog
    final_state: SystemState
    extinct_at: float | None
    sup_size: int
    n_iters: int
    seed: int
    replica: int
    sample_times: np.ndarray | None = None
    sample_sizes: np.ndarray | None = None


class Simulation:
    """Segmentable run: advance in chunks, inspect state between chunks.

    Stopping at a time horizon discards the waiting-time draw that overshot
    it; by memorylessness of the exponential clock, resuming from the horizon
    with a fresh draw leaves the law of the process unchanged.
    """

    def __init__(self, config: RunConfig, replica: int = 0):
        config = config.validated()
        if config.geometry.d != 2:
            raise ValidationError("the batch engines support d == 2 only; use step() for other d")
        self.config = config
        self.replica = replica
        self.model = Model.build(config.params, config.geometry)
        self.rng = rng_for(config.seed, replica)
        side = config.geometry.side
        if config.init_positions is not None:
            init = torus_wrap(np.asarray(config.init_positions, dtype=np.float64), config.geometry)
            n0 = init.shape[0]
        else:
            n0 = int(config.n0)
            init = self.rng.random((n0, 2)) * side
        cap = max(16, n0)
        self._pos = np.empty((cap, 2), dtype=np.float64)
        self._ids = np.empty(cap, dtype=np.int64)
        self._pos[:n0] = init
        self._ids[:n0] = np.arange(n0)
        self._n = n0
        self._next_id = n0
        self.initial_positions = init.copy()
        self.time = 0.0
        self.beta = config.params.beta0
        self.k = 0
        self.sup_size = n0
        self.extinct_at: float | None = None

    @property
    def size(self) -> int:
        return self._n

    @property
    def extinct(self) -> bool:
        return self.extinct_at is not None

    def advance(self, max_events: int, horizon: float | None = None,
                record: bool = True, sample_times=None, sample_out=None,
                sample_pos: int = 0) -> dict | None:
        """Run up to ``max_events`` candidate events (or to ``horizon``).

        Returns the raw log segment (dict of arrays) when recording.
        """
        if record and int(max_events) > 20_000_000:
            raise ValidationError(
                "recording more than 2e7 events in one segment is not supported; "
                "chunk the run or pass record=False"
            )
        p = self.config.params
        if sample_times is not None:
            sample_times = np.ascontiguousarray(sample_times, dtype=np.float64)
            if sample_out is None:
                sample_out = np.zeros(len(sample_times), dtype=np.int64)
        res = engine.simulate(
            self._pos, self._ids, self._n, self._next_id, self.time, self.beta,
            p.alpha, p.beta_increment, p.A_f, p.a_f, p.sigma, p.gamma1, p.gamma2,
            self.config.geometry.side,
            int(max_events), math.inf if horizon is None else float(horizon),
            self.rng, bool(record), bool(self.config.record_rejections), self.k,
            sample_times, sample_out, int(sample_pos),
        )
        self._pos = res["pos"]
        self._ids = res["ids"]
        self._n = res["n"]
        self._next_id = res["next_id"]
        self.time = res["time"]
        self.beta = res["beta"]
        self.k += res["n_iters"]
        self.sup_size = max(self.sup_size, res["sup_size"])
        if not math.isnan(res["extinct_at"]):
            self.extinct_at = float(res["extinct_at"])
        self._last_sample_pos = res["sample_pos"]
        self._last_sample_out = sample_out
        return res["log"]

    @property
    def state(self) -> SystemState:
        """Materialize the current state (with spatial index) for observables."""
        return SystemState.from_positions(
            self._pos[: self._n], geometry=self.config.geometry,
            cell_side=self.config.params.a_f, time=self.time,
            beta_current=self.beta, ids=self._ids[: self._n],
            affinity=self.model.kernels.affinity,
        )


def run(config: RunConfig, replica: int = 0, record: bool = True,
        sample_times=None) -> Trajectory:
    """Execute the scheme until ``max_events``, the horizon, or extinction."""
    sim = Simulation(config, replica)
    sample_out = None
    if sample_times is not None:
        sample_times = np.ascontiguousarray(sample_times, dtype=np.float64)
        sample_out = np.zeros(len(sample_times), dtype=np.int64)
    log = sim.advance(
        max_events=config.max_events, horizon=config.time_horizon,
        record=record, sample_times=sample_times, sample_out=sample_out,
    )
    events = EventLog.concat([log]) if record else EventLog()
    return Trajectory(
        events=events, final_state=sim.state, extinct_at=sim.extinct_at,
        sup_size=sim.sup_size, n_iters=sim.k, seed=config.seed, replica=replica,
        sample_times=sample_times, sample_sizes=sample_out,
    )


def extinction_time(traj: Trajectory) -> float | None:
    """Time of the first recorded event that empties the system, if any."""
    sizes = traj.events.sizes
    if len(sizes):
        hits = np.flatnonzero(sizes == 0)
        if len(hits):
            return float(traj.events.times[hits[0]])
        return traj.extinct_at  # horizon segments may not include the record
    return traj.extinct_at


# -- single-step reference implementation -----------------------------------


def global_rate(state: SystemState, params: Params) -> float:
    """Total candidate-event rate ``(alpha + A_f + beta) * N``."""
    return (params.alpha + params.A_f + state.beta_current) * state.size


def draw_waiting_time(h: float, rng: np.random.Generator) -> float:
    """Exponential waiting time with rate ``h``; a zero rate means extinction."""
    if h <= 0.0:
        raise SystemHalted("global rate is zero: the system is extinct")
    return rng.standard_exponential() / h


def choose_event_kind(state: SystemState, rng: np.random.Generator, params: Params) -> str:
    """Pick the candidate kind; the size cancels in every probability."""
    if state.size < 1:
        raise EmptySystemError("no particles")
    total = params.alpha + params.A_f + state.beta_current
    u = rng.random()
    p_inv = params.alpha / total
    p_aff = params.A_f / total
    if u < p_inv:
        return "invitation"
    if u < p_inv + p_aff:
        return "affinity"
    return "withdrawal"


def step(state: SystemState, model: Model, rng: np.random.Generator) -> EventRecord:
    """One candidate event applied to ``state`` (reference path, any d).

    Consumes the random stream exactly like the batch engines, so a loop of
    ``step`` replays an engine run event for event.
    """
    n = state.size
    if n == 0:
        raise EmptySystemError("cannot step an empty system")
    p = model.params
    kernels = model.kernels
    beta = state.beta_current
    total = p.alpha + p.A_f + beta
    state.time += rng.standard_exponential() / (total * n)

    u_kind = rng.random()
    p_inv = p.alpha / total
    p_aff = p.A_f / total
    kind = 0 if u_kind < p_inv else (1 if u_kind < p_inv + p_aff else 2)

    particle = state.uniform_particle(rng)
    accepted = False
    new_pos = None
    removed_id = None

    if kind == 0:
        z = kernels.invitation.sample_offset(rng)
        u_acc = rng.random()
        if u_acc <= kernels.invitation.accept_prob(particle.pos, z):
            accepted = True
            target = np.array(
                [_wrap_scalar(particle.pos[a] + z[a], model.geometry.side)
                 for a in range(model.geometry.d)]
            )
            state.insert(target)
            new_pos = tuple(float(c) for c in target)
    elif kind == 1:
        y = kernels.site.sample_site(rng)
        u_acc = rng.random()
        aff_val = kernels.affinity.value(particle.pos, y)
        p_acc = aff_val / (p.A_f * p.gamma2)
        if p_acc > 0.0 and u_acc <= p_acc:
            accepted = True
            state.insert(y)
            new_pos = tuple(float(c) for c in y)
    else:
        accepted = True
        state.remove(particle.id)
        removed_id = particle.id

    state.beta_current = beta + p.beta_increment
    state.events_seen += 1
    return EventRecord(
        k=state.events_seen, time=state.time, kind=KIND_NAMES[kind],
        accepted=accepted, actor_id=particle.id, new_pos=new_pos,
        removed_id=removed_id, size_after=state.size,
    )


def _wrap_scalar(v: float, side: float) -> float:
    r = math.fmod(float(v), side)
    if r < 0.0:
        r += side
    if r >= side:
        r -= side
    return r
