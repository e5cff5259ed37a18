"""Mutable particle collection backed by a uniform-grid spatial index.

The state is the finite point measure of the model: a multiset of positions
with stable integer ids.  Particles are stored densely (swap-remove) so that
uniform sampling and bulk reads are O(1)/O(N); the grid index keeps radius
queries local.  Cells have side ``>= a_f`` so a radius-``a_f`` query only ever
inspects the 3^d surrounding cells.
"""

from __future__ import annotations

import itertools

import numpy as np

from .domain import Geometry, torus_distance, torus_wrap
from .errors import EmptySystemError, MissingParticleError, UnsupportedRadiusError
from .kernels import LocalAffinity


class Particle:
    """Stable id plus current position; ids are never reused within a run."""

    __slots__ = ("id", "pos")

    def __init__(self, pid: int, pos: np.ndarray):
        self.id = pid
        self.pos = pos

    def __repr__(self):
        return f"Particle(id={self.id}, pos={self.pos.tolist()})"


class GridIndex:
    """Bucket map from integer cell coordinates to particle ids.

    ``n_cells`` per axis is the largest count whose cells are still at least
    ``cell_side`` wide, so the cells tile the torus exactly and a query of
    radius ``<= cell_side`` is covered by the 3^d neighborhood.
    """

    def __init__(self, geometry: Geometry, cell_side: float):
        self.geometry = geometry
        self.n_cells = max(1, int(geometry.side / cell_side + 1e-9))
        self.cell_side = geometry.side / self.n_cells
        self.buckets: dict[tuple, set] = {}
        # All 3^d neighbor offsets, deduplicated modulo n_cells for tiny grids.
        offs = itertools.product((-1, 0, 1), repeat=geometry.d)
        self._neighbor_offsets = sorted({tuple(o % self.n_cells for o in off) for off in offs})

    def cell_of(self, pos) -> tuple:
        idx = (np.asarray(pos) / self.cell_side).astype(np.int64)
        idx = np.minimum(idx, self.n_cells - 1)
        return tuple(int(i) for i in idx)

    def add(self, pid: int, pos) -> None:
        self.buckets.setdefault(self.cell_of(pos), set()).add(pid)

    def discard(self, pid: int, pos) -> None:
        cell = self.cell_of(pos)
        bucket = self.buckets.get(cell)
        if bucket is None or pid not in bucket:
            raise MissingParticleError(pid)
        bucket.discard(pid)
        if not bucket:
            del self.buckets[cell]

    def candidates_near(self, pos):
        """Ids in the 3^d cells around ``pos`` (superset of any radius <= cell_side)."""
        base = self.cell_of(pos)
        n = self.n_cells
        for off in self._neighbor_offsets:
            cell = tuple((b + o) % n for b, o in zip(base, off))
            bucket = self.buckets.get(cell)
            if bucket:
                yield from bucket


class SystemState:
    """The particle system at one instant: positions, time, withdrawal rate.

    The index mirrors the particle collection after every mutation.  A state
    is exclusively owned by one simulation worker; observables take read-only
    looks at ``positions``.
    """

    def __init__(self, geometry: Geometry = Geometry(), cell_side: float = 0.1,
                 time: float = 0.0, beta_current: float = 1.0,
                 affinity: LocalAffinity | None = None):
        self.geometry = geometry
        self.time = time
        self.beta_current = beta_current
        self.affinity = affinity
        self.index = GridIndex(geometry, cell_side)
        self.events_seen = 0
        self._n = 0
        self._next_id = 0
        cap = 16
        self._pos = np.empty((cap, geometry.d), dtype=np.float64)
        self._ids = np.empty(cap, dtype=np.int64)
        self._slot_of: dict[int, int] = {}

    # -- construction ------------------------------------------------------

    @classmethod
    def uniform(cls, n0: int, rng: np.random.Generator, geometry: Geometry = Geometry(),
                cell_side: float = 0.1, beta_current: float = 1.0,
                affinity: LocalAffinity | None = None) -> "SystemState":
        """Fresh state with ``n0`` particles drawn uniformly on the torus.

        Consumes exactly ``n0 * d`` uniforms from ``rng``, matching the batch
        engines' initialisation.
        """
        state = cls(geometry, cell_side, beta_current=beta_current, affinity=affinity)
        pos = rng.random((n0, geometry.d)) * geometry.side
        for row in pos:
            state.insert(row)
        return state

    @classmethod
    def from_positions(cls, positions, geometry: Geometry = Geometry(),
                       cell_side: float = 0.1, time: float = 0.0,
                       beta_current: float = 1.0, ids=None,
                       affinity: LocalAffinity | None = None) -> "SystemState":
        state = cls(geometry, cell_side, time=time, beta_current=beta_current, affinity=affinity)
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, geometry.d)
        if ids is None:
            for row in positions:
                state.insert(row)
        else:
            for row, pid in zip(positions, ids):
                state._insert_with_id(row, int(pid))
            state._next_id = int(max(ids, default=-1)) + 1
        return state

    # -- accessors ---------------------------------------------------------

    @property
    def size(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def positions(self) -> np.ndarray:
        """Dense (N, d) view of current positions; do not mutate."""
        return self._pos[: self._n]

    @property
    def ids(self) -> np.ndarray:
        return self._ids[: self._n]

    def position_of(self, pid: int) -> np.ndarray:
        try:
            slot = self._slot_of[pid]
        except KeyError:
            raise MissingParticleError(pid) from None
        return self._pos[slot]

    # -- mutation ----------------------------------------------------------

    def _grow(self) -> None:
        cap = self._pos.shape[0] * 2
        pos = np.empty((cap, self.geometry.d), dtype=np.float64)
        ids = np.empty(cap, dtype=np.int64)
        pos[: self._n] = self._pos[: self._n]
        ids[: self._n] = self._ids[: self._n]
        self._pos, self._ids = pos, ids

    def _insert_with_id(self, pos, pid: int) -> int:
        pos = torus_wrap(pos, self.geometry)
        if self._n == self._pos.shape[0]:
            self._grow()
        slot = self._n
        self._pos[slot] = pos
        self._ids[slot] = pid
        self._slot_of[pid] = slot
        self._n += 1
        self.index.add(pid, pos)
        return pid

    def insert(self, pos) -> int:
        """Add a particle; returns its fresh id."""
        pid = self._next_id
        self._next_id += 1
        return self._insert_with_id(pos, pid)

    def remove(self, pid: int) -> None:
        """Remove a particle by id (swap-remove keeps storage dense)."""
        try:
            slot = self._slot_of.pop(pid)
        except KeyError:
            raise MissingParticleError(pid) from None
        self.index.discard(pid, self._pos[slot])
        last = self._n - 1
        if slot != last:
            self._pos[slot] = self._pos[last]
            moved = int(self._ids[last])
            self._ids[slot] = moved
            self._slot_of[moved] = slot
        self._n = last

    # -- queries -----------------------------------------------------------

    def uniform_particle(self, rng: np.random.Generator) -> Particle:
        """Uniformly random particle; one uniform draw, matching the engines."""
        if self._n == 0:
            raise EmptySystemError("cannot draw a particle from an empty system")
        i = int(rng.random() * self._n)
        if i == self._n:  # guard against u*N rounding up
            i = self._n - 1
        return Particle(int(self._ids[i]), self._pos[i].copy())

    def neighbors_within(self, y, r: float) -> list:
        """Ids of all particles at torus distance <= r from ``y``."""
        if r > self.index.cell_side * (1 + 1e-12):
            raise UnsupportedRadiusError(
                f"radius {r} exceeds index cell side {self.index.cell_side}"
            )
        y = np.asarray(y, dtype=np.float64)
        out = []
        for pid in self.index.candidates_near(y):
            slot = self._slot_of[pid]
            if torus_distance(self._pos[slot], y, self.geometry) <= r:
                out.append(pid)
        return out

    def affinity_field(self, y, affinity: LocalAffinity | None = None) -> float:
        """Total affinity the current system exerts on a site ``y``."""
        aff = affinity if affinity is not None else self.affinity
        if aff is None:
            raise ValueError("no LocalAffinity attached to this state; pass one explicitly")
        total = 0.0
        y = np.asarray(y, dtype=np.float64)
        for pid in self.index.candidates_near(y):
            slot = self._slot_of[pid]
            total += aff.value(self._pos[slot], y)
        return total

    # -- export ------------------------------------------------------------

    def copy(self) -> "SystemState":
        dup = SystemState(self.geometry, self.index.cell_side, self.time,
                          self.beta_current, self.affinity)
        dup.events_seen = self.events_seen
        for slot in range(self._n):
            dup._insert_with_id(self._pos[slot], int(self._ids[slot]))
        dup._next_id = self._next_id
        return dup

    def snapshot_dict(self) -> dict:
        return {
            "time": self.time,
            "N": self._n,
            "beta_current": self.beta_current,
            "particles": [
                {"id": int(self._ids[i]), "pos": [float(c) for c in self._pos[i]]}
                for i in range(self._n)
            ],
        }
