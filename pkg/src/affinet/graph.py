"""Geometric-graph snapshots of a particle state and basic network metrics.

Two particles are linked iff their torus distance is at most the radius
(closed-ball convention, so pairs exactly at the threshold are linked even
though their affinity weight there is zero).  Loops and parallel edges do not
occur; coincident particles with distinct ids are linked.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .state import GridIndex, SystemState


@dataclass(frozen=True)
class GraphSnapshot:
    """Immutable snapshot: vertex list, sorted edge list, radius used."""

    vertices: tuple  # ((id, (x, y, ...)), ...)
    edges: tuple  # ((i, j), ...) with i < j, lexicographically sorted
    radius: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "vertices": [{"id": vid, "pos": list(pos)} for vid, pos in self.vertices],
            "edges": [list(e) for e in self.edges],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fobj:
            json.dump(self.to_dict(), fobj, indent=1)

    def edges_to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fobj:
            fobj.write("i,j\n")
            for i, j in self.edges:
                fobj.write(f"{i},{j}\n")


def snapshot(state: SystemState, radius: float | None = None) -> GraphSnapshot:
    """Exact edge set via grid-cell neighborhood scans; each pair tested once.

    Uses the state's index when the radius fits in its cells, otherwise builds
    a temporary index with cells of at least ``radius``.
    """
    if radius is None:
        radius = state.index.cell_side
    if radius <= state.index.cell_side * (1 + 1e-12):
        index = state.index
    else:
        index = GridIndex(state.geometry, radius)
        for i in range(state.size):
            index.add(int(state.ids[i]), state.positions[i])

    geometry = state.geometry
    side = geometry.side
    n_cells = index.n_cells
    d = geometry.d

    # slot lookup per id for dense position access
    slot_of = {int(state.ids[i]): i for i in range(state.size)}
    pos = state.positions

    def ids_sorted(bucket):
        return sorted(bucket)

    edges = []

    def pair_scan(ids_a, ids_b):
        if not ids_a or not ids_b:
            return
        pa = pos[[slot_of[i] for i in ids_a]]
        pb = pos[[slot_of[j] for j in ids_b]]
        delta = np.abs(pa[:, None, :] - pb[None, :, :])
        delta = np.minimum(delta, side - delta)
        dist2 = np.sum(delta * delta, axis=-1)
        hit_a, hit_b = np.nonzero(dist2 <= radius * radius)
        for a, b in zip(hit_a, hit_b):
            i, j = ids_a[a], ids_b[b]
            if i < j:
                edges.append((i, j))
            elif j < i:
                edges.append((j, i))

    # positive half of the 3^d neighborhood, deduplicated for tiny grids
    half = [off for off in itertools.product((-1, 0, 1), repeat=d) if off > (0,) * d]
    seen_cell_pairs = set()
    for cell, bucket in index.buckets.items():
        ids_here = ids_sorted(bucket)
        # within-cell pairs
        pair_scan(ids_here, ids_here)
        for off in half:
            other = tuple((c + o) % n_cells for c, o in zip(cell, off))
            if other == cell:
                continue
            key = (cell, other) if cell < other else (other, cell)
            if key in seen_cell_pairs:
                continue
            seen_cell_pairs.add(key)
            other_bucket = index.buckets.get(other)
            if other_bucket:
                pair_scan(ids_here, ids_sorted(other_bucket))

    vertices = tuple(
        (int(state.ids[i]), tuple(float(c) for c in pos[i])) for i in np.argsort(state.ids[: state.size])
    )
    return GraphSnapshot(vertices=vertices, edges=tuple(sorted(set(edges))), radius=float(radius))


def degree_distribution(g: GraphSnapshot) -> dict:
    """Histogram degree -> vertex count; sums to the vertex count."""
    deg = {vid: 0 for vid, _ in g.vertices}
    for i, j in g.edges:
        deg[i] += 1
        deg[j] += 1
    hist: dict[int, int] = {}
    for v in deg.values():
        hist[v] = hist.get(v, 0) + 1
    return hist


def connected_components(g: GraphSnapshot) -> list:
    """Partition of the vertex ids into maximal connected sets (union-find)."""
    parent = {vid: vid for vid, _ in g.vertices}

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:  # path compression
            parent[x], x = root, parent[x]
        return root

    for i, j in g.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            if ri < rj:
                parent[rj] = ri
            else:
                parent[ri] = rj

    comps: dict[int, set] = {}
    for vid, _ in g.vertices:
        comps.setdefault(find(vid), set()).add(vid)
    return sorted(comps.values(), key=min)
