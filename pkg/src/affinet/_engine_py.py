"""Pure-Python batch event loop; fallback for the compiled core.

Both backends implement the identical scheme with the identical random draw
order, calling the same underlying numpy bit-stream primitives, so a run is
bit-for-bit reproducible regardless of which backend executes it:

  per candidate event k (iteration):
    1. waiting time  Exp(H) with H = (alpha + A_f + beta) * N
    2. one uniform   -> event kind, thresholds ordered
                        (invitation, affinity, withdrawal)
    3. one uniform   -> uniformly chosen vertex index
    4. kernel draw   -> invitation: two scaled normals (offset);
                        affinity: two uniforms (site);  withdrawal: none
    5. one uniform   -> thinning acceptance (withdrawal needs none: its
                        acceptance ratio is identically 1)
  afterwards beta increases by beta_increment (accepted or not).

Only d == 2 is supported here; the general-d reference path is
``simulator.step``.
"""

from __future__ import annotations

import math

import numpy as np

RECORD_DTYPES = (
    ("k", np.int64),
    ("time", np.float64),
    ("kind", np.int8),
    ("accepted", np.int8),
    ("actor", np.int64),
    ("new_x", np.float64),
    ("new_y", np.float64),
    ("removed", np.int64),
    ("size", np.int64),
)

BACKEND = "python"


def _wrap1(v: float, side: float) -> float:
    r = math.fmod(v, side)
    if r < 0.0:
        r += side
    if r >= side:
        r -= side
    return r


def simulate(pos, ids, n, next_id, t, beta,
             alpha, beta_eps, A_f, a_f, sigma, gamma1, gamma2, side,
             max_events, horizon, rng,
             record, record_rejections, k_start,
             sample_times, sample_out, sample_pos):
    """Advance the system by up to ``max_events`` candidate events.

    ``pos``/``ids`` are capacity buffers holding ``n`` live rows; they are
    mutated in place and reallocated copies are returned when capacity grows.
    ``sample_times`` (sorted) receive the right-continuous size into
    ``sample_out`` starting at index ``sample_pos``.  Returns a dict with the
    final buffers, counters, optional trimmed log arrays, and the extinction
    time (nan if the system is still alive).
    """
    inv_accept = 1.0 / gamma1
    n_samples = 0 if sample_times is None else len(sample_times)

    if record:
        rec = {name: np.empty(max_events, dtype=dt) for name, dt in RECORD_DTYPES}
    n_rec = 0
    sup_size = n
    extinct_at = math.nan
    n_iters = 0

    while n_iters < max_events:
        if n == 0:
            break
        total = alpha + A_f + beta
        h = total * n
        w = rng.standard_exponential() / h
        t_next = t + w
        if t_next > horizon:
            while sample_pos < n_samples and sample_times[sample_pos] <= horizon:
                sample_out[sample_pos] = n
                sample_pos += 1
            t = horizon
            break
        while sample_pos < n_samples and sample_times[sample_pos] < t_next:
            sample_out[sample_pos] = n
            sample_pos += 1
        t = t_next
        n_iters += 1

        u_kind = rng.random()
        p_inv = alpha / total
        p_aff = A_f / total
        kind = 0 if u_kind < p_inv else (1 if u_kind < p_inv + p_aff else 2)

        u_vertex = rng.random()
        i = int(u_vertex * n)
        if i == n:
            i = n - 1

        accepted = False
        new_x = math.nan
        new_y = math.nan
        removed = -1
        actor = int(ids[i])

        if kind == 0:
            zx = rng.standard_normal() * sigma
            zy = rng.standard_normal() * sigma
            u_acc = rng.random()
            if u_acc <= inv_accept:
                accepted = True
                new_x = _wrap1(pos[i, 0] + zx, side)
                new_y = _wrap1(pos[i, 1] + zy, side)
        elif kind == 1:
            yx = rng.random() * side
            yy = rng.random() * side
            u_acc = rng.random()
            dx = abs(pos[i, 0] - yx)
            if dx > 0.5 * side:
                dx = side - dx
            dy = abs(pos[i, 1] - yy)
            if dy > 0.5 * side:
                dy = side - dy
            dist = math.sqrt(dx * dx + dy * dy)
            if pos[i, 0] == yx and pos[i, 1] == yy:
                aff = 0.0
            elif dist >= a_f:
                aff = 0.0
            else:
                aff = A_f * (1.0 - dist / a_f)
            p_acc = aff / (A_f * gamma2)
            if p_acc > 0.0 and u_acc <= p_acc:
                accepted = True
                new_x = yx
                new_y = yy
        else:
            accepted = True
            removed = actor

        if accepted:
            if kind == 2:
                last = n - 1
                pos[i, 0] = pos[last, 0]
                pos[i, 1] = pos[last, 1]
                ids[i] = ids[last]
                n = last
            else:
                if n == pos.shape[0]:
                    cap = 2 * pos.shape[0]
                    new_pos = np.empty((cap, 2), dtype=np.float64)
                    new_ids = np.empty(cap, dtype=np.int64)
                    new_pos[:n] = pos[:n]
                    new_ids[:n] = ids[:n]
                    pos, ids = new_pos, new_ids
                pos[n, 0] = new_x
                pos[n, 1] = new_y
                ids[n] = next_id
                next_id += 1
                n += 1
                if n > sup_size:
                    sup_size = n

        beta += beta_eps

        if record and (accepted or record_rejections):
            rec["k"][n_rec] = k_start + n_iters
            rec["time"][n_rec] = t
            rec["kind"][n_rec] = kind
            rec["accepted"][n_rec] = accepted
            rec["actor"][n_rec] = actor
            rec["new_x"][n_rec] = new_x
            rec["new_y"][n_rec] = new_y
            rec["removed"][n_rec] = removed
            rec["size"][n_rec] = n
            n_rec += 1

        if n == 0:
            extinct_at = t
            break

    if n == 0 and sample_pos < n_samples:
        # an extinct system stays empty: flush the remaining sample points
        while sample_pos < n_samples:
            sample_out[sample_pos] = 0
            sample_pos += 1

    log = None
    if record:
        log = {name: rec[name][:n_rec] for name, _ in RECORD_DTYPES}

    return {
        "pos": pos,
        "ids": ids,
        "n": n,
        "next_id": next_id,
        "time": t,
        "beta": beta,
        "n_iters": n_iters,
        "extinct_at": extinct_at,
        "sup_size": sup_size,
        "log": log,
        "sample_pos": sample_pos,
    }
