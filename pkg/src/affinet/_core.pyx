# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batch event loop.

Mirrors ``_engine_py.simulate`` statement for statement and draws from the
same numpy bit-generator C primitives (standard uniform / exponential /
normal), so both backends consume identical random streams and produce
identical event logs for a given seed.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport fabs, fmod, sqrt, NAN
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_normal,
    random_standard_uniform,
)

cnp.import_array()

BACKEND = "cython"


cdef inline double _wrap1(double v, double side) nogil:
    cdef double r = fmod(v, side)
    if r < 0.0:
        r += side
    if r >= side:
        r -= side
    return r


def simulate(object pos_in, object ids_in, Py_ssize_t n, long long next_id,
             double t, double beta,
             double alpha, double beta_eps, double A_f, double a_f,
             double sigma, double gamma1, double gamma2, double side,
             long long max_events, double horizon, object rng,
             bint record, bint record_rejections, long long k_start,
             object sample_times, object sample_out, Py_ssize_t sample_pos):
    """See ``_engine_py.simulate``; identical contract and random stream."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pos = pos_in
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ids = ids_in

    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef double inv_accept = 1.0 / gamma1
    cdef Py_ssize_t n_samples = 0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stimes
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sout
    if sample_times is not None:
        stimes = sample_times
        sout = sample_out
        n_samples = stimes.shape[0]

    cdef cnp.ndarray[cnp.int64_t, ndim=1] rec_k
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rec_time
    cdef cnp.ndarray[cnp.int8_t, ndim=1] rec_kind
    cdef cnp.ndarray[cnp.int8_t, ndim=1] rec_acc
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rec_actor
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rec_newx
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rec_newy
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rec_removed
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rec_size
    if record:
        rec_k = np.empty(max_events, dtype=np.int64)
        rec_time = np.empty(max_events, dtype=np.float64)
        rec_kind = np.empty(max_events, dtype=np.int8)
        rec_acc = np.empty(max_events, dtype=np.int8)
        rec_actor = np.empty(max_events, dtype=np.int64)
        rec_newx = np.empty(max_events, dtype=np.float64)
        rec_newy = np.empty(max_events, dtype=np.float64)
        rec_removed = np.empty(max_events, dtype=np.int64)
        rec_size = np.empty(max_events, dtype=np.int64)

    cdef Py_ssize_t n_rec = 0
    cdef Py_ssize_t sup_size = n
    cdef double extinct_at = NAN
    cdef long long n_iters = 0

    cdef double total, h, w, t_next, u_kind, p_inv, p_aff, u_vertex, u_acc
    cdef double zx, zy, yx, yy, dx, dy, dist, aff, p_acc, new_x, new_y
    cdef Py_ssize_t i, last, cap
    cdef int kind
    cdef bint accepted
    cdef long long actor, removed
    cdef cnp.ndarray[cnp.float64_t, ndim=2] new_pos_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] new_ids_arr

    with rng.bit_generator.lock:
        while n_iters < max_events:
            if n == 0:
                break
            total = alpha + A_f + beta
            h = total * n
            w = random_standard_exponential(bg) / h
            t_next = t + w
            if t_next > horizon:
                while sample_pos < n_samples and stimes[sample_pos] <= horizon:
                    sout[sample_pos] = n
                    sample_pos += 1
                t = horizon
                break
            while sample_pos < n_samples and stimes[sample_pos] < t_next:
                sout[sample_pos] = n
                sample_pos += 1
            t = t_next
            n_iters += 1

            u_kind = random_standard_uniform(bg)
            p_inv = alpha / total
            p_aff = A_f / total
            if u_kind < p_inv:
                kind = 0
            elif u_kind < p_inv + p_aff:
                kind = 1
            else:
                kind = 2

            u_vertex = random_standard_uniform(bg)
            i = <Py_ssize_t>(u_vertex * n)
            if i == n:
                i = n - 1

            accepted = False
            new_x = NAN
            new_y = NAN
            removed = -1
            actor = ids[i]

            if kind == 0:
                zx = random_standard_normal(bg) * sigma
                zy = random_standard_normal(bg) * sigma
                u_acc = random_standard_uniform(bg)
                if u_acc <= inv_accept:
                    accepted = True
                    new_x = _wrap1(pos[i, 0] + zx, side)
                    new_y = _wrap1(pos[i, 1] + zy, side)
            elif kind == 1:
                yx = random_standard_uniform(bg) * side
                yy = random_standard_uniform(bg) * side
                u_acc = random_standard_uniform(bg)
                dx = fabs(pos[i, 0] - yx)
                if dx > 0.5 * side:
                    dx = side - dx
                dy = fabs(pos[i, 1] - yy)
                if dy > 0.5 * side:
                    dy = side - dy
                dist = sqrt(dx * dx + dy * dy)
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
                        new_pos_arr = np.empty((cap, 2), dtype=np.float64)
                        new_ids_arr = np.empty(cap, dtype=np.int64)
                        new_pos_arr[:n] = pos[:n]
                        new_ids_arr[:n] = ids[:n]
                        pos = new_pos_arr
                        ids = new_ids_arr
                    pos[n, 0] = new_x
                    pos[n, 1] = new_y
                    ids[n] = next_id
                    next_id += 1
                    n += 1
                    if n > sup_size:
                        sup_size = n

            beta += beta_eps

            if record and (accepted or record_rejections):
                rec_k[n_rec] = k_start + n_iters
                rec_time[n_rec] = t
                rec_kind[n_rec] = kind
                rec_acc[n_rec] = accepted
                rec_actor[n_rec] = actor
                rec_newx[n_rec] = new_x
                rec_newy[n_rec] = new_y
                rec_removed[n_rec] = removed
                rec_size[n_rec] = n
                n_rec += 1

            if n == 0:
                extinct_at = t
                break

    if n == 0:
        while sample_pos < n_samples:
            sout[sample_pos] = 0
            sample_pos += 1

    log = None
    if record:
        log = {
            "k": rec_k[:n_rec],
            "time": rec_time[:n_rec],
            "kind": rec_kind[:n_rec],
            "accepted": rec_acc[:n_rec],
            "actor": rec_actor[:n_rec],
            "new_x": rec_newx[:n_rec],
            "new_y": rec_newy[:n_rec],
            "removed": rec_removed[:n_rec],
            "size": rec_size[:n_rec],
        }

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
