# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot loops. Must stay operation-for-operation identical to _pykernel.py."""
from libc.math cimport sqrt

import numpy as np

cdef long long OVERFLOW_LIMIT = 1LL << 60

# oracle codes follow policy.ORACLE_KINDS
cdef enum:
    EXACT = 0
    UNIFORM = 1
    NOISY_ORACLE = 2
    GREEDY = 3
    NOISY_GREEDY = 4


cdef inline long long _argmax(const unsigned char[:, ::1] sched, double[::1] w,
                              Py_ssize_t m_count, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t m, l
    cdef long long best = 0
    cdef double best_v = 0.0
    cdef double v
    for m in range(m_count):
        v = 0.0
        for l in range(n):
            if sched[m, l]:
                v += w[l]
        if m == 0 or v > best_v:
            best_v = v
            best = m
    return best


cdef inline long long _mask_index(const long long[::1] masks, long long mask) noexcept nogil:
    cdef long long lo = 0
    cdef long long hi = masks.shape[0] - 1
    cdef long long mid
    while lo < hi:
        mid = (lo + hi) // 2
        if masks[mid] < mask:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline long long _greedy(double[::1] w, const long long[:, ::1] edges,
                              const long long[::1] masks, unsigned char[::1] busy,
                              long long[::1] order, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, l
    cdef long long key, u, v
    cdef long long mask = 0
    for i in range(busy.shape[0]):
        busy[i] = 0
    # insertion sort: heavier first, lower index first on ties
    for i in range(n):
        key = i
        j = i - 1
        while j >= 0 and (w[order[j]] < w[key] or (w[order[j]] == w[key] and order[j] > key)):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key
    for i in range(n):
        l = order[i]
        if w[l] <= 0.0:
            break
        u = edges[l, 0]
        v = edges[l, 1]
        if busy[u] or busy[v]:
            continue
        busy[u] = 1
        busy[v] = 1
        mask |= 1LL << (n - 1 - l)
    return _mask_index(masks, mask)


cdef inline long long _candidate(int kind, double delta, double u1, double u2,
                                 const unsigned char[:, ::1] sched, double[::1] w,
                                 const long long[:, ::1] edges, const long long[::1] masks,
                                 unsigned char[::1] busy, long long[::1] order,
                                 Py_ssize_t m_count, Py_ssize_t n) noexcept nogil:
    cdef long long pick
    if kind == UNIFORM or ((kind == NOISY_ORACLE or kind == NOISY_GREEDY) and not u1 < delta):
        pick = <long long>(u2 * m_count)
        if pick > m_count - 1:
            pick = m_count - 1
        return pick
    if kind == EXACT or kind == NOISY_ORACLE:
        return _argmax(sched, w, m_count, n)
    return _greedy(w, edges, masks, busy, order, n)


cdef inline double _value(const unsigned char[:, ::1] sched, double[::1] w,
                          long long m, Py_ssize_t n) noexcept nogil:
    cdef double v = 0.0
    cdef Py_ssize_t l
    for l in range(n):
        if sched[m, l]:
            v += w[l]
    return v


cdef inline double _update_prob(double phi, double rho) noexcept nogil:
    if phi >= rho:
        return 1.0
    if phi <= -rho:
        return 0.0
    if phi >= 0.0:
        return 0.5 + phi / (2.0 * rho)
    return 1.0 - (0.5 + -phi / (2.0 * rho))


def simulate_chunk(const unsigned char[:, ::1] sched, const long long[::1] masks,
                   const long long[:, ::1] edges, long long n_nodes,
                   const double[::1] good, const long long[::1] cap,
                   int chan_kind, double r,
                   int arr_kind, const double[::1] bern_thr, long long batch,
                   const double[:, ::1] pois_table,
                   int oracle_kind, double delta, double alpha, double rho,
                   const double[:, ::1] U,
                   long long[::1] X, unsigned char[::1] s, long long[::1] prev,
                   long long t0, long long warm_start,
                   long long[::1] total_q, int[::1] sched_out, int[::1] cand_out,
                   double[::1] phi_out, signed char[::1] branch_out,
                   double[::1] sum_x, long long[::1] sum_arr, long long[::1] sum_served,
                   long long[::1] sum_waste,
                   long long[:, ::1] x_trace, unsigned char[:, ::1] s_trace):
    """Advance the full system over U.shape[0] slots. Returns 0, or 1 on queue overflow."""
    cdef Py_ssize_t n = sched.shape[1]
    cdef Py_ssize_t m_count = sched.shape[0]
    cdef Py_ssize_t steps = U.shape[0]
    cdef Py_ssize_t a_cols = pois_table.shape[1]
    cdef bint trace = x_trace.shape[0] > 0
    cdef Py_ssize_t k, l, j
    cdef long long t, cand, chosen, total, a, served, d
    cdef double u, target, v_cand, v_prev, norm, xf, phi, fval
    cdef signed char branch
    cdef int status = 0
    w_arr = np.zeros(n, dtype=np.float64)
    busy_arr = np.zeros(max(n_nodes, 1), dtype=np.uint8)
    order_arr = np.zeros(n, dtype=np.int64)
    arr_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] w = w_arr
    cdef unsigned char[::1] busy = busy_arr
    cdef long long[::1] order = order_arr
    cdef long long[::1] arrivals = arr_arr

    with nogil:
        for k in range(steps):
            t = t0 + k
            # channel
            if t == 0:
                if chan_kind == 0:
                    for l in range(n):
                        s[l] = 1 if U[k, l] < 0.5 else 0
            elif chan_kind == 0:
                for l in range(n):
                    if U[k, l] < r:
                        s[l] = 1 - s[l]
            # arrivals
            for l in range(n):
                u = U[k, n + l]
                if arr_kind == 0:
                    arrivals[l] = batch if u < bern_thr[l] else 0
                else:
                    target = u * pois_table[l, a_cols - 1]
                    j = 0
                    while j < a_cols - 1 and pois_table[l, j] <= target:
                        j += 1
                    arrivals[l] = j
            # policy on X(t), s(t)
            total = 0
            norm = 0.0
            for l in range(n):
                xf = <double>X[l]
                norm += xf * xf
                w[l] = xf * good[l] if s[l] else 0.0
                total += X[l]
            norm = sqrt(norm)
            cand = _candidate(oracle_kind, delta, U[k, 2 * n], U[k, 2 * n + 1],
                              sched, w, edges, masks, busy, order, m_count, n)
            v_cand = _value(sched, w, cand, n)
            if prev[0] < 0:
                chosen = cand
                phi = 0.0
                branch = 2
            else:
                v_prev = _value(sched, w, prev[0], n)
                if norm == 0.0:
                    phi = 0.0
                else:
                    phi = (v_cand - v_prev) / ((v_cand if v_cand > v_prev else v_prev) + alpha * norm)
                fval = _update_prob(phi, rho)
                if U[k, 2 * n + 2] < fval:
                    chosen = cand
                    branch = 0
                else:
                    chosen = prev[0]
                    branch = 1
            prev[0] = chosen
            total_q[k] = total
            sched_out[k] = <int>chosen
            cand_out[k] = <int>cand
            phi_out[k] = phi
            branch_out[k] = branch
            if trace:
                for l in range(n):
                    x_trace[k, l] = X[l]
                    s_trace[k, l] = s[l]
            if t >= warm_start:
                for l in range(n):
                    sum_x[l] += <double>X[l]
            # service then arrivals
            for l in range(n):
                d = cap[l] if (sched[chosen, l] and s[l]) else 0
                served = X[l] if X[l] < d else d
                X[l] = X[l] - served + arrivals[l]
                if t >= warm_start:
                    sum_arr[l] += arrivals[l]
                    sum_served[l] += served
                    sum_waste[l] += d - served
                if X[l] > OVERFLOW_LIMIT:
                    status = 1
            if status:
                break
    return status


def rollout_batch(const unsigned char[:, ::1] sched, const long long[::1] masks,
                  const long long[:, ::1] edges, long long n_nodes,
                  const double[::1] good, int chan_kind, double r,
                  int oracle_kind, double delta, double alpha, double rho,
                  const double[::1] X, const unsigned char[:, ::1] s0, const long long[::1] i0,
                  long long burn_in, long long horizon,
                  const double[:, :, ::1] U,
                  double[::1] phi_sums, double[::1] psi_sums):
    """Frozen-queue rollouts: the policy keeps using X while channels evolve.

    Rollout j starts from (s0[j], i0[j]), runs ``burn_in`` unrecorded steps,
    then records ``horizon`` slots. phi_sums[j] = sum of X.D over the
    recorded slots; psi_sums[j] = sum over the first horizon-1 of them of
    X.D(s_m, I_m) - (1 - rho) X.D(s_{m+1}, I_m).
    """
    cdef Py_ssize_t n = sched.shape[1]
    cdef Py_ssize_t m_count = sched.shape[0]
    cdef Py_ssize_t reps = U.shape[0]
    cdef Py_ssize_t total_steps = burn_in + horizon
    cdef Py_ssize_t j, m, l
    cdef long long cur, cand
    cdef double norm, v_cand, v_prev, phi, fval, v_cur, v_held, acc_phi, acc_psi
    cdef double one_minus_rho = 1.0 - rho
    w_arr = np.zeros(n, dtype=np.float64)
    busy_arr = np.zeros(max(n_nodes, 1), dtype=np.uint8)
    order_arr = np.zeros(n, dtype=np.int64)
    s_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] w = w_arr
    cdef unsigned char[::1] busy = busy_arr
    cdef long long[::1] order = order_arr
    cdef unsigned char[::1] s = s_arr

    norm = 0.0
    for l in range(n):
        norm += X[l] * X[l]
    norm = sqrt(norm)

    with nogil:
        for j in range(reps):
            for l in range(n):
                s[l] = s0[j, l]
                w[l] = X[l] * good[l] if s[l] else 0.0
            cur = i0[j]
            acc_phi = 0.0
            acc_psi = 0.0
            v_cur = _value(sched, w, cur, n)
            for m in range(total_steps):
                if m > 0:
                    if chan_kind == 0:
                        for l in range(n):
                            if U[j, m - 1, l] < r:
                                s[l] = 1 - s[l]
                    for l in range(n):
                        w[l] = X[l] * good[l] if s[l] else 0.0
                    # previous schedule under the new channel state
                    v_held = _value(sched, w, cur, n)
                    if m > burn_in:
                        acc_psi += v_cur - one_minus_rho * v_held
                    cand = _candidate(oracle_kind, delta, U[j, m - 1, n], U[j, m - 1, n + 1],
                                      sched, w, edges, masks, busy, order, m_count, n)
                    v_cand = _value(sched, w, cand, n)
                    v_prev = v_held
                    if norm == 0.0:
                        phi = 0.0
                    else:
                        phi = (v_cand - v_prev) / ((v_cand if v_cand > v_prev else v_prev) + alpha * norm)
                    fval = _update_prob(phi, rho)
                    if U[j, m - 1, n + 2] < fval:
                        cur = cand
                        v_cur = v_cand
                    else:
                        v_cur = v_held
                if m >= burn_in:
                    acc_phi += v_cur
            phi_sums[j] = acc_phi
            psi_sums[j] = acc_psi
