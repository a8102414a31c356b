"""Pure-Python twin of the compiled slot loops in _kernel.pyx.

Same signatures, same operation order, bit-identical results. Used when the
extension is not built or when LMRSP_PURE_PYTHON=1.
"""
import math

OVERFLOW_LIMIT = 1 << 60

EXACT, UNIFORM, NOISY_ORACLE, GREEDY, NOISY_GREEDY = range(5)


def _argmax(rows, w, n):
    best = 0
    best_v = 0.0
    for m, row in enumerate(rows):
        v = 0.0
        for l in range(n):
            if row[l]:
                v += w[l]
        if m == 0 or v > best_v:
            best_v = v
            best = m
    return best


def _mask_index(masks, mask):
    lo, hi = 0, len(masks) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if masks[mid] < mask:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _greedy(w, edges, masks, n_nodes, n):
    busy = [0] * max(n_nodes, 1)
    order = sorted(range(n), key=lambda l: (-w[l], l))
    mask = 0
    for l in order:
        if w[l] <= 0.0:
            break
        u, v = edges[l]
        if busy[u] or busy[v]:
            continue
        busy[u] = busy[v] = 1
        mask |= 1 << (n - 1 - l)
    return _mask_index(masks, mask)


def _candidate(kind, delta, u1, u2, rows, w, edges, masks, n_nodes, n):
    m_count = len(rows)
    if kind == UNIFORM or (kind in (NOISY_ORACLE, NOISY_GREEDY) and not u1 < delta):
        return min(int(u2 * m_count), m_count - 1)
    if kind in (EXACT, NOISY_ORACLE):
        return _argmax(rows, w, n)
    return _greedy(w, edges, masks, n_nodes, n)


def _value(row, w, n):
    v = 0.0
    for l in range(n):
        if row[l]:
            v += w[l]
    return v


def _update_prob(phi, rho):
    if phi >= rho:
        return 1.0
    if phi <= -rho:
        return 0.0
    if phi >= 0.0:
        return 0.5 + phi / (2.0 * rho)
    return 1.0 - (0.5 + -phi / (2.0 * rho))


def simulate_chunk(sched, masks, edges, n_nodes, good, cap, chan_kind, r,
                   arr_kind, bern_thr, batch, pois_table,
                   oracle_kind, delta, alpha, rho, U,
                   X, s, prev, t0, warm_start,
                   total_q, sched_out, cand_out, phi_out, branch_out,
                   sum_x, sum_arr, sum_served, sum_waste, x_trace, s_trace):
    n = sched.shape[1]
    rows = sched.tolist()
    masks_l = masks.tolist()
    edges_l = edges.tolist()
    good_l = good.tolist()
    cap_l = cap.tolist()
    thr = bern_thr.tolist()
    table = pois_table.tolist()
    a_cols = pois_table.shape[1]
    xs = X.tolist()
    st = s.tolist()
    cur_prev = int(prev[0])
    trace = x_trace.shape[0] > 0
    sx = sum_x.tolist()
    sa = sum_arr.tolist()
    ss = sum_served.tolist()
    sw = sum_waste.tolist()
    status = 0
    arrivals = [0] * n
    for k, urow in enumerate(U.tolist()):
        t = t0 + k
        if t == 0:
            if chan_kind == 0:
                for l in range(n):
                    st[l] = 1 if urow[l] < 0.5 else 0
        elif chan_kind == 0:
            for l in range(n):
                if urow[l] < r:
                    st[l] = 1 - st[l]
        for l in range(n):
            u = urow[n + l]
            if arr_kind == 0:
                arrivals[l] = batch if u < thr[l] else 0
            else:
                tab = table[l]
                target = u * tab[a_cols - 1]
                j = 0
                while j < a_cols - 1 and tab[j] <= target:
                    j += 1
                arrivals[l] = j
        total = 0
        norm = 0.0
        w = [0.0] * n
        for l in range(n):
            xf = float(xs[l])
            norm += xf * xf
            w[l] = xf * good_l[l] if st[l] else 0.0
            total += xs[l]
        norm = math.sqrt(norm)
        cand = _candidate(oracle_kind, delta, urow[2 * n], urow[2 * n + 1],
                          rows, w, edges_l, masks_l, n_nodes, n)
        v_cand = _value(rows[cand], w, n)
        if cur_prev < 0:
            chosen = cand
            phi = 0.0
            branch = 2
        else:
            v_prev = _value(rows[cur_prev], w, n)
            if norm == 0.0:
                phi = 0.0
            else:
                phi = (v_cand - v_prev) / ((v_cand if v_cand > v_prev else v_prev) + alpha * norm)
            fval = _update_prob(phi, rho)
            if urow[2 * n + 2] < fval:
                chosen, branch = cand, 0
            else:
                chosen, branch = cur_prev, 1
        cur_prev = chosen
        total_q[k] = total
        sched_out[k] = chosen
        cand_out[k] = cand
        phi_out[k] = phi
        branch_out[k] = branch
        if trace:
            x_trace[k, :] = xs
            s_trace[k, :] = st
        if t >= warm_start:
            for l in range(n):
                sx[l] += float(xs[l])
        row = rows[chosen]
        for l in range(n):
            d = cap_l[l] if (row[l] and st[l]) else 0
            served = xs[l] if xs[l] < d else d
            xs[l] = xs[l] - served + arrivals[l]
            if t >= warm_start:
                sa[l] += arrivals[l]
                ss[l] += served
                sw[l] += d - served
            if xs[l] > OVERFLOW_LIMIT:
                status = 1
        if status:
            break
    X[:] = xs
    s[:] = st
    prev[0] = cur_prev
    sum_x[:] = sx
    sum_arr[:] = sa
    sum_served[:] = ss
    sum_waste[:] = sw
    return status


def rollout_batch(sched, masks, edges, n_nodes, good, chan_kind, r,
                  oracle_kind, delta, alpha, rho, X, s0, i0, burn_in, horizon, U,
                  phi_sums, psi_sums):
    n = sched.shape[1]
    rows = sched.tolist()
    masks_l = masks.tolist()
    edges_l = edges.tolist()
    good_l = good.tolist()
    xs = X.tolist()
    norm = 0.0
    for x in xs:
        norm += x * x
    norm = math.sqrt(norm)
    one_minus_rho = 1.0 - rho
    total_steps = burn_in + horizon
    for j in range(U.shape[0]):
        st = s0[j].tolist()
        w = [xs[l] * good_l[l] if st[l] else 0.0 for l in range(n)]
        cur = int(i0[j])
        acc_phi = 0.0
        acc_psi = 0.0
        v_cur = _value(rows[cur], w, n)
        urows = U[j].tolist()
        for m in range(total_steps):
            if m > 0:
                urow = urows[m - 1]
                if chan_kind == 0:
                    for l in range(n):
                        if urow[l] < r:
                            st[l] = 1 - st[l]
                w = [xs[l] * good_l[l] if st[l] else 0.0 for l in range(n)]
                v_held = _value(rows[cur], w, n)
                if m > burn_in:
                    acc_psi += v_cur - one_minus_rho * v_held
                cand = _candidate(oracle_kind, delta, urow[n], urow[n + 1],
                                  rows, w, edges_l, masks_l, n_nodes, n)
                v_cand = _value(rows[cand], w, n)
                v_prev = v_held
                if norm == 0.0:
                    phi = 0.0
                else:
                    phi = (v_cand - v_prev) / ((v_cand if v_cand > v_prev else v_prev) + alpha * norm)
                fval = _update_prob(phi, rho)
                if urow[n + 2] < fval:
                    cur = cand
                    v_cur = v_cand
                else:
                    v_cur = v_held
            if m >= burn_in:
                acc_phi += v_cur
        phi_sums[j] = acc_phi
        psi_sums[j] = acc_psi
