"""Numba kernels: the hot loops of the samplers and estimators.

All graphs arrive as CSR adjacency arrays.  Chains that carry boundary
wiring use an augmented graph: one virtual hub vertex per wired class,
joined to its members by always-open virtual edges (their ids lie past the
real edge range, so excluding a real edge never touches them).

Randomness is pre-drawn in numpy arrays by the callers, which keeps the
kernels deterministic functions of their inputs and lets replicas run on
independent seeded streams.
"""

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# Connectivity primitives
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def connected_without(adj_ptr, adj_vert, adj_edge, open_arr, s, t, exclude,
                      stamp, qa, qb, sv):
    """Bidirectional breadth-first search from s and t over open edges,
    skipping `exclude`; alternates expanding the smaller frontier and stops
    on meet or exhaustion.  `stamp` holds visit marks: sv for the s-side,
    sv + 1 for the t-side (callers advance sv by 2 per query)."""
    if s == t:
        return True
    stamp[s] = sv
    stamp[t] = sv + 1
    qa[0] = s
    qb[0] = t
    ha, na = 0, 1
    hb, nb = 0, 1
    while True:
        if na - ha == 0 or nb - hb == 0:
            return False
        if na - ha <= nb - hb:
            new_n = na
            for idx in range(ha, na):
                u = qa[idx]
                for j in range(adj_ptr[u], adj_ptr[u + 1]):
                    e = adj_edge[j]
                    if e == exclude or not open_arr[e]:
                        continue
                    w = adj_vert[j]
                    if stamp[w] == sv:
                        continue
                    if stamp[w] == sv + 1:
                        return True
                    stamp[w] = sv
                    qa[new_n] = w
                    new_n += 1
            ha, na = na, new_n
        else:
            new_n = nb
            for idx in range(hb, nb):
                u = qb[idx]
                for j in range(adj_ptr[u], adj_ptr[u + 1]):
                    e = adj_edge[j]
                    if e == exclude or not open_arr[e]:
                        continue
                    w = adj_vert[j]
                    if stamp[w] == sv + 1:
                        continue
                    if stamp[w] == sv:
                        return True
                    stamp[w] = sv + 1
                    qb[new_n] = w
                    new_n += 1
            hb, nb = nb, new_n


@njit(cache=True, nogil=True)
def reaches(adj_ptr, adj_vert, adj_edge, open_arr, sources, target_mask,
            exclude, stamp, queue, sv):
    """Does any source reach a target-marked vertex over open edges
    (skipping `exclude`)?"""
    n = 0
    for i in range(sources.shape[0]):
        s = sources[i]
        if target_mask[s]:
            return True
        if stamp[s] != sv:
            stamp[s] = sv
            queue[n] = s
            n += 1
    h = 0
    while h < n:
        u = queue[h]
        h += 1
        for j in range(adj_ptr[u], adj_ptr[u + 1]):
            e = adj_edge[j]
            if e == exclude or not open_arr[e]:
                continue
            w = adj_vert[j]
            if stamp[w] == sv:
                continue
            if target_mask[w]:
                return True
            stamp[w] = sv
            queue[n] = w
            n += 1
    return False


@njit(cache=True, nogil=True)
def label_components(adj_ptr, adj_vert, adj_edge, open_arr, n_vertices,
                     labels, queue):
    """Connected-component labels of the open subgraph; returns the count."""
    labels[:n_vertices] = -1
    lab = 0
    for s in range(n_vertices):
        if labels[s] >= 0:
            continue
        labels[s] = lab
        queue[0] = s
        h, n = 0, 1
        while h < n:
            u = queue[h]
            h += 1
            for j in range(adj_ptr[u], adj_ptr[u + 1]):
                if not open_arr[adj_edge[j]]:
                    continue
                w = adj_vert[j]
                if w < n_vertices and labels[w] < 0:
                    labels[w] = lab
                    queue[n] = w
                    n += 1
        lab += 1
    return lab


# ---------------------------------------------------------------------------
# Sweeny heat-bath updates
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def sweeny_steps(adj_ptr, adj_vert, adj_edge, open_arr, edge_u, edge_v,
                 p, q, edge_sel, unif, stamp, qa, qb, sv):
    """One single-edge heat-bath update per entry of edge_sel/unif: the edge
    opens with probability p when its endpoints stay connected without it,
    and with p / (p + (1-p) q) otherwise."""
    plow = p / (p + (1.0 - p) * q)
    for t in range(edge_sel.shape[0]):
        e = edge_sel[t]
        conn = connected_without(adj_ptr, adj_vert, adj_edge, open_arr,
                                 edge_u[e], edge_v[e], e, stamp, qa, qb, sv)
        sv += 2
        pr = p if conn else plow
        open_arr[e] = unif[t] < pr
    return sv


@njit(cache=True, nogil=True)
def sweeny_sample_masks(adj_ptr, adj_vert, adj_edge, open_arr, edge_u, edge_v,
                        p, q, edge_sel, unif, steps_per_sample, n_real_edges,
                        masks_out, stamp, qa, qb, sv):
    """Run the chain and record the configuration bitmask after every
    `steps_per_sample` updates (real edge count must be <= 62)."""
    idx = 0
    for s in range(masks_out.shape[0]):
        sv = sweeny_steps(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                          edge_v, p, q,
                          edge_sel[idx:idx + steps_per_sample],
                          unif[idx:idx + steps_per_sample],
                          stamp, qa, qb, sv)
        idx += steps_per_sample
        m = np.int64(0)
        for e in range(n_real_edges):
            if open_arr[e]:
                m |= np.int64(1) << np.int64(e)
        masks_out[s] = m
    return sv


@njit(cache=True, nogil=True)
def sweeny_sample_indicator(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                            edge_v, p, q, edge_sel, unif, steps_per_sample,
                            sources, target_mask, tracked_edge, event_out,
                            tracked_out, stamp, qa, qb, sv):
    """Chain run recording, per thinned sample, whether the source set
    reaches the target set over open edges, plus the state of one tracked
    edge (pass -1 to skip tracking)."""
    idx = 0
    for s in range(event_out.shape[0]):
        sv = sweeny_steps(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                          edge_v, p, q,
                          edge_sel[idx:idx + steps_per_sample],
                          unif[idx:idx + steps_per_sample],
                          stamp, qa, qb, sv)
        idx += steps_per_sample
        hit = reaches(adj_ptr, adj_vert, adj_edge, open_arr, sources,
                      target_mask, -1, stamp, qa, sv)
        sv += 1
        event_out[s] = 1 if hit else 0
        if tracked_edge >= 0:
            tracked_out[s] = 1 if open_arr[tracked_edge] else 0
    return sv


@njit(cache=True, nogil=True)
def sweeny_sample_edge_counts(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                              edge_v, p, q, edge_sel, unif, steps_per_sample,
                              n_real_edges, tracked_edge, counts_out,
                              tracked_out, stamp, qa, qb, sv):
    """Chain run recording the number of open real edges per sample."""
    idx = 0
    for s in range(counts_out.shape[0]):
        sv = sweeny_steps(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                          edge_v, p, q,
                          edge_sel[idx:idx + steps_per_sample],
                          unif[idx:idx + steps_per_sample],
                          stamp, qa, qb, sv)
        idx += steps_per_sample
        c = 0
        for e in range(n_real_edges):
            if open_arr[e]:
                c += 1
        counts_out[s] = c
        if tracked_edge >= 0:
            tracked_out[s] = 1 if open_arr[tracked_edge] else 0
    return sv


# ---------------------------------------------------------------------------
# Exact pivotal count of the crossing event (per configuration)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def pivotal_count_config(adj_ptr, adj_vert, adj_edge, open_arr, edge_u, edge_v,
                         n_vertices, n_real_edges, in_bottom, in_top):
    """Number of edges whose flip changes the bottom-top crossing event.

    With no crossing present only closed edges can matter: those joining a
    bottom-reaching component to a top-reaching one.  With exactly one
    crossing component only open bridges can matter: those whose removal
    strands every bottom contact on one side and every top contact on the
    other.  Two or more crossing components admit no pivotal edge.
    """
    labels = np.full(n_vertices, -1, dtype=np.int64)
    queue = np.empty(n_vertices, dtype=np.int64)
    n_lab = label_components(adj_ptr, adj_vert, adj_edge, open_arr,
                             n_vertices, labels, queue)
    touch_b = np.zeros(n_lab, dtype=np.uint8)
    touch_t = np.zeros(n_lab, dtype=np.uint8)
    for v in range(n_vertices):
        if in_bottom[v]:
            touch_b[labels[v]] = 1
        if in_top[v]:
            touch_t[labels[v]] = 1
    crossing = -1
    n_crossing = 0
    for lab in range(n_lab):
        if touch_b[lab] and touch_t[lab]:
            crossing = lab
            n_crossing += 1
    if n_crossing >= 2:
        return 0
    if n_crossing == 0:
        cnt = 0
        for e in range(n_real_edges):
            if open_arr[e]:
                continue
            lu, lv = labels[edge_u[e]], labels[edge_v[e]]
            if (touch_b[lu] or touch_b[lv]) and (touch_t[lu] or touch_t[lv]):
                cnt += 1
        return cnt

    # Exactly one crossing component: bridge decomposition of its DFS tree.
    tin = np.full(n_vertices, -1, dtype=np.int64)
    low = np.zeros(n_vertices, dtype=np.int64)
    par_edge = np.full(n_vertices, -1, dtype=np.int64)
    sub_b = np.zeros(n_vertices, dtype=np.int64)
    sub_t = np.zeros(n_vertices, dtype=np.int64)
    it = np.zeros(n_vertices, dtype=np.int64)
    stack = np.empty(n_vertices, dtype=np.int64)
    total_b, total_t = 0, 0
    for v in range(n_vertices):
        if labels[v] == crossing:
            if in_bottom[v]:
                total_b += 1
            if in_top[v]:
                total_t += 1

    cnt = 0
    timer = 0
    for root in range(n_vertices):
        if labels[root] != crossing or tin[root] >= 0:
            continue
        top = 0
        stack[top] = root
        tin[root] = timer
        low[root] = timer
        timer += 1
        it[root] = adj_ptr[root]
        sub_b[root] = 1 if in_bottom[root] else 0
        sub_t[root] = 1 if in_top[root] else 0
        while top >= 0:
            u = stack[top]
            advanced = False
            while it[u] < adj_ptr[u + 1]:
                j = it[u]
                it[u] += 1
                e = adj_edge[j]
                if not open_arr[e] or e == par_edge[u]:
                    continue
                w = adj_vert[j]
                if tin[w] >= 0:
                    if tin[w] < low[u]:
                        low[u] = tin[w]
                    continue
                tin[w] = timer
                low[w] = timer
                timer += 1
                par_edge[w] = e
                it[w] = adj_ptr[w]
                sub_b[w] = 1 if in_bottom[w] else 0
                sub_t[w] = 1 if in_top[w] else 0
                top += 1
                stack[top] = w
                advanced = True
                break
            if not advanced:
                top -= 1
                if top >= 0:
                    parent = stack[top]
                    if low[u] < low[parent]:
                        low[parent] = low[u]
                    sub_b[parent] += sub_b[u]
                    sub_t[parent] += sub_t[u]
                    if low[u] > tin[parent]:  # par_edge[u] is a bridge
                        b, t = sub_b[u], sub_t[u]
                        if (b == 0 and t == total_t) or (t == 0 and b == total_b):
                            cnt += 1
    return cnt


@njit(cache=True, nogil=True)
def sweeny_sample_pivotal(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                          edge_v, p, q, edge_sel, unif, steps_per_sample,
                          real_ptr, real_vert, real_edge, n_real_vertices,
                          n_real_edges, in_bottom, in_top, counts_out,
                          stamp, qa, qb, sv):
    idx = 0
    for s in range(counts_out.shape[0]):
        sv = sweeny_steps(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                          edge_v, p, q,
                          edge_sel[idx:idx + steps_per_sample],
                          unif[idx:idx + steps_per_sample],
                          stamp, qa, qb, sv)
        idx += steps_per_sample
        counts_out[s] = pivotal_count_config(
            real_ptr, real_vert, real_edge, open_arr, edge_u, edge_v,
            n_real_vertices, n_real_edges, in_bottom, in_top)
    return sv


@njit(cache=True, nogil=True)
def four_arm_event(adj_ptr, adj_vert, adj_edge, open_arr, u, v, e0, ring_mask,
                   stamp, queue, sv):
    """Edge-centered polychromatic four-arm proxy: in the configuration with
    e0 removed, both endpoints reach the ring while staying disconnected
    from each other (planarity then forces the two dual arms)."""
    # BFS from u: must reach ring, must not reach v.
    stamp[u] = sv
    queue[0] = u
    h, n = 0, 1
    hit_u = ring_mask[u]
    while h < n:
        a = queue[h]
        h += 1
        for j in range(adj_ptr[a], adj_ptr[a + 1]):
            e = adj_edge[j]
            if e == e0 or not open_arr[e]:
                continue
            w = adj_vert[j]
            if w == v:
                return False
            if stamp[w] == sv:
                continue
            stamp[w] = sv
            if ring_mask[w]:
                hit_u = True
            queue[n] = w
            n += 1
    if not hit_u:
        return False
    sv += 1
    stamp[v] = sv
    queue[0] = v
    h, n = 0, 1
    hit_v = ring_mask[v]
    while h < n:
        a = queue[h]
        h += 1
        for j in range(adj_ptr[a], adj_ptr[a + 1]):
            e = adj_edge[j]
            if e == e0 or not open_arr[e]:
                continue
            w = adj_vert[j]
            if stamp[w] == sv:
                continue
            stamp[w] = sv
            if ring_mask[w]:
                hit_v = True
            queue[n] = w
            n += 1
    return hit_v


@njit(cache=True, nogil=True)
def sweeny_sample_four_arm(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                           edge_v, p, q, edge_sel, unif, steps_per_sample,
                           e0, ring_mask, event_out, stamp, qa, qb, sv):
    idx = 0
    for s in range(event_out.shape[0]):
        sv = sweeny_steps(adj_ptr, adj_vert, adj_edge, open_arr, edge_u,
                          edge_v, p, q,
                          edge_sel[idx:idx + steps_per_sample],
                          unif[idx:idx + steps_per_sample],
                          stamp, qa, qb, sv)
        idx += steps_per_sample
        hit = four_arm_event(adj_ptr, adj_vert, adj_edge, open_arr,
                             edge_u[e0], edge_v[e0], e0, ring_mask,
                             stamp, qa, sv)
        sv += 2
        event_out[s] = 1 if hit else 0
    return sv


# ---------------------------------------------------------------------------
# Monotone-coupling label chain
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _uf_find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True, nogil=True)
def bottleneck_threshold(edge_u, edge_v, values, exclude, n_vertices, parent):
    """Minimax path value between the endpoints of `exclude` in the graph
    without it: insert edges by increasing label; the edge completing the
    connection realizes the bottleneck.  Returns (value, edge index), or
    (1.0, -1) when no path exists.  Ties are broken by edge index (stable
    sort), which is immaterial when equal labels share provenance."""
    for i in range(n_vertices):
        parent[i] = i
    order = np.argsort(values, kind="mergesort")
    s, t = edge_u[exclude], edge_v[exclude]
    for oi in range(order.shape[0]):
        e = order[oi]
        if e == exclude:
            continue
        ru = _uf_find(parent, edge_u[e])
        rv = _uf_find(parent, edge_v[e])
        if ru != rv:
            parent[ru] = rv
        if _uf_find(parent, s) == _uf_find(parent, t):
            return values[e], e
    return 1.0, -1


@njit(cache=True, nogil=True)
def coupling_steps(edge_u, edge_v, values, prov, n_vertices, q, edge_sel,
                   unif, parent, prov_counter):
    """One label update per entry: resample the edge's label from the
    distribution with continuous density below and above the connection
    threshold T and an atom of mass T - T/(T+(1-T)q) at T itself; the atom
    copies the threshold edge's provenance token."""
    for step in range(edge_sel.shape[0]):
        e = edge_sel[step]
        T, te = bottleneck_threshold(edge_u, edge_v, values, e, n_vertices, parent)
        V = unif[step]
        c = T / (T + (1.0 - T) * q)
        if V < c:
            prov_counter += 1
            values[e] = V * q / (1.0 + V * (q - 1.0))
            prov[e] = prov_counter
        elif V <= T:
            values[e] = T
            prov[e] = prov[te] if te >= 0 else 0
        else:
            prov_counter += 1
            values[e] = V
            prov[e] = prov_counter
    return prov_counter


@njit(cache=True, nogil=True)
def coupling_sample_masks(edge_u, edge_v, values, prov, n_vertices, q,
                          edge_sel, unif, steps_per_sample, p, masks_out,
                          parent, prov_counter):
    """Label chain run recording the bitmask of the projection at level p."""
    idx = 0
    n_edges = values.shape[0]
    for s in range(masks_out.shape[0]):
        prov_counter = coupling_steps(edge_u, edge_v, values, prov,
                                      n_vertices, q,
                                      edge_sel[idx:idx + steps_per_sample],
                                      unif[idx:idx + steps_per_sample],
                                      parent, prov_counter)
        idx += steps_per_sample
        m = np.int64(0)
        for e in range(n_edges):
            if values[e] <= p:
                m |= np.int64(1) << np.int64(e)
        masks_out[s] = m
    return prov_counter


@njit(cache=True, nogil=True)
def coupling_sample_labels(edge_u, edge_v, values, prov, n_vertices, q,
                           edge_sel, unif, steps_per_sample, values_out,
                           prov_out, parent, prov_counter):
    """Label chain run recording full label snapshots (small systems)."""
    idx = 0
    for s in range(values_out.shape[0]):
        prov_counter = coupling_steps(edge_u, edge_v, values, prov,
                                      n_vertices, q,
                                      edge_sel[idx:idx + steps_per_sample],
                                      unif[idx:idx + steps_per_sample],
                                      parent, prov_counter)
        idx += steps_per_sample
        values_out[s] = values
        prov_out[s] = prov
    return prov_counter


@njit(cache=True, nogil=True)
def coupling_sample_indicator(edge_u, edge_v, values, prov, n_vertices, q,
                              edge_sel, unif, steps_per_sample, p,
                              adj_ptr, adj_vert, adj_edge, sources,
                              target_mask, event_out, open_scratch,
                              stamp, queue, parent, prov_counter, sv):
    """Label chain run recording, per sample, whether the projection at
    level p connects the source set to the target set."""
    idx = 0
    n_edges = values.shape[0]
    for s in range(event_out.shape[0]):
        prov_counter = coupling_steps(edge_u, edge_v, values, prov,
                                      n_vertices, q,
                                      edge_sel[idx:idx + steps_per_sample],
                                      unif[idx:idx + steps_per_sample],
                                      parent, prov_counter)
        idx += steps_per_sample
        for e in range(n_edges):
            open_scratch[e] = values[e] <= p
        hit = reaches(adj_ptr, adj_vert, adj_edge, open_scratch, sources,
                      target_mask, -1, stamp, queue, sv)
        sv += 1
        event_out[s] = 1 if hit else 0
    return prov_counter


@njit(cache=True, nogil=True)
def cloud_stats_run(edge_u, edge_v, values, prov, n_vertices, q, edge_sel,
                    unif, steps_per_sample, n_samples, mid_x, mid_y,
                    multi_out, max_size_out, max_diam_out, size_hist,
                    level_hist, parent, prov_counter):
    """Label chain run recording, per sample: the number of multi-edge
    clouds, the largest cloud size, and the largest cloud diameter
    (Chebyshev distance between edge midpoints, doubled coordinates).
    Accumulates a histogram of all cloud sizes and a histogram of the
    levels of multi-edge clouds (level_hist bins partition [0,1])."""
    idx = 0
    n_edges = values.shape[0]
    n_bins = level_hist.shape[0]
    order = np.empty(n_edges, dtype=np.int64)
    for s in range(n_samples):
        prov_counter = coupling_steps(edge_u, edge_v, values, prov,
                                      n_vertices, q,
                                      edge_sel[idx:idx + steps_per_sample],
                                      unif[idx:idx + steps_per_sample],
                                      parent, prov_counter)
        idx += steps_per_sample
        order[:] = np.argsort(prov, kind="mergesort")
        n_multi = 0
        max_size = 1
        max_diam = 0
        i = 0
        while i < n_edges:
            j = i
            while j + 1 < n_edges and prov[order[j + 1]] == prov[order[i]]:
                j += 1
            size = j - i + 1
            size_hist[size] += 1
            if size > 1:
                n_multi += 1
                if size > max_size:
                    max_size = size
                b = int(values[order[i]] * n_bins)
                if b >= n_bins:
                    b = n_bins - 1
                level_hist[b] += 1
                lo_x, hi_x = mid_x[order[i]], mid_x[order[i]]
                lo_y, hi_y = mid_y[order[i]], mid_y[order[i]]
                for k in range(i + 1, j + 1):
                    e = order[k]
                    if mid_x[e] < lo_x:
                        lo_x = mid_x[e]
                    if mid_x[e] > hi_x:
                        hi_x = mid_x[e]
                    if mid_y[e] < lo_y:
                        lo_y = mid_y[e]
                    if mid_y[e] > hi_y:
                        hi_y = mid_y[e]
                d = max(hi_x - lo_x, hi_y - lo_y)
                if d > max_diam:
                    max_diam = d
            i = j + 1
        multi_out[s] = n_multi
        max_size_out[s] = max_size
        max_diam_out[s] = max_diam
    return prov_counter
