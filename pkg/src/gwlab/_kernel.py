"""Compiled inner loop for the coupled walks.

One call simulates a batch of independent rows. Each row starts both tree
walks at the root of a fresh lazy tree and drives them, together with the
integer walk, by that row's uniforms. A site discovered at step t receives
``Z[row, t]`` children, whichever walk discovers it.
"""
import numba
import numpy as np

OK = 0
CAPACITY = 3

_MAX_SLOTS = 2**31 - 1


@numba.njit(cache=True, nogil=True)
def _grow(slots, need):
    cap = slots.shape[0]
    while cap < need:
        cap *= 2
    out = np.empty(cap, dtype=np.int32)
    out[: slots.shape[0]] = slots
    return out


@numba.njit(cache=True, nogil=True)
def _child_index(u, k, p_k):
    # child i (1-based) owns (1 - i p_k, 1 - (i-1) p_k]
    i = int(np.ceil((1.0 - u) / p_k))
    if i < 1:
        i = 1
    elif i > k:
        i = k
    return i - 1


@numba.njit(cache=True, nogil=True)
def simulate_rows(
    U, Z, q_tab, p_tab, e_tab, q_y,
    y, depth_a, depth_b, kids_a, kids_b, vert_a, vert_b, new_a, new_b,
):
    """Fill the per-step output arrays in place; return a status code.

    ``U`` has shape (R, L) holding U_1..U_L; ``Z`` and every output array
    have shape (R, L + 1), index t meaning "after step t".
    """
    R, L = U.shape
    nmax = L + 1
    # tree 0 is walked by the beta walk, tree 1 by the beta+eps walk
    parent = np.empty((2, nmax), dtype=np.int32)
    nkids = np.empty((2, nmax), dtype=np.int32)
    base = np.empty((2, nmax), dtype=np.int64)
    depth = np.empty((2, nmax), dtype=np.int32)
    slots0 = np.empty(4 * nmax + 16, dtype=np.int32)
    slots1 = np.empty(4 * nmax + 16, dtype=np.int32)
    pos = np.empty(2, dtype=np.int32)
    nv = np.empty(2, dtype=np.int64)
    top = np.empty(2, dtype=np.int64)
    fresh = np.zeros(2, dtype=np.bool_)

    for r in range(R):
        z0 = Z[r, 0]
        for w in range(2):
            parent[w, 0] = -1
            nkids[w, 0] = z0
            base[w, 0] = 0
            depth[w, 0] = 0
            pos[w] = 0
            nv[w] = 1
            top[w] = z0
        if z0 > slots0.shape[0]:
            slots0 = _grow(slots0, z0)
            slots1 = _grow(slots1, z0)
        for c in range(z0):
            slots0[c] = -1
            slots1[c] = -1
        y[r, 0] = 0
        depth_a[r, 0] = 0
        depth_b[r, 0] = 0
        kids_a[r, 0] = z0
        kids_b[r, 0] = z0
        vert_a[r, 0] = 0
        vert_b[r, 0] = 0
        new_a[r, 0] = True
        new_b[r, 0] = True

        for t in range(1, L + 1):
            u = U[r, t - 1]
            zt = Z[r, t]
            if u <= q_y:
                y[r, t] = y[r, t - 1] - 1
            else:
                y[r, t] = y[r, t - 1] + 1
            for w in range(2):
                v = pos[w]
                k = nkids[w, v]
                c = -1  # -1 means "to parent"
                if v == 0:
                    c = int(u * k)
                    if c >= k:
                        c = k - 1
                elif w == 0:
                    if u > q_tab[k]:
                        c = _child_index(u, k, p_tab[k])
                else:
                    if u < e_tab[k]:
                        c = int(u * k / e_tab[k])
                        if c >= k:
                            c = k - 1
                    elif u > q_tab[k]:
                        c = _child_index(u, k, p_tab[k])
                fresh[w] = False
                if c < 0:
                    pos[w] = parent[w, v]
                    continue
                slot = base[w, v] + c
                child = slots0[slot] if w == 0 else slots1[slot]
                if child < 0:
                    child = nv[w]
                    nv[w] += 1
                    parent[w, child] = v
                    depth[w, child] = depth[w, v] + 1
                    nkids[w, child] = zt
                    b0 = top[w]
                    need = b0 + zt
                    if need > _MAX_SLOTS:
                        return CAPACITY
                    if w == 0:
                        if need > slots0.shape[0]:
                            slots0 = _grow(slots0, need)
                        for j in range(zt):
                            slots0[b0 + j] = -1
                        slots0[slot] = child
                    else:
                        if need > slots1.shape[0]:
                            slots1 = _grow(slots1, need)
                        for j in range(zt):
                            slots1[b0 + j] = -1
                        slots1[slot] = child
                    base[w, child] = b0
                    top[w] = need
                    fresh[w] = True
                pos[w] = child
            va = pos[0]
            vb = pos[1]
            depth_a[r, t] = depth[0, va]
            depth_b[r, t] = depth[1, vb]
            kids_a[r, t] = nkids[0, va]
            kids_b[r, t] = nkids[1, vb]
            vert_a[r, t] = va
            vert_b[r, t] = vb
            new_a[r, t] = fresh[0]
            new_b[r, t] = fresh[1]
    return OK
