"""Numpy implementations of the hot loops (used when the Cython module is absent)."""
import numpy as np


def conv_volterra(K, gh):
    """Trapezoid solution of ``m(t) = 1 - g int_0^t K(s) m(t-s) ds`` on a
    uniform grid; ``K[j]`` is the kernel at lag ``j*h`` and ``gh = g*h``."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    N = K.shape[0] - 1
    m = np.empty(N + 1)
    m[0] = 1.0
    denom = 1.0 + 0.5 * gh * K[0]
    for n in range(1, N + 1):
        acc = 0.5 * K[n] * m[0] + np.dot(K[1:n], m[n - 1:0:-1])
        m[n] = (1.0 - gh * acc) / denom
    return m


def _ranges(starts, counts):
    """Concatenation of ``arange(s, s+c)`` for each pair."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offs = np.repeat(starts - np.cumsum(counts) + counts, counts)
    return offs + np.arange(total)


def path_overlaps(trap_ptr, jump_times, start, pos_after, sel, path_times, path_pos, t0, t1):
    """Time each selected trap spends on the walker's site during ``[t0, t1]``.

    Traps are stored as event lists: trap ``k`` starts at ``start[k]`` and
    after its ``i``-th jump (time ``jump_times[trap_ptr[k]+i]``) sits at
    ``pos_after[trap_ptr[k]+i]``. The path sits at ``path_pos[i]`` on
    ``[path_times[i-1], path_times[i])``.
    """
    sel = np.asarray(sel, dtype=np.int64)
    M = sel.shape[0]
    if M == 0 or t1 <= t0:
        return np.zeros(M)
    path_times = np.asarray(path_times, dtype=np.float64)
    pt = path_times[(path_times > t0) & (path_times < t1)]

    counts = trap_ptr[sel + 1] - trap_ptr[sel]
    flat = _ranges(trap_ptr[sel], counts)
    jt = jump_times[flat]
    owner = np.repeat(np.arange(M), counts)
    base = np.bincount(owner[jt <= t0], minlength=M)
    inside = (jt > t0) & (jt < t1)

    ev_t = np.concatenate([np.full(M, float(t0)), jt[inside], np.tile(pt, M)])
    ev_o = np.concatenate([np.arange(M), owner[inside], np.repeat(np.arange(M), pt.size)])
    own = np.concatenate([np.zeros(M, bool), np.ones(int(inside.sum()), bool),
                          np.zeros(M * pt.size, bool)])
    order = np.lexsort((~own, ev_t, ev_o))
    ev_t, ev_o, own = ev_t[order], ev_o[order], own[order]

    nxt = np.empty_like(ev_t)
    nxt[:-1] = ev_t[1:]
    last = np.ones(ev_t.size, bool)
    last[:-1] = ev_o[1:] != ev_o[:-1]
    nxt[last] = t1
    dur = nxt - ev_t

    cum = np.cumsum(own)
    first = np.ones(ev_t.size, bool)
    first[1:] = ev_o[1:] != ev_o[:-1]
    group_start_cum = np.maximum.accumulate(np.where(first, cum - own, 0))
    n_before = base[ev_o] + (cum - group_start_cum)

    idx = trap_ptr[sel[ev_o]] + n_before - 1
    safe = np.maximum(idx, 0)
    trap_pos = np.where((n_before > 0)[:, None], pos_after[safe], start[sel[ev_o]])
    walk_pos = path_pos[np.searchsorted(path_times, ev_t, side="right")]
    hit = np.all(trap_pos == walk_pos, axis=1)
    return np.bincount(ev_o, weights=dur * hit, minlength=M)
