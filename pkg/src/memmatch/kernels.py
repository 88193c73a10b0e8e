"""Hot scan/rank kernels with a numba path and a pure-numpy fallback.

Set ``MEMMATCH_DISABLE_NUMBA=1`` (before import) to force the numpy path.
Both paths are always importable as ``*_numba`` / ``*_numpy`` so tests and
the benchmark can compare them directly.
"""

import os

import numpy as np

DISABLE_NUMBA = os.environ.get("MEMMATCH_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None

# Above these sizes numpy's vectorized sort and tanh beat the compiled loops
# (see benchmarks/bench_kernels.py).
RANKS_NUMBA_MAX = 1000
LSTM_FORWARD_NUMBA_MAX_BATCH = 16


def _use_numba():
    return HAVE_NUMBA and not DISABLE_NUMBA


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# --- max-window log-odds scan -------------------------------------------------

def pwm_scan_numpy(codes, logodds):
    """Best window score and its offset for each row of ``codes``.

    ``codes`` is ``(n, t)`` with values 0..4; ``logodds`` is ``(w, 5)`` with
    column 4 (the N code) zero. Ties resolve to the leftmost window.
    """
    w = logodds.shape[0]
    windows = np.lib.stride_tricks.sliding_window_view(codes, w, axis=1)  # (n, t-w+1, w)
    # accumulate column by column so the rounding order matches the loop kernel
    scores = np.zeros(windows.shape[:2])
    for k in range(w):
        scores += logodds[k, windows[..., k]]
    best = scores.argmax(axis=1)
    return scores[np.arange(len(codes)), best], best


def _pwm_scan_loop(codes, logodds):
    n, t = codes.shape
    w = logodds.shape[0]
    best = np.empty(n)
    where = np.empty(n, dtype=np.int64)
    for i in range(n):
        top = -np.inf
        arg = 0
        for j in range(t - w + 1):
            s = 0.0
            for k in range(w):
                s += logodds[k, codes[i, j + k]]
            if s > top:
                top = s
                arg = j
        best[i] = top
        where[i] = arg
    return best, where


pwm_scan_numba = _njit(_pwm_scan_loop)


# --- tie-averaged ranks -------------------------------------------------------

def average_ranks_numpy(x):
    """1-based ranks of ``x``; tied values share the mean of their ranks."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # group boundaries of equal values
    new_group = np.empty(len(xs), dtype=bool)
    new_group[:1] = True
    new_group[1:] = xs[1:] != xs[:-1]
    group = np.cumsum(new_group) - 1
    starts = np.flatnonzero(new_group)
    ends = np.append(starts[1:], len(xs))
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(len(xs))
    ranks[order] = avg[group]
    return ranks


def _average_ranks_loop(x):
    n = x.shape[0]
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and x[order[j + 1]] == x[order[i]]:
            j += 1
        r = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = r
        i = j + 1
    return ranks


average_ranks_numba = _njit(_average_ranks_loop)


def pwm_scan(codes, logodds):
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    logodds = np.ascontiguousarray(logodds, dtype=np.float64)
    if _use_numba():
        return pwm_scan_numba(codes, logodds)
    return pwm_scan_numpy(codes, logodds)


def average_ranks(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if _use_numba() and len(x) <= RANKS_NUMBA_MAX:
        return average_ranks_numba(x)
    return average_ranks_numpy(x)


# --- LSTM recurrence ------------------------------------------------------------
# Gate layout along the last axis: input, forget, output, candidate.
# Forward caches activated gates, cell states, tanh(cell) and hidden states in
# position order; the backward kernels consume those caches.

def lstm_forward_numpy(xproj, Wh, reverse):
    B, t, four_h = xproj.shape
    h = four_h // 4
    gates = np.empty((B, t, four_h))
    cells = np.empty((B, t, h))
    tcells = np.empty((B, t, h))
    hidden = np.empty((B, t, h))
    h_prev = np.zeros((B, h))
    c_prev = np.zeros((B, h))
    for step in range(t):
        j = t - 1 - step if reverse else step
        z = xproj[:, j] + h_prev @ Wh
        act = gates[:, j]
        act[:, : 3 * h] = 0.5 + 0.5 * np.tanh(0.5 * z[:, : 3 * h])
        act[:, 3 * h :] = np.tanh(z[:, 3 * h :])
        c = act[:, h : 2 * h] * c_prev + act[:, :h] * act[:, 3 * h :]
        tc = np.tanh(c)
        h_prev = act[:, 2 * h : 3 * h] * tc
        c_prev = c
        cells[:, j] = c
        tcells[:, j] = tc
        hidden[:, j] = h_prev
    return hidden, gates, cells, tcells


def lstm_backward_numpy(grad_hidden, Wh, reverse, hidden, gates, cells, tcells):
    B, t, h = hidden.shape
    dx = np.empty((B, t, 4 * h))
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    zeros = np.zeros((B, h))
    for step in range(t - 1, -1, -1):
        j = t - 1 - step if reverse else step
        prev = j + 1 if reverse else j - 1
        c_prev = cells[:, prev] if step > 0 else zeros
        h_prev = hidden[:, prev] if step > 0 else zeros
        act = gates[:, j]
        i_g, f_g, o_g, cand = act[:, :h], act[:, h : 2 * h], act[:, 2 * h : 3 * h], act[:, 3 * h :]
        tc = tcells[:, j]
        dh = grad_hidden[:, j] + dh_next
        dc = dh * o_g * (1.0 - tc * tc) + dc_next
        dz = dx[:, j]
        dz[:, :h] = dc * cand * i_g * (1.0 - i_g)
        dz[:, h : 2 * h] = dc * c_prev * f_g * (1.0 - f_g)
        dz[:, 2 * h : 3 * h] = dh * tc * o_g * (1.0 - o_g)
        dz[:, 3 * h :] = dc * i_g * (1.0 - cand * cand)
        dc_next = dc * f_g
        dWh += h_prev.T @ dz
        dh_next = dz @ Wh.T
    return dx, dWh


def _lstm_forward_loop(xproj, Wh, reverse):
    B, t, four_h = xproj.shape
    h = four_h // 4
    gates = np.empty((B, t, four_h))
    cells = np.empty((B, t, h))
    tcells = np.empty((B, t, h))
    hidden = np.empty((B, t, h))
    h_prev = np.zeros((B, h))
    c_prev = np.zeros((B, h))
    z = np.empty(four_h)
    for step in range(t):
        j = t - 1 - step if reverse else step
        for b in range(B):
            for q in range(four_h):
                z[q] = xproj[b, j, q]
            for k in range(h):
                hk = h_prev[b, k]
                if hk != 0.0:
                    for q in range(four_h):
                        z[q] += hk * Wh[k, q]
            for q in range(3 * h):
                gates[b, j, q] = 0.5 + 0.5 * np.tanh(0.5 * z[q])
            for q in range(3 * h, four_h):
                gates[b, j, q] = np.tanh(z[q])
            for k in range(h):
                c = gates[b, j, h + k] * c_prev[b, k] + gates[b, j, k] * gates[b, j, 3 * h + k]
                tc = np.tanh(c)
                cells[b, j, k] = c
                tcells[b, j, k] = tc
                hidden[b, j, k] = gates[b, j, 2 * h + k] * tc
                c_prev[b, k] = c
                h_prev[b, k] = hidden[b, j, k]
    return hidden, gates, cells, tcells


def _lstm_backward_loop(grad_hidden, Wh, reverse, hidden, gates, cells, tcells):
    B, t, h = hidden.shape
    four_h = 4 * h
    dx = np.empty((B, t, four_h))
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, h))
    dc_next = np.zeros((B, h))
    for step in range(t - 1, -1, -1):
        j = t - 1 - step if reverse else step
        prev = j + 1 if reverse else j - 1
        for b in range(B):
            for k in range(h):
                c_prev = cells[b, prev, k] if step > 0 else 0.0
                i_g = gates[b, j, k]
                f_g = gates[b, j, h + k]
                o_g = gates[b, j, 2 * h + k]
                cand = gates[b, j, 3 * h + k]
                tc = tcells[b, j, k]
                dh = grad_hidden[b, j, k] + dh_next[b, k]
                dc = dh * o_g * (1.0 - tc * tc) + dc_next[b, k]
                dx[b, j, k] = dc * cand * i_g * (1.0 - i_g)
                dx[b, j, h + k] = dc * c_prev * f_g * (1.0 - f_g)
                dx[b, j, 2 * h + k] = dh * tc * o_g * (1.0 - o_g)
                dx[b, j, 3 * h + k] = dc * i_g * (1.0 - cand * cand)
                dc_next[b, k] = dc * f_g
            if step > 0:
                for k in range(h):
                    hk = hidden[b, prev, k]
                    for q in range(four_h):
                        dWh[k, q] += hk * dx[b, j, q]
            for k in range(h):
                acc = 0.0
                for q in range(four_h):
                    acc += dx[b, j, q] * Wh[k, q]
                dh_next[b, k] = acc
    return dx, dWh


lstm_forward_numba = _njit(_lstm_forward_loop)
lstm_backward_numba = _njit(_lstm_backward_loop)


def lstm_forward(xproj, Wh, reverse):
    xproj = np.ascontiguousarray(xproj, dtype=np.float64)
    Wh = np.ascontiguousarray(Wh, dtype=np.float64)
    if _use_numba() and xproj.shape[0] <= LSTM_FORWARD_NUMBA_MAX_BATCH:
        return lstm_forward_numba(xproj, Wh, reverse)
    return lstm_forward_numpy(xproj, Wh, reverse)


def lstm_backward(grad_hidden, Wh, reverse, cache):
    grad_hidden = np.ascontiguousarray(grad_hidden, dtype=np.float64)
    Wh = np.ascontiguousarray(Wh, dtype=np.float64)
    if _use_numba():
        return lstm_backward_numba(grad_hidden, Wh, reverse, *cache)
    return lstm_backward_numpy(grad_hidden, Wh, reverse, *cache)
