"""Compiled inner loops (numba). Python-facing wrappers live in the other modules."""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def cubic_gradient(x, tri, coeff, out):
    """Add the cubic-part gradient of each row of ``x`` (B, n) into ``out``."""
    for b in range(x.shape[0]):
        for t in range(tri.shape[0]):
            i, j, k = tri[t, 0], tri[t, 1], tri[t, 2]
            c = coeff[t]
            xi, xj, xk = x[b, i], x[b, j], x[b, k]
            out[b, i] += c * xj * xk
            out[b, j] += c * xi * xk
            out[b, k] += c * xi * xj


@nb.njit(cache=True)
def cubic_hvp(x, v, tri, coeff, out):
    """Add the cubic-part Hessian of each row of ``x`` applied to the matching row of ``v``."""
    for b in range(x.shape[0]):
        for t in range(tri.shape[0]):
            i, j, k = tri[t, 0], tri[t, 1], tri[t, 2]
            c = coeff[t]
            xi, xj, xk = x[b, i], x[b, j], x[b, k]
            vi, vj, vk = v[b, i], v[b, j], v[b, k]
            out[b, i] += c * (xk * vj + xj * vk)
            out[b, j] += c * (xk * vi + xi * vk)
            out[b, k] += c * (xj * vi + xi * vj)


@nb.njit(cache=True)
def swap_delta(cov, mu, coeff, inc_ptr, inc_tri, tri_count, tri, sx, o, p):
    """f(x - e_o + e_p) - f(x) from cached ``sx = Σx`` and per-triple selected counts."""
    d = 2.0 * (sx[p] - sx[o]) + cov[p, p] + cov[o, o] - 2.0 * cov[o, p] - mu[p] + mu[o]
    for q in range(inc_ptr[o], inc_ptr[o + 1]):
        t = inc_tri[q]
        if tri_count[t] == 3:
            d -= coeff[t]
    for q in range(inc_ptr[p], inc_ptr[p + 1]):
        t = inc_tri[q]
        cnt = tri_count[t]
        if tri[t, 0] == o or tri[t, 1] == o or tri[t, 2] == o:
            cnt -= 1
        if cnt == 2:
            d += coeff[t]
    return d


@nb.njit(cache=True)
def apply_swap(cov, inc_ptr, inc_tri, tri_count, sel, sx, o, p):
    sel[o] = 0
    sel[p] = 1
    for i in range(sx.shape[0]):
        sx[i] += cov[i, p] - cov[i, o]
    for q in range(inc_ptr[o], inc_ptr[o + 1]):
        tri_count[inc_tri[q]] -= 1
    for q in range(inc_ptr[p], inc_ptr[p + 1]):
        tri_count[inc_tri[q]] += 1


@nb.njit(cache=True)
def _full_value(cov, mu, tri, coeff, sel):
    n = sel.shape[0]
    v = 0.0
    for i in range(n):
        if sel[i]:
            v -= mu[i]
            for j in range(n):
                if sel[j]:
                    v += cov[i, j]
    for t in range(tri.shape[0]):
        if sel[tri[t, 0]] and sel[tri[t, 1]] and sel[tri[t, 2]]:
            v += coeff[t]
    return v


@nb.njit(cache=True)
def _lex_less(a, b):
    """Sorted-index lexicographic comparison of two 0/1 selections."""
    n = a.shape[0]
    ia = 0
    ib = 0
    while True:
        while ia < n and a[ia] == 0:
            ia += 1
        while ib < n and b[ib] == 0:
            ib += 1
        if ia >= n or ib >= n:
            return False
        if ia != ib:
            return ia < ib
        ia += 1
        ib += 1


@nb.njit(cache=True)
def _rd_next(c, K):
    """Advance ``c[1..K]`` (sentinel ``c[K+1] = n``) to the next revolving-door subset.

    Knuth's Algorithm R. Returns the (removed, added) pair, or (-1, -1) when done.
    """
    if K % 2 == 1:
        if c[1] + 1 < c[2]:
            c[1] += 1
            return c[1] - 1, c[1]
        j = 2
        mode = 4
    else:
        if c[1] > 0:
            c[1] -= 1
            return c[1] + 1, c[1]
        j = 2
        mode = 5
    while j <= K:
        if mode == 4:
            if c[j] >= j:
                out_i = c[j]
                c[j] = c[j - 1]
                c[j - 1] = j - 2
                return out_i, j - 2
            j += 1
            mode = 5
        else:
            if c[j] + 1 < c[j + 1]:
                out_i = c[j - 1]
                c[j - 1] = c[j]
                c[j] += 1
                return out_i, c[j]
            j += 1
            mode = 4
    return -1, -1


@nb.njit(cache=True)
def _rd_init(n, K):
    c = np.empty(K + 2, dtype=np.int64)
    for j in range(1, K + 1):
        c[j] = j - 1
    c[K + 1] = n
    return c


@nb.njit(cache=True)
def revolving_door_minimum(cov, mu, tri, coeff, inc_ptr, inc_tri, n, K, resync, tie_tol):
    """Minimize over all K-subsets, visiting them in revolving-door order.

    Consecutive subsets differ by one swap, so each step costs one swap delta.
    The running value is recomputed from scratch every ``resync`` steps.
    Returns (best selection, best value, number of subsets visited).
    """
    c = _rd_init(n, K)
    sel = np.zeros(n, dtype=np.int8)
    for j in range(1, K + 1):
        sel[c[j]] = 1
    sx = cov @ sel.astype(np.float64)
    tri_count = np.zeros(tri.shape[0], dtype=np.int64)
    for t in range(tri.shape[0]):
        tri_count[t] = sel[tri[t, 0]] + sel[tri[t, 1]] + sel[tri[t, 2]]
    value = _full_value(cov, mu, tri, coeff, sel)
    best_sel = sel.copy()
    best_val = value
    visited = 1
    while True:
        out_i, in_i = _rd_next(c, K)
        if out_i < 0:
            break
        value += swap_delta(cov, mu, coeff, inc_ptr, inc_tri, tri_count, tri, sx, out_i, in_i)
        apply_swap(cov, inc_ptr, inc_tri, tri_count, sel, sx, out_i, in_i)
        visited += 1
        if visited % resync == 0:
            value = _full_value(cov, mu, tri, coeff, sel)
        if value < best_val - tie_tol:
            best_val = value
            best_sel[:] = sel
        elif value <= best_val + tie_tol:
            exact = _full_value(cov, mu, tri, coeff, sel)
            best_exact = _full_value(cov, mu, tri, coeff, best_sel)
            if exact < best_exact or (exact == best_exact and _lex_less(sel, best_sel)):
                best_val = exact
                best_sel[:] = sel
    return best_sel, _full_value(cov, mu, tri, coeff, best_sel), visited


@nb.njit(cache=True)
def revolving_door_sequence(n, K):
    """All K-subsets of range(n) in revolving-door order, one sorted row per subset."""
    total = 1
    for i in range(K):
        total = total * (n - i) // (i + 1)
    out = np.empty((total, K), dtype=np.int64)
    c = _rd_init(n, K)
    row = 0
    while True:
        for j in range(K):
            out[row, j] = c[j + 1]
        row += 1
        out_i, _ = _rd_next(c, K)
        if out_i < 0 or row == total:
            break
    return out[:row]


# ---------------------------------------------------------------------------
# single-bit-flip kernels over a QUBO given as diagonal h plus symmetric
# off-diagonal CSR (indptr, indices, data); field[i] = sum_j W_ij s_j
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _flip(s, field, indptr, indices, data, i):
    d = 1.0 - 2.0 * s[i]
    s[i] = 1 - s[i]
    for q in range(indptr[i], indptr[i + 1]):
        field[indices[q]] += d * data[q]


@nb.njit(cache=True)
def anneal_sweeps(s, field, h, indptr, indices, data, idx, u, temp, energy, best_s, best_energy):
    """Metropolis flips at temperature ``temp``: proposal r flips ``idx[r]``, accepted when ``u[r]`` allows."""
    accepted = 0
    for r in range(idx.shape[0]):
        i = idx[r]
        delta = (1.0 - 2.0 * s[i]) * (h[i] + field[i])
        if delta <= 0.0 or u[r] < np.exp(-delta / temp):
            _flip(s, field, indptr, indices, data, i)
            energy += delta
            accepted += 1
            if energy < best_energy:
                best_energy = energy
                best_s[:] = s
    return energy, best_energy, accepted


@nb.njit(cache=True)
def tabu_iterations(s, field, h, indptr, indices, data, tabu_until, it0, n_iter, tenure,
                    aspiration, energy, best_s, best_energy, flips):
    """Steepest non-tabu single flips; a tabu flip is allowed when it beats the best seen."""
    n = s.shape[0]
    for it in range(it0, it0 + n_iter):
        best_move = -1
        best_delta = np.inf
        fallback = -1
        fallback_until = np.iinfo(np.int64).max
        for i in range(n):
            delta = (1.0 - 2.0 * s[i]) * (h[i] + field[i])
            if tabu_until[i] > it:
                if aspiration and energy + delta < best_energy and delta < best_delta:
                    best_delta = delta
                    best_move = i
                elif tabu_until[i] < fallback_until:
                    fallback_until = tabu_until[i]
                    fallback = i
            elif delta < best_delta:
                best_delta = delta
                best_move = i
        if best_move < 0:
            # everything tabu and nothing aspirates: release the oldest
            best_move = fallback
            best_delta = (1.0 - 2.0 * s[best_move]) * (h[best_move] + field[best_move])
        _flip(s, field, indptr, indices, data, best_move)
        energy += best_delta
        tabu_until[best_move] = it + 1 + tenure
        flips[it - it0] = best_move
        if energy < best_energy:
            best_energy = energy
            best_s[:] = s
    return energy, best_energy
