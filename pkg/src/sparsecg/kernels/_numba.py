"""numba ``@njit`` twins of the kernels in ``_numpy``.

Signatures and return values match the numpy backend one to one; see that
module for the array layouts.
"""

import numpy as np
from numba import njit

from ._numpy import (
    KIND_DELTA_MAX,
    KIND_MASK,
    KIND_QVAR,
    LOSS_ABS_DELTA,
    LOSS_QVAR,
    STATUS_NONFINITE,
    STATUS_OK,
)

_OPTS = dict(cache=True, nogil=True, error_model="numpy")


@njit(**_OPTS)
def _row_var(M, r):
    A = M.shape[1]
    m = 0.0
    for c in range(A):
        m += M[r, c]
    m /= A
    v = 0.0
    for c in range(A):
        d = M[r, c] - m
        v += d * d
    return v / A


@njit(**_OPTS)
def _col_var(M, c):
    A = M.shape[0]
    m = 0.0
    for r in range(A):
        m += M[r, c]
    m /= A
    v = 0.0
    for r in range(A):
        d = M[r, c] - m
        v += d * d
    return v / A


@njit(**_OPTS)
def _pair_matrix(U, P, pi, pj, p, use_delta):
    A = U.shape[1]
    M = np.empty((A, A))
    i = pi[p]
    j = pj[p]
    for r in range(A):
        for c in range(A):
            if use_delta:
                M[r, c] = P[p, r, c] - U[i, r] - U[j, c]
            else:
                M[r, c] = P[p, r, c]
    return M


@njit(**_OPTS)
def zeta_pairs(U, P, pi, pj, kind):
    n_pairs = len(pi)
    out = np.zeros(n_pairs)
    A = U.shape[1]
    for p in range(n_pairs):
        M = _pair_matrix(U, P, pi, pj, p, kind != KIND_QVAR)
        if kind == KIND_DELTA_MAX:
            z = 0.0
            for r in range(A):
                for c in range(A):
                    a = abs(M[r, c])
                    if a > z:
                        z = a
            out[p] = z
        else:
            z1 = 0.0
            z2 = 0.0
            for r in range(A):
                v = _row_var(M, r)
                if v > z1:
                    z1 = v
            for c in range(A):
                v = _col_var(M, c)
                if v > z2:
                    z2 = v
            out[p] = z1 if z1 >= z2 else z2
    return out


@njit(**_OPTS)
def select_mask(z, budget, descending):
    mask = np.zeros(len(z), dtype=np.bool_)
    if budget <= 0:
        return mask
    if descending:
        order = np.argsort(-z, kind="mergesort")
    else:
        order = np.argsort(z, kind="mergesort")
    for k in range(min(budget, len(z))):
        mask[order[k]] = True
    return mask


@njit(**_OPTS)
def q_value(U, P, pi, pj, mask, actions, u_scale, p_scale):
    su = 0.0
    for i in range(U.shape[0]):
        su += U[i, actions[i]]
    sp = 0.0
    for p in range(len(pi)):
        if mask[p]:
            sp += P[p, actions[pi[p]], actions[pj[p]]]
    return su * u_scale + sp * p_scale


@njit(**_OPTS)
def _argmax_rows(S):
    n, A = S.shape
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        b = 0
        for a in range(1, A):
            if S[i, a] > S[i, b]:
                b = a
        out[i] = b
    return out


@njit(**_OPTS)
def _incoming(unary, f2a, ai, aj):
    S = unary.copy()
    A = S.shape[1]
    for e in range(len(ai)):
        for a in range(A):
            S[ai[e], a] += f2a[e, 0, a]
    for e in range(len(ai)):
        for a in range(A):
            S[aj[e], a] += f2a[e, 1, a]
    return S


@njit(**_OPTS)
def max_sum(U, P, pi, pj, mask, iters, normalize, anytime, u_scale, p_scale):
    n, A = U.shape
    n_pairs = len(pi)
    n_act = 0
    for p in range(n_pairs):
        if mask[p]:
            n_act += 1
    act = np.empty(n_act, dtype=np.int64)
    k = 0
    for p in range(n_pairs):
        if mask[p]:
            act[k] = p
            k += 1
    ai = np.empty(n_act, dtype=np.int64)
    aj = np.empty(n_act, dtype=np.int64)
    W = np.empty((n_act, A, A))
    for e in range(n_act):
        ai[e] = pi[act[e]]
        aj[e] = pj[act[e]]
        for r in range(A):
            for c in range(A):
                W[e, r, c] = P[act[e], r, c] * p_scale
    unary = U * u_scale

    a2f = np.zeros((n_act, 2, A))
    f2a = np.zeros((n_act, 2, A))
    a2u = np.zeros((n, A))
    new_a2f = np.zeros((n_act, 2, A))
    new_f2a = np.zeros((n_act, 2, A))

    best = _argmax_rows(U)
    best_v = q_value(U, P, pi, pj, mask, best, u_scale, p_scale)
    last = best
    status = STATUS_OK
    for _ in range(iters):
        S = _incoming(unary, f2a, ai, aj)
        for e in range(n_act):
            for a in range(A):
                new_a2f[e, 0, a] = S[ai[e], a] - f2a[e, 0, a]
                new_a2f[e, 1, a] = S[aj[e], a] - f2a[e, 1, a]
        new_a2u = S - unary
        if normalize:
            for e in range(n_act):
                for s in range(2):
                    m = 0.0
                    for a in range(A):
                        m += new_a2f[e, s, a]
                    m /= A
                    for a in range(A):
                        new_a2f[e, s, a] -= m
            for i in range(n):
                m = 0.0
                for a in range(A):
                    m += new_a2u[i, a]
                m /= A
                for a in range(A):
                    new_a2u[i, a] -= m
        for e in range(n_act):
            for r in range(A):
                best_r = -np.inf
                for c in range(A):
                    x = W[e, r, c] + a2f[e, 1, c]
                    if x > best_r:
                        best_r = x
                new_f2a[e, 0, r] = best_r
            for c in range(A):
                best_c = -np.inf
                for r in range(A):
                    x = W[e, r, c] + a2f[e, 0, r]
                    if x > best_c:
                        best_c = x
                new_f2a[e, 1, c] = best_c
        a2f, new_a2f = new_a2f, a2f
        f2a, new_f2a = new_f2a, f2a
        a2u = new_a2u
        finite = True
        for e in range(n_act):
            for s in range(2):
                for a in range(A):
                    if not (np.isfinite(a2f[e, s, a]) and np.isfinite(f2a[e, s, a])):
                        finite = False
        if not finite:
            status = STATUS_NONFINITE
            break
        S = _incoming(unary, f2a, ai, aj)
        last = _argmax_rows(S)
        if anytime:
            v = q_value(U, P, pi, pj, mask, last, u_scale, p_scale)
            if v > best_v:
                best_v = v
                best = last
    out_a2f = np.zeros((n_pairs, 2, A))
    out_f2a = np.zeros((n_pairs, 2, A))
    for e in range(n_act):
        out_a2f[act[e]] = a2f[e]
        out_f2a[act[e]] = f2a[e]
    if anytime:
        return best, best_v, status, out_a2f, out_f2a, a2u
    v = q_value(U, P, pi, pj, mask, last, u_scale, p_scale)
    return last, v, status, out_a2f, out_f2a, a2u


@njit(**_OPTS)
def gather(table, rows):
    shape = table.shape
    out = np.zeros((len(rows),) + shape[1:])
    for k in range(len(rows)):
        r = rows[k]
        if r >= 0 and r < shape[0]:
            out[k] = table[r]
    return out


@njit(**_OPTS)
def topology(U_tg, P_tg, pi, pj, kind, budget, descending, mask_in):
    if kind == KIND_MASK:
        return mask_in.copy()
    return select_mask(zeta_pairs(U_tg, P_tg, pi, pj, kind), budget, descending)


@njit(**_OPTS)
def act(u_on, p_on, u_tg, p_tg, rows, prows, pi, pj, kind, budget, descending, mask_in, iters, normalize, all_pairs):
    n = len(rows)
    mask = topology(gather(u_tg, rows), gather(p_tg, prows), pi, pj, kind, budget, descending, mask_in)
    n_e = 0
    for p in range(len(mask)):
        if mask[p]:
            n_e += 1
    p_scale = 1.0 / n_e if n_e > 0 else 0.0
    if all_pairs and len(pi) > 0:
        p_scale = 1.0 / len(pi)
    res = max_sum(gather(u_on, rows), gather(p_on, prows), pi, pj, mask, iters, normalize, True, 1.0 / n, p_scale)
    return res[0], n_e, res[2]


@njit(**_OPTS)
def _pair_sparse_into(Ui, Uj, M, variant, gD):
    A = M.shape[0]
    D = np.empty((A, A))
    for r in range(A):
        for c in range(A):
            if variant == LOSS_QVAR:
                D[r, c] = M[r, c]
            else:
                D[r, c] = M[r, c] - Ui[r] - Uj[c]
    val = 0.0
    if variant == LOSS_ABS_DELTA:
        for r in range(A):
            for c in range(A):
                d = D[r, c]
                val += abs(d)
                gD[r, c] = 2.0 * (1.0 if d > 0 else (-1.0 if d < 0 else 0.0))
        return 2.0 * val
    rmean = np.zeros(A)
    cmean = np.zeros(A)
    for r in range(A):
        for c in range(A):
            rmean[r] += D[r, c]
            cmean[c] += D[r, c]
    rmean /= A
    cmean /= A
    rs = 0.0
    cs = 0.0
    for r in range(A):
        for c in range(A):
            rd = D[r, c] - rmean[r]
            cd = D[r, c] - cmean[c]
            rs += rd * rd
            cs += cd * cd
            gD[r, c] = 2.0 * rd / A + 2.0 * cd / A
    return rs / A + cs / A


@njit(**_OPTS)
def td_targets(
    u_tg, p_tg, rows, prows, rew, term, nrows, nprows, pi, pj,
    kind, budget, masks_cur, masks_next, iters, normalize, all_pairs, gamma,
):
    T, n = rows.shape
    n_pairs = len(pi)
    full = np.ones(n_pairs, dtype=np.bool_)
    y = np.empty(T)
    mcs = np.empty((T, n_pairs), dtype=np.bool_)
    for t in range(T):
        yt = rew[t]
        if not term[t]:
            Un = gather(u_tg, nrows[t])
            Pn = gather(p_tg, nprows[t])
            mn = topology(Un, Pn, pi, pj, kind, budget, True, masks_next[t])
            ne = 0
            for p in range(n_pairs):
                if mn[p]:
                    ne += 1
            ps = 1.0 / ne if ne > 0 else 0.0
            if all_pairs and n_pairs > 0:
                ps = 1.0 / n_pairs
            res = max_sum(Un, Pn, pi, pj, mn, iters, normalize, True, 1.0 / n, ps)
            v = res[1]
            if all_pairs and n_pairs > 0:
                v = q_value(Un, Pn, pi, pj, full, res[0], 1.0 / n, 1.0 / n_pairs)
            yt = yt + gamma * v
        y[t] = yt
        if all_pairs:
            mcs[t] = full
        else:
            mcs[t] = topology(gather(u_tg, rows[t]), gather(p_tg, prows[t]), pi, pj, kind, budget, True,
                              masks_cur[t])
    return y, mcs


@njit(**_OPTS)
def td_batch(u_on, p_on, rows, prows, acts, y, mcs, pi, pj, lr, lam_sparse, sparse_variant):
    T, n = rows.shape
    n_pairs = len(pi)
    A = u_on.shape[1]
    td_sum = 0.0
    for t in range(T):
        mc = mcs[t]
        ne = 0
        for p in range(n_pairs):
            if mc[p]:
                ne += 1
        p_scale = 1.0 / ne if ne > 0 else 0.0
        su = 0.0
        for i in range(n):
            su += u_on[rows[t, i], acts[t, i]]
        sp = 0.0
        for p in range(n_pairs):
            if mc[p]:
                sp += p_on[prows[t, p], acts[t, pi[p]], acts[t, pj[p]]]
        q = su * (1.0 / n) + sp * p_scale
        err = y[t] - q
        td_sum += err * err
        step = lr * err
        for i in range(n):
            u_on[rows[t, i], acts[t, i]] += step / n
        for p in range(n_pairs):
            if mc[p]:
                p_on[prows[t, p], acts[t, pi[p]], acts[t, pj[p]]] += step / ne

    if n_pairs == 0 or T == 0:
        return td_sum / max(T, 1), 0.0
    if sparse_variant == LOSS_ABS_DELTA:
        norm = 1.0 / (n * (n - 1) * A * A)
    else:
        norm = 1.0 / (n * (n - 1) * A)
    grads = np.zeros((T, n_pairs, A, A))
    sp_sum = 0.0
    for t in range(T):
        for p in range(n_pairs):
            val = _pair_sparse_into(
                u_on[rows[t, pi[p]]], u_on[rows[t, pj[p]]], p_on[prows[t, p]], sparse_variant, grads[t, p]
            )
            sp_sum += val * norm
    if lam_sparse != 0.0:
        scale = lr * lam_sparse / T
        for t in range(T):
            for p in range(n_pairs):
                row = prows[t, p]
                for r in range(A):
                    for c in range(A):
                        p_on[row, r, c] -= scale * (grads[t, p, r, c] * norm)
    return td_sum / T, sp_sum / T
