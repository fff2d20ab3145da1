"""Vectorized numpy implementations of the hot kernels.

Every function here has a twin of the same name and signature in ``_numba``.
Layouts shared by both backends:

* ``U``: ``(n, A)`` utilities of the agents in the current context.
* ``P``: ``(n_pairs, A, A)`` payoffs, one slice per lexicographic pair
  ``(pi[p], pj[p])`` with ``pi[p] < pj[p]``; rows index the lower agent's action.
* ``mask``: boolean ``(n_pairs,)`` selecting the active edges.
"""

import numpy as np

KIND_MASK = 0
KIND_QVAR = 1
KIND_DELTA_MAX = 2
KIND_DELTA_VAR = 3

LOSS_QVAR = 0
LOSS_ABS_DELTA = 1
LOSS_DELTA_VAR = 2

STATUS_OK = 0
STATUS_NONFINITE = 1


def _delta(U, P, pi, pj):
    return P - U[pi][:, :, None] - U[pj][:, None, :]


def zeta_pairs(U, P, pi, pj, kind):
    """Symmetrized edge score ``max(zeta_ij, zeta_ji)`` for every pair."""
    if len(pi) == 0:
        return np.zeros(0)
    if kind == KIND_QVAR:
        M = P
    else:
        M = _delta(U, P, pi, pj)
    if kind == KIND_DELTA_MAX:
        return np.abs(M).max(axis=(1, 2))
    z_ij = M.var(axis=2).max(axis=1)
    z_ji = M.var(axis=1).max(axis=1)
    return np.maximum(z_ij, z_ji)


def select_mask(z, budget, descending):
    mask = np.zeros(len(z), dtype=np.bool_)
    if budget <= 0:
        return mask
    key = -z if descending else z
    order = np.argsort(key, kind="mergesort")
    mask[order[:budget]] = True
    return mask


def q_value(U, P, pi, pj, mask, actions, u_scale, p_scale):
    su = 0.0
    for i in range(U.shape[0]):
        su += U[i, actions[i]]
    sp = 0.0
    for p in np.flatnonzero(mask):
        sp += P[p, actions[pi[p]], actions[pj[p]]]
    return su * u_scale + sp * p_scale


def _argmax_rows(S):
    return np.argmax(S, axis=1).astype(np.int64)


def max_sum(U, P, pi, pj, mask, iters, normalize, anytime, u_scale, p_scale):
    """Synchronous Max-Sum from zero messages.

    Returns ``(actions, value, status, a2f, f2a, a2u)`` where ``a2f[p, s]`` /
    ``f2a[p, s]`` are the agent->factor / factor->agent messages on side ``s``
    (0 = lower agent, 1 = higher agent) of pairwise factor ``p`` and ``a2u`` the
    agent->unary-factor messages, all after the final round.
    """
    n, A = U.shape
    n_pairs = len(pi)
    act = np.flatnonzero(mask)
    ai, aj = pi[act], pj[act]
    W = P[act] * p_scale
    unary = U * u_scale

    a2f = np.zeros((len(act), 2, A))
    f2a = np.zeros((len(act), 2, A))
    a2u = np.zeros((n, A))

    best = _argmax_rows(U)
    best_v = q_value(U, P, pi, pj, mask, best, u_scale, p_scale)
    last = best
    status = STATUS_OK
    for _ in range(iters):
        S = unary.copy()
        np.add.at(S, ai, f2a[:, 0])
        np.add.at(S, aj, f2a[:, 1])
        new_a2f = np.empty_like(a2f)
        new_a2f[:, 0] = S[ai] - f2a[:, 0]
        new_a2f[:, 1] = S[aj] - f2a[:, 1]
        new_a2u = S - unary
        if normalize:
            new_a2f -= new_a2f.mean(axis=2, keepdims=True)
            new_a2u -= new_a2u.mean(axis=1, keepdims=True)
        new_f2a = np.empty_like(f2a)
        new_f2a[:, 0] = (W + a2f[:, 1][:, None, :]).max(axis=2)
        new_f2a[:, 1] = (W + a2f[:, 0][:, :, None]).max(axis=1)
        a2f, f2a, a2u = new_a2f, new_f2a, new_a2u
        if not (np.isfinite(a2f).all() and np.isfinite(f2a).all()):
            status = STATUS_NONFINITE
            break
        S = unary.copy()
        np.add.at(S, ai, f2a[:, 0])
        np.add.at(S, aj, f2a[:, 1])
        last = _argmax_rows(S)
        if anytime:
            v = q_value(U, P, pi, pj, mask, last, u_scale, p_scale)
            if v > best_v:
                best_v = v
                best = last
    out_a2f = np.zeros((n_pairs, 2, A))
    out_f2a = np.zeros((n_pairs, 2, A))
    out_a2f[act] = a2f
    out_f2a[act] = f2a
    if anytime:
        return best, best_v, status, out_a2f, out_f2a, a2u
    v = q_value(U, P, pi, pj, mask, last, u_scale, p_scale)
    return last, v, status, out_a2f, out_f2a, a2u


def gather(table, rows):
    """Rows of ``table``; negative or out-of-range indices read as zeros."""
    out = np.zeros((len(rows),) + table.shape[1:])
    ok = (rows >= 0) & (rows < table.shape[0])
    out[ok] = table[rows[ok]]
    return out


def topology(U_tg, P_tg, pi, pj, kind, budget, descending, mask_in):
    if kind == KIND_MASK:
        return mask_in
    return select_mask(zeta_pairs(U_tg, P_tg, pi, pj, kind), budget, descending)


def act(u_on, p_on, u_tg, p_tg, rows, prows, pi, pj, kind, budget, descending, mask_in, iters, normalize, all_pairs):
    """Greedy joint action: topology from target tables, Max-Sum on online tables."""
    n = len(rows)
    mask = topology(gather(u_tg, rows), gather(p_tg, prows), pi, pj, kind, budget, descending, mask_in)
    n_e = int(mask.sum())
    p_scale = 1.0 / n_e if n_e else 0.0
    if all_pairs and len(pi):
        p_scale = 1.0 / len(pi)
    a, _, status, _, _, _ = max_sum(
        gather(u_on, rows), gather(p_on, prows), pi, pj, mask, iters, normalize, True, 1.0 / n, p_scale
    )
    return a, n_e, status


def pair_sparse(Ui, Uj, M, variant):
    """Unnormalized sparseness statistic of one unordered pair, summed over both
    orientations, and its gradient w.r.t. the payoff matrix and both utilities."""
    A = M.shape[0]
    if variant == LOSS_QVAR:
        D = M
    else:
        D = M - Ui[:, None] - Uj[None, :]
    if variant == LOSS_ABS_DELTA:
        val = 2.0 * np.abs(D).sum()
        gD = 2.0 * np.sign(D)
    else:
        rdev = D - D.mean(axis=1, keepdims=True)
        cdev = D - D.mean(axis=0, keepdims=True)
        val = (rdev**2).sum() / A + (cdev**2).sum() / A
        gD = 2.0 * rdev / A + 2.0 * cdev / A
    if variant == LOSS_QVAR:
        return val, gD, np.zeros(A), np.zeros(A)
    return val, gD, -gD.sum(axis=1), -gD.sum(axis=0)


def sparse_normalizer(n, A, variant):
    if variant == LOSS_ABS_DELTA:
        return 1.0 / (n * (n - 1) * A * A)
    return 1.0 / (n * (n - 1) * A)


def td_targets(
    u_tg, p_tg, rows, prows, rew, term, nrows, nprows, pi, pj,
    kind, budget, masks_cur, masks_next, iters, normalize, all_pairs, gamma,
):
    """Bootstrap targets and current-state topologies for a batch.

    Both read only the target tables, so they stay valid until the next sync.
    Returns ``(y, masks)`` with ``masks[t]`` the edges active for transition ``t``.
    """
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
            ne = int(mn.sum())
            ps = 1.0 / ne if ne else 0.0
            if all_pairs and n_pairs:
                ps = 1.0 / n_pairs
            a_next, v, _, _, _, _ = max_sum(Un, Pn, pi, pj, mn, iters, normalize, True, 1.0 / n, ps)
            if all_pairs and n_pairs:
                v = q_value(Un, Pn, pi, pj, full, a_next, 1.0 / n, 1.0 / n_pairs)
            yt = yt + gamma * v
        y[t] = yt
        if all_pairs:
            mcs[t] = full
        else:
            mcs[t] = topology(gather(u_tg, rows[t]), gather(p_tg, prows[t]), pi, pj, kind, budget, True,
                              masks_cur[t])
    return y, mcs


def td_batch(u_on, p_on, rows, prows, acts, y, mcs, pi, pj, lr, lam_sparse, sparse_variant):
    """Sequential semi-gradient TD updates toward ``y`` over a batch, then one sparseness step.

    Mutates ``u_on``/``p_on`` in place. Returns ``(mean td_loss, mean sparse_loss)``.
    """
    T, n = rows.shape
    n_pairs = len(pi)
    td_sum = 0.0
    for t in range(T):
        mc = mcs[t]
        ne = int(mc.sum())
        p_scale = 1.0 / ne if ne else 0.0
        a = acts[t]
        Uc = u_on[rows[t]]
        Pc = p_on[prows[t]] if n_pairs else np.zeros((0,) + p_on.shape[1:])
        q = q_value(Uc, Pc, pi, pj, mc, a, 1.0 / n, p_scale)
        err = y[t] - q
        td_sum += err * err
        step = lr * err
        for i in range(n):
            u_on[rows[t, i], a[i]] += step / n
        for p in np.flatnonzero(mc):
            p_on[prows[t, p], a[pi[p]], a[pj[p]]] += step / ne

    sp_sum = 0.0
    if n_pairs == 0 or T == 0:
        return td_sum / max(T, 1), 0.0
    A = u_on.shape[1]
    norm = sparse_normalizer(n, A, sparse_variant)
    grads = np.zeros((T, n_pairs, A, A))
    for t in range(T):
        for p in range(n_pairs):
            val, gM, _, _ = pair_sparse(
                u_on[rows[t, pi[p]]], u_on[rows[t, pj[p]]], p_on[prows[t, p]], sparse_variant
            )
            sp_sum += val * norm
            grads[t, p] = gM * norm
    if lam_sparse != 0.0:
        scale = lr * lam_sparse / T
        for t in range(T):
            for p in range(n_pairs):
                p_on[prows[t, p]] -= scale * grads[t, p]
    return td_sum / T, sp_sum / T
