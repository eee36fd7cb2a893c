"""Pure numpy/Python kernels.

Reference implementations of the hot loops. The compiled module in
``_core.pyx`` mirrors every function here operation-for-operation, so the
two backends return bitwise-identical results: row orders are stable
(value, then position), running sums are sequential, and every arithmetic
expression is written in the same order.
"""

import numpy as np

NAME = "python"


def _midpoint(lo, hi):
    thr = (lo + hi) / 2.0
    if thr <= lo:
        thr = hi
    return thr


def gbt_best_split(X, rows, g, h, features, G, H, lam, gamma, min_child_weight):
    """Exact greedy split search on the second-order objective.

    ``rows`` are the node's row indices, ``features`` the candidate columns in
    ascending order, ``G``/``H`` the node's gradient/hessian totals. Returns
    ``(feature, threshold, gain, GL, HL)``; feature is -1 when no split has
    positive gain.
    """
    best_f, best_thr, best_gain, best_gl, best_hl = -1, 0.0, 0.0, 0.0, 0.0
    if rows.shape[0] < 2:
        return best_f, best_thr, best_gain, best_gl, best_hl
    gn = g[rows]
    hn = h[rows]
    parent = G * G / (H + lam) if H + lam > 0 else 0.0
    for f in features:
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cand = np.nonzero(vs[:-1] < vs[1:])[0]
        if cand.size == 0:
            continue
        gl = np.cumsum(gn[order])[cand]
        hl = np.cumsum(hn[order])[cand]
        gr = G - gl
        hr = H - hl
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(hl + lam > 0, gl * gl / (hl + lam), 0.0)
            right = np.where(hr + lam > 0, gr * gr / (hr + lam), 0.0)
        gain = 0.5 * (left + right - parent) - gamma
        ok = (hl >= min_child_weight) & (hr >= min_child_weight) & (gain > best_gain)
        if not ok.any():
            continue
        masked = np.where(ok, gain, -np.inf)
        k = int(np.argmax(masked))  # first occurrence => lowest threshold
        best_f = int(f)
        best_gain = float(gain[k])
        best_gl = float(gl[k])
        best_hl = float(hl[k])
        i = cand[k]
        best_thr = _midpoint(float(vs[i]), float(vs[i + 1]))
    return best_f, best_thr, best_gain, best_gl, best_hl


def gini_best_split(X, rows, y, features, min_samples_leaf, min_decrease):
    """Exact greedy Gini split search. ``y`` holds 0/1 integer labels.

    Returns ``(feature, threshold, decrease)``; the decrease is the drop in
    size-weighted Gini impurity per row of the node.
    """
    n = rows.shape[0]
    best_f, best_thr, best_dec = -1, 0.0, min_decrease
    if n < 2:
        return best_f, best_thr, 0.0
    yn = y[rows].astype(np.float64)
    P = float(yn.sum())
    Q = n - P
    parent = (P * P + Q * Q) / n
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    for f in features:
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        pl = np.cumsum(yn[order])[:-1]
        ql = nl - pl
        pr = P - pl
        qr = nr - pr
        dec = ((pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr - parent) / n
        ok = (
            (vs[:-1] < vs[1:])
            & (nl >= min_samples_leaf)
            & (nr >= min_samples_leaf)
            & (dec > best_dec)
        )
        if not ok.any():
            continue
        k = int(np.argmax(np.where(ok, dec, -np.inf)))
        best_f = int(f)
        best_dec = float(dec[k])
        best_thr = _midpoint(float(vs[k]), float(vs[k + 1]))
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, best_thr, best_dec


def predict_tree(feature, threshold, left, right, value, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.nonzero(feature[node] >= 0)[0]
    while active.size:
        nd = node[active]
        go_left = X[active, feature[nd]] < threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return value[node].astype(np.float64)


def shap_weight_table(depth):
    """W[a, c] = (a-1)! c! / (a+c)! for a >= 1, as floats; W[0, :] = 0."""
    from math import comb

    W = np.zeros((depth + 2, depth + 2))
    for a in range(1, depth + 2):
        for c in range(0, depth + 2):
            W[a, c] = 1.0 / (a * comb(a + c, a))
    return W


def interventional_tree_shap(feature, threshold, left, right, value, x, B, W, phi):
    """Accumulate into ``phi`` the Shapley values of ``f(x_S, b_rest) `` summed
    over every background row ``b`` in ``B`` (not averaged).

    A leaf reached with ``a`` features pinned to ``x`` and ``c`` pinned to ``b``
    is worth ``v * 1[x-set in S, b-set outside S]``; its Shapley value is
    ``v*W[a,c]`` for each x-feature and ``-v*W[c,a]`` for each b-feature.
    """
    d = x.shape[0]
    state = np.zeros(d, dtype=np.int8)
    path = []

    def recurse(node, b, a, c):
        f = feature[node]
        if f < 0:
            v = value[node]
            for j in path:
                if state[j] == 1:
                    phi[j] += v * W[a, c]
                else:
                    phi[j] -= v * W[c, a]
            return
        thr = threshold[node]
        x_left = x[f] < thr
        b_left = b[f] < thr
        if x_left == b_left or state[f] == 1:
            recurse(left[node] if x_left else right[node], b, a, c)
        elif state[f] == 2:
            recurse(left[node] if b_left else right[node], b, a, c)
        else:
            path.append(f)
            state[f] = 1
            recurse(left[node] if x_left else right[node], b, a + 1, c)
            state[f] = 2
            recurse(left[node] if b_left else right[node], b, a, c + 1)
            state[f] = 0
            path.pop()

    for i in range(B.shape[0]):
        recurse(0, B[i], 0, 0)
