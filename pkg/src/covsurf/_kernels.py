"""Numba kernels for CART growing, prediction, OOB votes and permutation importance.

Trees are stored as parallel arrays indexed by node: feature (-1 for a leaf),
threshold (numeric split: go left iff x <= threshold), catmask (categorical split:
go left iff bit `level` is set), left/right child ids and leaf label.

Each tree reseeds numba's per-thread RNG from its own seed, so results do not
depend on how prange distributes trees over threads.
"""

import warnings

import numpy as np
from numba import njit, prange
from numba.core.errors import NumbaWarning

# an old system TBB only means numba picks another threading layer
warnings.filterwarnings("ignore", message="The TBB threading layer", category=NumbaWarning)

SCORE_EPS = 1e-12


@njit(cache=True)
def _lex_less_tuple(mask_a, mask_b, m):
    ia = 0
    ib = 0
    while True:
        # next element of each tuple
        while ia < m and ((mask_a >> ia) & 1) == 0:
            ia += 1
        while ib < m and ((mask_b >> ib) & 1) == 0:
            ib += 1
        if ia == m and ib == m:
            return False
        if ia == m:
            return True
        if ib == m:
            return False
        if ia != ib:
            return ia < ib
        ia += 1
        ib += 1


@njit(cache=True)
def best_split_node(X, y, idx, s, e, cand, is_cat, n_levels, n_classes):
    """Best Gini split of rows idx[s:e] among variables `cand` (ascending).

    Returns (score, var, threshold, mask); var == -1 when no candidate admits a split.
    score is sum_c nL_c^2/nL + sum_c nR_c^2/nR, which the split maximizes
    (equivalently it minimizes the count-weighted Gini of the children).
    """
    nn = e - s
    best_score = -1.0
    best_var = -1
    best_thr = 0.0
    best_mask = np.int64(0)
    tot = np.zeros(n_classes, dtype=np.int64)
    for k in range(s, e):
        tot[y[idx[k]]] += 1
    cl = np.zeros(n_classes, dtype=np.int64)
    vals = np.empty(nn)
    for ci in range(cand.shape[0]):
        j = cand[ci]
        if is_cat[j]:
            m = n_levels[j]
            cnt = np.zeros((m, n_classes), dtype=np.int64)
            for k in range(s, e):
                i = idx[k]
                cnt[np.int64(X[i, j]), y[i]] += 1
            half = np.int64(1) << (m - 1)
            for sub in range(half - 1):
                mask = np.int64(1) | (np.int64(sub) << 1)
                nl = 0
                for c in range(n_classes):
                    cl[c] = 0
                for lv in range(m):
                    if (mask >> lv) & 1:
                        for c in range(n_classes):
                            cl[c] += cnt[lv, c]
                for c in range(n_classes):
                    nl += cl[c]
                if nl == 0 or nl == nn:
                    continue
                sql = 0.0
                sqr = 0.0
                for c in range(n_classes):
                    sql += cl[c] * cl[c]
                    r = tot[c] - cl[c]
                    sqr += r * r
                score = sql / nl + sqr / (nn - nl)
                if score > best_score + SCORE_EPS:
                    best_score = score
                    best_var = j
                    best_mask = mask
                    best_thr = 0.0
                elif best_var == j and score > best_score - SCORE_EPS and _lex_less_tuple(mask, best_mask, m):
                    best_score = score
                    best_mask = mask
        else:
            for k in range(nn):
                vals[k] = X[idx[s + k], j]
            order = np.argsort(vals, kind="mergesort")
            if vals[order[0]] == vals[order[nn - 1]]:
                continue
            for c in range(n_classes):
                cl[c] = 0
            sql = 0.0
            sqr = 0.0
            for c in range(n_classes):
                sqr += tot[c] * tot[c]
            for k in range(nn - 1):
                i = idx[s + order[k]]
                c = y[i]
                sql += 2 * cl[c] + 1
                sqr -= 2 * (tot[c] - cl[c]) - 1
                cl[c] += 1
                a = vals[order[k]]
                b = vals[order[k + 1]]
                if a < b:
                    nl = k + 1
                    score = sql / nl + sqr / (nn - nl)
                    if score > best_score + SCORE_EPS:
                        best_score = score
                        best_var = j
                        thr = 0.5 * (a + b)
                        if thr >= b:
                            thr = a
                        best_thr = thr
                        best_mask = 0
    return best_score, best_var, best_thr, best_mask


@njit(cache=True)
def _goes_left(x, is_cat_j, thr, mask):
    if is_cat_j:
        return ((mask >> np.int64(x)) & 1) == 1
    return x <= thr


@njit(cache=True)
def grow_tree(X, y, n_classes, is_cat, n_levels, mtry, boot,
              feature, threshold, catmask, left, right, label):
    """Grow one unpruned tree on rows `boot` (with multiplicity); returns node count."""
    n = boot.shape[0]
    p = X.shape[1]
    idx = boot.copy()
    tmp = np.empty(n, dtype=np.int64)
    perm = np.arange(p)
    stack_s = np.empty(2 * n + 2, dtype=np.int64)
    stack_e = np.empty(2 * n + 2, dtype=np.int64)
    stack_node = np.empty(2 * n + 2, dtype=np.int64)
    counts = np.zeros(n_classes, dtype=np.int64)
    top = 0
    stack_s[0] = 0
    stack_e[0] = n
    stack_node[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        s = stack_s[top]
        e = stack_e[top]
        node = stack_node[top]
        for c in range(n_classes):
            counts[c] = 0
        for k in range(s, e):
            counts[y[idx[k]]] += 1
        maj = 0
        n_nonzero = 0
        for c in range(n_classes):
            if counts[c] > counts[maj]:
                maj = c
            if counts[c] > 0:
                n_nonzero += 1
        label[node] = maj
        feature[node] = -1
        left[node] = -1
        right[node] = -1
        if n_nonzero <= 1 or e - s <= 1:
            continue
        for k in range(mtry):
            r = k + np.random.randint(0, p - k)
            t = perm[k]
            perm[k] = perm[r]
            perm[r] = t
        cand = np.sort(perm[:mtry])
        score, var, thr, mask = best_split_node(X, y, idx, s, e, cand, is_cat, n_levels, n_classes)
        if var < 0:
            continue
        # stable partition of idx[s:e]
        nl = 0
        for k in range(s, e):
            if _goes_left(X[idx[k], var], is_cat[var], thr, mask):
                tmp[nl] = idx[k]
                nl += 1
        nr = 0
        for k in range(s, e):
            if not _goes_left(X[idx[k], var], is_cat[var], thr, mask):
                tmp[nl + nr] = idx[k]
                nr += 1
        for k in range(e - s):
            idx[s + k] = tmp[k]
        feature[node] = var
        threshold[node] = thr
        catmask[node] = mask
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree is grown first
        stack_s[top] = s + nl
        stack_e[top] = e
        stack_node[top] = n_nodes + 1
        top += 1
        stack_s[top] = s
        stack_e[top] = s + nl
        stack_node[top] = n_nodes
        top += 1
        n_nodes += 2
    return n_nodes


@njit(cache=True, parallel=True)
def grow_forest(X, y, n_classes, is_cat, n_levels, mtry, seeds):
    n = X.shape[0]
    q = seeds.shape[0]
    max_nodes = 2 * n + 1
    feature = np.full((q, max_nodes), -1, dtype=np.int64)
    threshold = np.zeros((q, max_nodes))
    catmask = np.zeros((q, max_nodes), dtype=np.int64)
    left = np.full((q, max_nodes), -1, dtype=np.int64)
    right = np.full((q, max_nodes), -1, dtype=np.int64)
    label = np.zeros((q, max_nodes), dtype=np.int64)
    node_count = np.zeros(q, dtype=np.int64)
    inbag = np.zeros((q, n), dtype=np.int32)
    for t in prange(q):
        np.random.seed(seeds[t])
        boot = np.empty(n, dtype=np.int64)
        for k in range(n):
            boot[k] = np.random.randint(0, n)
            inbag[t, boot[k]] += 1
        node_count[t] = grow_tree(X, y, n_classes, is_cat, n_levels, mtry, boot,
                                  feature[t], threshold[t], catmask[t], left[t], right[t], label[t])
    return feature, threshold, catmask, left, right, label, node_count, inbag


@njit(cache=True)
def _predict_row(feature, threshold, catmask, left, right, label, is_cat, X, i, jo, xo):
    # jo/xo: optional override of column jo with value xo (jo = -1: none)
    node = 0
    while feature[node] >= 0:
        j = feature[node]
        x = xo if j == jo else X[i, j]
        if _goes_left(x, is_cat[j], threshold[node], catmask[node]):
            node = left[node]
        else:
            node = right[node]
    return label[node]


@njit(cache=True, parallel=True)
def predict_trees(feature, threshold, catmask, left, right, label, is_cat, X):
    """Per-tree predictions, shape (q, n)."""
    q = feature.shape[0]
    n = X.shape[0]
    out = np.empty((q, n), dtype=np.int64)
    for t in prange(q):
        for i in range(n):
            out[t, i] = _predict_row(feature[t], threshold[t], catmask[t], left[t], right[t],
                                     label[t], is_cat, X, i, -1, 0.0)
    return out


@njit(cache=True)
def vote(preds, mask, n_classes):
    """Majority vote over trees where mask[t, i]; ties to the smaller class; -1 if no votes."""
    q, n = preds.shape
    out = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        for c in range(n_classes):
            counts[c] = 0
        tot = 0
        for t in range(q):
            if mask[t, i]:
                counts[preds[t, i]] += 1
                tot += 1
        if tot > 0:
            best = 0
            for c in range(1, n_classes):
                if counts[c] > counts[best]:
                    best = c
            out[i] = best
    return out


@njit(cache=True, parallel=True)
def permutation_errors(feature, threshold, catmask, left, right, label, is_cat,
                       X, y, inbag, seeds, n_repeats):
    """Per tree: OOB error and OOB error with each column permuted among OOB rows.

    Returns err (q,) and errperm (q, p); NaN rows for trees without OOB rows.
    Columns a tree never splits on keep errperm == err without drawing.
    """
    q = feature.shape[0]
    n, p = X.shape
    err = np.full(q, np.nan)
    errperm = np.full((q, p), np.nan)
    for t in prange(q):
        n_oob = 0
        for i in range(n):
            if inbag[t, i] == 0:
                n_oob += 1
        if n_oob == 0:
            continue
        oob = np.empty(n_oob, dtype=np.int64)
        k = 0
        for i in range(n):
            if inbag[t, i] == 0:
                oob[k] = i
                k += 1
        wrong = 0
        for k in range(n_oob):
            i = oob[k]
            if _predict_row(feature[t], threshold[t], catmask[t], left[t], right[t],
                            label[t], is_cat, X, i, -1, 0.0) != y[i]:
                wrong += 1
        err[t] = wrong / n_oob
        used = np.zeros(p, dtype=np.bool_)
        for node in range(feature.shape[1]):
            if feature[t, node] >= 0:
                used[feature[t, node]] = True
        np.random.seed(seeds[t])
        col = np.empty(n_oob)
        for j in range(p):
            if not used[j]:
                errperm[t, j] = err[t]
                continue
            for k in range(n_oob):
                col[k] = X[oob[k], j]
            total = 0.0
            for rep in range(n_repeats):
                pidx = np.random.permutation(n_oob)
                wrong = 0
                for k in range(n_oob):
                    i = oob[k]
                    if _predict_row(feature[t], threshold[t], catmask[t], left[t], right[t],
                                    label[t], is_cat, X, i, j, col[pidx[k]]) != y[i]:
                        wrong += 1
                total += wrong / n_oob
            errperm[t, j] = total / n_repeats
    return err, errperm
