"""CART growing and traversal kernels.

Two implementations of every kernel live here: a loop version compiled with
numba, and a vectorised numpy version used when numba is disabled. Both walk
nodes in the same preorder, sum targets in the same sequential order and key
random draws by (tree seed, node id, feature), so they build identical trees.

Split convention: a sample goes left when ``x[feature] <= threshold``.
"""

import numpy as np

from .._accel import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
SALT_FEATURES = np.uint64(0x5851F42D4C957F2D)
SALT_THRESHOLDS = np.uint64(0x14057B7EF767814F)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix64_py(x):
    x = x + GOLDEN
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


_mix64 = njit(_mix64_py)


@njit
def _unit(seed, salt, node, j, d):
    ctr = np.uint64(node) * np.uint64(d + 1) + np.uint64(j + 1)
    x = _mix64((seed ^ salt) + ctr * GOLDEN)
    return (x >> _S11) * _INV_2_53


def unit_draws(seed, salt, node, d):
    """Vector of the ``_unit`` draws for features 0..d-1 (numpy path)."""
    ctr = np.uint64(node) * np.uint64(d + 1) + np.arange(1, d + 1, dtype=np.uint64)
    x = _mix64_py((np.uint64(seed) ^ salt) + ctr * GOLDEN)
    return (x >> _S11).astype(np.float64) * _INV_2_53


# --------------------------------------------------------------------------
# numba kernels


@njit
def grow_tree_nb(X, y, samples, order_all, max_depth, min_leaf, max_features, random_split, seed):
    """Grow one tree on ``samples`` (ascending row indices, repeats allowed).

    ``order_all[j]`` is the stable argsort of column j over all rows; it is
    only read in best-split mode and may have zero rows otherwise.
    """
    n = samples.shape[0]
    d = X.shape[1]
    useed = np.uint64(seed)
    Xt = np.ascontiguousarray(X.T)
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    count_at = np.zeros(cap, np.int64)
    depth_at = np.zeros(cap, np.int64)

    # Every node owns the slice [s, e) of ``idx`` and, in best-split mode, of
    # each row of ``presorted``; splits partition those slices stably, so a
    # node's presorted slice equals a stable sort of its ``idx`` slice.
    idx = samples.copy()
    n_sorted = 0 if random_split else d
    presorted = np.empty((n_sorted, n), np.int64)
    if n_sorted > 0:
        multiplicity = np.zeros(X.shape[0], np.int64)
        for i in range(n):
            multiplicity[idx[i]] += 1
        for j in range(n_sorted):
            k = 0
            for r in order_all[j]:
                for _ in range(multiplicity[r]):
                    presorted[j, k] = r
                    k += 1
    go_left = np.zeros(X.shape[0], np.bool_)
    buf = np.empty(n, np.int64)

    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_parent = np.empty(cap, np.int64)
    st_isleft = np.empty(cap, np.bool_)
    all_features = np.arange(d)

    top = 1
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    st_parent[0] = -1
    st_isleft[0] = False
    count = 0
    while top > 0:
        top -= 1
        s = st_start[top]
        e = st_end[top]
        dep = st_depth[top]
        parent = st_parent[top]
        node = count
        count += 1
        if parent >= 0:
            if st_isleft[top]:
                left[parent] = node
            else:
                right[parent] = node
        m = e - s
        tot = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(s, e):
            v = y[idx[i]]
            tot += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = tot / m
        count_at[node] = m
        depth_at[node] = dep
        if dep >= max_depth or m < 2 * min_leaf or ymin == ymax:
            continue

        if max_features < d:
            keys = np.empty(d)
            for j in range(d):
                keys[j] = _unit(useed, SALT_FEATURES, node, j, d)
            candidates = np.sort(np.argsort(keys, kind="mergesort")[:max_features])
        else:
            candidates = all_features

        best_score = -np.inf
        best_f = -1
        best_t = 0.0
        if random_split:
            nc = candidates.shape[0]
            lo = np.full(nc, np.inf)
            hi = np.full(nc, -np.inf)
            for i in range(s, e):
                row = X[idx[i]]
                for c in range(nc):
                    v = row[candidates[c]]
                    if v < lo[c]:
                        lo[c] = v
                    if v > hi[c]:
                        hi[c] = v
            thr = np.empty(nc)
            for c in range(nc):
                t = lo[c] + _unit(useed, SALT_THRESHOLDS, node, candidates[c], d) * (hi[c] - lo[c])
                if t >= hi[c]:
                    t = lo[c]
                thr[c] = t
            sl = np.zeros(nc)
            nl_c = np.zeros(nc, np.int64)
            for i in range(s, e):
                r = idx[i]
                row = X[r]
                yr = y[r]
                for c in range(nc):
                    if row[candidates[c]] <= thr[c]:
                        sl[c] += yr
                        nl_c[c] += 1
            for c in range(nc):
                if not lo[c] < hi[c]:
                    continue
                nl = nl_c[c]
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sr = tot - sl[c]
                score = sl[c] * sl[c] / nl + sr * sr / nr
                if score > best_score:
                    best_score = score
                    best_f = candidates[c]
                    best_t = thr[c]
        else:
            for j in candidates:
                xj = Xt[j]
                rows = presorted[j]
                tot_j = 0.0
                for i in range(s, e):
                    tot_j += y[rows[i]]
                cs = 0.0
                for i in range(s, e - 1):
                    cs += y[rows[i]]
                    nl = i - s + 1
                    nr = m - nl
                    if nr < min_leaf:
                        break
                    if nl < min_leaf:
                        continue
                    a = xj[rows[i]]
                    b = xj[rows[i + 1]]
                    if a < b:
                        rs = tot_j - cs
                        score = cs * cs / nl + rs * rs / nr
                        if score > best_score:
                            best_score = score
                            best_f = j
                            t = (a + b) * 0.5
                            if t >= b:
                                t = a
                            best_t = t
        if best_f < 0:
            continue

        feature[node] = best_f
        threshold[node] = best_t
        xf = Xt[best_f]
        for i in range(s, e):
            r = idx[i]
            go_left[r] = xf[r] <= best_t
        nl = _stable_partition(idx, s, e, go_left, buf)
        for j in range(n_sorted):
            _stable_partition(presorted[j], s, e, go_left, buf)
        # right pushed first so the left subtree is emitted next (preorder)
        st_start[top] = s + nl
        st_end[top] = e
        st_depth[top] = dep + 1
        st_parent[top] = node
        st_isleft[top] = False
        top += 1
        st_start[top] = s
        st_end[top] = s + nl
        st_depth[top] = dep + 1
        st_parent[top] = node
        st_isleft[top] = True
        top += 1

    return (
        feature[:count].copy(),
        threshold[:count].copy(),
        left[:count].copy(),
        right[:count].copy(),
        value[:count].copy(),
        count_at[:count].copy(),
        depth_at[:count].copy(),
    )


@njit
def _stable_partition(arr, s, e, go_left, buf):
    k = 0
    for i in range(s, e):
        if go_left[arr[i]]:
            buf[k] = arr[i]
            k += 1
    nl = k
    for i in range(s, e):
        if not go_left[arr[i]]:
            buf[k] = arr[i]
            k += 1
    for i in range(e - s):
        arr[s + i] = buf[i]
    return nl


@njit
def predict_tree_nb(X, feature, threshold, left, right, value):
    q = X.shape[0]
    out = np.empty(q)
    for r in range(q):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@njit
def predict_forest_nb(X, offsets, feature, threshold, left, right, value):
    """Mean over trees packed back to back; tree t owns nodes offsets[t]:offsets[t+1]."""
    q = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(q)
    for r in range(q):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if X[r, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            acc += value[base + node]
        out[r] = acc / n_trees
    return out


# --------------------------------------------------------------------------
# numpy fallbacks


def _best_split_sorted_np(xn, yn, min_leaf):
    m, c = xn.shape
    order = np.argsort(xn, axis=0, kind="stable")
    xs = np.take_along_axis(xn, order, axis=0)
    cs_all = np.cumsum(yn[order], axis=0)
    tot = cs_all[-1]
    cs = cs_all[:-1]
    nl = np.arange(1, m, dtype=np.float64)[:, None]
    nr = m - nl
    valid = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    rs = tot - cs
    with np.errstate(invalid="ignore", divide="ignore"):
        score = cs * cs / nl + rs * rs / nr
    score = np.where(valid, score, -np.inf)
    pos = np.argmax(score, axis=0)
    col_best = score[pos, np.arange(c)]
    jbest = int(np.argmax(col_best))
    if col_best[jbest] == -np.inf:
        return -1, 0.0
    a = xs[pos[jbest], jbest]
    b = xs[pos[jbest] + 1, jbest]
    t = (a + b) * 0.5
    if t >= b:
        t = a
    return jbest, t


def _best_split_random_np(xn, yn, tot, min_leaf, draws):
    m = xn.shape[0]
    lo = xn.min(axis=0)
    hi = xn.max(axis=0)
    t = lo + draws * (hi - lo)
    t = np.where(t >= hi, lo, t)
    mask = xn <= t
    sl = np.cumsum(np.where(mask, yn[:, None], 0.0), axis=0)[-1]
    nl = mask.sum(axis=0).astype(np.float64)
    nr = m - nl
    sr = tot - sl
    valid = (lo < hi) & (nl >= min_leaf) & (nr >= min_leaf)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = sl * sl / nl + sr * sr / nr
    score = np.where(valid, score, -np.inf)
    jbest = int(np.argmax(score))
    if score[jbest] == -np.inf:
        return -1, 0.0
    return jbest, t[jbest]


def grow_tree_np(X, y, samples, order_all, max_depth, min_leaf, max_features, random_split, seed):
    d = X.shape[1]
    feature, threshold, left, right, value, count_at, depth_at = ([] for _ in range(7))
    # stack entries: (row indices, depth, parent, is_left)
    stack = [(np.array(samples, dtype=np.int64), 0, -1, False)]
    while stack:
        rows, dep, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        yn = y[rows]
        m = rows.shape[0]
        tot = np.cumsum(yn)[-1]
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(tot / m)
        count_at.append(m)
        depth_at.append(dep)
        if dep >= max_depth or m < 2 * min_leaf or yn.min() == yn.max():
            continue
        if max_features < d:
            keys = unit_draws(seed, SALT_FEATURES, node, d)
            candidates = np.sort(np.argsort(keys, kind="stable")[:max_features])
        else:
            candidates = np.arange(d)
        xn = X[np.ix_(rows, candidates)]
        if random_split:
            draws = unit_draws(seed, SALT_THRESHOLDS, node, d)[candidates]
            jpos, t = _best_split_random_np(xn, yn, tot, min_leaf, draws)
        else:
            jpos, t = _best_split_sorted_np(xn, yn, min_leaf)
        if jpos < 0:
            continue
        f = int(candidates[jpos])
        feature[node] = f
        threshold[node] = t
        go_left = X[rows, f] <= t
        stack.append((rows[~go_left], dep + 1, node, False))
        stack.append((rows[go_left], dep + 1, node, True))
    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(count_at, dtype=np.int64),
        np.array(depth_at, dtype=np.int64),
    )


def column_order(X):
    """Stable per-column argsort, shape (d, n)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def apply_tree_np(X, feature, threshold, left, right):
    """Leaf index reached by each row."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            return node
        ra = rows[active]
        na = node[active]
        go_left = X[ra, f[active]] <= threshold[na]
        node[ra] = np.where(go_left, left[na], right[na])


def predict_tree_np(X, feature, threshold, left, right, value):
    return value[apply_tree_np(X, feature, threshold, left, right)]


def predict_forest_np(X, offsets, feature, threshold, left, right, value):
    q = X.shape[0]
    n_trees = offsets.shape[0] - 1
    acc = np.zeros(q)
    for t in range(n_trees):
        sl = slice(offsets[t], offsets[t + 1])
        acc += predict_tree_np(X, feature[sl], threshold[sl], left[sl], right[sl], value[sl])
    return acc / n_trees
