"""Compiled inner loops for tree construction and ball-tree search.

The brute-force and ball-tree builders call the same ``vec_dist`` and
``score`` functions, so both paths compute the same floating point value for
every candidate and their argmax (with its tie-break) agrees exactly.

Ball-tree geometry arrays (``centers``, ``radius`` ...) live in "search space":
the raw vectors for euclidean queries, unit-normalised vectors for cosine
queries.  Exact candidate distances are always taken on the raw vectors.
"""
import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)

# slack applied to ball lower bounds so rounding never makes pruning unsafe
_REL_SLACK = 1e-9
_ABS_SLACK = 1e-12


@njit(**_JIT)
def vec_dist(u, unorm, v, vnorm, cosine):
    if cosine:
        dot = 0.0
        for k in range(u.shape[0]):
            dot += u[k] * v[k]
        c = 1.0 - dot / (unorm * vnorm)
        if c < 0.0:
            return 0.0
        if c > 2.0:
            return 2.0
        return c
    s = 0.0
    for k in range(u.shape[0]):
        t = u[k] - v[k]
        s += t * t
    return np.sqrt(s)


@njit(**_JIT)
def score(dist, logpow, p, md, mp, eps):
    m = dist if dist > eps else eps
    s = p * (1.0 / (m * m)) / md
    if mp > 0.0:
        s += (1.0 - p) * logpow / mp
    return s


@njit(**_JIT)
def ball_lower_bound(centers, radius, node, g, cosine):
    s = 0.0
    for k in range(g.shape[0]):
        t = centers[node, k] - g[k]
        s += t * t
    dc = np.sqrt(s)
    r = radius[node]
    lb = dc - r - _REL_SLACK * (dc + r) - _ABS_SLACK
    if lb <= 0.0:
        return 0.0
    if cosine:
        # cosine distance of unit vectors is half the squared chord
        lb = 0.5 * lb * lb - _ABS_SLACK
        if lb < 0.0:
            return 0.0
    return lb


@njit(**_JIT)
def score_bound(lb, maxlog, p, md, mp, eps):
    return score(lb, maxlog, p, md, mp, eps)


@njit(**_JIT)
def activate(node_parent, leaf_of, active_count, max_logpow, entity, logpow):
    node = leaf_of[entity]
    while node >= 0:
        active_count[node] += 1
        if logpow > max_logpow[node]:
            max_logpow[node] = logpow
        node = node_parent[node]


@njit(**_JIT)
def nearest_active(Xp, normsp, q, qnorm, g, cosine,
                   idx, start, end, left, centers, radius,
                   active_count, activep, stack, stack_lb):
    """Exact nearest active entity; ties go to the lowest entity index.

    ``Xp``, ``normsp`` and ``activep`` are indexed by tree position, so leaf
    scans read contiguous memory; ``idx`` maps positions to entities.
    """
    best_d = np.inf
    best_i = -1
    stack[0] = 0
    stack_lb[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if stack_lb[top] > best_d:
            continue
        if left[node] < 0:
            for pos in range(start[node], end[node]):
                if not activep[pos]:
                    continue
                d = vec_dist(Xp[pos], normsp[pos], q, qnorm, cosine)
                if d < best_d or (d == best_d and idx[pos] < best_i):
                    best_d = d
                    best_i = idx[pos]
            continue
        a = left[node]
        b = a + 1
        la = ball_lower_bound(centers, radius, a, g, cosine) if active_count[a] > 0 else np.inf
        lb_ = ball_lower_bound(centers, radius, b, g, cosine) if active_count[b] > 0 else np.inf
        # push the farther child first so the nearer one is explored first
        if la <= lb_:
            if lb_ <= best_d:
                stack[top] = b
                stack_lb[top] = lb_
                top += 1
            if la <= best_d:
                stack[top] = a
                stack_lb[top] = la
                top += 1
        else:
            if la <= best_d:
                stack[top] = a
                stack_lb[top] = la
                top += 1
            if lb_ <= best_d:
                stack[top] = b
                stack_lb[top] = lb_
                top += 1
    return best_i, best_d


@njit(**_JIT)
def best_scoring_active(Xp, normsp, q, qnorm, g, cosine,
                        idx, start, end, left, centers, radius,
                        active_count, max_logpow, activep, rankp, logpowp,
                        p, md, mp, eps, best, best_rank, best_i,
                        stack, stack_ub):
    """Branch-and-bound argmax of the parent score over active entities.

    Starts from an incumbent ``(best, best_rank, best_i)``; ties go to the
    lowest rank, then the lowest entity index.  Arrays suffixed ``p`` are
    indexed by tree position.
    """
    stack[0] = 0
    stack_ub[0] = np.inf
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if stack_ub[top] < best:
            continue
        if left[node] < 0:
            for pos in range(start[node], end[node]):
                if not activep[pos]:
                    continue
                d = vec_dist(Xp[pos], normsp[pos], q, qnorm, cosine)
                s = score(d, logpowp[pos], p, md, mp, eps)
                r = rankp[pos]
                if s > best or (s == best and (r < best_rank
                                               or (r == best_rank and idx[pos] < best_i))):
                    best = s
                    best_rank = r
                    best_i = idx[pos]
            continue
        a = left[node]
        b = a + 1
        ua = -np.inf
        ub = -np.inf
        if active_count[a] > 0:
            ua = score_bound(ball_lower_bound(centers, radius, a, g, cosine),
                             max_logpow[a], p, md, mp, eps)
        if active_count[b] > 0:
            ub = score_bound(ball_lower_bound(centers, radius, b, g, cosine),
                             max_logpow[b], p, md, mp, eps)
        # push the weaker child first so the stronger one is explored first
        if ua >= ub:
            if active_count[b] > 0 and ub >= best:
                stack[top] = b
                stack_ub[top] = ub
                top += 1
            if active_count[a] > 0 and ua >= best:
                stack[top] = a
                stack_ub[top] = ua
                top += 1
        else:
            if active_count[a] > 0 and ua >= best:
                stack[top] = a
                stack_ub[top] = ua
                top += 1
            if active_count[b] > 0 and ub >= best:
                stack[top] = b
                stack_ub[top] = ub
                top += 1
    return best_i, best


@njit(**_JIT)
def knn(Xp, normsp, q, qnorm, g, cosine, k, exclude,
        idx, start, end, left, centers, radius, stack, stack_lb):
    """Exact k nearest points (activation ignored), sorted by (distance, index)."""
    out_d = np.full(k, np.inf)
    out_i = np.full(k, np.iinfo(np.int64).max)
    stack[0] = 0
    stack_lb[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if stack_lb[top] > out_d[k - 1]:
            continue
        if left[node] < 0:
            for pos in range(start[node], end[node]):
                i = idx[pos]
                if i == exclude:
                    continue
                d = vec_dist(Xp[pos], normsp[pos], q, qnorm, cosine)
                if d < out_d[k - 1] or (d == out_d[k - 1] and i < out_i[k - 1]):
                    j = k - 1
                    while j > 0 and (out_d[j - 1] > d or (out_d[j - 1] == d and out_i[j - 1] > i)):
                        out_d[j] = out_d[j - 1]
                        out_i[j] = out_i[j - 1]
                        j -= 1
                    out_d[j] = d
                    out_i[j] = i
            continue
        a = left[node]
        b = a + 1
        la = ball_lower_bound(centers, radius, a, g, cosine)
        lb_ = ball_lower_bound(centers, radius, b, g, cosine)
        if la <= lb_:
            stack[top] = b
            stack_lb[top] = lb_
            stack[top + 1] = a
            stack_lb[top + 1] = la
        else:
            stack[top] = a
            stack_lb[top] = la
            stack[top + 1] = b
            stack_lb[top + 1] = lb_
        top += 2
    return out_i, out_d


@njit(**_JIT)
def build_accelerated(X, norms, G, cosine, order, powers, logpow,
                      root_vec, root_norm, p, eps,
                      idx, start, end, left, node_parent, leaf_of, centers, radius):
    n = X.shape[0]
    m = start.shape[0]
    pos_of = np.empty(n, dtype=np.int64)
    for pos in range(n):
        pos_of[idx[pos]] = pos
    Xp = np.empty_like(X)
    normsp = np.empty(n)
    logpowp = np.empty(n)
    for pos in range(n):
        Xp[pos] = X[idx[pos]]
        normsp[pos] = norms[idx[pos]]
        logpowp[pos] = logpow[idx[pos]]
    parent = np.full(n, -2, dtype=np.int64)
    length = np.zeros(n)
    active_count = np.zeros(m, dtype=np.int64)
    max_logpow = np.full(m, -np.inf)
    activep = np.zeros(n, dtype=np.bool_)
    rankp = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    rank = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    stack = np.empty(m + 2, dtype=np.int64)
    stack_f = np.empty(m + 2)
    max_pow = powers.max()
    sum_pow = 0.0
    max_lp = -np.inf
    for step in range(n):
        e = order[step]
        q = X[e]
        qnorm = norms[e]
        g = G[e]
        root_pow = max_pow if step == 0 else sum_pow / step
        lroot = np.log(root_pow)
        mp = lroot if lroot > max_lp else max_lp
        droot = vec_dist(root_vec, root_norm, q, qnorm, cosine)
        mind = droot
        nn = -1
        dn = np.inf
        if step > 0 and p > 0.0:
            nn, dn = nearest_active(Xp, normsp, q, qnorm, g, cosine, idx, start, end, left,
                                    centers, radius, active_count, activep, stack, stack_f)
            if dn < mind:
                mind = dn
        mm = mind if mind > eps else eps
        md = 1.0 / (mm * mm)
        best = score(droot, lroot, p, md, mp, eps)
        best_i = -1
        best_rank = -1
        if nn >= 0:
            # the nearest neighbour is a strong incumbent: tighter pruning from the start
            s_nn = score(dn, logpow[nn], p, md, mp, eps)
            if s_nn > best:
                best = s_nn
                best_i = nn
                best_rank = rank[nn]
        if step > 0:
            best_i, best = best_scoring_active(
                Xp, normsp, q, qnorm, g, cosine, idx, start, end, left, centers, radius,
                active_count, max_logpow, activep, rankp, logpowp,
                p, md, mp, eps, best, best_rank, best_i, stack, stack_f)
        parent[e] = best_i
        if best_i < 0:
            length[e] = droot
        else:
            length[e] = vec_dist(X[best_i], norms[best_i], q, qnorm, cosine)
        activate(node_parent, leaf_of, active_count, max_logpow, e, logpow[e])
        activep[pos_of[e]] = True
        rankp[pos_of[e]] = step
        rank[e] = step
        sum_pow += powers[e]
        if logpow[e] > max_lp:
            max_lp = logpow[e]
    return parent, length


@njit(**_JIT)
def build_brute(X, norms, cosine, order, powers, logpow, root_vec, root_norm, p, eps):
    n = X.shape[0]
    parent = np.full(n, -2, dtype=np.int64)
    length = np.zeros(n)
    dbuf = np.empty(n)
    max_pow = powers.max()
    sum_pow = 0.0
    max_lp = -np.inf
    for step in range(n):
        e = order[step]
        q = X[e]
        qnorm = norms[e]
        root_pow = max_pow if step == 0 else sum_pow / step
        lroot = np.log(root_pow)
        mp = lroot if lroot > max_lp else max_lp
        droot = vec_dist(root_vec, root_norm, q, qnorm, cosine)
        mind = droot
        for s in range(step):
            j = order[s]
            d = vec_dist(X[j], norms[j], q, qnorm, cosine)
            dbuf[s] = d
            if d < mind:
                mind = d
        mm = mind if mind > eps else eps
        md = 1.0 / (mm * mm)
        best = score(droot, lroot, p, md, mp, eps)
        best_s = -1
        # candidates scanned in insertion order: strict '>' keeps the earliest
        for s in range(step):
            sc = score(dbuf[s], logpow[order[s]], p, md, mp, eps)
            if sc > best:
                best = sc
                best_s = s
        if best_s < 0:
            parent[e] = -1
            length[e] = droot
        else:
            parent[e] = order[best_s]
            length[e] = dbuf[best_s]
        sum_pow += powers[e]
        if logpow[e] > max_lp:
            max_lp = logpow[e]
    return parent, length


@njit(**_JIT)
def score_all(X, norms, q, qnorm, cosine, cand, logpow, p, md, mp, eps):
    out = np.empty(cand.shape[0])
    for t in range(cand.shape[0]):
        j = cand[t]
        out[t] = score(vec_dist(X[j], norms[j], q, qnorm, cosine), logpow[j], p, md, mp, eps)
    return out


@njit(**_JIT)
def dist_matrix(A, anorms, B, bnorms, cosine):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = vec_dist(A[i], anorms[i], B[j], bnorms[j], cosine)
    return out
