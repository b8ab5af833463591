"""Independent reference implementations used to derive expected values.

Everything here is written the slow, obvious way on purpose: direct
file scans, Floyd-Warshall, triple-loop matrix products, brute-force
pair counting. Tests compare package output against these, never the
other way round.
"""

import numpy as np


def scan_edge_file(path):
    """Count nodes / undirected edges / per-id degree straight off the file."""
    degree = {}
    edges = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, v = line.split()[:2]
            key = (u, v) if u <= v else (v, u)
            if key in edges:
                continue
            edges.add(key)
            degree[u] = degree.get(u, 0) + 1
            degree[v] = degree.get(v, 0) + 1
    return degree, edges


def floyd_warshall_hops(edge_pairs, n):
    """All-pairs hop distances via O(n^3) relaxation; inf if unreachable."""
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for i, j in edge_pairs:
        dist[i, j] = min(dist[i, j], 1.0)
        dist[j, i] = min(dist[j, i], 1.0)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if dist[i, k] + dist[k, j] < dist[i, j]:
                    dist[i, j] = dist[i, k] + dist[k, j]
    return dist


def matmul_triple_loop(a, b):
    a, b = np.asarray(a), np.asarray(b)
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def matrix_power_loop(a, k):
    out = np.eye(len(a))
    for _ in range(k):
        out = matmul_triple_loop(out, a)
    return out


def jaccard_neighborhoods(adj):
    """Pairwise |N(i) & N(j)| / |N(i) | N(j)| from a dense 0/1 adjacency."""
    adj = np.asarray(adj) > 0
    n = len(adj)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ni = set(np.nonzero(adj[i])[0].tolist())
            nj = set(np.nonzero(adj[j])[0].tolist())
            union = ni | nj
            out[i, j] = len(ni & nj) / len(union) if union else 0.0
    return out


def averaged_visit_law(transition, v, T):
    """(1/T) sum_{t=1..T} row v of P^t, computed by repeated row-vector products."""
    p = np.asarray(transition, dtype=np.float64)
    row = np.zeros(p.shape[0])
    row[v] = 1.0
    acc = np.zeros(p.shape[0])
    for _ in range(T):
        row = row @ p
        acc += row
    return acc / T


def window_pairs(walks, window):
    """All (center, context) pairs within +-window offsets, both directions."""
    pairs = []
    for walk in walks:
        L = len(walk)
        for i in range(L):
            for off in range(1, window + 1):
                if i + off < L:
                    pairs.append((walk[i], walk[i + off]))
                if i - off >= 0:
                    pairs.append((walk[i], walk[i - off]))
    return pairs


def pmi_matrix(walks, window, n):
    """PPMI from brute-force unordered windowed co-occurrence counts."""
    co = np.zeros((n, n))
    for walk in walks:
        L = len(walk)
        for i in range(L):
            for off in range(1, window + 1):
                j = i + off
                if j < L:
                    co[walk[i], walk[j]] += 1.0
                    co[walk[j], walk[i]] += 1.0
    total = co.sum()
    marg = co.sum(axis=1)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if co[i, j] > 0 and marg[i] > 0 and marg[j] > 0:
                out[i, j] = max(0.0, np.log(co[i, j] * total / (marg[i] * marg[j])))
    return out


def auc_brute_force(pos_scores, neg_scores):
    """Mean over all (pos, neg) pairs of 1[pos > neg] + 0.5 * 1[tie]."""
    wins = 0.0
    for p in pos_scores:
        for q in neg_scores:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos_scores) * len(neg_scores))


def dtw_cost_table(a, b, cost_fn):
    """Classic O(len(a) * len(b)) dynamic-time-warping table; returns min cost."""
    la, lb = len(a), len(b)
    if la == 0 and lb == 0:
        return 0.0
    if la == 0 or lb == 0:
        return np.inf
    table = np.full((la + 1, lb + 1), np.inf)
    table[0, 0] = 0.0
    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            c = cost_fn(a[i - 1], b[j - 1])
            table[i, j] = c + min(table[i - 1, j], table[i, j - 1],
                                  table[i - 1, j - 1])
    return float(table[la, lb])


def heat_kernel_dense(laplacian, s):
    """e^{-s L} via eigendecomposition done longhand."""
    lam, u = np.linalg.eigh(np.asarray(laplacian, dtype=np.float64))
    return u @ np.diag(np.exp(-s * lam)) @ u.T


def nmi_from_counts(a, b):
    """Arithmetic-mean-normalized mutual information of two labelings."""
    a, b = np.asarray(a), np.asarray(b)
    n = a.size
    ca, cb = np.unique(a), np.unique(b)
    joint = np.zeros((ca.size, cb.size))
    for i, x in enumerate(ca):
        for j, y in enumerate(cb):
            joint[i, j] = np.sum((a == x) & (b == y)) / n
    pa, pb = joint.sum(axis=1), joint.sum(axis=0)
    mi = 0.0
    for i in range(ca.size):
        for j in range(cb.size):
            if joint[i, j] > 0:
                mi += joint[i, j] * np.log(joint[i, j] / (pa[i] * pb[j]))
    ha = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    hb = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    if ha == 0.0 or hb == 0.0:
        return 0.0
    return mi / ((ha + hb) / 2.0)
