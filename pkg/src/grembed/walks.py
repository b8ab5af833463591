"""Random-walk sampling: uniform, second-order biased, and typed walks.

A walk of length T takes T steps, so each stored walk holds T+1 node
indices (truncated early only when a dead end is hit). Start nodes that
cannot take a single step are skipped and counted, not emitted. Every
start node draws from its own counter-based stream keyed by
(seed, node), so the corpus is byte-identical however starts are
scheduled.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ValidationError
from .rng import node_stream


class AliasTable:
    """O(1) sampling from a fixed discrete distribution (Vose's method)."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ContractError("alias table needs a nonempty 1-D weight vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ContractError("alias weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ContractError("alias weights must not all be zero")
        n = w.size
        prob = w * (n / total)
        alias = np.zeros(n, dtype=np.int64)
        small = [i for i in range(n) if prob[i] < 1.0]
        large = [i for i in range(n) if prob[i] >= 1.0]
        prob = prob.copy()
        while small and large:
            s = small.pop()
            l = large.pop()
            alias[s] = l
            prob[l] = prob[l] - (1.0 - prob[s])
            (small if prob[l] < 1.0 else large).append(l)
        for i in large:
            prob[i] = 1.0
        for i in small:
            prob[i] = 1.0
        self.prob = prob
        self.alias = alias
        self.n = n

    def sample(self, rng, size=None):
        """Draw indices; one uniform pick plus one coin flip per draw."""
        k = rng.integers(0, self.n, size=size)
        accept = rng.random(size=size) < self.prob[k]
        return np.where(accept, k, self.alias[k])


@dataclass(frozen=True)
class WalkConfig:
    """Sampling parameters shared by all walk kinds."""

    length: int = 10
    walks_per_node: int = 10
    p: float = 1.0
    q: float = 1.0
    metapath: tuple = None
    seed: int = 42

    def __post_init__(self):
        if self.length < 2:
            raise ContractError("walk length must be >= 2 steps")
        if self.walks_per_node < 1:
            raise ContractError("walks_per_node must be >= 1")
        if self.p <= 0 or self.q <= 0:
            raise ContractError("p and q must be positive")
        if self.metapath is not None:
            mp = tuple(int(t) for t in self.metapath)
            if not mp:
                raise ContractError("metapath must be nonempty when given")
            object.__setattr__(self, "metapath", mp)


@dataclass
class WalkCorpus:
    """Sampled walks plus bookkeeping for later pair extraction."""

    walks: list
    config: WalkConfig
    node_count: int
    skipped_starts: int = 0
    node_ids: list = field(default=None, repr=False)

    def __len__(self):
        return len(self.walks)

    def __iter__(self):
        return iter(self.walks)

    def dump(self, target):
        """One walk per line, space-separated external node ids."""
        from .graph import _open_text

        fh, close = _open_text(target, "w")
        try:
            ids = self.node_ids or [str(i) for i in range(self.node_count)]
            for walk in self.walks:
                fh.write(" ".join(ids[v] for v in walk))
                fh.write("\n")
        finally:
            if close:
                fh.close()


def load_corpus(source, g, config=None):
    from .graph import _open_text

    fh, close = _open_text(source)
    walks = []
    try:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            walks.append(np.array([g.index_of(t) for t in line.split()],
                                  dtype=np.int64))
    finally:
        if close:
            fh.close()
    cfg = config or WalkConfig(length=max((len(w) - 1 for w in walks), default=2))
    return WalkCorpus(walks, cfg, g.node_count, node_ids=list(g.node_ids))


def _weighted_samplers(g):
    """Per-node neighbor sampler state: (targets, AliasTable-or-None)."""
    samplers = []
    for v in range(g.node_count):
        nbrs = g.neighbors(v)
        if len(nbrs) == 0:
            samplers.append((nbrs, None))
            continue
        w = g.neighbor_weights(v)
        if np.all(w == w[0]):
            samplers.append((nbrs, None))  # uniform fast path
        else:
            samplers.append((nbrs, AliasTable(w)))
    return samplers


def _draw(nbrs, table, rng, size):
    if table is None:
        return nbrs[rng.integers(0, len(nbrs), size=size)]
    return nbrs[table.sample(rng, size=size)]


def sample_uniform_walks(g, config):
    """First-order walks; step probability proportional to edge weight."""
    samplers = _weighted_samplers(g)
    walks = []
    skipped = 0
    T, N = config.length, config.walks_per_node
    for v in range(g.node_count):
        if len(samplers[v][0]) == 0:
            skipped += 1
            continue
        rng = node_stream(config.seed, v)
        batch = np.full((N, T + 1), -1, dtype=np.int64)
        batch[:, 0] = v
        alive = np.arange(N)
        cur = np.full(N, v, dtype=np.int64)
        for t in range(1, T + 1):
            if alive.size == 0:
                break
            nxt = np.full(alive.size, -1, dtype=np.int64)
            for u in np.unique(cur[alive]):
                nbrs, table = samplers[u]
                mask = cur[alive] == u
                if len(nbrs) == 0:
                    continue
                nxt[mask] = _draw(nbrs, table, rng, int(mask.sum()))
            batch[alive, t] = nxt
            keep = nxt >= 0
            cur[alive[keep]] = nxt[keep]
            alive = alive[keep]
        for row in batch:
            walks.append(row[row >= 0])
    return WalkCorpus(walks, config, g.node_count, skipped,
                      node_ids=list(g.node_ids))


def _node2vec_table(g, prev, cur, p, q):
    """Alias table over cur's neighbors biased by distance to prev."""
    nbrs = g.neighbors(cur)
    w = g.neighbor_weights(cur).copy()
    prev_nbrs = g.neighbors(prev)
    back = nbrs == prev
    pos = np.searchsorted(prev_nbrs, nbrs)
    pos = np.clip(pos, 0, max(len(prev_nbrs) - 1, 0))
    dist1 = len(prev_nbrs) > 0
    dist1 = (prev_nbrs[pos] == nbrs) if dist1 else np.zeros(len(nbrs), bool)
    factor = np.where(back, 1.0 / p, np.where(dist1, 1.0, 1.0 / q))
    return nbrs, AliasTable(w * factor)


def sample_node2vec_walks(g, config):
    """Second-order walks: return bias 1/p, stay-close 1, explore 1/q."""
    samplers = _weighted_samplers(g)
    cache = {}
    walks = []
    skipped = 0
    T, N = config.length, config.walks_per_node
    for v in range(g.node_count):
        if len(samplers[v][0]) == 0:
            skipped += 1
            continue
        rng = node_stream(config.seed, v)
        batch = np.full((N, T + 1), -1, dtype=np.int64)
        batch[:, 0] = v
        nbrs, table = samplers[v]
        first = _draw(nbrs, table, rng, N)
        batch[:, 1] = first
        prev = np.full(N, v, dtype=np.int64)
        cur = first.copy()
        alive = np.arange(N)
        for t in range(2, T + 1):
            if alive.size == 0:
                break
            nxt = np.full(alive.size, -1, dtype=np.int64)
            states = prev[alive] * g.node_count + cur[alive]
            for s in np.unique(states):
                pv, cu = divmod(int(s), g.node_count)
                mask = states == s
                if len(g.neighbors(cu)) == 0:
                    continue
                if s not in cache:
                    cache[s] = _node2vec_table(g, pv, cu, config.p, config.q)
                cn, ct = cache[s]
                nxt[mask] = cn[ct.sample(rng, size=int(mask.sum()))]
            batch[alive, t] = nxt
            keep = nxt >= 0
            prev[alive[keep]] = cur[alive[keep]]
            cur[alive[keep]] = nxt[keep]
            alive = alive[keep]
        for row in batch:
            walks.append(row[row >= 0])
    return WalkCorpus(walks, config, g.node_count, skipped,
                      node_ids=list(g.node_ids))


def sample_metapath_walks(g, config):
    """Walks constrained to follow a cyclic node-type pattern.

    Position i of every walk has type metapath[i mod len(metapath)].
    Starts whose type differs from metapath[0] are skipped; a walk with
    no valid-typed neighbor truncates where it stands.
    """
    if config.metapath is None:
        raise ContractError("metapath walks need config.metapath")
    if g.node_types is None:
        raise ValidationError("graph has no node_types")
    mp = config.metapath
    present = set(np.unique(g.node_types).tolist())
    missing = [t for t in mp if t not in present]
    if missing:
        raise ValidationError(f"metapath types absent from graph: {missing}")

    T, N = config.length, config.walks_per_node
    L = len(mp)
    walks = []
    skipped = 0
    types = g.node_types
    for v in range(g.node_count):
        if types[v] != mp[0] or len(g.neighbors(v)) == 0:
            skipped += 1
            continue
        rng = node_stream(config.seed, v)
        batch = np.full((N, T + 1), -1, dtype=np.int64)
        batch[:, 0] = v
        cur = np.full(N, v, dtype=np.int64)
        alive = np.arange(N)
        for t in range(1, T + 1):
            if alive.size == 0:
                break
            want = mp[t % L]
            nxt = np.full(alive.size, -1, dtype=np.int64)
            for u in np.unique(cur[alive]):
                nbrs = g.neighbors(u)
                ok = types[nbrs] == want
                cand = nbrs[ok]
                mask = cur[alive] == u
                if cand.size == 0:
                    continue
                w = g.neighbor_weights(u)[ok]
                if np.all(w == w[0]):
                    nxt[mask] = cand[rng.integers(0, cand.size,
                                                  size=int(mask.sum()))]
                else:
                    nxt[mask] = cand[AliasTable(w).sample(
                        rng, size=int(mask.sum()))]
            batch[alive, t] = nxt
            keep = nxt >= 0
            cur[alive[keep]] = nxt[keep]
            alive = alive[keep]
        for row in batch:
            walks.append(row[row >= 0])
    return WalkCorpus(walks, config, g.node_count, skipped,
                      node_ids=list(g.node_ids))


def extract_pairs(corpus, window):
    """(center, context) pairs within the sliding window, both directions."""
    if window < 1:
        raise ContractError("window must be >= 1")
    if window >= corpus.config.length:
        raise ContractError(
            f"window {window} must be < walk length {corpus.config.length}")
    out = []
    for walk in corpus.walks:
        L = len(walk)
        for off in range(1, window + 1):
            if off >= L:
                break
            a, b = walk[:-off], walk[off:]
            out.append(np.stack([a, b], axis=1))
            out.append(np.stack([b, a], axis=1))
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(out, axis=0)


def extract_offset_pairs(corpus, offset):
    """Pairs at signed hop offset exactly +-offset (skip-length sampling)."""
    if offset < 1:
        raise ContractError("offset must be >= 1")
    if offset >= corpus.config.length:
        raise ContractError(
            f"offset {offset} must be < walk length {corpus.config.length}")
    out = []
    for walk in corpus.walks:
        if len(walk) <= offset:
            continue
        a, b = walk[:-offset], walk[offset:]
        out.append(np.stack([a, b], axis=1))
        out.append(np.stack([b, a], axis=1))
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(out, axis=0)
