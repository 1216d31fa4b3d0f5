"""Structured synthetic benchmarks: grid/torus scenes, kNN viewing graphs with
clean-triangle witnesses, tangent-plane noise and coherent corruption.

Randomness comes from Philox (counter-based, 128-bit key) with key
``seed + (stream << 64)``; streams are 0 = scene geometry, 1 = direction
noise, 2 = corrupted-edge sampling, 3 = latent distractor layout.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .viewgraph import ViewingGraph

STREAMS = {"scene": 0, "noise": 1, "corruption": 2, "latent": 3}
_ALL_PAIRS_MAX_N = 3000
WITNESS_MIN_SINE = 0.05


def rng_stream(seed, name):
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) + (STREAMS[name] << 64)
    return np.random.Generator(np.random.Philox(key=key))


class InfeasibleConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    geometry: str = "grid"
    n: int = 100
    k_good: int = 8
    q: float = 0.0
    sigma: float = 0.0
    model: str = "uniform"
    seed: int = 0
    spacing: float = 1.0
    z_jitter: float = 0.05
    torus_R: float = 2.0
    torus_r: float = 0.5
    angular_jitter: float = 0.25
    bad_node_fraction: float = 0.1
    local_fraction: float = 0.5
    far_quantile: float = 0.8
    local_k_factor: int = 3

    def validate(self):
        if self.geometry not in ("grid", "torus"):
            raise InfeasibleConfigError(f"unknown geometry {self.geometry!r}")
        if self.model not in ("uniform", "clustered"):
            raise InfeasibleConfigError(f"unknown corruption model {self.model!r}")
        if self.n < 4:
            raise InfeasibleConfigError("n must be >= 4")
        if self.k_good < 3:
            raise InfeasibleConfigError("k_good must be >= 3")
        if self.n < self.k_good + 1:
            raise InfeasibleConfigError("n must exceed k_good")
        if not 0.0 <= self.q < 1.0:
            raise InfeasibleConfigError("q must lie in [0, 1)")
        if self.sigma < 0:
            raise InfeasibleConfigError("sigma must be >= 0")
        if not 0.0 < self.bad_node_fraction <= 1.0:
            raise InfeasibleConfigError("bad_node_fraction must lie in (0, 1]")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class SyntheticScene:
    config: SceneConfig
    locations: np.ndarray   # (n, 3) ground truth
    edges: np.ndarray       # (E, 2), i < j, lexicographic
    corrupt: np.ndarray     # (E,) bool
    dirs: np.ndarray        # (E, 3) generated measurements
    latent: np.ndarray      # (n, 3) distractor layout y_i = (a_i, b_i, 0)
    bad_nodes: np.ndarray

    @property
    def n(self):
        return len(self.locations)

    @property
    def seed(self):
        return self.config.seed

    def graph(self):
        return ViewingGraph(self.n, self.edges, self.dirs)

    def true_directions(self):
        d = self.locations[self.edges[:, 0]] - self.locations[self.edges[:, 1]]
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    @property
    def corrupt_fraction(self):
        return float(self.corrupt.mean()) if len(self.corrupt) else 0.0


def _locations(cfg):
    rng = rng_stream(cfg.seed, "scene")
    n = cfg.n
    if cfg.geometry == "grid":
        side = math.ceil(math.sqrt(n))
        idx = np.arange(n)
        x = np.empty((n, 3))
        x[:, 0] = (idx % side) * cfg.spacing
        x[:, 1] = (idx // side) * cfg.spacing
        x[:, 2] = rng.uniform(-cfg.z_jitter, cfg.z_jitter, n)
        return x
    jit = rng.uniform(-cfg.angular_jitter, cfg.angular_jitter, n)
    theta = 2.0 * np.pi * (np.arange(n) + jit) / n
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    R, r = cfg.torus_R, cfg.torus_r
    return np.column_stack([
        (R + r * np.cos(phi)) * np.cos(theta),
        (R + r * np.cos(phi)) * np.sin(theta),
        r * np.sin(phi),
    ])


def _knn_pairs(tree, x, k):
    k = min(k, len(x) - 1)
    _, nbr = tree.query(x, k=k + 1)
    i = np.repeat(np.arange(len(x)), k)
    j = nbr[:, 1:].ravel()
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    keys = np.unique(lo * len(x) + hi)
    return keys


def _keys_to_pairs(keys, n):
    return np.column_stack([keys // n, keys % n])


class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.p[max(ra, rb)] = min(ra, rb)
        return True


def _sorted_by_distance(keys, x, n):
    pairs = _keys_to_pairs(keys, n)
    dist = np.linalg.norm(x[pairs[:, 0]] - x[pairs[:, 1]], axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0], dist))
    return pairs[order]


def _repair_connectivity(keys, x, tree, k):
    n = len(x)
    dsu = _DSU(n)
    for i, j in _keys_to_pairs(keys, n).tolist():
        dsu.union(i, j)
    ncomp = len({dsu.find(v) for v in range(n)})
    extra = []
    kk = k
    while ncomp > 1:
        kk = min(2 * kk, n - 1)
        cand = np.setdiff1d(_knn_pairs(tree, x, kk), keys, assume_unique=True)
        for i, j in _sorted_by_distance(cand, x, n).tolist():
            if dsu.union(i, j):
                extra.append(i * n + j)
                ncomp -= 1
                if ncomp == 1:
                    break
        if kk == n - 1:
            break
    return np.union1d(keys, np.array(extra, dtype=np.int64))


def _min_sine(x, i, j, w):
    d1 = x[i] - x[j]
    d2 = x[j] - x[w]
    d3 = x[w] - x[i]
    d1, d2, d3 = (v / np.linalg.norm(v) for v in (d1, d2, d3))
    return min(np.linalg.norm(np.cross(d2, d3)), np.linalg.norm(np.cross(d3, d1)),
               np.linalg.norm(np.cross(d1, d2)))


def _min_sine_all(x, i, j):
    """_min_sine(x, i, j, w) for every w at once; -1 at w = i, j."""
    d1 = x[i] - x[j]
    d2 = x[j] - x
    d3 = x - x[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        d1 = d1 / np.linalg.norm(d1)
        d2 = d2 / np.linalg.norm(d2, axis=1, keepdims=True)
        d3 = d3 / np.linalg.norm(d3, axis=1, keepdims=True)
        out = np.minimum(np.minimum(np.linalg.norm(np.cross(d2, d3), axis=1),
                                    np.linalg.norm(np.cross(d3, d1), axis=1)),
                         np.linalg.norm(np.cross(d1, d2), axis=1))
    out[[i, j]] = -1.0
    return np.nan_to_num(out, nan=-1.0)


def _repair_witnesses(keys, x):
    """Give every edge an all-clean, non-degenerate triangle by adding edges."""
    n = len(x)
    nbrs = [set() for _ in range(n)]
    for i, j in _keys_to_pairs(keys, n).tolist():
        nbrs[i].add(j)
        nbrs[j].add(i)
    added = set()
    for i, j in _sorted_by_distance(keys, x, n).tolist():
        common = nbrs[i] & nbrs[j]
        if any(_min_sine(x, i, j, w) >= WITNESS_MIN_SINE for w in sorted(common)):
            continue
        cand = sorted((nbrs[i] | nbrs[j]) - {i, j}, key=lambda w: (
            np.linalg.norm(x[i] - x[w]) + np.linalg.norm(x[j] - x[w]), w))
        cand = [w for w in cand if _min_sine(x, i, j, w) >= WITNESS_MIN_SINE]
        if not cand:
            ms = _min_sine_all(x, i, j)
            ok = np.flatnonzero(ms >= WITNESS_MIN_SINE)
            if len(ok):
                span = np.linalg.norm(x[ok] - x[i], axis=1) + np.linalg.norm(x[ok] - x[j], axis=1)
                cand = [int(ok[np.lexsort((ok, span))[0]])]
            else:
                # a very short edge far from everything: take the best-shaped witness
                cand = [int(np.argmax(ms))]
        w = cand[0]
        for a in (i, j):
            if w not in nbrs[a]:
                nbrs[a].add(w)
                nbrs[w].add(a)
                added.add(min(a, w) * n + max(a, w))
    if added:
        keys = np.union1d(keys, np.array(sorted(added), dtype=np.int64))
    return keys


def _far_threshold(x, cfg, rng):
    n = len(x)
    if n <= _ALL_PAIRS_MAX_N:
        return float(np.quantile(pdist(x), cfg.far_quantile))
    i = rng.integers(0, n, 200_000)
    j = rng.integers(0, n, 200_000)
    ok = i != j
    return float(np.quantile(np.linalg.norm(x[i[ok]] - x[j[ok]], axis=1), cfg.far_quantile))


def _sample_far(x, thr, forbidden, count, rng, incident=None):
    """``count`` new far pairs (distance > thr), optionally touching ``incident`` nodes."""
    n = len(x)
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    if n <= _ALL_PAIRS_MAX_N:
        iu, ju = np.triu_indices(n, 1)
        if incident is not None:
            mark = np.zeros(n, dtype=bool)
            mark[incident] = True
            sel = mark[iu] | mark[ju]
            iu, ju = iu[sel], ju[sel]
        dist = np.linalg.norm(x[iu] - x[ju], axis=1)
        keys = iu.astype(np.int64) * n + ju
        keys = keys[dist > thr]
        keys = np.setdiff1d(keys, forbidden)
        if len(keys) < count:
            raise InfeasibleConfigError("not enough far-range candidate pairs for the corruption target")
        return np.sort(rng.choice(keys, count, replace=False))
    chosen = set()
    forb = set(forbidden.tolist())
    tries = 0
    while len(chosen) < count:
        tries += 1
        if tries > 1000 * count + 10_000:
            raise InfeasibleConfigError("far-range sampling did not reach the corruption target")
        i = int(rng.choice(incident)) if incident is not None else int(rng.integers(0, n))
        j = int(rng.integers(0, n))
        if i == j:
            continue
        a, b = min(i, j), max(i, j)
        key = a * n + b
        if key in forb or key in chosen:
            continue
        if np.linalg.norm(x[a] - x[b]) <= thr:
            continue
        chosen.add(key)
    return np.array(sorted(chosen), dtype=np.int64)


def _corrupt_edges(cfg, x, tree, clean_keys):
    n = len(x)
    rng = rng_stream(cfg.seed, "corruption")
    n_clean = len(clean_keys)
    target = int(round(cfg.q * n_clean / (1.0 - cfg.q))) if cfg.q > 0 else 0
    if target == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    k_local = cfg.local_k_factor * cfg.k_good
    local = np.setdiff1d(_knn_pairs(tree, x, k_local), clean_keys, assume_unique=True)
    bad_nodes = np.zeros(0, dtype=np.int64)
    if cfg.model == "clustered":
        n_bad = max(1, math.ceil(cfg.bad_node_fraction * n))
        bad_nodes = np.sort(rng.choice(n, n_bad, replace=False))
        mark = np.zeros(n, dtype=bool)
        mark[bad_nodes] = True
        lp = _keys_to_pairs(local, n)
        local = local[mark[lp[:, 0]] | mark[lp[:, 1]]]
    n_local = min(math.ceil(cfg.local_fraction * target), len(local))
    pick_local = np.sort(rng.choice(local, n_local, replace=False)) if n_local else local[:0]
    thr = _far_threshold(x, cfg, rng)
    forbidden = np.union1d(clean_keys, pick_local)
    if cfg.model == "clustered":
        # remaining budget: any non-clean pair touching a bad node, far or not
        rest = _sample_incident(n, bad_nodes, forbidden, target - n_local, rng)
    else:
        rest = _sample_far(x, thr, forbidden, target - n_local, rng)
    return np.union1d(pick_local, rest), bad_nodes


def _sample_incident(n, bad_nodes, forbidden, count, rng):
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    others = np.arange(n)
    a = np.repeat(bad_nodes, n)
    b = np.tile(others, len(bad_nodes))
    ok = a != b
    keys = np.unique(np.minimum(a[ok], b[ok]) * n + np.maximum(a[ok], b[ok]))
    keys = np.setdiff1d(keys, forbidden)
    if len(keys) < count:
        raise InfeasibleConfigError("not enough pairs incident to bad nodes for the corruption target")
    return np.sort(rng.choice(keys, count, replace=False))


def _tangent_basis(d):
    """Orthonormal (u, v) completing each row of d, built from the least-aligned axis."""
    axis = np.zeros_like(d)
    axis[np.arange(len(d)), np.argmin(np.abs(d), axis=1)] = 1.0
    u = np.cross(d, axis)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(d, u)
    return u, v


def render_measurements(scene, cfg=None):
    """Directions for every scene edge: noisy truth on clean edges, latent
    layout directions on corrupted ones."""
    cfg = cfg or scene.config
    x = scene.locations
    e = scene.edges
    dirs = np.empty((len(e), 3))
    clean = ~scene.corrupt
    dstar = x[e[clean, 0]] - x[e[clean, 1]]
    dstar /= np.linalg.norm(dstar, axis=1, keepdims=True)
    eps = rng_stream(cfg.seed, "noise").standard_normal((len(dstar), 2))
    if cfg.sigma > 0:
        u, v = _tangent_basis(dstar)
        pert = dstar + cfg.sigma * (eps[:, :1] * u + eps[:, 1:] * v)
        dirs[clean] = pert / np.linalg.norm(pert, axis=1, keepdims=True)
    else:
        dirs[clean] = dstar
    y = scene.latent
    bad = e[scene.corrupt]
    dy = y[bad[:, 0]] - y[bad[:, 1]]
    dirs[scene.corrupt] = dy / np.linalg.norm(dy, axis=1, keepdims=True)
    return dirs


def _latent_layout(cfg, edges_bad):
    rng = rng_stream(cfg.seed, "latent")
    y = np.zeros((cfg.n, 3))
    y[:, :2] = rng.standard_normal((cfg.n, 2))
    # resample any endpoint that coincides with its partner (probability zero)
    for _ in range(100):
        if len(edges_bad) == 0:
            break
        gap = np.linalg.norm(y[edges_bad[:, 0]] - y[edges_bad[:, 1]], axis=1)
        hit = np.flatnonzero(gap == 0)
        if len(hit) == 0:
            break
        for j in np.unique(edges_bad[hit, 1]):
            y[j, :2] = rng.standard_normal(2)
    return y


def generate_scene(cfg):
    """Ground truth, labeled edges and rendered measurements for ``cfg``."""
    cfg.validate()
    n = cfg.n
    x = _locations(cfg)
    tree = cKDTree(x)
    clean = _knn_pairs(tree, x, cfg.k_good)
    clean = _repair_connectivity(clean, x, tree, cfg.k_good)
    clean = _repair_witnesses(clean, x)
    bad, bad_nodes = _corrupt_edges(cfg, x, tree, clean)
    keys = np.concatenate([clean, bad])
    corrupt = np.concatenate([np.zeros(len(clean), bool), np.ones(len(bad), bool)])
    order = np.argsort(keys, kind="stable")
    keys, corrupt = keys[order], corrupt[order]
    edges = _keys_to_pairs(keys, n)
    latent = _latent_layout(cfg, edges[corrupt])
    scene = SyntheticScene(cfg, x, edges, corrupt, np.zeros((len(edges), 3)), latent, bad_nodes)
    scene.dirs = render_measurements(scene, cfg)
    return scene


def clean_witness_ok(scene):
    """True iff every clean edge lies in an all-clean triangle."""
    n = scene.n
    nbrs = [set() for _ in range(n)]
    for (i, j), c in zip(scene.edges.tolist(), scene.corrupt.tolist()):
        if not c:
            nbrs[i].add(j)
            nbrs[j].add(i)
    for (i, j), c in zip(scene.edges.tolist(), scene.corrupt.tolist()):
        if not c and not (nbrs[i] & nbrs[j]):
            return False
    return True
