"""Robust similarity alignment and coverage-conditioned error statistics."""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

TRIM_FACTOR = 3.0


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityTransform:
    """y = s R x + t."""

    s: float
    R: np.ndarray
    t: np.ndarray

    def apply(self, x):
        return self.s * np.asarray(x) @ self.R.T + self.t

    def inverse(self):
        Ri = self.R.T
        return SimilarityTransform(1.0 / self.s, Ri, -(Ri @ self.t) / self.s)


def umeyama(src, dst):
    """Least-squares similarity mapping ``src`` onto ``dst`` (rows are points)."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    n = len(src)
    if n < 3:
        raise AlignmentError("need at least 3 points")
    mu_s = src.mean(0)
    mu_d = dst.mean(0)
    xs = src - mu_s
    xd = dst - mu_d
    var_s = np.sum(xs * xs) / n
    cov = xd.T @ xs / n
    U, D, Vt = np.linalg.svd(cov)
    if var_s <= 0 or D[1] <= 1e-12 * max(D[0], 1e-300):
        raise AlignmentError("degenerate point configuration (collinear or coincident)")
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    s = float(np.sum(D * np.diag(S)) / var_s)
    if not s > 0:
        raise AlignmentError("non-positive scale")
    t = mu_d - s * R @ mu_s
    return SimilarityTransform(s, R, t)


def robust_similarity_align(est, gt, nodes=None):
    """Similarity T with est ~ T(gt): LS fit, trim residuals > 3x median, refit."""
    est, gt = _common(est, gt, nodes)[1:]
    T = umeyama(gt, est)
    res = np.linalg.norm(T.apply(gt) - est, axis=1)
    med = float(np.median(res))
    keep = res <= TRIM_FACTOR * med if med > 0 else res <= 0
    if not keep.all() and keep.sum() >= 3:
        try:
            T = umeyama(gt[keep], est[keep])
        except AlignmentError:
            pass
    return T


def _common(est, gt, nodes=None):
    """Align node sets; accepts dicts id -> xyz or (n, 3) arrays (NaN rows skipped)."""
    est_d = _as_dict(est)
    gt_d = _as_dict(gt)
    ids = sorted(set(est_d) & set(gt_d))
    if nodes is not None:
        wanted = {int(v) for v in nodes}
        ids = [i for i in ids if i in wanted]
    if len(ids) < 3:
        raise AlignmentError(f"only {len(ids)} common nodes; need at least 3")
    ids = np.array(ids, dtype=np.int64)
    return ids, np.array([est_d[i] for i in ids]), np.array([gt_d[i] for i in ids])


def _as_dict(pts):
    if isinstance(pts, dict):
        return {int(k): np.asarray(v, dtype=np.float64) for k, v in pts.items()}
    arr = np.asarray(pts, dtype=np.float64)
    return {i: arr[i] for i in range(len(arr)) if np.all(np.isfinite(arr[i]))}


def lower_median(v):
    v = np.sort(np.asarray(v, dtype=np.float64))
    return float(v[(len(v) - 1) // 2])


def nearest_rank(v, p):
    v = np.sort(np.asarray(v, dtype=np.float64))
    k = max(1, math.ceil(p / 100.0 * len(v)))
    return float(v[k - 1])


@dataclass
class ErrorReport:
    nodes: list
    errors: list
    median: float
    mean: float
    p90: float
    runtime: float = 0.0
    coverage: float | None = None
    transform: dict = field(default_factory=dict)
    missing: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def error_statistics(errors):
    """(lower median, mean, nearest-rank p90)."""
    e = np.asarray(errors, dtype=np.float64)
    return lower_median(e), float(e.mean()), nearest_rank(e, 90)


def compute_error_report(est, gt, nodes=None, runtime=0.0, coverage=None, transform=None):
    """Errors in ground-truth units after mapping est onto gt."""
    ids, E, G = _common(est, gt, nodes)
    T = transform or robust_similarity_align(dict(zip(ids.tolist(), E)), dict(zip(ids.tolist(), G)))
    mapped = T.inverse().apply(E)
    err = np.linalg.norm(mapped - G, axis=1)
    med, mean, p90 = error_statistics(err)
    wanted = set(int(v) for v in nodes) if nodes is not None else set(_as_dict(gt))
    missing = sorted(wanted - set(ids.tolist()))
    return ErrorReport(
        ids.tolist(), err.tolist(), med, mean, p90, float(runtime), coverage,
        {"s": T.s, "R": T.R.tolist(), "t": T.t.tolist()}, missing,
    )
