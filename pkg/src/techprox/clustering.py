"""Shape clustering of processed series: l1 k-means, PAM k-medoids and k-Shape.

All three work on a 2-D array (one series per row). ``ClusterAssignment``
keeps the row ids so labels can be exported, and reserves ``FLAT_LABEL`` for
the artificial flat cluster that never enters the algorithms.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

FLAT_LABEL = -1
ALGORITHMS = ("kmeans", "kmedoids", "kshape")


def l1_distance(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return float(np.abs(x - y).sum())


def pairwise_l1(X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    return cdist(X, Y, metric="cityblock")


@dataclass
class ClusterAssignment:
    algorithm: str
    k: int
    ids: list[str]
    labels: np.ndarray
    centroids: np.ndarray
    iterations: int
    seed: int
    costs: list[float] = field(default_factory=list)
    flat_ids: list[str] = field(default_factory=list)
    constant_series: int = 0

    def label_map(self) -> dict[str, int]:
        out = {i: int(l) for i, l in zip(self.ids, self.labels)}
        out.update({i: FLAT_LABEL for i in self.flat_ids})
        return out

    def sizes(self) -> list[int]:
        return [int(np.sum(self.labels == j)) for j in range(self.k)]

    def members(self, cluster: int) -> list[str]:
        if cluster == FLAT_LABEL:
            return list(self.flat_ids)
        return [i for i, l in zip(self.ids, self.labels) if l == cluster]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series_id", "cluster"])
        for sid, lab in sorted(self.label_map().items()):
            w.writerow([sid, lab])
        return buf.getvalue()


def _as_matrix(series) -> tuple[list[str], np.ndarray]:
    if isinstance(series, Mapping):
        ids = list(series)
        X = np.array([np.asarray(series[i], dtype=float) for i in ids])
    else:
        X = np.asarray(series, dtype=float)
        ids = [str(i) for i in range(len(X))]
    if X.ndim != 2:
        raise ValueError("series must all have the same length")
    return ids, X


def _check_k(k: int, n: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of series ({n})")


def _plus_plus(dist_to: Callable[[int], np.ndarray], n: int, k: int, rng: np.random.Generator) -> list[int]:
    """k-means++ style seeding with probabilities proportional to distance."""
    chosen = [int(rng.integers(n))]
    closest = dist_to(chosen[0])
    for _ in range(1, k):
        weights = np.clip(closest, 0.0, None)
        weights[chosen] = 0.0
        total = weights.sum()
        if total <= 0:
            pool = [i for i in range(n) if i not in chosen]
            nxt = int(rng.choice(pool))
        else:
            nxt = int(rng.choice(n, p=weights / total))
        chosen.append(nxt)
        closest = np.minimum(closest, dist_to(nxt))
    return chosen


def _kmeans_once(X: np.ndarray, k: int, rng: np.random.Generator, max_iters: int):
    n = len(X)
    seeds = _plus_plus(lambda i: pairwise_l1(X, X[i:i + 1])[:, 0], n, k, rng)
    centroids = X[seeds].copy()
    labels = None
    costs = []
    it = 0
    for it in range(1, max_iters + 1):
        D = pairwise_l1(X, centroids)
        new = np.argmin(D, axis=1)
        own = D[np.arange(n), new]
        for j in range(k):
            if np.any(new == j):
                continue
            sizes = np.bincount(new, minlength=k)
            movable = np.flatnonzero(sizes[new] > 1)
            far = movable[np.argmax(own[movable])]
            new[far] = j
            own[far] = 0.0
            centroids[j] = X[far]
        for j in range(k):
            centroids[j] = np.median(X[new == j], axis=0)
        costs.append(float(np.abs(X - centroids[new]).sum()))
        converged = labels is not None and np.array_equal(new, labels)
        labels = new
        if converged:
            break
    return labels, centroids, it, costs


def kmeans_l1(series, k: int, seed: int = 0, max_iters: int = 100, n_init: int = 3) -> ClusterAssignment:
    """k-means under l1: nearest-centroid assignment, elementwise-median update.

    Runs ``n_init`` seeded restarts and keeps the one with the lowest final cost.
    """
    ids, X = _as_matrix(series)
    _check_k(k, len(X))
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _kmeans_once(X, k, rng, max_iters)
        if best is None or run[3][-1] < best[3][-1] - 1e-12:
            best = run
    labels, centroids, it, costs = best
    return ClusterAssignment("kmeans", k, ids, labels, centroids, it, seed, costs)


def kmedoids(series, k: int, seed: int = 0, max_iters: int = 100) -> ClusterAssignment:
    """PAM: greedy BUILD then best-improvement SWAP until no swap lowers the cost."""
    ids, X = _as_matrix(series)
    n = len(X)
    _check_k(k, n)
    D = pairwise_l1(X)
    medoids = [int(np.argmin(D.sum(axis=1)))]
    while len(medoids) < k:
        nearest = D[:, medoids].min(axis=1)
        gains = np.array([
            -np.inf if c in medoids else np.maximum(nearest - D[:, c], 0).sum()
            for c in range(n)
        ])
        medoids.append(int(np.argmax(gains)))
    cost = float(D[:, medoids].min(axis=1).sum())
    costs = [cost]
    it = 0
    for it in range(1, max_iters + 1):
        best = (cost, None, None)
        for pos in range(k):
            for h in range(n):
                if h in medoids:
                    continue
                trial = medoids.copy()
                trial[pos] = h
                c = float(D[:, trial].min(axis=1).sum())
                if c < best[0] - 1e-12 * max(1.0, cost):
                    best = (c, pos, h)
        if best[1] is None:
            break
        cost = best[0]
        medoids[best[1]] = best[2]
        costs.append(cost)
    labels = np.argmin(D[:, medoids], axis=1)
    return ClusterAssignment("kmedoids", k, ids, labels, X[medoids].copy(), it, seed, costs)


# -- k-Shape -------------------------------------------------------------------

def zscore(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sd = x.std()
    if sd < 1e-12:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def ncc_circular(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Normalised circular cross-correlation; entry s pairs x with np.roll(y, s)."""
    denom = np.linalg.norm(x) * np.linalg.norm(y)
    if denom == 0:
        return np.zeros(len(x))
    cc = np.fft.irfft(np.fft.rfft(x) * np.conj(np.fft.rfft(y)), n=len(x))
    return cc / denom


def shape_distance(x, y) -> tuple[float, int]:
    """1 - max NCC over circular shifts of the z-normalised series, and the best shift."""
    cc = ncc_circular(zscore(x), zscore(y))
    s = int(np.argmax(cc))
    # rounding can push the correlation a hair past 1
    return float(min(max(1.0 - cc[s], 0.0), 2.0)), s


def sbd(x, y) -> float:
    return shape_distance(x, y)[0]


def _extract_shape(members: np.ndarray, centroid: np.ndarray) -> np.ndarray:
    if not len(members):
        return centroid
    aligned = []
    for x in members:
        z = zscore(x)
        if np.any(centroid):
            _, s = shape_distance(centroid, z)
            z = np.roll(z, s)
        aligned.append(z)
    A = np.array(aligned)
    m = A.shape[1]
    Q = np.eye(m) - np.full((m, m), 1.0 / m)
    M = Q @ (A.T @ A) @ Q
    _, vecs = np.linalg.eigh(M)
    c = vecs[:, -1]
    if np.sum((A - c) ** 2) > np.sum((A + c) ** 2):
        c = -c
    return zscore(c)


def _sbd_matrix(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return np.array([[sbd(x, c) for c in C] for x in X])


def _kshape_once(X: np.ndarray, k: int, rng: np.random.Generator, max_iters: int):
    n = len(X)
    Z = np.array([zscore(x) for x in X])
    seeds = _plus_plus(lambda i: np.array([sbd(z, Z[i]) for z in Z]), n, k, rng)
    centroids = Z[seeds].copy()
    labels = np.argmin(_sbd_matrix(Z, centroids), axis=1)
    it = 0
    for it in range(1, max_iters + 1):
        for j in range(k):
            centroids[j] = _extract_shape(Z[labels == j], centroids[j])
        D = _sbd_matrix(Z, centroids)
        new = np.argmin(D, axis=1)
        own = D[np.arange(n), new]
        for j in range(k):
            if np.any(new == j):
                continue
            sizes = np.bincount(new, minlength=k)
            movable = np.flatnonzero(sizes[new] > 1)
            far = movable[np.argmax(own[movable])]
            new[far] = j
            own[far] = 0.0
            centroids[j] = Z[far]
        if np.array_equal(new, labels):
            labels = new
            break
        labels = new
    cost = float(sum(sbd(Z[i], centroids[labels[i]]) for i in range(n)))
    return labels, centroids, it, cost


def kshape(series, k: int, seed: int = 0, max_iters: int = 100, n_init: int = 3) -> ClusterAssignment:
    """k-Shape with circular shape-based distance; best of ``n_init`` seeded runs."""
    ids, X = _as_matrix(series)
    n = len(X)
    _check_k(k, n)
    constant = int(sum(np.std(x) < 1e-12 for x in X))
    if constant:
        log.info("k-Shape: %d constant series assigned by zero-similarity convention", constant)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _kshape_once(X, k, rng, max_iters)
        if best is None or run[3] < best[3] - 1e-12:
            best = run
    labels, centroids, it, cost = best
    return ClusterAssignment("kshape", k, ids, labels, centroids, it, seed, [cost],
                             constant_series=constant)


def cluster(series, algorithm: str, k: int, seed: int = 0, max_iters: int = 100) -> ClusterAssignment:
    if algorithm == "kmeans":
        return kmeans_l1(series, k, seed, max_iters)
    if algorithm == "kmedoids":
        return kmedoids(series, k, seed, max_iters)
    if algorithm == "kshape":
        return kshape(series, k, seed, max_iters)
    raise ValueError(f"unknown clustering algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def assign_nearest(series, centroids: np.ndarray, algorithm: str) -> np.ndarray:
    """Label each series with its nearest centroid under the algorithm's distance."""
    _, X = _as_matrix(series)
    if algorithm == "kshape":
        return np.argmin(_sbd_matrix(X, centroids), axis=1)
    return np.argmin(pairwise_l1(X, centroids), axis=1)


def resample(values: Sequence[float], length: int) -> np.ndarray:
    """Linear resampling of a series onto ``length`` evenly spaced points."""
    y = np.asarray(values, dtype=float)
    if len(y) == 1:
        return np.full(length, y[0])
    return np.interp(np.linspace(0, 1, length), np.linspace(0, 1, len(y)), y)


# -- diagnostics ------------------------------------------------------------

@dataclass
class SilhouetteReport:
    samples: np.ndarray
    per_cluster: dict[int, float]
    mean: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "per_cluster": {str(k): v for k, v in sorted(self.per_cluster.items())},
            "samples": [float(s) for s in self.samples],
        }


def distance_matrix(X: np.ndarray, distance: str | Callable = "l1") -> np.ndarray:
    if distance == "l1":
        return pairwise_l1(X)
    fn = sbd if distance == "sbd" else distance
    n = len(X)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = fn(X[i], X[j])
    return D


def silhouette(series, labels: Sequence[int], distance: str | Callable = "l1") -> SilhouetteReport:
    """Per-sample (b - a) / max(a, b); singleton clusters score 0."""
    _, X = _as_matrix(series)
    labels = np.asarray(labels)
    clusters = sorted(set(labels.tolist()))
    if len(clusters) < 2:
        raise ValueError("silhouette needs at least two clusters")
    D = distance_matrix(X, distance)
    s = np.zeros(len(X))
    for i in range(len(X)):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == c].mean() for c in clusters if c != labels[i])
        top = max(a, b)
        s[i] = 0.0 if top == 0 else (b - a) / top
    per_cluster = {int(c): float(s[labels == c].mean()) for c in clusters}
    return SilhouetteReport(s, per_cluster, float(s.mean()))


@dataclass
class LayoutPoint:
    cluster: int
    x: float
    y: float
    size: int


def centroid_layout(
    assignment: ClusterAssignment, distance: str | Callable = "l1"
) -> tuple[list[LayoutPoint], bool]:
    """Classical MDS of the centroid distance matrix into the plane.

    Returns the points and a flag that is True when the embedding has rank
    below two (second coordinate zeroed).
    """
    C = assignment.centroids
    if len(C) < 2:
        raise ValueError("layout needs at least two centroids")
    D = distance_matrix(C, distance)
    m = len(C)
    J = np.eye(m) - np.full((m, m), 1.0 / m)
    B = -0.5 * J @ (D ** 2) @ J
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:2]
    coords = np.zeros((m, 2))
    degenerate = False
    scale = max(vals.max(), 1e-300)
    for col, idx in enumerate(order):
        lam = vals[idx]
        if lam <= 1e-10 * scale:
            degenerate = degenerate or col == 1
            continue
        v = vecs[:, idx]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        coords[:, col] = v * np.sqrt(lam)
    if len(order) < 2:
        degenerate = True
    sizes = assignment.sizes()
    pts = [LayoutPoint(j, float(coords[j, 0]), float(coords[j, 1]), sizes[j]) for j in range(m)]
    return pts, degenerate


def layout_to_csv(points: Sequence[LayoutPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster", "x", "y", "size"])
    for p in points:
        w.writerow([p.cluster, repr(p.x), repr(p.y), p.size])
    return buf.getvalue()


def silhouette_sweep(series, ks: Sequence[int], algorithm: str, seed: int = 0) -> dict[int, float | None]:
    """Mean silhouette for each candidate k (None where k is infeasible)."""
    _, X = _as_matrix(series)
    out: dict[int, float | None] = {}
    for k in ks:
        if k < 2 or k > len(X) - 1:
            out[k] = None
            continue
        a = cluster(X, algorithm, k, seed)
        if len(set(a.labels.tolist())) < 2:
            out[k] = None
            continue
        out[k] = silhouette(X, a.labels).mean
    return out


def assignment_to_json(a: ClusterAssignment) -> str:
    return json.dumps({
        "algorithm": a.algorithm,
        "k": a.k,
        "seed": a.seed,
        "iterations": a.iterations,
        "costs": a.costs,
        "sizes": a.sizes(),
        "flat": len(a.flat_ids),
        "constant_series": a.constant_series,
        "labels": a.label_map(),
        "centroids": [[float(v) for v in c] for c in a.centroids],
    }, indent=1, sort_keys=True) + "\n"


def assignment_from_json(text: str) -> ClusterAssignment:
    d = json.loads(text)
    labels = d["labels"]
    ids = sorted(i for i, l in labels.items() if l != FLAT_LABEL)
    flat = sorted(i for i, l in labels.items() if l == FLAT_LABEL)
    return ClusterAssignment(
        algorithm=d["algorithm"], k=d["k"], ids=ids,
        labels=np.array([labels[i] for i in ids], dtype=int),
        centroids=np.array(d["centroids"], dtype=float),
        iterations=d["iterations"], seed=d["seed"], costs=d["costs"],
        flat_ids=flat, constant_series=d.get("constant_series", 0),
    )
