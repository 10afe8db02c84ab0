"""Attractor approximation: word clouds, the chaos game, Hausdorff distances."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .ifs import EUCLIDEAN, SEQUENCE, check_budget, pad_words, sequence_distance, truncate_words


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    metric: str
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return self.points.shape[0]

    @property
    def symbolic(self):
        return self.metric == SEQUENCE

    def unique(self):
        return PointCloud(np.unique(self.points, axis=0), self.metric, dict(self.provenance))


def all_words(n, depth):
    """All length-``depth`` words over 1..n in lexicographic order, shape (n^depth, depth)."""
    idx = np.arange(n**depth, dtype=np.int64)
    powers = n ** np.arange(depth - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % n + 1


def word_points(sys, depth, seed_point=None):
    """gamma_w(seed) for every word of length ``depth``, in lexicographic word order.

    gamma_w = gamma_{w1} o ... o gamma_{wN}, so the first symbol is applied last.
    """
    if depth < 0:
        raise InputError("depth must be non-negative")
    check_budget(sys.n, depth, "attractor points")
    seed = sys.default_seed() if seed_point is None else seed_point
    if sys.symbolic:
        tail = np.asarray(seed, dtype=np.int64).ravel()
        words = all_words(sys.n, depth)
        return np.concatenate([words, np.broadcast_to(tail, (words.shape[0], tail.size))], axis=1)
    pts = np.atleast_1d(np.asarray(seed, dtype=float))[None, :]
    if pts.shape[1] != sys.dim:
        raise InputError(f"seed has dimension {pts.shape[1]}, system has {sys.dim}")
    for _ in range(depth):
        pts = np.concatenate([m.apply(pts) for m in sys.maps], axis=0)
    return pts


def attractor_deterministic(sys, depth, seed_point=None):
    seed = sys.default_seed() if seed_point is None else seed_point
    pts = word_points(sys, depth, seed)
    return PointCloud(pts, sys.metric, {"kind": "deterministic", "depth": depth,
                                        "seed": np.asarray(seed).tolist()})


def _orbit_euclidean(sys, count, burn_in, rng, seed):
    choices = rng.choice(sys.n, size=count + burn_in, p=sys.weights)
    out = np.empty((count, sys.dim))
    if sys.dim == 1:
        a = [float(m.matrix[0, 0]) for m in sys.maps]
        b = [float(m.offset[0]) for m in sys.maps]
        x = float(seed[0])
        for k, i in enumerate(choices):
            x = a[i] * x + b[i]
            if k >= burn_in:
                out[k - burn_in, 0] = x
        return out
    mats = [m.matrix for m in sys.maps]
    offs = [m.offset for m in sys.maps]
    x = np.array(seed, dtype=float)
    for k, i in enumerate(choices):
        x = mats[i] @ x + offs[i]
        if k >= burn_in:
            out[k - burn_in] = x
    return out


def _orbit_symbolic(sys, count, burn_in, rng, seed, word_length):
    total = count + burn_in
    choices = rng.choice(sys.n, size=total, p=sys.weights) + 1
    tail = pad_words(np.asarray(seed, dtype=np.int64).ravel(), word_length)[:word_length]
    # x_k = I_{k-1} I_{k-2} ... I_0 seed; keep the leading word_length symbols
    history = np.concatenate([tail[::-1], choices])
    windows = np.lib.stride_tricks.sliding_window_view(history, word_length)
    # window j covers history[j : j + L]; point k (1-based) ends at history index L + k - 1
    pts = windows[1:][:, ::-1]
    return np.ascontiguousarray(pts[burn_in:total])


def attractor_chaos_game(sys, samples, burn_in=100, rng_seed=0, seed_point=None,
                         workers=1, word_length=24):
    """Random orbit x_{k+1} = gamma_{I_k}(x_k) with I_k ~ weights.

    ``workers > 1`` splits the sample budget into independently seeded shards,
    each with its own burn-in; shards are concatenated in shard order.
    """
    if samples < 1:
        raise InputError("samples must be at least 1")
    if burn_in < 0:
        raise InputError("burn_in must be non-negative")
    seed = sys.default_seed() if seed_point is None else seed_point

    def run(count, rng):
        if sys.symbolic:
            return _orbit_symbolic(sys, count, burn_in, rng, seed, word_length)
        return _orbit_euclidean(sys, count, burn_in, rng, np.atleast_1d(np.asarray(seed, float)))

    if workers <= 1:
        pts = run(samples, np.random.default_rng(rng_seed))
    else:
        sizes = [samples // workers + (1 if k < samples % workers else 0) for k in range(workers)]
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(rng_seed).spawn(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, [s for s in sizes if s], rngs[: sum(1 for s in sizes if s)]))
        pts = np.concatenate(parts, axis=0)
    return PointCloud(pts, sys.metric, {"kind": "chaos-game", "samples": samples, "burn_in": burn_in,
                                        "rng_seed": rng_seed, "workers": workers})


# --------------------------------------------------------------------------
# Hausdorff distance


def _directed_symbolic(a, b, chunk=2048):
    length = max(a.shape[1], b.shape[1])
    a = pad_words(a, length)
    b = pad_words(b, length)
    a = np.unique(a, axis=0)
    b = np.unique(b, axis=0)
    row = np.dtype((np.void, a.dtype.itemsize * length))
    in_b = np.isin(np.ascontiguousarray(a).view(row).ravel(), np.ascontiguousarray(b).view(row).ravel())
    rest = a[~in_b]
    worst = 0.0
    for start in range(0, rest.shape[0], chunk):
        block = rest[start:start + chunk]
        best = np.full(block.shape[0], np.inf)
        for bstart in range(0, b.shape[0], chunk):
            d = sequence_distance(block[:, None, :], b[None, bstart:bstart + chunk, :])
            best = np.minimum(best, d.min(axis=1))
        worst = max(worst, float(best.max()))
    return worst


def directed_hausdorff(A, B, truncate=None):
    """sup_{a in A} inf_{b in B} d(a, b)."""
    a, b = _prepare(A, B, truncate)
    if A.symbolic:
        return _directed_symbolic(a, b)
    dist, _ = cKDTree(b).query(a, k=1)
    return float(dist.max())


def _prepare(A, B, truncate):
    if len(A) == 0 or len(B) == 0:
        raise InputError("Hausdorff distance of an empty cloud is undefined")
    if A.metric != B.metric:
        raise InputError("clouds live in different spaces")
    a, b = A.points, B.points
    if A.metric == EUCLIDEAN:
        if a.shape[1] != b.shape[1]:
            raise InputError("clouds have different dimensions")
        return np.asarray(a, float), np.asarray(b, float)
    if truncate is not None:
        a, b = truncate_words(a, truncate), truncate_words(b, truncate)
    return a, b


def hausdorff_distance(A, B, truncate=None):
    """Symmetric Hausdorff distance.  ``truncate`` compares symbolic words on a prefix only."""
    return max(directed_hausdorff(A, B, truncate), directed_hausdorff(B, A, truncate))


def self_similarity_defect(sys, depth, seed_point=None):
    """Hausdorff distance between the depth-N cloud and the union of its images.

    Symbolic systems compare words truncated to length N.
    """
    if depth < 1:
        raise InputError("depth must be at least 1")
    check_budget(sys.n, depth + 1, "attractor points")
    cloud = attractor_deterministic(sys, depth, seed_point)
    images = PointCloud(np.concatenate([m.apply(cloud.points) for m in sys.maps], axis=0), sys.metric)
    return hausdorff_distance(cloud, images, truncate=depth if sys.symbolic else None)
