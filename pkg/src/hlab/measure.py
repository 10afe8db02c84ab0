"""Atomic approximations of self-similar measures and weak distances between them."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

from .attractor import word_points
from .errors import InputError
from .ifs import EUCLIDEAN, SEQUENCE, check_budget, pad_words, sequence_distance

MERGE_TOL = 1e-14
MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite weighted point set.  ``kind`` is ``"deterministic"`` or ``"empirical"``."""

    points: np.ndarray
    weights: np.ndarray
    metric: str
    kind: str = "deterministic"
    depth: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.points.shape[0] != self.weights.shape[0]:
            raise InputError("one weight per atom required")
        if np.any(self.weights <= 0):
            raise InputError("atom weights must be positive")
        total = float(self.weights.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise InputError(f"atoms carry total mass {total!r}, expected 1")

    def __len__(self):
        return self.points.shape[0]

    @property
    def symbolic(self):
        return self.metric == SEQUENCE

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def mean(self):
        if self.symbolic:
            raise InputError("mean is undefined on sequence space")
        return self.weights @ self.points

    def cdf(self):
        """(sorted support, cumulative mass) for a 1-D measure."""
        if self.symbolic or self.points.shape[1] != 1:
            raise InputError("CDF export is 1-D only")
        order = np.argsort(self.points[:, 0], kind="stable")
        return self.points[order, 0], np.cumsum(self.weights[order])


def unique_words(words):
    """Distinct rows of an integer word array and the inverse index, like np.unique(axis=0)."""
    words = np.asarray(words)
    base = int(words.max(initial=0)) + 1
    if words.shape[1] * np.log2(max(base, 2)) >= 62:
        uniq, inverse = np.unique(words, axis=0, return_inverse=True)
        return uniq, inverse.ravel()
    # one integer key per word is much faster than a row-wise unique
    keys = words.astype(np.int64) @ (base ** np.arange(words.shape[1] - 1, -1, -1, dtype=np.int64))
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    return words[first], inverse.ravel()


def merge_atoms(points, weights, metric, tol=MERGE_TOL):
    """Merge atoms closer than ``tol`` (exact duplicates for words), summing weights."""
    if metric == SEQUENCE:
        uniq, inverse = unique_words(points)
        return uniq, np.bincount(inverse, weights=weights, minlength=uniq.shape[0])
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    w = weights[order]
    if pts.shape[0] == 0:
        return pts, w
    gap = np.abs(np.diff(pts, axis=0)).max(axis=1) > tol
    group = np.concatenate([[0], np.cumsum(gap)])
    starts = np.concatenate([[0], np.nonzero(gap)[0] + 1])
    return pts[starts], np.bincount(group, weights=w)


def _build(points, weights, metric, kind, depth, meta, merge=True):
    if merge:
        points, weights = merge_atoms(points, weights, metric)
    return AtomicMeasure(points, weights, metric, kind, depth, meta)


def _meta(sys):
    meta = {"system": sys.name, "symbols": sys.n}
    if not sys.symbolic:
        meta["box"] = [sys.box[0].tolist(), sys.box[1].tolist()]
    return meta


def word_weights(weights, depth):
    """p_w = prod_k p_{w_k} for every length-``depth`` word, in lexicographic order."""
    w = np.ones(1)
    for _ in range(depth):
        w = np.concatenate([p * w for p in weights])
    return w


def self_similar_measure(sys, depth, weights=None, seed_point=None, merge=True):
    """Atoms gamma_w(seed) with mass p_w over all length-N words.

    With equal weights (the default for built-ins) this is the depth-N
    approximant of the Hutchinson measure.  Coincident atoms are merged.
    """
    check_budget(sys.n, depth, "measure atoms")
    p = sys.weights if weights is None else np.asarray(weights, dtype=float)
    if p.shape != (sys.n,) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
        raise InputError("weights must be n positive reals summing to 1")
    pts = word_points(sys, depth, seed_point)
    meta = _meta(sys)
    meta["weights"] = p.tolist()
    return _build(pts, word_weights(p, depth), sys.metric, "deterministic", depth, meta, merge)


def hutchinson_measure(sys, depth, seed_point=None):
    return self_similar_measure(sys, depth, np.full(sys.n, 1.0 / sys.n), seed_point)


def empirical_measure(cloud, meta=None):
    m = len(cloud)
    if m == 0:
        raise InputError("empty cloud")
    pts = cloud.points if cloud.symbolic else np.asarray(cloud.points, float)
    return _build(pts, np.full(m, 1.0 / m), cloud.metric, "empirical", m, dict(meta or {}))


def pushforward(mu, gamma):
    """Atoms mapped through ``gamma``; weights unchanged."""
    return _build(gamma.apply(mu.points), mu.weights.copy(), mu.metric, mu.kind, mu.depth, dict(mu.meta))


def mixture(measures, coeffs):
    if len(measures) != len(coeffs) or not measures:
        raise InputError("one coefficient per measure required")
    metric = measures[0].metric
    if any(m.metric != metric for m in measures):
        raise InputError("measures live in different spaces")
    if metric == SEQUENCE:
        length = max(m.points.shape[1] for m in measures)
        pts = np.concatenate([pad_words(m.points, length) for m in measures])
    else:
        pts = np.concatenate([m.points for m in measures])
    w = np.concatenate([c * m.weights for m, c in zip(measures, coeffs)])
    return _build(pts, w, metric, measures[0].kind, measures[0].depth, dict(measures[0].meta))


def markov_image(sys, mu):
    """sum_i p_i (gamma_i)_* mu."""
    return mixture([pushforward(mu, g) for g in sys.maps], list(sys.weights))


def invariance_defect(sys, mu):
    """weak_distance(mu, sum_i p_i (gamma_i)_* mu)."""
    if mu.metric != sys.metric:
        raise InputError("measure and system live in different spaces")
    return weak_distance(mu, markov_image(sys, mu))


# --------------------------------------------------------------------------
# weak distances


def w1_atomic_1d(x, wx, y, wy):
    """Exact W1 between two weighted point sets on the line, via the CDF gap."""
    pts = np.concatenate([np.ravel(x), np.ravel(y)])
    signed = np.concatenate([np.ravel(wx), -np.ravel(wy)])
    order = np.argsort(pts, kind="stable")
    pts, signed = pts[order], signed[order]
    gap = np.cumsum(signed)[:-1]
    return float(np.sum(np.abs(gap) * np.diff(pts)))


def w1_to_uniform(mu, lo=0.0, hi=1.0):
    """Exact W1 between a 1-D atomic measure and the uniform law on [lo, hi]."""
    xs, F = mu.cdf()
    if xs[0] < lo or xs[-1] > hi:
        raise InputError("atoms must lie in [lo, hi]")
    width = hi - lo
    knots = np.concatenate([[lo], xs, [hi]])
    levels = np.concatenate([[0.0], F])
    total = 0.0
    for k in range(levels.size):
        a, b = knots[k], knots[k + 1]
        if b <= a:
            continue
        g0, g1, c = (a - lo) / width, (b - lo) / width, levels[k]
        if c <= g0:
            part = (0.5 * (g0 + g1) - c) * (g1 - g0)
        elif c >= g1:
            part = (c - 0.5 * (g0 + g1)) * (g1 - g0)
        else:
            part = 0.5 * ((c - g0) ** 2 + (g1 - c) ** 2)
        total += part * width
    return float(total)


def _symbol_count(mu, nu):
    declared = [m.meta.get("symbols") for m in (mu, nu) if m.meta.get("symbols")]
    observed = int(max(mu.points.max(initial=1), nu.points.max(initial=1)))
    return max(declared + [observed, 2])


def family_centres(metric, *, dim=None, box=None, symbols=None):
    """Centres of the distance test functions used by :func:`weak_distance`.

    Euclidean (d >= 2): a 5-per-axis grid over the box (3 per axis for d > 3).
    Sequence space: every word of length <= 3 over the alphabet, padded with 1s.
    """
    if metric == SEQUENCE:
        words = [np.zeros(3, dtype=np.int64) + 1]
        for length in (1, 2, 3):
            for w in product(range(1, symbols + 1), repeat=length):
                words.append(pad_words(np.array(w, dtype=np.int64), 3))
        return np.unique(np.array(words), axis=0)
    lo, hi = box
    per = 5 if dim <= 3 else 3
    axes = [np.linspace(lo[k], hi[k], per) for k in range(dim)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


def _family_box(mu, nu):
    boxes = [m.meta.get("box") for m in (mu, nu)]
    if boxes[0] is not None and boxes[0] == boxes[1]:
        return np.asarray(boxes[0][0], float), np.asarray(boxes[0][1], float)
    both = np.concatenate([mu.points, nu.points])
    return both.min(axis=0), both.max(axis=0)


def _family_integrals(m, centres):
    if m.symbolic:
        length = max(m.points.shape[1], centres.shape[1])
        pts = pad_words(m.points, length)
        cs = pad_words(centres, length)
        # centres are 1 beyond their own length, so the tail distance is shared
        head = max(int(np.max(np.nonzero(np.any(cs != 1, axis=0))[0], initial=-1)) + 1, 1)
        tail = 0.0
        if length > head:
            tail = 2.0**-head * (m.weights @ sequence_distance(pts[:, head:], np.ones((1, length - head), np.int64)))
        # the head distance only sees the first symbols: aggregate mass per prefix
        prefixes, inverse = unique_words(pts[:, :head])
        mass = np.bincount(inverse, weights=m.weights, minlength=len(prefixes))
        scale = 0.5 ** np.arange(1, head + 1)
        vals = ((prefixes[:, None, :] != cs[None, :, :head]) * scale).sum(axis=2)
        return mass @ vals + tail
    dists = np.stack([np.linalg.norm(m.points - c, axis=1) for c in centres], axis=1)
    return np.concatenate([m.weights @ m.points, m.weights @ dists])


def weak_distance(mu, nu):
    """Exact W1 in 1-D; elsewhere the sup over a fixed 1-Lipschitz test family.

    The family is the coordinate maps plus distances to :func:`family_centres`
    (only the distances in sequence space).
    """
    if mu.metric != nu.metric:
        raise InputError("measures live in different spaces")
    if mu.metric == EUCLIDEAN:
        if mu.points.shape[1] != nu.points.shape[1]:
            raise InputError("measures have different dimensions")
        if mu.points.shape[1] == 1:
            return w1_atomic_1d(mu.points, mu.weights, nu.points, nu.weights)
        centres = family_centres(EUCLIDEAN, dim=mu.points.shape[1], box=_family_box(mu, nu))
    else:
        centres = family_centres(SEQUENCE, symbols=_symbol_count(mu, nu))
    diff = _family_integrals(mu, centres) - _family_integrals(nu, centres)
    return float(np.abs(diff).max())


# --------------------------------------------------------------------------
# separation and integration


def overlap_mass(sys, depth, pair, tol, seed_point=None):
    """Mass of mu^H_N near both gamma_i(K_N) and gamma_j(K_N), K_N the depth-N cloud."""
    i, j = pair
    if i == j:
        raise InputError("overlap needs two distinct branches")
    mu = hutchinson_measure(sys, depth, seed_point)
    if sys.symbolic:
        if tol >= 0.5:
            # every word is within 1/2 of every cylinder
            return mu.total_mass
        # d(x, gamma_i K) is 0 on the cylinder [i] and >= 1/2 off it
        return 0.0
    cloud = word_points(sys, depth, seed_point)
    near_i = cKDTree(sys.maps[i].apply(cloud)).query(mu.points, k=1)[0] <= tol
    near_j = cKDTree(sys.maps[j].apply(cloud)).query(mu.points, k=1)[0] <= tol
    return float(mu.weights[near_i & near_j].sum())


def evaluate(f, points, vectorized=True):
    if vectorized:
        vals = np.asarray(f(points))
        if vals.shape == (points.shape[0],):
            return vals
        if vals.ndim == 0:
            return np.full(points.shape[0], vals[()])
        raise InputError(f"vectorised function returned shape {vals.shape}, expected ({points.shape[0]},)")
    return np.array([f(p) for p in points])


def integrate(mu, f, vectorized=True):
    """sum_k weight_k f(atom_k); ``f`` receives the whole atom array when vectorised."""
    vals = evaluate(f, mu.points, vectorized)
    return complex(np.sum(mu.weights * vals))


# --------------------------------------------------------------------------
# file formats


def save_measure(mu, path, system=None):
    """CSV of (coordinates..., weight) plus a JSON sidecar ``<path>.json``."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        if mu.symbolic:
            out.writerow(["word", "weight"])
            for word, w in zip(mu.points, mu.weights):
                out.writerow([" ".join(str(int(s)) for s in word), repr(float(w))])
        else:
            d = mu.points.shape[1]
            out.writerow([f"x{k}" for k in range(d)] + ["weight"])
            for pt, w in zip(mu.points, mu.weights):
                out.writerow([repr(float(v)) for v in pt] + [repr(float(w))])
    side = {"system": system or mu.meta.get("system"), "depth": mu.depth, "kind": mu.kind,
            "metric": mu.metric, "symbols": mu.meta.get("symbols"), "box": mu.meta.get("box")}
    with open(f"{path}.json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)


def load_measure(path):
    with open(f"{path}.json") as fh:
        side = json.load(fh)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    weights = np.array([float(r[-1]) for r in rows])
    if side["metric"] == SEQUENCE:
        words = [[int(s) for s in r[0].split()] for r in rows]
        length = max((len(w) for w in words), default=0)
        pts = np.array([w + [1] * (length - len(w)) for w in words], dtype=np.int64).reshape(len(rows), length)
    else:
        pts = np.array([[float(v) for v in r[:-1]] for r in rows])
    meta = {k: side[k] for k in ("system", "symbols", "box") if side.get(k) is not None}
    return AtomicMeasure(pts, weights, side["metric"], side["kind"], side["depth"], meta)


def save_cdf(mu, path):
    xs, F = mu.cdf()
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "F"])
        for x, f in zip(xs, F):
            out.writerow([repr(float(x)), repr(float(f))])
