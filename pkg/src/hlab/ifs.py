"""Contraction maps, iterated function systems and the expanding map they invert.

Points come in two flavours:

* euclidean: float arrays of shape ``(d,)`` (one point) or ``(m, d)`` (a cloud);
* symbolic: integer words with symbols ``1..n``.  A finite word ``w`` stands for
  the infinite sequence ``w 1 1 1 ...``, so padding with ``1`` never changes the
  point.  Clouds are ``(m, L)`` integer arrays.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError, ResourceError

EUCLIDEAN = "euclidean"
SEQUENCE = "sequence"

DEFAULT_BUDGET_CELLS = 2**22


def cell_budget():
    """Maximum number of words/cells any construction may allocate."""
    raw = os.environ.get("HLAB_BUDGET_CELLS")
    if raw is None:
        return DEFAULT_BUDGET_CELLS
    try:
        return int(float(raw))
    except ValueError:
        raise InputError(f"HLAB_BUDGET_CELLS must be an integer, got {raw!r}")


def check_budget(n, depth, what="cells"):
    count = n**depth
    limit = cell_budget()
    if count > limit:
        raise ResourceError(count, limit, what=f"{what} (n={n}, depth={depth})")
    return count


# --------------------------------------------------------------------------
# symbolic helpers


def pad_words(words, length):
    """Right-pad integer words with the neutral symbol 1 up to ``length``."""
    words = np.asarray(words, dtype=np.int64)
    cur = words.shape[-1]
    if cur >= length:
        return words
    pad = np.ones(words.shape[:-1] + (length - cur,), dtype=np.int64)
    return np.concatenate([words, pad], axis=-1)


def sequence_distance(w, v):
    """d(w, v) = sum_k 2^-k [w_k != v_k] for words padded with 1s.

    Broadcasts over leading axes; the last axis indexes positions.
    """
    w = np.asarray(w, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if w.ndim == 0 or v.ndim == 0:
        raise InputError("symbolic points must be words, not scalars")
    length = max(w.shape[-1], v.shape[-1])
    w = pad_words(w, length)
    v = pad_words(v, length)
    scale = 0.5 ** np.arange(1, length + 1)
    return ((w != v) * scale).sum(axis=-1)


def truncate_words(words, length):
    words = pad_words(words, length)
    return words[..., :length]


# --------------------------------------------------------------------------
# maps


@dataclass(frozen=True, eq=False)
class ContractionMap:
    """One branch of an IFS.

    ``kind`` is ``"affine"`` (x -> A x + b) or ``"symbolic"`` (w -> i w).
    ``c1``/``c2`` are the lower/upper Lipschitz bounds; for affine maps they are
    the extreme singular values of ``A``.
    """

    kind: str
    c1: float
    c2: float
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None
    symbol: int | None = None
    _inverse: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def affine(cls, matrix, offset):
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        b = np.atleast_1d(np.asarray(offset, dtype=float))
        if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
            raise InputError(f"affine map needs d x d matrix and d-vector, got {A.shape} and {b.shape}")
        sv = np.linalg.svd(A, compute_uv=False)
        c1, c2 = float(sv.min()), float(sv.max())
        if c1 <= 0.0:
            raise InputError("affine map is not invertible (singular matrix)")
        if c2 >= 1.0:
            raise InputError(f"affine map is not a contraction (operator norm {c2:.6g} >= 1)")
        A.setflags(write=False)
        b.setflags(write=False)
        inv = np.linalg.inv(A)
        inv.setflags(write=False)
        return cls("affine", c1, c2, matrix=A, offset=b, _inverse=inv)

    @classmethod
    def prepend(cls, symbol):
        symbol = int(symbol)
        if symbol < 1:
            raise InputError("symbols are numbered from 1")
        return cls("symbolic", 0.5, 0.5, symbol=symbol)

    @property
    def dim(self):
        return None if self.kind == "symbolic" else self.matrix.shape[0]

    def apply(self, points):
        """Vectorised evaluation on a cloud (``(m, d)`` or ``(m, L)``)."""
        if self.kind == "symbolic":
            pts = np.asarray(points, dtype=np.int64)
            head = np.full(pts.shape[:-1] + (1,), self.symbol, dtype=np.int64)
            return np.concatenate([head, pts], axis=-1)
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise InputError(f"point dimension {pts.shape[-1]} does not match map dimension {self.dim}")
        return pts @ self.matrix.T + self.offset

    def invert(self, points):
        """Branch inverse on the image.  Symbolic: requires the leading symbol."""
        if self.kind == "symbolic":
            pts = np.asarray(points, dtype=np.int64)
            if pts.shape[-1] == 0:
                if self.symbol != 1:
                    raise DomainError(f"1^inf is not in the image of symbol {self.symbol}")
                return pts
            if np.any(pts[..., 0] != self.symbol):
                raise DomainError(f"word does not start with symbol {self.symbol}")
            return pts[..., 1:]
        pts = np.asarray(points, dtype=float)
        return (pts - self.offset) @ self._inverse.T

    def fixed_point(self):
        if self.kind == "symbolic":
            raise InputError("symbolic fixed point i^inf is not a finite word; use the system seed")
        d = self.dim
        return np.linalg.solve(np.eye(d) - self.matrix, self.offset)

    def to_json(self):
        if self.kind == "symbolic":
            return {"symbol": self.symbol}
        return {"A": self.matrix.tolist(), "b": self.offset.tolist()}


def eval_map(gamma, x):
    """gamma(x) for a single point: returns an array (euclidean) or tuple (symbolic)."""
    if gamma.kind == "symbolic":
        word = np.asarray(x, dtype=np.int64)
        if word.ndim != 1:
            raise InputError("symbolic point must be a 1-D word")
        return tuple(int(s) for s in gamma.apply(word[None, :])[0])
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.ndim != 1 or pt.shape[0] != gamma.dim:
        raise InputError(f"expected a point of dimension {gamma.dim}, got shape {pt.shape}")
    return gamma.apply(pt[None, :])[0]


# --------------------------------------------------------------------------
# systems


@dataclass(frozen=True, eq=False)
class IFSystem:
    maps: tuple
    weights: np.ndarray
    metric: str
    box: tuple | None = None
    name: str = "custom"

    def __post_init__(self):
        if len(self.maps) < 2:
            raise InputError("an IFS needs at least two maps")
        p = np.asarray(self.weights, dtype=float)
        if p.shape != (len(self.maps),):
            raise InputError("one weight per map required")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InputError(f"weights must be positive and sum to 1, got {p.tolist()}")
        p.setflags(write=False)
        object.__setattr__(self, "weights", p)
        kinds = {m.kind for m in self.maps}
        if self.metric == SEQUENCE:
            if kinds != {"symbolic"}:
                raise InputError("sequence metric requires symbolic maps")
        elif self.metric == EUCLIDEAN:
            if kinds != {"affine"}:
                raise InputError("euclidean metric requires affine maps")
            dims = {m.dim for m in self.maps}
            if len(dims) != 1:
                raise InputError("all maps must share one dimension")
        else:
            raise InputError(f"unknown metric {self.metric!r}")

    # constructors ---------------------------------------------------------

    @classmethod
    def affine(cls, maps, weights=None, box=None, name="custom"):
        cmaps = tuple(ContractionMap.affine(A, b) for A, b in maps)
        n = len(cmaps)
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        if box is None:
            box = _default_box(cmaps)
        else:
            lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in box)
            if lo.shape != (cmaps[0].dim,) or hi.shape != lo.shape or np.any(hi < lo):
                raise InputError("box must be [lo, hi] with lo <= hi per axis")
            box = (lo, hi)
        return cls(cmaps, w, EUCLIDEAN, box=box, name=name)

    @classmethod
    def shift(cls, n, weights=None):
        n = int(n)
        if n < 2:
            raise InputError("full shift needs at least two symbols")
        cmaps = tuple(ContractionMap.prepend(i) for i in range(1, n + 1))
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        return cls(cmaps, w, SEQUENCE, box=None, name=f"shift:{n}")

    def with_weights(self, weights):
        return IFSystem(self.maps, np.asarray(weights, dtype=float), self.metric, self.box, self.name)

    # properties ------------------------------------------------------------

    @property
    def n(self):
        return len(self.maps)

    @property
    def symbolic(self):
        return self.metric == SEQUENCE

    @property
    def dim(self):
        return None if self.symbolic else self.maps[0].dim

    @property
    def c1(self):
        return min(m.c1 for m in self.maps)

    @property
    def c2(self):
        return max(m.c2 for m in self.maps)

    @property
    def uniform(self):
        return bool(np.allclose(self.weights, 1.0 / self.n, rtol=0, atol=1e-15))

    @property
    def diam(self):
        """Diameter reference: the bounding box diagonal, or 1 for sequence space."""
        if self.symbolic:
            return 1.0
        lo, hi = self.box
        return float(np.linalg.norm(hi - lo))

    def default_seed(self):
        """Fixed point of the first map (constant-1 sequence for the shift)."""
        if self.symbolic:
            return np.zeros(0, dtype=np.int64)
        return self.maps[0].fixed_point()

    def distance(self, x, y):
        """Elementwise distance under the system metric (broadcasting)."""
        if self.symbolic:
            return sequence_distance(x, y)
        return np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)

    def to_json(self):
        doc = {"name": self.name, "metric": self.metric, "weights": self.weights.tolist()}
        if self.symbolic:
            doc["symbols"] = self.n
        else:
            doc["dimension"] = self.dim
            doc["box"] = [self.box[0].tolist(), self.box[1].tolist()]
        doc["maps"] = [m.to_json() for m in self.maps]
        return doc

    @property
    def key(self):
        """Stable content hash identifying the system."""
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:16]


def _default_box(cmaps):
    # every fixed point lies in K; K is inside the ball of radius R about any of them
    fps = np.array([m.fixed_point() for m in cmaps])
    c2 = max(m.c2 for m in cmaps)
    centre = fps[0]
    reach = max(np.linalg.norm(m.apply(centre[None, :])[0] - centre) for m in cmaps)
    radius = reach / (1.0 - c2)
    lo = np.minimum(fps.min(axis=0), centre - radius)
    hi = np.maximum(fps.max(axis=0), centre + radius)
    return lo, hi


# --------------------------------------------------------------------------
# built-in systems and JSON loading


def tent():
    return IFSystem.affine([([[0.5]], [0.0]), ([[-0.5]], [1.0])], box=([0.0], [1.0]), name="tent")


def cantor(ratio=1.0 / 3.0):
    r = float(ratio)
    if not 0.0 < r < 0.5:
        raise InputError("cantor ratio must lie in (0, 1/2) for disjoint images")
    return IFSystem.affine([([[r]], [0.0]), ([[r]], [1.0 - r])], box=([0.0], [1.0]),
                           name="cantor" if abs(r - 1 / 3) < 1e-15 else f"cantor:{ratio}")


def sierpinski():
    half = [[0.5, 0.0], [0.0, 0.5]]
    return IFSystem.affine(
        [(half, [0.0, 0.0]), (half, [0.5, 0.0]), (half, [0.0, 0.5])],
        box=([0.0, 0.0], [1.0, 1.0]),
        name="sierpinski",
    )


BUILTIN_NAMES = ("tent", "cantor", "cantor:<r>", "shift:<n>", "sierpinski")


def builtin(name):
    """Resolve a built-in system name such as ``"tent"`` or ``"shift:3"``."""
    head, _, arg = name.partition(":")
    try:
        if head == "tent" and not arg:
            return tent()
        if head == "cantor":
            return cantor(float(arg)) if arg else cantor()
        if head == "shift":
            return IFSystem.shift(int(arg) if arg else 2)
        if head == "sierpinski" and not arg:
            return sierpinski()
    except ValueError as exc:
        raise InputError(f"bad built-in system {name!r}: {exc}") from exc
    raise InputError(f"unknown system {name!r}; built-ins are {', '.join(BUILTIN_NAMES)}")


def system_from_json(doc):
    """Build a system from the JSON document format (see README)."""
    if not isinstance(doc, dict):
        raise InputError("system document must be a JSON object")
    metric = doc.get("metric", EUCLIDEAN)
    weights = doc.get("weights")
    name = doc.get("name", "custom")
    if metric == SEQUENCE:
        n = doc.get("symbols")
        if n is None:
            raise InputError("sequence systems need 'symbols'")
        sys = IFSystem.shift(int(n), weights=weights)
        return sys if name == "custom" else IFSystem(sys.maps, sys.weights, SEQUENCE, None, name)
    if metric != EUCLIDEAN:
        raise InputError(f"unknown metric {metric!r}")
    try:
        maps = [(m["A"], m["b"]) for m in doc["maps"]]
    except (KeyError, TypeError) as exc:
        raise InputError("each map needs 'A' and 'b'") from exc
    dim = doc.get("dimension")
    sys = IFSystem.affine(maps, weights=weights, box=doc.get("box"), name=name)
    if dim is not None and int(dim) != sys.dim:
        raise InputError(f"declared dimension {dim} but maps act on dimension {sys.dim}")
    return sys


def load_system(spec):
    """A built-in name or a path to a JSON system file."""
    if os.path.exists(spec) and spec.endswith(".json"):
        with open(spec) as fh:
            return system_from_json(json.load(fh))
    return builtin(spec)


# --------------------------------------------------------------------------
# contraction bounds


def _sample_points(sys_or_map, count, rng, box=None, symbols=None, word_length=16):
    if isinstance(sys_or_map, ContractionMap) and sys_or_map.kind == "symbolic":
        k = symbols or max(sys_or_map.symbol, 2)
        return rng.integers(1, k + 1, size=(count, word_length))
    d = sys_or_map.dim
    if box is None:
        lo, hi = np.zeros(d), np.ones(d)
    else:
        lo, hi = box
    return lo + (hi - lo) * rng.random((count, d))


def contraction_bounds_estimate(gamma, samples, rng_seed, box=None, symbols=None):
    """Sampled (min, max) of d(g x, g y) / d(x, y).

    Pairs with x == y are redrawn.  For affine maps the result approaches the
    extreme singular values of the matrix, which are stored in ``gamma.c1/c2``.
    """
    if samples < 2:
        raise InputError("need at least two samples")
    rng = np.random.default_rng(rng_seed)
    pairs = samples // 2 if samples >= 4 else 1
    sym = gamma.kind == "symbolic"
    x = _sample_points(gamma, pairs, rng, box, symbols)
    y = _sample_points(gamma, pairs, rng, box, symbols)
    dist = sequence_distance if sym else (lambda a, b: np.linalg.norm(a - b, axis=-1))
    d0 = dist(x, y)
    for _ in range(100):
        bad = d0 == 0
        if not bad.any():
            break
        y[bad] = _sample_points(gamma, int(bad.sum()), rng, box, symbols)
        d0 = dist(x, y)
    keep = d0 > 0
    ratios = dist(gamma.apply(x[keep]), gamma.apply(y[keep])) / d0[keep]
    return float(ratios.min()), float(ratios.max())


# --------------------------------------------------------------------------
# expanding map via branch inverses


def _box_distance(points, box):
    lo, hi = box
    gap = np.maximum(lo - points, 0.0) + np.maximum(points - hi, 0.0)
    return np.linalg.norm(gap, axis=-1)


def select_branches(sys, points, tol=1e-9):
    """Branch index (0-based) for each euclidean point: nearest image cell, lowest index on ties."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dists = np.stack(
        [m.c2 * _box_distance(m.invert(pts), sys.box) for m in sys.maps], axis=1
    )
    best = dists.min(axis=1)
    if np.any(best > tol):
        k = int(np.argmax(best))
        raise DomainError(
            f"point {pts[k].tolist()} lies {best[k]:.3g} outside every branch image (tol {tol:g})"
        )
    # argmax of a boolean picks the first (lowest) index achieving the minimum
    return np.argmax(dists <= best[:, None], axis=1)


def phi_apply_many(sys, points, tol=1e-9):
    """Apply the expanding map to a cloud; returns (images, branch indices)."""
    if sys.symbolic:
        pts = np.asarray(points, dtype=np.int64)
        if pts.shape[-1] == 0:
            return pts, np.zeros(pts.shape[0], dtype=np.int64)
        return pts[:, 1:], pts[:, 0] - 1
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    branch = select_branches(sys, pts, tol)
    out = np.empty_like(pts)
    for i, m in enumerate(sys.maps):
        sel = branch == i
        if sel.any():
            out[sel] = m.invert(pts[sel])
    return out, branch


def phi_apply(sys, x, tol=1e-9):
    """phi(x) realised as gamma_i^{-1}(x) for the branch whose image holds x."""
    if sys.symbolic:
        word = tuple(int(s) for s in np.asarray(x, dtype=np.int64).ravel())
        if word and not 1 <= word[0] <= sys.n:
            raise DomainError(f"symbol {word[0]} not in 1..{sys.n}")
        return word[1:]
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.shape != (sys.dim,):
        raise InputError(f"expected a point of dimension {sys.dim}")
    out, _ = phi_apply_many(sys, pt[None, :], tol)
    return out[0]
