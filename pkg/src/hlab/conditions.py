"""Structural conditions on an IFS: branch sets and the open set condition."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .attractor import attractor_deterministic
from .errors import InputError
from .report import DefectReport, timed


@dataclass(frozen=True, eq=False)
class BranchSetEstimate:
    """Approximations of C (where two branches agree) and B (their common images).

    ``pairs[k]`` holds the 0-based branch pair whose collision produced
    ``C_points[k]``; ``B_points[k]`` is its image.  ``finite`` is False when some
    pair agrees on a whole region (the finite branch condition fails).
    """

    C_points: np.ndarray
    B_points: np.ndarray
    pairs: list
    tolerance: float
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    finite: bool = True

    @property
    def empty(self):
        return self.C_points.shape[0] == 0


def _empty_estimate(sys, tolerance):
    d = 0 if sys.symbolic else sys.dim
    return BranchSetEstimate(np.zeros((0, d)), np.zeros((0, d)), [], tolerance)


def _near_attractor(sys, pts, slack):
    # keep only candidates close to K, using a coarse word cloud as its proxy
    depth = max(1, int(np.floor(np.log(4096) / np.log(sys.n))))
    cloud = attractor_deterministic(sys, depth).points
    reach = sys.c2**depth * sys.diam
    dist, _ = cKDTree(cloud).query(pts, k=1)
    return dist <= reach + slack


def _bisect(f, lo, hi, tol, max_iter=200):
    flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol and hi - lo <= tol:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol * 1e-3:
            break
    return 0.5 * (lo + hi)


def branch_sets(sys, grid_resolution=10_000, tolerance=1e-10):
    """Grid scan plus bisection for points where two branches collide.

    In 1-D, sign changes of gamma_i - gamma_j on the grid are refined by
    bisection.  In higher dimension the grid cells within reach of a
    collision are clustered and each cluster's centroid is reported unrefined.
    """
    if grid_resolution < 1:
        raise InputError("grid_resolution must be positive")
    if sys.symbolic:
        # distinct prepends never agree
        return _empty_estimate(sys, tolerance)
    if sys.dim == 1:
        return _branch_sets_1d(sys, grid_resolution, tolerance)
    return _branch_sets_nd(sys, grid_resolution, tolerance)


def _branch_sets_1d(sys, resolution, tolerance):
    lo, hi = float(sys.box[0][0]), float(sys.box[1][0])
    grid = np.linspace(lo, hi, resolution + 1)
    roots, images, pairs, residuals = [], [], [], []
    finite = True
    for i, j in combinations(range(sys.n), 2):
        gi, gj = sys.maps[i], sys.maps[j]

        def diff(x, gi=gi, gj=gj):
            return float(gi.apply(np.array([[x]]))[0, 0] - gj.apply(np.array([[x]]))[0, 0])

        vals = (gi.apply(grid[:, None]) - gj.apply(grid[:, None]))[:, 0]
        if np.all(np.abs(vals) <= tolerance):
            finite = False
            found = list(grid)
        else:
            found = list(grid[np.abs(vals) <= tolerance])
            flips = np.nonzero((np.sign(vals[:-1]) * np.sign(vals[1:]) < 0))[0]
            for k in flips:
                found.append(_bisect(diff, grid[k], grid[k + 1], tolerance))
        if not found:
            continue
        found = np.unique(np.round(np.asarray(found) / tolerance) * tolerance) if finite else np.asarray(found)
        keep = _near_attractor(sys, found[:, None], tolerance)
        for x in found[keep]:
            roots.append([x])
            images.append(gi.apply(np.array([[x]]))[0])
            pairs.append((i, j))
            residuals.append(abs(diff(x)))
    if not roots:
        return BranchSetEstimate(np.zeros((0, 1)), np.zeros((0, 1)), [], tolerance, finite=finite)
    return BranchSetEstimate(np.array(roots), np.array(images), pairs, tolerance,
                             residuals=np.array(residuals), finite=finite)


def _branch_sets_nd(sys, resolution, tolerance):
    d = sys.dim
    per_axis = max(2, int(round(resolution ** (1.0 / d))))
    axes = [np.linspace(sys.box[0][k], sys.box[1][k], per_axis) for k in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    pts = mesh.reshape(-1, d)
    spacing = np.array([(ax[1] - ax[0]) if len(ax) > 1 else 0.0 for ax in axes])
    roots, images, pairs, residuals = [], [], [], []
    finite = True
    for i, j in combinations(range(sys.n), 2):
        gi, gj = sys.maps[i], sys.maps[j]
        resid = np.linalg.norm(gi.apply(pts) - gj.apply(pts), axis=1)
        # a root inside a grid cell is within this reach of a grid node
        lip = np.linalg.norm(gi.matrix - gj.matrix, 2)
        reach = max(tolerance, lip * 0.5 * np.linalg.norm(spacing))
        hit = (resid <= reach).reshape(mesh.shape[:-1])
        if not hit.any():
            continue
        if hit.all():
            finite = False
        labels, count = ndimage.label(hit)
        for lab in range(1, count + 1):
            members = pts[(labels == lab).ravel()]
            centre = members.mean(axis=0)
            if not _near_attractor(sys, centre[None, :], reach)[0]:
                continue
            roots.append(centre)
            images.append(gi.apply(centre[None, :])[0])
            pairs.append((i, j))
            residuals.append(float(np.linalg.norm(gi.apply(centre[None, :]) - gj.apply(centre[None, :]))))
    if not roots:
        return BranchSetEstimate(np.zeros((0, d)), np.zeros((0, d)), [], tolerance, finite=finite)
    return BranchSetEstimate(np.array(roots), np.array(images), pairs, tolerance,
                             residuals=np.array(residuals), finite=finite)


# --------------------------------------------------------------------------
# open set condition


def parse_open_set(V, dim):
    """Normalise an open set description into a list of (lo, hi) boxes.

    Accepts ``(lo, hi)`` for one box, a list of such pairs, or the string form
    ``"0,1"`` / ``"0,0.5;0.5,1"`` for 1-D intervals.
    """
    if isinstance(V, str):
        boxes = []
        for part in V.split(";"):
            try:
                nums = [float(t) for t in part.split(",") if t.strip()]
            except ValueError:
                raise InputError(f"open set piece {part!r} is not numeric") from None
            if len(nums) != 2 * dim:
                raise InputError(f"open set piece {part!r} needs {2 * dim} numbers")
            boxes.append((np.array(nums[:dim]), np.array(nums[dim:])))
    else:
        try:
            arr = np.asarray(V, dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"malformed open set {V!r}") from exc
        if dim == 1 and arr.shape == (2,):
            arr = arr.reshape(1, 2, 1)
        elif dim == 1 and arr.ndim == 2 and arr.shape[1] == 2:
            arr = arr.reshape(-1, 2, 1)
        elif arr.shape == (2, dim):
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[1:] != (2, dim):
            raise InputError(f"open set must be boxes of shape (k, 2, {dim}), got {arr.shape}")
        boxes = [(b[0], b[1]) for b in arr]
    if not boxes:
        raise InputError("open set must be non-empty")
    for lo, hi in boxes:
        if lo.shape != (dim,) or hi.shape != (dim,):
            raise InputError(f"box corners must have dimension {dim}")
        if np.any(hi <= lo):
            raise InputError("each open box needs lo < hi on every axis")
    return boxes


def _merge_intervals(boxes):
    ivs = sorted((float(lo[0]), float(hi[0])) for lo, hi in boxes)
    merged = [list(ivs[0])]
    for lo, hi in ivs[1:]:
        # open intervals sharing only an endpoint stay separate
        if lo < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return merged


def _image_box(gamma, lo, hi):
    """Corners of the image of an open box; exact box when the matrix is diagonal."""
    d = lo.shape[0]
    corners = np.array(np.meshgrid(*[[lo[k], hi[k]] for k in range(d)], indexing="ij")).reshape(d, -1).T
    img = gamma.apply(corners)
    return img.min(axis=0), img.max(axis=0), img


def _is_diagonal(gamma):
    A = gamma.matrix
    return np.count_nonzero(A - np.diag(np.diag(A))) == 0


def _in_union(points, boxes):
    inside = np.zeros(points.shape[0], dtype=bool)
    for lo, hi in boxes:
        inside |= np.all((points > lo) & (points < hi), axis=1)
    return inside


def _sample_in_box(rng, lo, hi, count):
    return lo + (hi - lo) * rng.uniform(0.0, 1.0, size=(count, lo.shape[0]))


def open_set_condition_check(sys, V, samples=2000, rng_seed=0):
    """Check gamma_i(V) inside V and pairwise disjointness of the images.

    1-D uses exact interval arithmetic.  In higher dimension containment is
    exact for a single convex box (vertex test) and disjointness is exact when
    the images are axis-aligned boxes; otherwise sampled witnesses are searched.
    """
    with timed() as clock:
        if sys.symbolic:
            # V = K: cylinders [i] are open, disjoint and inside K
            details = {"containment": True, "disjoint": True, "witness": None, "method": "cylinders"}
            violations = 0
        elif sys.dim == 1:
            details, violations = _osc_1d(sys, parse_open_set(V, 1))
        else:
            details, violations = _osc_nd(sys, parse_open_set(V, sys.dim), samples, rng_seed)
    return DefectReport("osc", sys.name, None, float(violations), 0.0,
                        params={"V": V if isinstance(V, str) else _describe(V), "samples": samples,
                                "rng_seed": rng_seed},
                        details=details, wall_time=clock[0])


def _describe(V):
    try:
        return np.asarray(V, dtype=float).tolist()
    except (TypeError, ValueError):
        return str(V)


def _osc_1d(sys, boxes):
    V = _merge_intervals(boxes)
    images = []
    for gamma in sys.maps:
        pieces = []
        for lo, hi in V:
            a, b = gamma.apply(np.array([[lo], [hi]]))[:, 0]
            pieces.append((min(a, b), max(a, b)))
        images.append(pieces)
    details = {"containment": True, "disjoint": True, "witness": None, "method": "interval",
               "images": images, "V": V}
    violations = 0
    for i, pieces in enumerate(images):
        for lo, hi in pieces:
            if not any(vlo <= lo and hi <= vhi for vlo, vhi in V):
                details["containment"] = False
                details["witness"] = {"clause": "containment", "map": i, "point": [0.5 * (lo + hi)],
                                      "image_piece": [lo, hi]}
                violations += 1
                break
        if not details["containment"]:
            break
    for i, j in combinations(range(sys.n), 2):
        hit = None
        for alo, ahi in images[i]:
            for blo, bhi in images[j]:
                lo, hi = max(alo, blo), min(ahi, bhi)
                if lo < hi:
                    hit = [0.5 * (lo + hi)]
                    break
            if hit:
                break
        if hit is not None:
            details["disjoint"] = False
            details.setdefault("overlaps", []).append({"pair": [i, j], "witness": hit})
            if details["witness"] is None:
                details["witness"] = {"clause": "disjoint", "pair": [i, j], "point": hit}
            violations += 1
    return details, violations


def _osc_nd(sys, boxes, samples, rng_seed):
    rng = np.random.default_rng(rng_seed)
    details = {"containment": True, "disjoint": True, "witness": None, "method": {}}
    violations = 0
    single = len(boxes) == 1
    for i, gamma in enumerate(sys.maps):
        for lo, hi in boxes:
            _, _, corners = _image_box(gamma, lo, hi)
            if single:
                vlo, vhi = boxes[0]
                ok = bool(np.all((corners >= vlo) & (corners <= vhi)))
                bad = None if ok else corners[~np.all((corners >= vlo) & (corners <= vhi), axis=1)][0]
                details["method"]["containment"] = "vertices"
            else:
                pts = gamma.apply(_sample_in_box(rng, lo, hi, samples))
                inside = _in_union(pts, boxes)
                ok = bool(inside.all())
                bad = None if ok else pts[~inside][0]
                details["method"]["containment"] = "sampled"
            if not ok:
                details["containment"] = False
                details["witness"] = {"clause": "containment", "map": i, "point": bad.tolist()}
                violations += 1
                break
        if not details["containment"]:
            break
    for i, j in combinations(range(sys.n), 2):
        gi, gj = sys.maps[i], sys.maps[j]
        hit = None
        if _is_diagonal(gi) and _is_diagonal(gj):
            details["method"]["disjoint"] = "boxes"
            for alo, ahi in boxes:
                ilo, ihi, _ = _image_box(gi, alo, ahi)
                for blo, bhi in boxes:
                    jlo, jhi, _ = _image_box(gj, blo, bhi)
                    lo, hi = np.maximum(ilo, jlo), np.minimum(ihi, jhi)
                    if np.all(lo < hi):
                        hit = (0.5 * (lo + hi)).tolist()
                        break
                if hit:
                    break
        else:
            details["method"]["disjoint"] = "sampled"
            for lo, hi in boxes:
                pts = gi.apply(_sample_in_box(rng, lo, hi, samples))
                back = gj.invert(pts)
                inside = _in_union(back, boxes)
                if inside.any():
                    hit = pts[inside][0].tolist()
                    break
        if hit is not None:
            details["disjoint"] = False
            details.setdefault("overlaps", []).append({"pair": [i, j], "witness": hit})
            if details["witness"] is None:
                details["witness"] = {"clause": "disjoint", "pair": [i, j], "point": hit}
            violations += 1
    return details, violations
