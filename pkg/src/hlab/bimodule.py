"""The Hilbert bimodule X = C(K) over A = C(K) on word cells.

Elements of X live at depth N, elements of A acting on the right live at depth
N-1, and <xi, eta>_A = L_phi(conj(xi) eta).  Every operator built from
M_u C_phi C_phi^* M_u^* only couples the n cells ``j v`` sharing a tail ``v``
(a fiber), so frame operators are handled as stacks of n x n blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError, PreconditionError, UnsupportedError
from .ifs import EUCLIDEAN
from .operators import (
    CellSpace,
    GridFunction,
    comp_op,
    identity,
    mult_op,
    operator_norm,
    random_function,
    transfer_apply,
)
from .report import DefectReport, timed


@dataclass(frozen=True, eq=False)
class BimoduleElement(GridFunction):
    """An element xi of X sampled on a depth-N cell space."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)):
            raise InputError("bimodule elements must have finite values")

    def norm2(self):
        """||xi||_2 = max_v <xi, xi>_A(v)^(1/2)."""
        return float(np.sqrt(inner_product_A(self, self).values.real.max()))


def as_element(f):
    if isinstance(f, BimoduleElement):
        return f
    return BimoduleElement(f.space, f.values)


def inner_product_A(xi, eta):
    """<xi, eta>_A(v) = (1/n) sum_i conj(xi(i v)) eta(i v), a depth N-1 function."""
    if not xi.space.compatible(eta.space):
        raise InputError("inner product of elements on different cell spaces")
    return transfer_apply(GridFunction(xi.space, np.conj(xi.values) * eta.values))


def module_action(a, xi, b):
    """(a . xi . b)(w) = a(w) xi(w) b(sigma w)."""
    space = xi.space
    if a is not None and not a.space.compatible(space):
        raise InputError("left action needs a function at the element's depth")
    if b is not None and not b.space.compatible(space.coarser()):
        raise InputError("right action needs a function one level below the element")
    vals = xi.values.copy()
    if a is not None:
        vals = a.values * vals
    if b is not None:
        vals = vals * b.values[space.shift_index()]
    return BimoduleElement(space, vals)


def right_action(xi, b):
    return module_action(None, xi, b)


def left_action(a, xi):
    return module_action(a, xi, None)


# --------------------------------------------------------------------------
# basis families


@dataclass(frozen=True, eq=False)
class BasisFamily:
    """A finite family u_1..u_M in X on one cell space.

    ``meta`` holds one dict per element (support description); ``breakpoints``
    lists the dyadic distance breakpoints of partition-of-unity families.
    """

    space: CellSpace
    elements: list
    kind: str
    meta: list = field(default_factory=list)
    breakpoints: list = field(default_factory=list)
    exact_radius: float = 0.0

    def __len__(self):
        return len(self.elements)

    @property
    def depth(self):
        return self.space.depth

    def values(self, upto=None):
        """Element values as an (M, cells) array."""
        els = self.elements[: len(self.elements) if upto is None else upto]
        if not els:
            return np.zeros((0, self.space.size), dtype=complex)
        return np.stack([u.values for u in els])

    def to_json(self):
        return {
            "kind": self.kind,
            "system": self.space.system.name,
            "depth": self.depth,
            "size": len(self),
            "exact_radius": self.exact_radius,
            "breakpoints": [float(b) for b in self.breakpoints],
            "elements": self.meta,
        }


def cylinder_basis(sys, space):
    """u_i = sqrt(n) times the indicator of the words starting with i."""
    if space.depth < 1:
        raise InputError("cylinder basis needs depth >= 1")
    if space.system is not sys and space.system.key != sys.key:
        raise InputError("space belongs to a different system")
    first = space.first_symbol()
    scale = np.sqrt(sys.n)
    elements = [BimoduleElement(space, scale * (first == i)) for i in range(sys.n)]
    meta = [{"cylinder": [i + 1]} for i in range(sys.n)]
    return BasisFamily(space, elements, "cylinder", meta)


def hat_profile(t, level, scale=1.0):
    """Piecewise-linear bump in the distance variable t with dyadic breakpoints.

    Level 0 rises from 0 at scale/2 to 1 at scale and stays 1 beyond.  Level
    l >= 1 peaks at scale 2^-l and vanishes outside (scale 2^-(l+1), scale 2^-(l-1)).
    Summed over levels 0..L the profiles equal 1 for t >= scale 2^-L.
    """
    t = np.minimum(np.asarray(t, dtype=float), 4.0 * scale)
    b = scale * 2.0 ** -np.arange(level - 1, level + 2, dtype=float)
    if level == 0:
        return np.interp(t, [b[2], b[1]], [0.0, 1.0], left=0.0, right=1.0)
    return np.interp(t, [b[2], b[1], b[0]], [0.0, 1.0, 0.0], left=0.0, right=0.0)


def _piece_cuts(sys, B_points):
    lo, hi = float(sys.box[0][0]), float(sys.box[1][0])
    ends = []
    for g in sys.maps:
        ends.extend(np.ravel(g.apply(np.array([[lo], [hi]]))).tolist())
    cuts = np.unique(np.concatenate([[lo, hi], ends, np.ravel(B_points)]))
    return cuts[(cuts >= lo) & (cuts <= hi)]


def pou_basis(sys, space, B, levels):
    """Multi-scale partition-of-unity family adapted to the branch set B.

    Hats h_l (l = 0..levels) in the distance to B form a partition of unity
    beyond distance diam 2^-levels.  The box is cut at B and at the endpoints of
    the images gamma_i(box) so that each piece meets each fiber at most once, and
    each element is u = sqrt(n h_l) on one piece.  Then sum_k u_k <u_k, xi>_A
    equals xi at every cell farther than diam 2^-levels from B.
    """
    if sys.metric != EUCLIDEAN or sys.dim != 1:
        raise UnsupportedError("partition-of-unity bases are built for 1-D euclidean systems")
    if not B.finite:
        raise UnsupportedError("branch set is not finite")
    if levels < 0:
        raise InputError("levels must be non-negative")
    x = space.points[:, 0]
    Bp = np.ravel(B.B_points)
    t = np.abs(x[:, None] - Bp[None, :]).min(axis=1) if Bp.size else np.full(x.shape, np.inf)
    scale = sys.diam
    cuts = _piece_cuts(sys, Bp)
    piece = np.clip(np.searchsorted(cuts, x, side="right") - 1, 0, len(cuts) - 2)
    elements, meta = [], []
    for level in range(levels + 1):
        h = hat_profile(t, level, scale)
        band = [scale * 2.0 ** -(level + 1), None if level == 0 else scale * 2.0 ** -(level - 1)]
        for k in range(len(cuts) - 1):
            vals = np.sqrt(sys.n * h) * (piece == k)
            if not np.any(vals):
                continue
            elements.append(BimoduleElement(space, vals))
            meta.append({"level": level, "piece": [float(cuts[k]), float(cuts[k + 1])],
                         "distance_band": band, "centres": Bp.tolist()})
    breakpoints = [scale * 2.0**-l for l in range(levels + 2)]
    return BasisFamily(space, elements, "partition-of-unity", meta, breakpoints,
                       exact_radius=scale * 2.0**-levels if Bp.size else 0.0)


def reconstruct(basis, xi):
    """sum_k u_k . <u_k, xi>_A."""
    out = np.zeros(basis.space.size, dtype=complex)
    for u in basis.elements:
        out += right_action(u, inner_product_A(u, xi)).values
    return BimoduleElement(basis.space, out)


def reconstruction_defect(basis, xi, min_distance=None, B_points=None):
    """sup |xi - reconstruct(xi)|, optionally only over cells at distance >= min_distance from B."""
    diff = np.abs(xi.values - reconstruct(basis, xi).values)
    if min_distance is not None and B_points is not None and np.size(B_points):
        x = basis.space.points
        Bp = np.asarray(B_points, dtype=float).reshape(-1, x.shape[1])
        dist = np.linalg.norm(x[:, None, :] - Bp[None, :, :], axis=2).min(axis=1)
        diff = diff[dist >= min_distance]
    return float(diff.max(initial=0.0))


# --------------------------------------------------------------------------
# frame operators


def frame_operator(basis, upto=None):
    """T = sum_{i <= upto} M_{u_i} C_phi C_phi^* M_{u_i}^* as an operator on the basis space."""
    space = basis.space
    upto = len(basis) if upto is None else upto
    if upto > len(basis):
        raise InputError(f"upto={upto} exceeds family size {len(basis)}")
    C = comp_op(space)
    CC = C @ C.adjoint()
    T = identity(space) * 0.0
    for u in basis.elements[:upto]:
        Mu = mult_op(u)
        T = T + Mu @ CC @ Mu.adjoint()
    return T


def fiber_blocks(basis, upto=None):
    """Cumulative frame blocks, shape (upto, n^(N-1), n, n).

    Entry [m, v, i, j] is T_{m+1} restricted to the fiber of tail v, between the
    cells (i+1) v and (j+1) v.
    """
    n = basis.space.system.n
    U = basis.values(upto)
    U = U.reshape(U.shape[0], n, -1).transpose(0, 2, 1)  # (M, tails, n)
    terms = U[:, :, :, None] * np.conj(U[:, :, None, :]) / n
    return np.cumsum(terms, axis=0)


def _eigvalsh(blocks):
    try:
        return np.linalg.eigvalsh(blocks)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc


def frame_bounds_check(basis, eps=1e-10):
    """Extreme eigenvalues of every partial sum T_m must lie in [-eps, 1 + eps]."""
    with timed() as clock:
        if len(basis) == 0:
            mins, maxs = [], []
        else:
            ev = _eigvalsh(fiber_blocks(basis))
            mins = ev[..., 0].min(axis=1).tolist()
            maxs = ev[..., -1].max(axis=1).tolist()
        violation = max([max(-lo, hi - 1.0, 0.0) for lo, hi in zip(mins, maxs)], default=0.0)
    return DefectReport(
        check="frame", system=basis.space.system.name, depth=basis.depth,
        defect=violation, tolerance=eps, params={"basis": basis.kind, "size": len(basis)},
        details={"min_eigenvalue": mins, "max_eigenvalue": maxs}, wall_time=clock[0],
    )


def key_identity_defect(basis, a):
    """sup | T a - sum_i u_i . <u_i, a>_A |, operator side against module side."""
    if not a.space.compatible(basis.space):
        raise InputError("a must live on the basis space")
    lhs = frame_operator(basis).apply(a.values)
    rhs = reconstruct(basis, a).values
    return float(np.abs(lhs - rhs).max(initial=0.0))


# --------------------------------------------------------------------------
# the ideal J(X)


@dataclass(frozen=True, eq=False)
class IdealElement:
    """A function a in A together with its size near B.

    ``near_max`` is max |a| over cells whose representative lies strictly closer
    than ``radius`` to a point of B; membership requires it to be <= ``bound``.
    """

    function: GridFunction
    B_points: np.ndarray
    bound: float
    radius: float
    near_max: float
    worst_cell: int | None

    def check(self):
        if self.near_max > self.bound:
            space = self.function.space
            word = "".join(str(s) for s in space.words[self.worst_cell]) if space.depth else "()"
            raise PreconditionError(
                f"a is not in J(X): |a| = {self.near_max:.3e} > {self.bound:.1e} at cell {word} "
                f"(within {self.radius:.3e} of the branch set)"
            )
        return self


def ideal_element(a, B_points, bound=1e-9, radius=None):
    space = a.space
    sys = space.system
    if radius is None:
        radius = 2.0 * sys.c2**space.depth * sys.diam
    Bp = np.asarray(B_points, dtype=float)
    near_max, worst = 0.0, None
    if Bp.size and not sys.symbolic:
        x = space.points
        Bp = Bp.reshape(-1, x.shape[1])
        dist = np.linalg.norm(x[:, None, :] - Bp[None, :, :], axis=2).min(axis=1)
        near = np.flatnonzero(dist < radius)
        if near.size:
            mods = np.abs(a.values[near])
            k = int(np.argmax(mods))
            near_max, worst = float(mods[k]), int(near[k])
    return IdealElement(a, Bp, bound, radius, near_max, worst)


def ideal_covariance_defect(basis, a, method="blocks"):
    """|| sum_i M_a M_{u_i} C C^* M_{u_i}^* - M_a || for a in J(X).

    ``method="blocks"`` takes the exact maximum over fiber blocks;
    ``"operator"`` assembles the operator and uses :func:`operator_norm`.
    """
    if not isinstance(a, IdealElement):
        raise InputError("expected an IdealElement; build one with ideal_element()")
    a.check()
    f = a.function
    if not f.space.compatible(basis.space):
        raise InputError("a must live on the basis space")
    if method == "operator":
        Ma = mult_op(f)
        return operator_norm(Ma @ frame_operator(basis) - Ma)
    n = basis.space.system.n
    if len(basis):
        T = fiber_blocks(basis)[-1]
    else:
        T = np.zeros((basis.space.size // n, n, n), dtype=complex)
    av = f.values.reshape(n, -1).T  # (tails, n)
    D = av[:, :, None] * (T - np.eye(n)[None])
    return float(np.linalg.norm(D, ord=2, axis=(1, 2)).max(initial=0.0))


# --------------------------------------------------------------------------
# representation checks


def covariant_rep_defects(a, xi, eta):
    """(|| M_a M_xi C - M_{a.xi} C ||, || C^* M_xi^* M_eta C - M_{<xi,eta>_A} ||)."""
    space = xi.space
    C = comp_op(space)
    Mxi = mult_op(xi)
    first = operator_norm(mult_op(a) @ Mxi @ C - mult_op(left_action(a, xi)) @ C)
    second = operator_norm(C.adjoint() @ Mxi.adjoint() @ mult_op(eta) @ C
                           - mult_op(inner_product_A(xi, eta)))
    return first, second


def covariant_rep_check(sys, space, trials=50, rng_seed=0, tol=1e-12):
    if space.depth < 2:
        raise InputError("covariant representation check needs depth >= 2")
    rng = np.random.default_rng(rng_seed)
    with timed() as clock:
        left, inner = [], []
        for _ in range(trials):
            a, xi, eta = (random_function(space, rng) for _ in range(3))
            d1, d2 = covariant_rep_defects(a, xi, eta)
            left.append(d1)
            inner.append(d2)
        defect = max(left + inner, default=0.0)
    return DefectReport(
        check="covariant-rep", system=sys.name, depth=space.depth, defect=defect, tolerance=tol,
        params={"trials": trials, "rng_seed": rng_seed},
        details={"left_action_max": max(left, default=0.0), "inner_product_max": max(inner, default=0.0)},
        wall_time=clock[0],
    )


def cuntz_isometries(space):
    """S_i = M_{u_i} C_phi for the cylinder basis."""
    basis = cylinder_basis(space.system, space)
    C = comp_op(space)
    return [mult_op(u) @ C for u in basis.elements]


def cuntz_relations_check(sys, space, tol=1e-12):
    """||S_i^* S_j - delta_ij I|| for all i, j and ||sum_i S_i S_i^* - I||."""
    if not sys.symbolic:
        raise UnsupportedError(
            f"Cuntz relations are checked on full shifts only, not {sys.name}; "
            "use covariant-rep and frame checks for geometric systems"
        )
    with timed() as clock:
        S = cuntz_isometries(space)
        coarse_id = identity(space.coarser())
        pairs = {}
        for i, Si in enumerate(S):
            for j, Sj in enumerate(S):
                target = coarse_id if i == j else coarse_id * 0.0
                pairs[f"{i + 1},{j + 1}"] = operator_norm(Si.adjoint() @ Sj - target)
        total = S[0] @ S[0].adjoint()
        for Si in S[1:]:
            total = total + Si @ Si.adjoint()
        completeness = operator_norm(total - identity(space))
    return DefectReport(
        check="cuntz", system=sys.name, depth=space.depth,
        defect=max(max(pairs.values()), completeness), tolerance=tol,
        details={"orthogonality": pairs, "completeness": completeness}, wall_time=clock[0],
    )

