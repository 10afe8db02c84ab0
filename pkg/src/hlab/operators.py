"""L^2(K, mu^H) on depth-N word cells, and the operators M_a, C_phi, L_phi.

A cell space at depth N has one cell per word ``w`` of length N (lexicographic
order, first symbol most significant), each of mass ``n^-N``.  Functions are
sampled at the representative ``gamma_w(seed)``.  Under this coding the
expanding map acts on words by dropping the first symbol, so the composition
and transfer operators are exact combinatorial matrices between depths N-1 and N.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .attractor import all_words, word_points
from .errors import InputError, NumericalError, ResourceError
from .ifs import check_budget
from .measure import evaluate


class CellSpace:
    """Depth-N word-cell discretisation of L^2(K, mu^H)."""

    def __init__(self, system, depth, seed_point=None):
        if depth < 0:
            raise InputError("depth must be non-negative")
        if not system.uniform:
            raise InputError(
                "cell spaces use the equal-weight Hutchinson measure; "
                "C_phi^* = L_phi fails for unequal weights"
            )
        check_budget(system.n, depth, "cells")
        self.system = system
        self.depth = depth
        self.seed = system.default_seed() if seed_point is None else np.asarray(seed_point)
        self.size = system.n**depth
        self.weight = float(system.n) ** -depth
        self._coarser = None

    def __repr__(self):
        return f"CellSpace({self.system.name}, depth={self.depth})"

    @cached_property
    def points(self):
        """Representatives gamma_w(seed), one row per cell."""
        return word_points(self.system, self.depth, self.seed)

    @cached_property
    def words(self):
        return all_words(self.system.n, self.depth)

    @property
    def weights(self):
        return np.full(self.size, self.weight)

    def compatible(self, other):
        return (
            isinstance(other, CellSpace)
            and other.depth == self.depth
            and (other.system is self.system or other.system.key == self.system.key)
            and np.array_equal(np.asarray(other.seed), np.asarray(self.seed))
        )

    def coarser(self):
        """The depth N-1 space over the same system and seed."""
        if self.depth < 1:
            raise InputError("depth-0 space has no coarser level")
        if self._coarser is None:
            self._coarser = CellSpace(self.system, self.depth - 1, self.seed)
        return self._coarser

    def finer(self):
        return CellSpace(self.system, self.depth + 1, self.seed)

    # word arithmetic on cell indices -------------------------------------

    def shift_index(self):
        """Index of sigma(w) (first symbol dropped) for every cell w."""
        return np.arange(self.size) % (self.system.n ** (self.depth - 1))

    def first_symbol(self):
        """0-based first symbol of every cell word."""
        return np.arange(self.size) // (self.system.n ** (self.depth - 1))

    def prepend_index(self, i):
        """Index of the word (i+1)v at depth N+1 for every cell v of this space."""
        return i * self.size + np.arange(self.size)

    def index_of(self, word):
        word = [int(s) for s in word]
        if len(word) != self.depth or not all(1 <= s <= self.system.n for s in word):
            raise InputError(f"{word} is not a depth-{self.depth} word over 1..{self.system.n}")
        idx = 0
        for s in word:
            idx = idx * self.system.n + (s - 1)
        return idx

    # inner products ------------------------------------------------------

    def inner(self, f, g):
        """<f, g> = sum_w n^-N f(w) conj(g(w))."""
        return complex(self.weight * np.sum(_values(f) * np.conj(_values(g))))

    def norm(self, f, p=2):
        """Weighted L^p norm; a 2-D array is treated as one function per column."""
        vals = np.abs(_values(f))
        if np.isinf(p):
            out = vals.max(axis=0)
        else:
            out = (self.weight * np.sum(vals**p, axis=0)) ** (1.0 / p)
        return float(out) if np.ndim(out) == 0 else out


def cell_space(sys, depth, seed_point=None):
    return CellSpace(sys, depth, seed_point)


def _values(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A complex function on the cells of ``space``."""

    space: CellSpace
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.space.size,):
            raise InputError(f"expected {self.space.size} values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def _same(self, other):
        if isinstance(other, GridFunction):
            if not self.space.compatible(other.space):
                raise InputError("functions live on different cell spaces")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.space, self.values + self._same(other))

    def __sub__(self, other):
        return GridFunction(self.space, self.values - self._same(other))

    def __mul__(self, other):
        return GridFunction(self.space, self.values * self._same(other))

    __rmul__ = __mul__

    def conj(self):
        return GridFunction(self.space, np.conj(self.values))

    def sup(self):
        return float(np.abs(self.values).max())

    def norm(self, p=2):
        return self.space.norm(self.values, p)


def discretize(a, space, vectorized=True):
    """Sample ``a`` at the cell representatives."""
    return GridFunction(space, evaluate(a, space.points, vectorized).astype(complex))


def constant(space, value=1.0):
    return GridFunction(space, np.full(space.size, value, dtype=complex))


def random_function(space, rng, complex_values=True):
    vals = rng.standard_normal(space.size)
    if complex_values:
        vals = vals + 1j * rng.standard_normal(space.size)
    return GridFunction(space, vals)


# --------------------------------------------------------------------------
# operator matrices


class OperatorMatrix:
    """A linear map between cell spaces.

    ``kind`` is one of ``"diagonal"`` (``data`` = diagonal values),
    ``"selector"`` (``data`` = (columns, values), one nonzero per row),
    ``"sparse"`` (CSR matrix) or ``"dense"`` (ndarray).  Adjoints are taken
    with respect to the weighted cell inner products.
    """

    def __init__(self, domain, codomain, kind, data):
        self.domain = domain
        self.codomain = codomain
        self.kind = kind
        if kind == "diagonal":
            if not domain.compatible(codomain):
                raise InputError("a diagonal operator maps a space to itself")
            data = np.asarray(data, dtype=complex)
        elif kind == "selector":
            cols, vals = data
            data = (np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=complex))
        elif kind == "sparse":
            data = sp.csr_array(data, dtype=complex)
        elif kind == "dense":
            data = np.asarray(data, dtype=complex)
        else:
            raise InputError(f"unknown operator kind {kind!r}")
        self.data = data
        if self.shape_of_data() != self.shape:
            raise InputError(f"operator data has shape {self.shape_of_data()}, expected {self.shape}")

    def __repr__(self):
        return f"OperatorMatrix({self.kind}, {self.shape[0]}x{self.shape[1]})"

    @property
    def shape(self):
        return (self.codomain.size, self.domain.size)

    def shape_of_data(self):
        if self.kind == "diagonal":
            return (self.data.shape[0], self.data.shape[0])
        if self.kind == "selector":
            return (self.data[0].shape[0], self.domain.size)
        return self.data.shape

    @property
    def weight_ratio(self):
        """w_codomain / w_domain; the weighted adjoint is this times the conjugate transpose."""
        return self.codomain.weight / self.domain.weight

    # conversions ---------------------------------------------------------

    def to_sparse(self):
        if self.kind == "diagonal":
            return sp.diags_array(self.data, format="csr")
        if self.kind == "selector":
            cols, vals = self.data
            rows = np.arange(cols.shape[0])
            return sp.csr_array((vals, (rows, cols)), shape=self.shape)
        if self.kind == "sparse":
            return self.data
        return sp.csr_array(self.data)

    def dense(self):
        if self.kind == "dense":
            return self.data
        entries = self.shape[0] * self.shape[1]
        if entries > 2**26:
            raise ResourceError(entries, 2**26, what="dense operator entries")
        return self.to_sparse().toarray()

    # algebra -------------------------------------------------------------

    def adjoint(self):
        r = self.weight_ratio
        if self.kind == "diagonal":
            return OperatorMatrix(self.codomain, self.domain, "diagonal", np.conj(self.data))
        if self.kind == "dense":
            return OperatorMatrix(self.codomain, self.domain, "dense", r * self.data.conj().T)
        mat = (self.to_sparse().conj().T * r).tocsr()
        return _simplified(self.codomain, self.domain, mat)

    def apply(self, f):
        vals = _values(f)
        if vals.shape[0] != self.domain.size:
            raise InputError(f"operator expects {self.domain.size} values, got {vals.shape[0]}")
        if self.kind == "diagonal":
            out = self.data.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals
        elif self.kind == "selector":
            cols, v = self.data
            out = v.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals[cols]
        else:
            out = self.data @ vals
        if isinstance(f, GridFunction):
            return GridFunction(self.codomain, out)
        return out

    def __matmul__(self, other):
        if not isinstance(other, OperatorMatrix):
            return self.apply(other)
        if not self.domain.compatible(other.codomain):
            raise InputError(f"cannot compose {self} after {other}: spaces differ")
        a, b = self, other
        if a.kind == "diagonal" and b.kind == "diagonal":
            return OperatorMatrix(b.domain, a.codomain, "diagonal", a.data * b.data)
        if a.kind == "diagonal" and b.kind == "selector":
            cols, vals = b.data
            return OperatorMatrix(b.domain, a.codomain, "selector", (cols, a.data * vals))
        if a.kind == "selector" and b.kind == "diagonal":
            cols, vals = a.data
            return OperatorMatrix(b.domain, a.codomain, "selector", (cols, vals * b.data[cols]))
        if a.kind == "selector" and b.kind == "selector":
            c1, v1 = a.data
            c2, v2 = b.data
            return OperatorMatrix(b.domain, a.codomain, "selector", (c2[c1], v1 * v2[c1]))
        if a.kind == "dense" or b.kind == "dense":
            return OperatorMatrix(b.domain, a.codomain, "dense", a.dense() @ b.dense())
        return _simplified(b.domain, a.codomain, (a.to_sparse() @ b.to_sparse()).tocsr())

    def _check_same(self, other):
        if not (self.domain.compatible(other.domain) and self.codomain.compatible(other.codomain)):
            raise InputError("operators act between different spaces")

    def __add__(self, other):
        self._check_same(other)
        if self.kind == "diagonal" and other.kind == "diagonal":
            return OperatorMatrix(self.domain, self.codomain, "diagonal", self.data + other.data)
        if self.kind == "dense" or other.kind == "dense":
            return OperatorMatrix(self.domain, self.codomain, "dense", self.dense() + other.dense())
        return _simplified(self.domain, self.codomain, (self.to_sparse() + other.to_sparse()).tocsr())

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if self.kind == "selector":
            cols, vals = self.data
            return OperatorMatrix(self.domain, self.codomain, "selector", (cols, scalar * vals))
        if self.kind == "sparse":
            return OperatorMatrix(self.domain, self.codomain, "sparse", self.data * scalar)
        return OperatorMatrix(self.domain, self.codomain, self.kind, scalar * self.data)

    __rmul__ = __mul__

    def norm(self, tol=1e-10):
        return operator_norm(self, tol)

    # export --------------------------------------------------------------

    def to_json(self):
        def pairs(v):
            return [[float(z.real), float(z.imag)] for z in np.ravel(v)]

        doc = {"kind": self.kind, "shape": list(self.shape),
               "domain": {"system": self.domain.system.name, "depth": self.domain.depth},
               "codomain": {"system": self.codomain.system.name, "depth": self.codomain.depth}}
        if self.kind == "diagonal":
            doc["data"] = pairs(self.data)
        elif self.kind == "selector":
            doc["data"] = {"columns": self.data[0].tolist(), "values": pairs(self.data[1])}
        else:
            doc["kind"] = "dense"
            doc["data"] = [pairs(row) for row in self.dense()]
        return doc

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    def save_csv(self, path):
        mat = self.dense()
        real = np.all(mat.imag == 0)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            for row in mat:
                out.writerow([repr(float(z.real)) if real else repr(complex(z)) for z in row])


def _simplified(domain, codomain, mat):
    """Wrap a sparse result, recovering diagonal/selector structure when present."""
    mat = sp.csr_array(mat)
    mat.eliminate_zeros()
    coo = mat.tocoo()
    if domain.compatible(codomain) and np.all(coo.row == coo.col):
        diag = np.zeros(codomain.size, dtype=complex)
        diag[coo.row] = coo.data
        return OperatorMatrix(domain, codomain, "diagonal", diag)
    counts = np.diff(mat.indptr)
    if mat.shape[0] > 0 and np.all(counts == 1):
        return OperatorMatrix(domain, codomain, "selector", (mat.indices.copy(), mat.data.copy()))
    return OperatorMatrix(domain, codomain, "sparse", mat)


def mult_op(a):
    """M_a as a diagonal operator on a's own space."""
    return OperatorMatrix(a.space, a.space, "diagonal", a.values)


def identity(space):
    return OperatorMatrix(space, space, "diagonal", np.ones(space.size))


def comp_op(space_out):
    """C_phi from depth N-1 to depth N: (C f)(w1 w2 ... wN) = f(w2 ... wN)."""
    if space_out.depth < 1:
        raise InputError("C_phi needs an output depth of at least 1")
    cols = space_out.shift_index()
    return OperatorMatrix(space_out.coarser(), space_out, "selector", (cols, np.ones(space_out.size)))


def transfer_op(space_in):
    """L_phi from depth N to depth N-1: (L g)(v) = (1/n) sum_i g(i v)."""
    if space_in.depth < 1:
        raise InputError("L_phi needs an input depth of at least 1")
    coarse = space_in.coarser()
    n = space_in.system.n
    rows = np.tile(np.arange(coarse.size), n)
    cols = np.concatenate([coarse.prepend_index(i) for i in range(n)])
    vals = np.full(rows.shape[0], 1.0 / n)
    mat = sp.csr_array((vals, (rows, cols)), shape=(coarse.size, space_in.size))
    return OperatorMatrix(space_in, coarse, "sparse", mat)


def refinement_op(space):
    """Embedding of depth N into depth N+1 that copies each value to the child cells w i.

    With it, C_phi f and f can be compared on a common level.
    """
    fine = space.finer()
    cols = np.arange(fine.size) // space.system.n
    return OperatorMatrix(space, fine, "selector", (cols, np.ones(fine.size)))


def transfer_apply(g):
    """L_phi applied to a depth-N function, returning a depth N-1 function."""
    space = g.space
    n = space.system.n
    block = space.size // n
    return GridFunction(space.coarser(), g.values.reshape(n, block).mean(axis=0))


def compose_with_shift(f, space_out):
    """C_phi f as a function on ``space_out`` (f lives one level coarser)."""
    if not f.space.compatible(space_out.coarser()):
        raise InputError("f must live one level below space_out")
    return GridFunction(space_out, f.values[space_out.shift_index()])


# --------------------------------------------------------------------------
# norms


def operator_norm(T, tol=1e-10, max_iter=10_000):
    """Largest singular value with respect to the weighted cell norms.

    Diagonal and selector operators use exact formulas.  Otherwise power
    iteration on T*T from the normalised all-ones vector; raises
    :class:`NumericalError` (carrying the last iterate) after ``max_iter`` steps.
    """
    scale = np.sqrt(T.weight_ratio)
    if T.kind == "diagonal":
        return float(np.abs(T.data).max(initial=0.0))
    if T.kind == "selector":
        cols, vals = T.data
        colsq = np.bincount(cols, weights=np.abs(vals) ** 2, minlength=T.domain.size)
        return float(scale * np.sqrt(colsq.max(initial=0.0)))
    mat = T.data if T.kind == "dense" else T.to_sparse()
    if T.kind == "sparse":
        mat = sp.csr_array(mat)
        mat.eliminate_zeros()
        if mat.nnz == 0:
            return 0.0
    elif not np.any(mat):
        return 0.0
    adj = mat.conj().T
    v = np.ones(T.domain.size, dtype=complex)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        u = mat @ v
        s = np.linalg.norm(u)
        if s == 0.0:
            return 0.0
        w = adj @ u
        wn = np.linalg.norm(w)
        if wn == 0.0:
            return 0.0
        v = w / wn
        if abs(s - sigma) <= tol * s:
            return float(scale * s)
        sigma = s
    raise NumericalError(
        f"power iteration did not converge in {max_iter} steps", last_iterate=v, estimate=float(scale * sigma)
    )


# --------------------------------------------------------------------------
# defect checks for the operator identities


def adjoint_defect(space):
    """|| C_phi^* - L_phi || with C_phi: depth N-1 -> N."""
    C = comp_op(space)
    return operator_norm(C.adjoint() - transfer_op(space))


def transfer_of_function(a, space, vectorized=True):
    """x -> (1/n) sum_i a(gamma_i x) sampled on ``space`` by direct map evaluation."""
    sys = space.system
    vals = sum(evaluate(a, g.apply(space.points), vectorized) for g in sys.maps) / sys.n
    return GridFunction(space, np.asarray(vals, dtype=complex))


def covariance_defect(a, sys, depth, seed_point=None, vectorized=True):
    """|| C^* M_{a_N} C - M_{(L a)_{N-1}} || with both sides from the handle ``a``."""
    if depth < 2:
        raise InputError("covariance check needs depth >= 2")
    space = CellSpace(sys, depth, seed_point)
    C = comp_op(space)
    lhs = C.adjoint() @ mult_op(discretize(a, space, vectorized)) @ C
    rhs = mult_op(transfer_of_function(a, space.coarser(), vectorized))
    return operator_norm(lhs - rhs)


def isometry_defect(sys, depth, p=2, trials=100, rng_seed=0, seed_point=None):
    """max over random f of | ||C_phi f||_p - ||f||_p |."""
    if depth < 1:
        raise InputError("isometry check needs depth >= 1")
    if p < 1:
        raise InputError("p must be at least 1")
    space = CellSpace(sys, depth, seed_point)
    coarse = space.coarser()
    rng = np.random.default_rng(rng_seed)
    F = rng.standard_normal((coarse.size, trials)) + 1j * rng.standard_normal((coarse.size, trials))
    CF = F[space.shift_index()]
    return float(np.abs(space.norm(CF, p) - coarse.norm(F, p)).max(initial=0.0))
