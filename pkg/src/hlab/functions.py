"""Named scalar test functions for the command line (``--fn``).

Every handle is vectorised: it receives an (m, d) array of points (or an
(m, L) array of words for sequence space) and returns m values.
"""

from __future__ import annotations

import importlib.util
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .ifs import pad_words


@dataclass(frozen=True)
class FunctionSpec:
    """A parsed ``--fn`` value.

    ``lipschitz`` is a Lipschitz constant when one is known, and
    ``cell_depth`` the depth from which the function is constant on cells
    (None when it never is).
    """

    name: str
    handle: object
    lipschitz: float | None = None
    cell_depth: int | None = None

    def __call__(self, points):
        return self.handle(points)


def coding_value(sys, words):
    """sum_k (w_k - 1) n^-k, the address of a word read as a base-n fraction."""
    words = np.asarray(words)
    powers = float(sys.n) ** -np.arange(1, words.shape[1] + 1)
    return (words - 1) @ powers


def identity_function(sys):
    """x for 1-D systems, the first coordinate in higher dimension, the coding value on words."""
    if sys.symbolic:
        return lambda w: coding_value(sys, w)
    return lambda x: np.asarray(x, dtype=float)[:, 0]


def cylinder_indicator(sys, word):
    """Indicator of the cylinder [word] (words) or of gamma_word(box) (points)."""
    word = [int(s) for s in word]
    if not word or not all(1 <= s <= sys.n for s in word):
        raise InputError(f"indicator word must use symbols 1..{sys.n}")
    if sys.symbolic:
        target = np.array(word)

        def f(w):
            w = pad_words(np.asarray(w), len(target))
            return np.all(w[:, : len(target)] == target, axis=1).astype(float)

        return f
    corners = np.array(sys.box, dtype=float)
    for s in reversed(word):
        corners = sys.maps[s - 1].apply(corners)
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    if not all(np.allclose(sys.maps[s - 1].matrix, np.diag(np.diag(sys.maps[s - 1].matrix))) for s in word):
        raise InputError("indicator of a cell needs axis-aligned maps")
    return lambda x: np.all((x >= lo - 1e-12) & (x <= hi + 1e-12), axis=1).astype(float)


def distance_function(sys, slope):
    """slope times the distance to the box centre (to the constant word 1 1 1 ... on words)."""
    if sys.symbolic:
        def f(w):
            w = np.asarray(w)
            return slope * ((w != 1) @ (0.5 ** np.arange(1, w.shape[1] + 1)))
        return f
    centre = np.mean(np.array(sys.box, dtype=float), axis=0)
    return lambda x: slope * np.linalg.norm(np.asarray(x, dtype=float) - centre, axis=1)


def load_custom(path):
    """Import ``f`` from a Python file; it must accept the whole point array."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"custom function file {path} not found")
    spec = importlib.util.spec_from_file_location(f"hlab_custom_{path.stem}", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not callable(getattr(module, "f", None)):
        raise InputError(f"{path} must define a callable f(points)")
    return module.f


def parse_function(text, sys):
    """Parse ``identity``, ``indicator:<word>``, ``lipschitz:<slope>`` or ``custom:<file>``."""
    kind, _, arg = text.partition(":")
    if kind == "identity":
        # the coding value is 2-Lipschitz for the sequence metric
        lip = 2.0 if sys.symbolic else 1.0
        return FunctionSpec(text, identity_function(sys), lipschitz=lip)
    if kind == "indicator":
        # "12" spells symbols one per character; "1,12" allows symbols above 9
        word = arg.split(",") if "," in arg else list(arg)
        if not word or not all(s.strip().isdigit() for s in word):
            raise InputError("indicator needs a word such as indicator:12")
        return FunctionSpec(text, cylinder_indicator(sys, word), cell_depth=len(word))
    if kind == "lipschitz":
        try:
            slope = float(arg)
        except ValueError:
            raise InputError(f"bad slope {arg!r}") from None
        return FunctionSpec(text, distance_function(sys, slope), lipschitz=abs(slope))
    if kind == "custom":
        return FunctionSpec(text, load_custom(arg))
    raise InputError(f"unknown function {text!r}; use identity, indicator:<word>, lipschitz:<slope> or custom:<file>")
