"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line naming the criterion and
the worst value observed, then asserts.
"""

import json
from math import comb

import numpy as np

from hlab.bimodule import (
    BimoduleElement,
    cuntz_relations_check,
    cylinder_basis,
    frame_bounds_check,
    frame_operator,
    ideal_covariance_defect,
    ideal_element,
    pou_basis,
    reconstruct,
)
from hlab.cli import main
from hlab.conditions import branch_sets, open_set_condition_check, parse_open_set
from hlab.ifs import builtin
from hlab.measure import hutchinson_measure, integrate, invariance_defect, overlap_mass, w1_to_uniform
from hlab.operators import (
    adjoint_defect,
    cell_space,
    covariance_defect,
    discretize,
    isometry_defect,
    random_function,
)

OPERATOR_SYSTEMS = ("tent", "shift:2", "shift:3")
DEPTHS = range(4, 11)
BUILTINS = ("tent", "cantor", "sierpinski", "shift:2", "shift:3")


def verdict(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} ({title}): {detail}")
    assert ok, detail


def moment_oracle(maps, weights, k_max):
    """Moments of the self-similar measure of x -> r_i x + b_i by the binomial recursion."""
    m = [1.0]
    for k in range(1, k_max + 1):
        rest = sum(p * sum(comb(k, j) * r**j * b ** (k - j) * m[j] for j in range(k)) for (r, b), p in zip(maps, weights))
        m.append(rest / (1 - sum(p * r**k for (r, _), p in zip(maps, weights))))
    return m


def test_criterion_01_isometry(capsys):
    worst = 0.0
    for name in OPERATOR_SYSTEMS:
        sys = builtin(name)
        for depth in DEPTHS:
            for p in (1, 2):
                worst = max(worst, isometry_defect(sys, depth, p=p, trials=100, rng_seed=depth))
    verdict(capsys, 1, "isometry", worst <= 1e-12, f"max |‖Cf‖_p - ‖f‖_p| = {worst:.3e} (tol 1e-12)")


def test_criterion_02_adjoint(capsys):
    worst = max(adjoint_defect(cell_space(builtin(name), depth)) for name in OPERATOR_SYSTEMS for depth in DEPTHS)
    verdict(capsys, 2, "adjoint", worst <= 1e-12, f"max ‖C* - L‖ = {worst:.3e} (tol 1e-12)")


def test_criterion_03_covariance(capsys):
    # cell-constant a: cylinder indicators on the shifts and random cell functions lifted through words
    exact = 0.0
    for name in OPERATOR_SYSTEMS:
        sys = builtin(name)
        for depth in DEPTHS:
            space = cell_space(sys, depth)
            table = random_function(space, np.random.default_rng(depth)).values
            if sys.symbolic:
                a = lambda w, t=table, s=space: t[_word_index(w, s)]
            else:
                a = _cell_lookup(space, table)
            exact = max(exact, covariance_defect(a, sys, depth))
    tent = builtin("tent")
    curve = {N: covariance_defect(lambda x: x[:, 0], tent, N) for N in range(6, 11)}
    bounded = all(d <= 2 * 2.0**-N for N, d in curve.items())
    decreasing = all(curve[N + 1] < curve[N] for N in range(6, 10))
    ok = exact <= 1e-12 and bounded and decreasing
    detail = (f"cell-constant max {exact:.3e} (tol 1e-12); a=x on tent defects "
              + ", ".join(f"N={N}: {d:.3e}" for N, d in curve.items())
              + f"; bound 2·2^-N {'met' if bounded else 'violated'}; strictly decreasing: {decreasing}")
    verdict(capsys, 3, "covariance", ok, detail)


def _word_index(words, space):
    n = space.system.n
    w = np.asarray(words)[:, : space.depth] - 1
    return w @ (n ** np.arange(space.depth - 1, -1, -1))


def _cell_lookup(space, table):
    """A function of x that is constant on the depth-N cells, looked up through the cell representatives."""
    points = space.points[:, 0]

    def a(x):
        x = np.asarray(x, dtype=float)[:, 0]
        hits = np.abs(x[:, None] - points[None, :]) <= 1e-12
        # points may coincide for distinct words (tent folds); take the first cell at that point
        return table[np.argmax(hits, axis=1)]

    return a


def test_criterion_04_hutchinson(capsys):
    worst_ratio, failures = 0.0, []
    for name in BUILTINS:
        sys = builtin(name)
        for N in range(1, 13):
            d = invariance_defect(sys, hutchinson_measure(sys, N))
            bound = sys.c2**N * sys.diam
            worst_ratio = max(worst_ratio, d / bound)
            if d > bound:
                failures.append(f"{name} N={N}: {d:.3e} > {bound:.3e}")
    w1 = w1_to_uniform(hutchinson_measure(builtin("tent"), 12), 0.0, 1.0)
    cantor = builtin("cantor")
    mu = hutchinson_measure(cantor, 20)
    m2 = integrate(mu, lambda x: x[:, 0] ** 2).real
    oracle = moment_oracle([(1 / 3, 0.0), (1 / 3, 2 / 3)], [0.5, 0.5], 2)[2]
    ok = not failures and w1 <= 2.0**-12 and abs(m2 - 0.375) <= 1e-6 and abs(oracle - 0.375) <= 1e-15
    detail = (f"invariance worst defect/bound = {worst_ratio:.3f}{'; ' + '; '.join(failures) if failures else ''}; "
              f"tent W1 = {w1:.3e} (tol {2.0**-12:.3e}); Cantor m2 = {m2:.10f}, oracle {oracle}")
    verdict(capsys, 4, "Hutchinson fixed point", ok, detail)


def _pou_for(name, depth, levels):
    sys = builtin(name)
    space = cell_space(sys, depth)
    return pou_basis(sys, space, branch_sets(sys), levels)


def _bases():
    for name, depth in (("tent", 8), ("tent", 10), ("shift:2", 8), ("shift:3", 6)):
        sys = builtin(name)
        yield f"{name} depth {depth} cylinder", cylinder_basis(sys, cell_space(sys, depth))
    for depth, levels in ((8, 4), (10, 6), (12, 8)):
        yield f"tent depth {depth} pou levels {levels}", _pou_for("tent", depth, levels)


def test_criterion_05_frame_bounds(capsys):
    lo, hi, bad = np.inf, -np.inf, []
    for label, basis in _bases():
        rep = frame_bounds_check(basis, eps=1e-10)
        lo = min(lo, min(rep.details["min_eigenvalue"]))
        hi = max(hi, max(rep.details["max_eigenvalue"]))
        if not rep.passed:
            bad.append(label)
    ok = not bad
    verdict(capsys, 5, "frame bounds", ok, f"partial-sum spectra within [{lo:.3e}, {hi:.15f}] (eps 1e-10)"
            + (f"; violations: {bad}" if bad else ""))


def test_criterion_06_key_identity(capsys):
    worst = 0.0
    for label, basis in _bases():
        space = basis.space
        T = frame_operator(basis)
        rng = np.random.default_rng(len(basis) + space.depth)
        for _ in range(100):
            a = random_function(space, rng)
            lhs = T.apply(a.values)
            rhs = reconstruct(basis, BimoduleElement(space, a.values)).values
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    verdict(capsys, 6, "key identity", worst <= 1e-12, f"max defect {worst:.3e} over 100 random a per basis (tol 1e-12)")


def test_criterion_07_ideal_covariance(capsys):
    shift_worst = 0.0
    for name, depth in (("shift:2", 8), ("shift:3", 6)):
        sys = builtin(name)
        space = cell_space(sys, depth)
        basis = cylinder_basis(sys, space)
        for seed in range(5):
            a = ideal_element(random_function(space, np.random.default_rng(seed)), np.zeros((0, 1)))
            shift_worst = max(shift_worst, ideal_covariance_defect(basis, a))
    tent_vals = {}
    for depth, levels in ((10, 6), (12, 8)):
        basis = _pou_for("tent", depth, levels)
        a = discretize(lambda x: np.minimum(np.abs(x[:, 0] - 0.5), 0.25), basis.space)
        tent_vals[(depth, levels)] = ideal_covariance_defect(basis, ideal_element(a, [[0.5]]))
    coarse, fine = tent_vals[(10, 6)], tent_vals[(12, 8)]
    ok = shift_worst <= 1e-12 and coarse <= 0.02 and fine < coarse
    verdict(capsys, 7, "ideal covariance", ok,
            f"shifts max {shift_worst:.3e} (tol 1e-12); tent (10,6) = {coarse:.6f} (tol 0.02), (12,8) = {fine:.6f}")


def test_criterion_08_cuntz(capsys):
    worst = 0.0
    for name, depth in (("shift:2", 6), ("shift:3", 4)):
        sys = builtin(name)
        rep = cuntz_relations_check(sys, cell_space(sys, depth), tol=1e-12)
        worst = max(worst, max(rep.details["orthogonality"].values()), rep.details["completeness"])
    verdict(capsys, 8, "Cuntz relations", worst <= 1e-12, f"max relation defect {worst:.3e} (tol 1e-12)")


def test_criterion_09_conditions(capsys):
    tent, cantor = builtin("tent"), builtin("cantor")
    osc = open_set_condition_check(tent, parse_open_set("0,1", 1))
    B = branch_sets(tent)
    c_err = float(np.abs(np.ravel(B.C_points) - 1.0).max()) if B.C_points.size else np.inf
    b_err = float(np.abs(np.ravel(B.B_points) - 0.5).max()) if B.B_points.size else np.inf
    single = B.C_points.size == 1 and B.B_points.size == 1
    tent_overlap = overlap_mass(tent, 10, (0, 1), tent.c2**10 * tent.diam)
    cantor_overlap = overlap_mass(cantor, 10, (0, 1), cantor.c2**10 * cantor.diam)
    ok = osc.passed and single and c_err <= 1e-8 and b_err <= 1e-8 and tent_overlap <= 2.0**-8 and cantor_overlap == 0
    verdict(capsys, 9, "conditions", ok,
            f"OSC(0,1) {'holds' if osc.passed else 'fails'}; |C-1| = {c_err:.1e}, |B-0.5| = {b_err:.1e}; "
            f"tent overlap {tent_overlap:.3e} (tol {2.0**-8:.3e}); Cantor overlap {cantor_overlap}")


def test_criterion_10_determinism(capsys, tmp_path):
    diffs = []
    for name in ("tent", "shift:2"):
        docs = []
        for run in ("first", "second"):
            code = main(["report", "--run-all", "--system", name, "--seed", "7",
                         "--out", str(tmp_path), "--name", f"{run}.json"])
            assert code in (0, 1)
            doc = json.loads((tmp_path / f"{run}.json").read_text())
            docs.append({k: v for k, v in doc.items() if k not in ("generated_at", "timing")})
        if docs[0] != docs[1]:
            diffs.append(name)
    capsys.readouterr()
    verdict(capsys, 10, "determinism", not diffs,
            "report reruns value-identical for tent and shift:2" if not diffs else f"reruns differ for {diffs}")
