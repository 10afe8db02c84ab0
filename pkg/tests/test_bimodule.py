import json

import numpy as np
import pytest

from hlab.bimodule import (
    BimoduleElement,
    cuntz_relations_check,
    covariant_rep_check,
    cylinder_basis,
    fiber_blocks,
    frame_bounds_check,
    frame_operator,
    hat_profile,
    ideal_covariance_defect,
    ideal_element,
    inner_product_A,
    key_identity_defect,
    left_action,
    module_action,
    pou_basis,
    reconstruct,
    reconstruction_defect,
    right_action,
)
from hlab.conditions import branch_sets
from hlab.errors import InputError, PreconditionError, UnsupportedError
from hlab.ifs import builtin, sierpinski, tent
from hlab.operators import cell_space, comp_op, constant, discretize, mult_op, operator_norm, random_function


def element(space, rng):
    return BimoduleElement(space, random_function(space, rng).values)


@pytest.fixture
def tent_pou():
    sys = tent()
    space = cell_space(sys, 10)
    B = branch_sets(sys)
    return sys, space, B, pou_basis(sys, space, B, levels=6)


class TestInnerProduct:
    def test_gram_identity(self, op_system, rng):
        # <C xi', C eta'> computed by the operator side equals L(conj xi eta)
        space = cell_space(op_system, 5)
        xi, eta = element(space, rng), element(space, rng)
        C = comp_op(space)
        lhs = C.adjoint() @ mult_op(xi).adjoint() @ mult_op(eta) @ C
        np.testing.assert_allclose(np.diag(lhs.dense()), inner_product_A(xi, eta).values, atol=1e-14)

    def test_positive(self, rng):
        space = cell_space(tent(), 6)
        xi = element(space, rng)
        vals = inner_product_A(xi, xi).values
        assert np.all(vals.real >= 0) and np.allclose(vals.imag, 0)

    def test_zero_only_for_zero(self):
        space = cell_space(builtin("shift:2"), 3)
        xi = BimoduleElement(space, np.eye(8)[5])
        assert inner_product_A(xi, xi).sup() > 0

    def test_hermitian(self, rng):
        space = cell_space(builtin("shift:3"), 3)
        xi, eta = element(space, rng), element(space, rng)
        np.testing.assert_allclose(inner_product_A(xi, eta).values, np.conj(inner_product_A(eta, xi).values))

    def test_right_module_property(self, rng):
        space = cell_space(tent(), 6)
        xi, eta = element(space, rng), element(space, rng)
        b = random_function(space.coarser(), rng)
        lhs = inner_product_A(xi, right_action(eta, b)).values
        rhs = inner_product_A(xi, eta).values * b.values
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    def test_left_adjoint_property(self, rng):
        space = cell_space(tent(), 6)
        xi, eta, a = element(space, rng), element(space, rng), random_function(space, rng)
        lhs = inner_product_A(left_action(a, xi), eta).values
        rhs = inner_product_A(xi, left_action(a.conj(), eta)).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    def test_norm_equivalence(self, op_system, rng):
        space = cell_space(op_system, 5)
        xi = element(space, rng)
        sup = np.abs(xi.values).max()
        assert sup / np.sqrt(op_system.n) - 1e-14 <= xi.norm2() <= sup + 1e-14

    def test_module_action(self):
        space = cell_space(builtin("shift:2"), 2)
        xi = BimoduleElement(space, np.ones(4))
        a = discretize(lambda w: w[:, 0].astype(float), space)
        b = discretize(lambda w: w[:, 0].astype(float) * 10, space.coarser())
        out = module_action(a, xi, b).values.real
        # a reads the first symbol, b reads the second (via the shift)
        assert out.tolist() == [10, 20, 20, 40]

    def test_rejects_non_finite(self):
        with pytest.raises(InputError):
            BimoduleElement(cell_space(tent(), 2), np.array([1, np.nan, 0, 0]))


class TestCylinderBasis:
    def test_reconstruction_exact(self, op_system, rng):
        space = cell_space(op_system, 5)
        basis = cylinder_basis(op_system, space)
        xi = element(space, rng)
        assert reconstruction_defect(basis, xi) <= 1e-13

    def test_frame_is_identity(self, op_system):
        space = cell_space(op_system, 4)
        basis = cylinder_basis(op_system, space)
        assert operator_norm(frame_operator(basis) - mult_op(constant(space))) <= 1e-14

    def test_orthonormal(self):
        space = cell_space(builtin("shift:3"), 3)
        basis = cylinder_basis(space.system, space)
        for i, u in enumerate(basis.elements):
            for j, v in enumerate(basis.elements):
                np.testing.assert_allclose(inner_product_A(u, v).values, float(i == j))

    def test_single_element_is_projection(self):
        space = cell_space(builtin("shift:2"), 4)
        basis = cylinder_basis(space.system, space)
        ev = np.linalg.eigvalsh(fiber_blocks(basis, upto=1)[0])
        assert np.all(np.isclose(ev, 0) | np.isclose(ev, 1))

    def test_empty_family(self, rng):
        space = cell_space(tent(), 4)
        basis = cylinder_basis(tent(), space)
        basis.elements.clear()
        assert np.all(reconstruct(basis, element(space, rng)).values == 0)
        report = frame_bounds_check(basis)
        assert report.passed and report.details["min_eigenvalue"] == []

    def test_depth_zero(self):
        with pytest.raises(InputError):
            cylinder_basis(tent(), cell_space(tent(), 0))

    def test_json(self):
        space = cell_space(builtin("shift:2"), 3)
        doc = cylinder_basis(space.system, space).to_json()
        assert doc["kind"] == "cylinder" and doc["size"] == 2
        json.dumps(doc)


class TestPartitionOfUnity:
    def test_hat_profile_sums_to_one(self):
        t = np.linspace(2.0**-6, 3.0, 1001)
        total = sum(hat_profile(t, l) for l in range(7))
        np.testing.assert_allclose(total, 1.0, atol=1e-15)

    def test_hat_profile_supports(self):
        assert hat_profile(0.25, 2) == 1.0
        assert hat_profile(0.125, 2) == 0.0 and hat_profile(0.5, 2) == 0.0
        assert hat_profile(0.0, 0) == 0.0 and hat_profile(10.0, 0) == 1.0

    def test_reconstruction_away_from_B(self, tent_pou, rng):
        sys, space, B, basis = tent_pou
        xi = element(space, rng)
        d = reconstruction_defect(basis, xi, min_distance=basis.exact_radius, B_points=B.B_points)
        assert d <= 1e-12

    def test_constant_reconstructed_away_from_B(self, tent_pou):
        sys, space, B, basis = tent_pou
        one = BimoduleElement(space, np.ones(space.size))
        rec = reconstruct(basis, one).values.real
        far = np.abs(space.points[:, 0] - 0.5) >= 2.0**-6
        np.testing.assert_allclose(rec[far], 1.0, atol=1e-12)
        assert rec.max() <= 1 + 1e-12

    def test_vanishing_near_B(self, tent_pou):
        # xi = 0 on the 2^-6 ball around B: the family reproduces it everywhere
        sys, space, B, basis = tent_pou
        dist = np.abs(space.points[:, 0] - 0.5)
        xi = BimoduleElement(space, np.clip(dist - 2.0**-6, 0.0, 0.25))
        assert reconstruction_defect(basis, xi) <= 1e-3

    def test_vanishing_only_at_B(self, tent_pou):
        # frozen: |x - 1/2| misses by its modulus at the innermost breakpoint
        sys, space, B, basis = tent_pou
        xi = BimoduleElement(space, np.minimum(np.abs(space.points[:, 0] - 0.5), 0.25))
        assert reconstruction_defect(basis, xi) == pytest.approx(2.0**-7, rel=1e-9)

    def test_supports_miss_small_ball(self, tent_pou):
        sys, space, B, basis = tent_pou
        near = np.abs(space.points[:, 0] - 0.5) < 2.0**-8
        for u in basis.elements:
            assert not np.any(u.values[near])

    def test_pieces_meet_each_fiber_once(self, tent_pou):
        sys, space, B, basis = tent_pou
        for u in basis.elements:
            support = (u.values != 0).reshape(sys.n, -1)
            assert support.sum(axis=0).max() <= 1

    def test_frame_bounds(self, tent_pou):
        report = frame_bounds_check(tent_pou[3])
        assert report.passed
        assert min(report.details["min_eigenvalue"]) >= -1e-12

    def test_partial_sums_monotone(self, tent_pou, rng):
        sys, space, B, basis = tent_pou
        blocks = fiber_blocks(basis)
        x = rng.standard_normal((blocks.shape[1], sys.n))
        q = np.einsum("tv,mtvw,tw->m", x, blocks, x).real
        assert np.all(np.diff(q) >= -1e-12)

    def test_blocks_match_operator(self):
        sys = tent()
        space = cell_space(sys, 6)
        basis = pou_basis(sys, space, branch_sets(sys), levels=3)
        T = frame_operator(basis).dense()
        blocks = fiber_blocks(basis)[-1]
        tails = space.size // sys.n
        for v in range(tails):
            idx = [i * tails + v for i in range(sys.n)]
            np.testing.assert_allclose(T[np.ix_(idx, idx)], blocks[v], atol=1e-15)

    def test_unsupported(self):
        sys = sierpinski()
        with pytest.raises(UnsupportedError):
            pou_basis(sys, cell_space(sys, 3), branch_sets(sys), 2)
        sh = builtin("shift:2")
        with pytest.raises(UnsupportedError):
            pou_basis(sh, cell_space(sh, 3), branch_sets(sh), 2)

    def test_json(self, tent_pou):
        doc = tent_pou[3].to_json()
        assert doc["kind"] == "partition-of-unity" and doc["size"] == len(tent_pou[3])
        assert doc["breakpoints"][0] == tent().diam
        json.dumps(doc)


class TestKeyIdentity:
    def test_cylinder(self, rng):
        space = cell_space(builtin("shift:3"), 4)
        basis = cylinder_basis(space.system, space)
        assert key_identity_defect(basis, random_function(space, rng)) <= 1e-12

    def test_pou(self, tent_pou, rng):
        sys, space, B, basis = tent_pou
        assert key_identity_defect(basis, random_function(space, rng)) <= 1e-12


class TestIdealCovariance:
    def test_shift(self, rng):
        space = cell_space(builtin("shift:2"), 6)
        basis = cylinder_basis(space.system, space)
        a = ideal_element(random_function(space, rng), np.empty((0, 1)))
        assert ideal_covariance_defect(basis, a) <= 1e-13

    def test_tent_values(self):
        # frozen: the fibers straddling B at the finest retained level contribute 2^-(levels+1)
        for depth, levels, value in ((10, 6, 2.0**-7), (12, 8, 2.0**-9)):
            sys = tent()
            space = cell_space(sys, depth)
            B = branch_sets(sys)
            basis = pou_basis(sys, space, B, levels)
            a = ideal_element(discretize(lambda x: np.minimum(np.abs(x[:, 0] - 0.5), 0.25), space), B.B_points)
            assert ideal_covariance_defect(basis, a) == pytest.approx(value, rel=1e-9)

    def test_methods_agree(self):
        sys = tent()
        space = cell_space(sys, 7)
        B = branch_sets(sys)
        basis = pou_basis(sys, space, B, 4)
        a = ideal_element(discretize(lambda x: np.abs(x[:, 0] - 0.5), space), B.B_points)
        assert ideal_covariance_defect(basis, a, "operator") == pytest.approx(ideal_covariance_defect(basis, a), rel=1e-8)

    def test_zero_function(self, tent_pou):
        sys, space, B, basis = tent_pou
        a = ideal_element(discretize(lambda x: np.zeros(len(x)), space), B.B_points)
        assert ideal_covariance_defect(basis, a) == 0.0

    def test_not_in_ideal(self, tent_pou):
        sys, space, B, basis = tent_pou
        a = ideal_element(constant(space), B.B_points)
        with pytest.raises(PreconditionError, match="cell"):
            ideal_covariance_defect(basis, a)

    def test_requires_ideal_element(self, tent_pou):
        with pytest.raises(InputError):
            ideal_covariance_defect(tent_pou[3], constant(tent_pou[1]))


class TestRepresentations:
    @pytest.mark.parametrize("name", ["tent", "shift:2", "shift:3"])
    def test_covariant_rep(self, name):
        sys = builtin(name)
        report = covariant_rep_check(sys, cell_space(sys, 4), trials=10)
        assert report.defect <= 1e-13

    def test_cuntz(self):
        for name, depth in (("shift:2", 6), ("shift:3", 4)):
            sys = builtin(name)
            report = cuntz_relations_check(sys, cell_space(sys, depth))
            assert report.passed and report.details["completeness"] <= 1e-12
            assert len(report.details["orthogonality"]) == sys.n**2

    def test_cuntz_unsupported_on_tent(self):
        with pytest.raises(UnsupportedError):
            cuntz_relations_check(tent(), cell_space(tent(), 4))
