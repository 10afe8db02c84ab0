import json

import numpy as np
import pytest

from hlab.errors import DomainError, InputError, ResourceError
from hlab.ifs import (
    ContractionMap,
    IFSystem,
    builtin,
    cantor,
    check_budget,
    contraction_bounds_estimate,
    eval_map,
    load_system,
    phi_apply,
    phi_apply_many,
    select_branches,
    sequence_distance,
    sierpinski,
    system_from_json,
    tent,
)


class TestEvalMap:
    def test_halving(self):
        assert eval_map(ContractionMap.affine([[0.5]], [0.0]), 1.0)[0] == 0.5

    def test_tent_second_branch(self):
        assert eval_map(ContractionMap.affine([[-0.5]], [1.0]), 1.0)[0] == 0.5

    def test_prepend(self):
        assert eval_map(ContractionMap.prepend(2), (1, 1, 1)) == (2, 1, 1, 1)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            eval_map(ContractionMap.affine([[0.5]], [0.0]), [1.0, 2.0])


class TestContractionMap:
    def test_singular_values_are_bounds(self):
        g = ContractionMap.affine([[0.5, 0.0], [0.0, 0.25]], [0, 0])
        assert (g.c1, g.c2) == (0.25, 0.5)

    def test_rejects_expanding(self):
        with pytest.raises(InputError):
            ContractionMap.affine([[1.5]], [0.0])

    def test_rejects_singular(self):
        with pytest.raises(InputError):
            ContractionMap.affine([[0.5, 0.5], [0.5, 0.5]], [0, 0])

    def test_symbolic_bounds(self):
        g = ContractionMap.prepend(3)
        assert (g.c1, g.c2) == (0.5, 0.5)

    def test_invert_roundtrip(self, rng):
        g = ContractionMap.affine([[0.3, 0.1], [-0.2, 0.4]], [0.1, 0.7])
        x = rng.random((50, 2))
        np.testing.assert_allclose(g.invert(g.apply(x)), x, atol=1e-14)

    def test_symbolic_invert_wrong_head(self):
        with pytest.raises(DomainError):
            ContractionMap.prepend(2).invert(np.array([[1, 2]]))

    def test_fixed_point(self):
        g = ContractionMap.affine([[1 / 3]], [2 / 3])
        assert g.fixed_point()[0] == pytest.approx(1.0, abs=1e-15)


class TestContractionBounds:
    def test_halving(self):
        lo, hi = contraction_bounds_estimate(ContractionMap.affine([[0.5]], [0.0]), 1000, 0)
        assert lo == pytest.approx(0.5, abs=1e-12) and hi == pytest.approx(0.5, abs=1e-12)

    def test_third(self):
        lo, hi = contraction_bounds_estimate(ContractionMap.affine([[1 / 3]], [2 / 3]), 1000, 1)
        assert lo == pytest.approx(1 / 3, abs=1e-12) and hi == pytest.approx(1 / 3, abs=1e-12)

    def test_prepend(self):
        lo, hi = contraction_bounds_estimate(ContractionMap.prepend(1), 1000, 2, symbols=2)
        assert (lo, hi) == (0.5, 0.5)

    def test_anisotropic_within_singular_values(self):
        g = ContractionMap.affine([[0.6, 0.0], [0.0, 0.2]], [0, 0])
        lo, hi = contraction_bounds_estimate(g, 4000, 3)
        assert g.c1 - 1e-12 <= lo <= hi <= g.c2 + 1e-12
        assert hi > 0.55 and lo < 0.3

    def test_needs_two_samples(self):
        with pytest.raises(InputError):
            contraction_bounds_estimate(ContractionMap.prepend(1), 1, 0)


class TestSystems:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(InputError):
            IFSystem.affine([([[0.5]], [0]), ([[0.5]], [0.5])], weights=[0.5, 0.6])

    def test_single_map_rejected(self):
        with pytest.raises(InputError):
            IFSystem.affine([([[0.5]], [0])])

    def test_builtins(self):
        assert builtin("tent").n == 2
        assert builtin("shift:3").n == 3
        assert builtin("sierpinski").dim == 2
        assert builtin("cantor:0.25").c2 == 0.25
        with pytest.raises(InputError):
            builtin("dragon")

    def test_cantor_name_with_ratio(self):
        assert cantor(0.3333333333).name == "cantor:0.3333333333"
        assert cantor().name == "cantor"

    def test_json_roundtrip(self, tmp_path):
        for sys in (tent(), sierpinski(), builtin("shift:3")):
            path = tmp_path / "sys.json"
            path.write_text(json.dumps(sys.to_json()))
            back = load_system(str(path))
            assert back.key == sys.key

    def test_json_dimension_mismatch(self):
        doc = {"metric": "euclidean", "dimension": 2, "maps": [{"A": [[0.5]], "b": [0]}, {"A": [[0.5]], "b": [0.5]}]}
        with pytest.raises(InputError):
            system_from_json(doc)

    def test_default_box_contains_fixed_points(self):
        sys = IFSystem.affine([([[0.5]], [2.0]), ([[0.5]], [3.0])])
        lo, hi = sys.box
        for m in sys.maps:
            assert lo[0] <= m.fixed_point()[0] <= hi[0]

    def test_budget(self, monkeypatch):
        monkeypatch.setenv("HLAB_BUDGET_CELLS", "1000")
        with pytest.raises(ResourceError, match="HLAB_BUDGET_CELLS"):
            check_budget(2, 10)
        assert check_budget(2, 9) == 512


class TestSequenceMetric:
    def test_distance_pads_with_ones(self):
        assert sequence_distance([1, 2], [1, 2, 1, 1]) == 0.0
        assert sequence_distance([2], [1]) == 0.5

    def test_prepend_halves(self):
        w, v = np.array([1, 2, 2]), np.array([2, 2, 1])
        g = ContractionMap.prepend(2)
        assert sequence_distance(g.apply(w[None])[0], g.apply(v[None])[0]) == sequence_distance(w, v) / 2


class TestPhi:
    def test_tent_left(self):
        assert phi_apply(tent(), 0.25)[0] == 0.5

    def test_tent_right(self):
        assert phi_apply(tent(), 0.75)[0] == 0.5

    def test_shift(self):
        assert phi_apply(builtin("shift:3"), (3, 1, 2)) == (1, 2)

    def test_shift_symbol_out_of_range(self):
        with pytest.raises(DomainError):
            phi_apply(builtin("shift:2"), (3, 1, 2))

    def test_outside_images(self):
        with pytest.raises(DomainError):
            phi_apply(tent(), 1.5)

    def test_overlap_picks_lowest_branch(self):
        assert select_branches(tent(), [[0.5]])[0] == 0

    @pytest.mark.parametrize("name", ["tent", "cantor", "sierpinski"])
    def test_left_inverse_on_attractor(self, name, rng):
        from hlab.attractor import attractor_chaos_game

        sys = builtin(name)
        pts = attractor_chaos_game(sys, 1000, rng_seed=5).points
        for i, g in enumerate(sys.maps):
            img = g.apply(pts)
            back, branch = phi_apply_many(sys, img)
            ok = branch == i
            # at overlaps the lowest branch wins, which may differ from i
            np.testing.assert_allclose(back[ok], pts[ok], atol=1e-12)
            assert ok.mean() > 0.99
