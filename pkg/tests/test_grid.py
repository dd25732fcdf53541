import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pm_slowtime import (GridFunction, JumpCollisionError,
                         NotPiecewiseSubcriticalError, PlateauFunction,
                         backward_diff, discrete_jump_height, forward_diff,
                         jump_cell, l2_inner, norms, sample_plateau,
                         subcritical_quotient, supercritical_cells)


def grid(values):
    values = np.asarray(values, dtype=float)
    return GridFunction(len(values), values)


class TestGridFunction:
    def test_validation(self):
        with pytest.raises(ValueError):
            GridFunction(0, np.array([]))
        with pytest.raises(ValueError):
            GridFunction(3, np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            GridFunction(2, np.array([1.0, np.nan]))

    def test_values_immutable(self):
        u = grid([1.0, 2.0])
        with pytest.raises(ValueError):
            u.values[0] = 5.0

    def test_json_round_trip(self):
        u = grid([0.25, -1.5, 3.0])
        v = GridFunction.from_json(u.to_json())
        assert v.n == u.n
        assert np.array_equal(v.values, u.values)
        assert json.loads(u.to_json()) == {"n": 3, "values": [0.25, -1.5, 3.0]}

    def test_inner_product_is_piecewise_integral(self):
        u = grid([1.0, 2.0, 3.0, 4.0])
        w = grid([2.0, 0.0, -1.0, 1.0])
        assert l2_inner(u, w) == pytest.approx((2.0 + 0.0 - 3.0 + 4.0) / 4.0)
        with pytest.raises(ValueError):
            l2_inner(u, grid([1.0]))


class TestPlateauFunction:
    def test_validation(self):
        with pytest.raises(ValueError):
            PlateauFunction([0.5, 0.4], [0.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            PlateauFunction([0.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            PlateauFunction([0.5], [1.0, 1.0])
        with pytest.raises(ValueError):
            PlateauFunction([0.5], [1.0])

    def test_accessors(self):
        p = PlateauFunction([0.25, 0.6], [0.0, 1.0, -0.5])
        assert p.k == 2
        assert np.allclose(p.lengths, [0.25, 0.35, 0.4])
        assert np.allclose(p.jump_heights(), [1.0, -1.5])
        assert p.mean() == pytest.approx(0.35 * 1.0 + 0.4 * -0.5)
        assert p.value_at(0.1) == 0.0
        assert p.value_at(0.25) == 1.0  # right-continuous at a jump
        assert p.value_at(0.9) == -0.5

    def test_json_round_trip(self):
        p = PlateauFunction([0.5], [-1.0, 1.0])
        q = PlateauFunction.from_json(p.to_json())
        assert np.array_equal(q.jumps, p.jumps)
        assert np.array_equal(q.heights, p.heights)


class TestDifferences:
    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_forward_diff_constant(self, n):
        u = GridFunction.constant(n, 3.7)
        assert np.array_equal(forward_diff(u).values, np.zeros(n))

    def test_forward_diff_values(self):
        assert np.array_equal(forward_diff(grid([0.0, 1.0])).values, [2.0, 0.0])
        assert np.array_equal(
            forward_diff(grid([0.0, 0.0, 1.0, 1.0])).values, [0.0, 4.0, 0.0, 0.0])

    def test_backward_diff_values(self):
        assert np.array_equal(backward_diff(grid([5.0, 5.0])).values, [0.0, 0.0])
        assert np.array_equal(backward_diff(grid([0.0, 1.0])).values, [0.0, 2.0])
        assert np.array_equal(
            backward_diff(grid([1.0, 1.0, 5.0])).values, [0.0, 0.0, 12.0])

    @given(st.integers(2, 40), st.data())
    def test_summation_by_parts(self, n, data):
        vals = st.lists(st.floats(-10, 10), min_size=n, max_size=n)
        u = grid(data.draw(vals))
        w = grid(data.draw(vals))
        # <D+ u, w> = -<u, D- w> + boundary terms u_n w_n - u_1 w_1
        lhs = l2_inner(forward_diff(u), w)
        rhs = -l2_inner(u, backward_diff(w)) \
            + float(u.values[-1] * w.values[-1] - u.values[0] * w.values[0])
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestJumpCells:
    def test_examples(self):
        assert jump_cell(0.5, 4) == 2
        assert jump_cell(0.5, 3) == 2
        assert jump_cell(0.999, 2) == 2

    def test_grid_point_takes_left_cell(self):
        assert jump_cell(0.25, 4) == 1
        assert jump_cell(0.75, 4) == 3
        assert jump_cell(0.5, 2) == 1

    @pytest.mark.parametrize("d", [-0.1, 0.0, 1.0, 1.5])
    def test_domain_error(self, d):
        with pytest.raises(ValueError):
            jump_cell(d, 4)

    def test_jump_height_examples(self):
        u = grid([0.0, 0.0, 1.0, 1.0])
        assert discrete_jump_height(u, 0.5) == 1.0
        assert discrete_jump_height(GridFunction.constant(5, 2.0), 0.3) == 0.0
        v = grid([0.0, 0.1, 1.1, 1.15])
        assert discrete_jump_height(v, 0.5) == pytest.approx(1.0)

    def test_jump_height_last_cell_is_zero(self):
        u = grid([0.0, 0.0, 1.0, 1.0])
        assert discrete_jump_height(u, 0.99) == 0.0


class TestSupercritical:
    def test_examples(self):
        assert supercritical_cells(GridFunction.constant(6, 1.0)) == frozenset()
        assert supercritical_cells(grid([0.0, 0.0, 1.0, 1.0])) == {2}
        assert supercritical_cells(grid([0.0, 0.4])) == frozenset()

    def test_tie_counts_subcritical(self):
        # quotient exactly 1 stays subcritical
        assert supercritical_cells(grid([0.0, 0.5])) == frozenset()

    def test_subcritical_quotient_examples(self):
        u = grid([0.0, 0.1, 1.1, 1.15])
        assert subcritical_quotient(u, [0.5]) == pytest.approx(0.4)
        assert subcritical_quotient(grid([0.0, 1.0]), [0.5]) == 0.0
        p = PlateauFunction([0.5], [-1.0, 1.0])
        assert subcritical_quotient(sample_plateau(p, 8), [0.5]) == 0.0

    def test_subcritical_quotient_state_error(self):
        with pytest.raises(NotPiecewiseSubcriticalError):
            subcritical_quotient(grid([0.0, 0.1, 1.1, 1.15]), [0.9])
        with pytest.raises(NotPiecewiseSubcriticalError):
            subcritical_quotient(GridFunction.constant(4, 0.0), [0.5])


class TestSamplePlateau:
    def test_symmetric_example(self):
        p = PlateauFunction([0.5], [-1.0, 1.0])
        assert np.array_equal(sample_plateau(p, 4).values, [-1, -1, 1, 1])

    def test_constant(self):
        p = PlateauFunction([], [2.5])
        assert np.array_equal(sample_plateau(p, 3).values, [2.5, 2.5, 2.5])

    def test_three_plateau_floor_sampling(self):
        # cell i takes the value at (i-1)/n with right-continuity: the cell
        # containing each jump keeps the left value, so the discrete jump
        # sits on the cell boundary at ceil(n d)/n
        p = PlateauFunction([0.25, 0.6], [0.0, 1.0, -0.5])
        w = sample_plateau(p, 10)
        assert np.array_equal(
            w.values, [0, 0, 0, 1, 1, 1, -0.5, -0.5, -0.5, -0.5])
        assert supercritical_cells(w) == {jump_cell(0.25, 10), jump_cell(0.6, 10)}
        assert discrete_jump_height(w, 0.25) == 1.0
        assert discrete_jump_height(w, 0.6) == -1.5

    def test_collision_error(self):
        p = PlateauFunction([0.3, 0.35], [0.0, 1.0, 2.0])
        with pytest.raises(JumpCollisionError):
            sample_plateau(p, 10)
        sample_plateau(p, 40)  # fine once the jumps separate

    @given(st.integers(16, 200), st.integers(1, 3), st.data())
    def test_sampling_preserves_jumps(self, n, k, data):
        positions = sorted(data.draw(st.lists(
            st.integers(2, n - 2), min_size=k, max_size=k, unique=True)))
        if any(b - a < 2 for a, b in zip(positions, positions[1:])):
            return
        jumps = [(c - 0.5) / n for c in positions]
        heights = [0.0]
        for _ in range(k):
            sign = data.draw(st.sampled_from([-1.0, 1.0]))
            heights.append(heights[-1] + sign * data.draw(
                st.floats(2.0 / n, 2.0)))
        p = PlateauFunction(jumps, heights)
        w = sample_plateau(p, n)
        assert supercritical_cells(w) == {jump_cell(d, n) for d in jumps}
        for d, hj in zip(jumps, np.diff(heights)):
            assert discrete_jump_height(w, d) == pytest.approx(hj, abs=1e-15)
        assert subcritical_quotient(w, jumps) == 0.0


class TestNorms:
    def test_constant(self):
        r = norms(GridFunction.constant(5, -2.0))
        assert (r.l2, r.linf, r.tv, r.mean) == (2.0, 2.0, 0.0, -2.0)

    def test_examples(self):
        r = norms(grid([0.0, 1.0]))
        assert r.l2 == pytest.approx(math.sqrt(0.5))
        assert (r.linf, r.tv, r.mean) == (1.0, 1.0, 0.5)
        r4 = norms(grid([0.0, 0.0, 1.0, 1.0]))
        assert r4.l2 == pytest.approx(math.sqrt(0.5))
        assert (r4.linf, r4.tv, r4.mean) == (1.0, 1.0, 0.5)

    def test_tv_equals_l1_of_forward_diff(self):
        u = grid([0.3, -0.2, 0.9, 0.9, -1.0])
        fd = forward_diff(u)
        assert norms(u).tv == pytest.approx(np.abs(fd.values).sum() / u.n)

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=30))
    def test_identities(self, values):
        u = grid(values)
        r = norms(u)
        assert r.l2 ** 2 == pytest.approx(l2_inner(u, u), rel=1e-12, abs=1e-15)
        assert r.mean == pytest.approx(float(np.mean(u.values)), rel=1e-12,
                                       abs=1e-15)
