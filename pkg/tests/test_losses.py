"""Loss cores, batch losses, and the unified combination.

Scalar expectations marked "frozen oracle" were produced by evaluating the
closed forms with mpmath at 50 decimal digits in a separate session and
freezing the rounded-to-double results here; the float64 implementation
agrees with them to a few ulp, far inside the asserted tolerances.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from unikd.errors import (
    BankNotReadyError,
    DimensionMismatchError,
    EmptyBatchError,
    EmptyMatrixError,
    ZeroNormError,
)
from unikd.geometry import diag_cosines, pairwise_cosine_matrix
from unikd.losses import (
    IledParams,
    KlParams,
    LossOutput,
    RpsdParams,
    dissimilarity_matrix,
    fc_loss,
    fc_loss_cosform,
    iled_core,
    iled_core_grad,
    iled_loss,
    kl_soft_logits_loss,
    normalized_dissimilarity,
    raw_l2_loss,
    rpsd_core,
    rpsd_core_grad,
    rpsd_loss,
    unified_loss,
)

ILED_REF = IledParams(steepness=40.0, margin=0.9, smoothing=0.1)
RPSD_REF = RpsdParams(steepness=60.0, threshold=0.05, smoothing=1.0)

# frozen oracle values (see module docstring)
ILED_AT_MARGIN = 0.0054798096107335325  # x = s = 0.9
ILED_AT_ONE = 0.00015049125218842837
ILED_AT_HALF = 0.20396078197825894
RPSD_AT_THRESHOLD = 0.011552453009332422  # delta = t = 0.05
RPSD_AT_ZERO = 0.00081080079752858993
RPSD_AT_HALF = 0.4934635244879138


class TestCores:
    def test_iled_core_frozen_values(self):
        assert iled_core(0.9, ILED_REF) == pytest.approx(ILED_AT_MARGIN, rel=1e-12)
        assert iled_core(1.0, ILED_REF) == pytest.approx(ILED_AT_ONE, rel=1e-12)
        assert iled_core(0.5, ILED_REF) == pytest.approx(ILED_AT_HALF, rel=1e-12)

    def test_rpsd_core_frozen_values(self):
        assert rpsd_core(0.05, RPSD_REF) == pytest.approx(RPSD_AT_THRESHOLD, rel=1e-12)
        assert rpsd_core(0.0, RPSD_REF) == pytest.approx(RPSD_AT_ZERO, rel=1e-12)
        assert rpsd_core(0.5, RPSD_REF) == pytest.approx(RPSD_AT_HALF, rel=1e-12)

    def test_cores_accept_arrays(self):
        grid = np.linspace(-1.0, 1.0, 7)
        out = iled_core(grid, ILED_REF)
        assert out.shape == grid.shape
        assert iled_core(float(grid[3]), ILED_REF) == pytest.approx(out[3], rel=1e-15)

    def test_cores_strictly_positive(self, rng):
        xs = rng.uniform(-1.0, 1.0, 500)
        ds = rng.uniform(0.0, 2.0, 500)
        assert np.all(iled_core(xs, ILED_REF) > 0.0)
        assert np.all(rpsd_core(ds, RPSD_REF) > 0.0)

    def test_iled_core_overflow_safe_tail(self):
        # at x = -1 the softplus argument is 76; ln(1+e^z)/r collapses to
        # (s - x) up to e^-76, so the product is (s - x) * w to ~1e-33
        value = iled_core(-1.0, ILED_REF)
        u = -1.0 - 0.9
        assert np.isfinite(value)
        assert value == pytest.approx(-u * np.sqrt(u * u + 0.1), rel=1e-12)

    def test_rpsd_core_overflow_safe_tail(self):
        value = rpsd_core(2.0, RPSD_REF)
        u = 2.0 - 0.05
        assert np.isfinite(value)
        assert value == pytest.approx(u * np.sqrt(u * u + 1.0), rel=1e-12)

    def test_monotone_on_coarse_grids(self):
        xs = np.linspace(-1.0, 1.0, 1001)
        assert np.all(np.diff(iled_core(xs, ILED_REF)) < 0.0)
        ds = np.linspace(0.0, 2.0, 1001)
        assert np.all(np.diff(rpsd_core(ds, RPSD_REF)) > 0.0)

    def test_core_grads_match_finite_differences(self):
        h = 1e-6
        for x in (-0.7, 0.1, 0.88, 0.9, 0.97):
            num = (iled_core(x + h, ILED_REF) - iled_core(x - h, ILED_REF)) / (2 * h)
            assert iled_core_grad(x, ILED_REF) == pytest.approx(num, rel=1e-7, abs=1e-10)
        for d in (0.0, 0.04, 0.05, 0.3, 1.7):
            num = (rpsd_core(d + h, RPSD_REF) - rpsd_core(d - h, RPSD_REF)) / (2 * h)
            assert rpsd_core_grad(d, RPSD_REF) == pytest.approx(num, rel=1e-7, abs=1e-10)

    def test_iled_tail_below_weighted_floor(self):
        # substantive smallness bound: past the soft margin by 0.05 the core
        # is already under 1e-2 for every grid point
        xs = np.linspace(0.9 + 0.05, 1.0, 500)
        assert np.all(iled_core(xs, IledParams(steepness=40, margin=0.9, smoothing=0.1)) < 1e-2)


class TestParamValidation:
    def test_iled_params(self):
        with pytest.raises(ValueError):
            IledParams(steepness=0.0)
        with pytest.raises(ValueError):
            IledParams(smoothing=0.0)
        with pytest.raises(ValueError):
            IledParams(margin=1.0)
        with pytest.raises(ValueError):
            IledParams(weight=-1.0)
        with pytest.raises(ValueError):
            IledParams(variant="rowwise")

    def test_rpsd_params(self):
        with pytest.raises(ValueError):
            RpsdParams(steepness=-3.0)
        with pytest.raises(ValueError):
            RpsdParams(smoothing=0.0)
        with pytest.raises(ValueError):
            RpsdParams(threshold=2.0)
        with pytest.raises(ValueError):
            RpsdParams(weight=-0.5)

    def test_kl_params(self):
        with pytest.raises(ValueError):
            KlParams(temperature=0.0)

    def test_tuned_defaults(self):
        assert IledParams().weight == 70.0
        assert RpsdParams().weight == 3.0
        assert IledParams().variant == "per_sample"


class TestFcLoss:
    def test_perfect_alignment_is_zero(self, rng):
        t = rng.standard_normal((4, 6))
        out = fc_loss(t, 2.5 * t)
        assert out.value == pytest.approx(0.0, abs=1e-15)
        assert_allclose(out.grad, np.zeros_like(t), atol=1e-12)

    def test_antipodal_single_pair_is_four(self):
        out = fc_loss([[1.0, 0.0]], [[-3.0, 0.0]])
        assert out.value == pytest.approx(4.0, abs=1e-12)

    def test_cosform_trivials(self):
        assert fc_loss_cosform([1.0, 1.0, 1.0]) == 0.0
        assert fc_loss_cosform([0.0]) == 2.0

    def test_matches_cosform(self, rng):
        t = rng.standard_normal((8, 32))
        s = rng.standard_normal((8, 32))
        direct = fc_loss(t, s).value
        assert abs(direct - fc_loss_cosform(diag_cosines(t, s))) <= 1e-10

    def test_cosform_rejects_bad_input(self):
        with pytest.raises(EmptyBatchError):
            fc_loss_cosform([])
        with pytest.raises(DimensionMismatchError):
            fc_loss_cosform([[0.5]])

    def test_reports_mean_cos(self, rng):
        t = rng.standard_normal((5, 4))
        s = rng.standard_normal((5, 4))
        out = fc_loss(t, s)
        assert out.aux["mean_cos"] == pytest.approx(float(np.mean(diag_cosines(t, s))))

    def test_zero_row_and_shape_errors(self):
        with pytest.raises(ZeroNormError):
            fc_loss([[1.0, 0.0]], [[0.0, 0.0]])
        with pytest.raises(DimensionMismatchError):
            fc_loss(np.ones((2, 3)), np.ones((3, 3)))
        with pytest.raises(EmptyBatchError):
            fc_loss(np.empty((0, 3)), np.empty((0, 3)))


class TestRawL2:
    def test_identical_is_zero(self, rng):
        t = rng.standard_normal((3, 5))
        assert raw_l2_loss(t, t.copy()).value == 0.0

    def test_unit_axes_pair(self):
        out = raw_l2_loss([[1.0, 0.0]], [[0.0, 1.0]])
        assert out.value == pytest.approx(2.0, abs=0)
        assert_allclose(out.grad, [[-2.0, 2.0]], atol=0)

    def test_grad_closed_form(self, rng):
        t = rng.standard_normal((6, 4))
        s = rng.standard_normal((6, 4))
        assert_allclose(raw_l2_loss(t, s).grad, (2.0 / 6) * (s - t), atol=1e-15)


class TestKlLoss:
    def test_equal_logits_zero(self, rng):
        t = rng.standard_normal((4, 7))
        out = kl_soft_logits_loss(t, t.copy(), KlParams())
        assert out.value == pytest.approx(0.0, abs=1e-14)
        assert_allclose(out.grad, np.zeros_like(t), atol=1e-14)

    def test_row_shift_invariance(self, rng):
        # KL depends on logits only through softmax, so per-row constants
        # added to the student must leave the value at zero
        t = rng.standard_normal((4, 7))
        shifted = t + rng.standard_normal((4, 1))
        assert kl_soft_logits_loss(t, shifted, KlParams()).value == pytest.approx(
            0.0, abs=1e-13
        )

    def test_nonnegative_and_positive_when_different(self, rng):
        t = rng.standard_normal((5, 6))
        s = rng.standard_normal((5, 6))
        assert kl_soft_logits_loss(t, s, KlParams()).value > 0.0

    def test_matches_brute_force_oracle(self, rng):
        temp = 3.0
        t = 2.0 * rng.standard_normal((4, 10))
        s = 2.0 * rng.standard_normal((4, 10))
        got = kl_soft_logits_loss(t, s, KlParams(temperature=temp)).value
        total = 0.0
        for i in range(4):
            p = np.exp(t[i] / temp) / np.sum(np.exp(t[i] / temp))
            q = np.exp(s[i] / temp) / np.sum(np.exp(s[i] / temp))
            total += float(np.sum(p * (np.log(p) - np.log(q))))
        assert got == pytest.approx(temp * temp * total / 4, abs=1e-10)

    def test_needs_two_classes(self):
        with pytest.raises(DimensionMismatchError):
            kl_soft_logits_loss(np.ones((3, 1)), np.ones((3, 1)), KlParams())


class TestIledLoss:
    def test_aligned_batches_equal_core_at_one(self, rng):
        t = rng.standard_normal((5, 8))
        for variant in ("per_sample", "batch_mean"):
            p = IledParams(steepness=40, margin=0.9, smoothing=0.1, variant=variant)
            out = iled_loss(t, 4.0 * t, p)
            assert out.value == pytest.approx(ILED_AT_ONE, rel=1e-9)

    def test_single_row_variants_agree(self, rng):
        t = rng.standard_normal((1, 6))
        s = rng.standard_normal((1, 6))
        a = iled_loss(t, s, IledParams(variant="per_sample")).value
        b = iled_loss(t, s, IledParams(variant="batch_mean")).value
        assert a == pytest.approx(b, abs=0)

    def test_variants_differ_for_larger_batches(self, rng):
        t = rng.standard_normal((8, 6))
        s = rng.standard_normal((8, 6))
        a = iled_loss(t, s, IledParams(variant="per_sample")).value
        b = iled_loss(t, s, IledParams(variant="batch_mean")).value
        assert a != b

    def test_reports_mean_cos(self, rng):
        t = rng.standard_normal((4, 5))
        s = rng.standard_normal((4, 5))
        out = iled_loss(t, s, IledParams())
        assert out.aux["mean_cos"] == pytest.approx(float(np.mean(diag_cosines(t, s))))

    def test_empty_batch_raises(self):
        with pytest.raises(EmptyBatchError):
            iled_loss(np.empty((0, 4)), np.empty((0, 4)), IledParams())


class TestDissimilarity:
    def test_equal_matrices_zero(self, rng):
        s = rng.uniform(-1, 1, (3, 5))
        assert_allclose(dissimilarity_matrix(s, s.copy()), np.zeros((3, 5)), atol=0)

    def test_extreme_bound(self):
        assert dissimilarity_matrix([[1.0]], [[-1.0]])[0, 0] == 2.0

    def test_argument_symmetry(self, rng):
        a = rng.uniform(-1, 1, (4, 6))
        b = rng.uniform(-1, 1, (4, 6))
        assert_allclose(dissimilarity_matrix(a, b), dissimilarity_matrix(b, a), atol=0)

    def test_normalized_trivials(self):
        assert normalized_dissimilarity(np.zeros((3, 4))) == 0.0
        assert normalized_dissimilarity(np.full((2, 5), 0.37)) == pytest.approx(0.37)

    def test_normalized_column_duplication_invariant(self, rng):
        d = rng.uniform(0, 2, (3, 4))
        doubled = np.concatenate([d, d], axis=1)
        assert normalized_dissimilarity(doubled) == pytest.approx(
            normalized_dissimilarity(d), abs=1e-15
        )

    def test_normalized_empty_raises(self):
        with pytest.raises(EmptyMatrixError):
            normalized_dissimilarity(np.empty((0, 3)))


class TestRpsdLoss:
    def test_identical_structures_hit_core_at_zero(self, rng):
        e = rng.standard_normal((4, 8))
        f = rng.standard_normal((12, 8))
        out = rpsd_loss(e, e.copy(), f, f.copy(), RPSD_REF)
        assert out.value == pytest.approx(RPSD_AT_ZERO, rel=1e-9)
        assert out.aux["delta_norm"] == pytest.approx(0.0, abs=1e-12)

    def test_role_swap_preserves_delta(self, rng):
        e_t, e_s = rng.standard_normal((2, 4, 8))
        f_t, f_s = rng.standard_normal((2, 10, 8))
        a = rpsd_loss(e_t, e_s, f_t, f_s, RPSD_REF)
        b = rpsd_loss(e_s, e_t, f_s, f_t, RPSD_REF)
        assert a.aux["delta_norm"] == pytest.approx(b.aux["delta_norm"], abs=1e-13)
        assert a.value == pytest.approx(b.value, abs=1e-13)

    def test_bank_duplication_invariance(self, rng):
        e_t, e_s = rng.standard_normal((2, 4, 8))
        f_t = rng.standard_normal((9, 8))
        f_s = rng.standard_normal((9, 8))
        base = rpsd_loss(e_t, e_s, f_t, f_s, RPSD_REF).value
        doubled = rpsd_loss(
            e_t, e_s, np.concatenate([f_t, f_t]), np.concatenate([f_s, f_s]), RPSD_REF
        ).value
        assert abs(base - doubled) <= 1e-12

    def test_empty_bank_raises(self, rng):
        e = rng.standard_normal((3, 5))
        with pytest.raises(BankNotReadyError):
            rpsd_loss(e, e, np.empty((0, 5)), np.empty((0, 5)), RPSD_REF)

    def test_grad_is_zero_for_tied_similarities(self, rng):
        # sign(0) = 0 subgradient choice: equal structures give a zero grad
        e = rng.standard_normal((3, 6))
        f = rng.standard_normal((7, 6))
        out = rpsd_loss(e, e.copy(), f, f.copy(), RPSD_REF)
        assert_allclose(out.grad, np.zeros_like(e), atol=1e-15)


class TestUnifiedLoss:
    @staticmethod
    def _outputs(rng, shape=(4, 6)):
        return (
            LossOutput(0.7, rng.standard_normal(shape), {"mean_cos": 0.2}),
            LossOutput(0.3, rng.standard_normal(shape), {"delta_norm": 0.1}),
            LossOutput(1.9, rng.standard_normal(shape), {}),
        )

    def test_zero_weights_degenerate_to_task_loss(self, rng):
        li, lr, lf = self._outputs(rng)
        out = unified_loss(
            li, lr, lf, IledParams(weight=0.0), RpsdParams(weight=0.0)
        )
        assert out.value == lf.value
        assert_allclose(out.grad, lf.grad, atol=0)

    def test_unit_values_with_reference_weights(self, rng):
        ones = [LossOutput(1.0, np.zeros((2, 2)), {}) for _ in range(3)]
        out = unified_loss(
            ones[0], ones[1], ones[2], IledParams(weight=3.0), RpsdParams(weight=40.0)
        )
        assert out.value == pytest.approx(44.0, abs=0)

    def test_gradient_linearity(self, rng):
        li, lr, lf = self._outputs(rng)
        p_i = IledParams(weight=2.5)
        p_r = RpsdParams(weight=7.0)
        out = unified_loss(li, lr, lf, p_i, p_r)
        want = 2.5 * li.grad + 7.0 * lr.grad + lf.grad
        assert np.abs(out.grad - want).max() <= 1e-12
        assert out.value == pytest.approx(2.5 * li.value + 7.0 * lr.value + lf.value)

    def test_aux_merged(self, rng):
        out = unified_loss(*self._outputs(rng), IledParams(), RpsdParams())
        assert set(out.aux) == {"mean_cos", "delta_norm"}

    def test_shape_mismatch_raises(self, rng):
        li, lr, lf = self._outputs(rng)
        bad = LossOutput(0.1, np.zeros((3, 3)), {})
        with pytest.raises(DimensionMismatchError):
            unified_loss(li, lr, bad, IledParams(), RpsdParams())
