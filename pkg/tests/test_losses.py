import math

import numpy as np
import pytest

from viewaug.errors import ShapeMismatchError, ViewaugError
from viewaug.metrics import (
    LOSS_FOR_GENERATED,
    LOSS_FOR_ORIGINAL,
    LossConfig,
    MetricReport,
    avge,
    gaussian_window,
    generated_view_loss,
    generated_view_loss_grad,
    gs_loss,
    gs_loss_grad,
    l1,
    l1_grad,
    masked_weighted_l1,
    masked_weighted_l1_grad,
    psnr,
    ssim,
    ssim_grad,
)

# (psnr, ssim, lpips, avge) quadruples frozen for the consistency check:
# the first three entries must reproduce the fourth to three decimals.
METRIC_CONSISTENCY_ROWS = [
    (21.08, 0.861, 0.132, 0.073),
    (17.33, 0.617, 0.187, 0.129),
    (23.80, 0.887, 0.118, 0.055),
    (24.65, 0.917, 0.083, 0.043),
    (22.42, 0.867, 0.122, 0.063),
    (21.23, 0.824, 0.144, 0.077),
    (23.39, 0.889, 0.116, 0.056),
    (25.57, 0.911, 0.079, 0.040),
    (19.44, 0.764, 0.153, 0.094),
    (17.09, 0.704, 0.243, 0.137),
    (17.81, 0.739, 0.201, 0.119),
    (20.37, 0.797, 0.143, 0.084),
    (19.65, 0.734, 0.192, 0.102),
    (17.93, 0.701, 0.258, 0.132),
    (17.74, 0.682, 0.207, 0.125),
    (20.62, 0.762, 0.179, 0.091),
]


def ssim_reference(pred, target, config):
    """Direct 2-D windowed SSIM: explicit window sums, no separability."""
    if pred.ndim == 2:
        pred = pred[:, :, None]
        target = target[:, :, None]
    size = config.window_size
    half = size // 2
    taps = gaussian_window(size, config.sigma)
    w2 = np.outer(taps, taps)
    c1 = (0.01 * config.data_range) ** 2
    c2 = (0.03 * config.data_range) ** 2
    total = 0.0
    count = 0
    for ch in range(pred.shape[2]):
        x = np.pad(pred[:, :, ch], half)
        y = np.pad(target[:, :, ch], half)
        for i in range(pred.shape[0]):
            for j in range(pred.shape[1]):
                xs = x[i : i + size, j : j + size]
                ys = y[i : i + size, j : j + size]
                mx = (w2 * xs).sum()
                my = (w2 * ys).sum()
                vx = (w2 * xs * xs).sum() - mx * mx
                vy = (w2 * ys * ys).sum() - my * my
                cov = (w2 * xs * ys).sum() - mx * my
                s = ((2 * mx * my + c1) * (2 * cov + c2)) / (
                    (mx * mx + my * my + c1) * (vx + vy + c2)
                )
                total += s
                count += 1
    return total / count


def finite_difference(f, x, step=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += step
        xm = x.copy()
        xm[idx] -= step
        g[idx] = (f(xp) - f(xm)) / (2 * step)
        it.iternext()
    return g


def assert_grad_close(analytic, fd, rel=1e-4, abs_floor=1e-8):
    denom = np.maximum(np.abs(analytic), np.abs(fd))
    err = np.abs(analytic - fd)
    assert np.all(err <= np.maximum(rel * denom, abs_floor)), (
        f"max abs err {err.max():.3e}, max rel err {(err / np.maximum(denom, 1e-30)).max():.3e}"
    )


class TestL1:
    def test_known_value(self):
        a = np.array([[[0.0, 0.0, 0.0]]])
        b = np.array([[[0.3, 0.0, 0.6]]])
        assert l1(a, b) == pytest.approx(0.3)

    def test_constant_offset(self):
        rng = np.random.default_rng(40)
        a = rng.uniform(0.1, 0.8, size=(6, 6, 3))
        assert l1(a, a + 0.1) == pytest.approx(0.1, abs=1e-12)

    def test_zero_for_identical(self):
        x = np.random.default_rng(0).uniform(size=(4, 4, 3))
        assert l1(x, x) == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.uniform(size=(5, 5, 3)), rng.uniform(size=(5, 5, 3))
        assert l1(a, b) == l1(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            l1(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))

    def test_grad_matches_fd(self):
        rng = np.random.default_rng(2)
        target = rng.uniform(size=(5, 5, 3))
        pred = np.clip(target + rng.choice([-1, 1], size=(5, 5, 3)) * rng.uniform(0.05, 0.3, size=(5, 5, 3)), 0, 1)
        fd = finite_difference(lambda x: l1(x, target), pred)
        assert_grad_close(l1_grad(pred, target), fd, rel=1e-6)


class TestSsim:
    def test_identical_is_exactly_one(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(size=(16, 16, 3))
        assert ssim(x, x) == 1.0

    def test_matches_direct_2d_reference(self):
        rng = np.random.default_rng(4)
        for shape in [(12, 12), (10, 14, 3)]:
            a = rng.uniform(size=shape)
            b = np.clip(a + rng.normal(scale=0.1, size=shape), 0, 1)
            got = ssim(a, b)
            want = ssim_reference(a, b, LossConfig())
            assert got == pytest.approx(want, abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        a, b = rng.uniform(size=(10, 10, 3)), rng.uniform(size=(10, 10, 3))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_noise_lowers_score(self):
        rng = np.random.default_rng(6)
        a = rng.uniform(size=(20, 20, 3))
        mild = np.clip(a + rng.normal(scale=0.02, size=a.shape), 0, 1)
        harsh = np.clip(a + rng.normal(scale=0.3, size=a.shape), 0, 1)
        assert 1.0 > ssim(a, mild) > ssim(a, harsh)

    def test_inverted_image_scores_low(self):
        rng = np.random.default_rng(41)
        a = rng.uniform(size=(16, 16))
        assert ssim(a, 1.0 - a) < 0.5

    def test_custom_window(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(size=(9, 9))
        b = rng.uniform(size=(9, 9))
        cfg = LossConfig(window_size=5, sigma=0.8)
        assert ssim(a, b, cfg) == pytest.approx(ssim_reference(a, b, cfg), abs=1e-12)

    def test_window_normalized(self):
        w = gaussian_window(11, 1.5)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.array_equal(w, w[::-1])

    def test_grad_matches_fd(self):
        rng = np.random.default_rng(8)
        target = rng.uniform(size=(8, 8, 3))
        pred = np.clip(target + rng.normal(scale=0.15, size=target.shape), 0, 1)
        fd = finite_difference(lambda x: ssim(x, target), pred)
        assert_grad_close(ssim_grad(pred, target), fd, rel=1e-4)

    def test_grad_single_channel(self):
        rng = np.random.default_rng(9)
        target = rng.uniform(size=(7, 7))
        pred = rng.uniform(size=(7, 7))
        fd = finite_difference(lambda x: ssim(x, target), pred)
        g = ssim_grad(pred, target)
        assert g.shape == pred.shape
        assert_grad_close(g, fd, rel=1e-4)

    def test_grad_vanishes_at_identity(self):
        # per-pixel score peaks at 1 when the images agree, so the
        # derivative there must be zero up to rounding
        rng = np.random.default_rng(42)
        x = rng.uniform(size=(10, 10, 3))
        assert np.abs(ssim_grad(x, x)).max() < 1e-9

    def test_grad_on_target_via_symmetry(self):
        # ssim(x, y) == ssim(y, x), so the derivative in the second slot
        # is the first-slot gradient with the arguments swapped
        rng = np.random.default_rng(43)
        a = rng.uniform(size=(7, 7))
        b = rng.uniform(size=(7, 7))
        fd = finite_difference(lambda y: ssim(a, y), b)
        assert_grad_close(ssim_grad(b, a), fd, rel=1e-4)


class TestGsLoss:
    def test_blend(self):
        rng = np.random.default_rng(10)
        a = rng.uniform(size=(12, 12, 3))
        b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
        cfg = LossConfig(ssim_weight=0.2)
        expected = 0.8 * l1(a, b) + 0.2 * (1.0 - ssim(a, b, cfg))
        assert gs_loss(a, b, cfg) == pytest.approx(expected, abs=1e-15)

    def test_zero_for_identical(self):
        x = np.random.default_rng(11).uniform(size=(8, 8, 3))
        assert gs_loss(x, x) == 0.0

    def test_weight_extremes(self):
        rng = np.random.default_rng(12)
        a = rng.uniform(size=(10, 10, 3))
        b = rng.uniform(size=(10, 10, 3))
        assert gs_loss(a, b, LossConfig(ssim_weight=0.0)) == pytest.approx(l1(a, b))
        near_one = LossConfig(ssim_weight=1.0 - 1e-9)
        assert gs_loss(a, b, near_one) == pytest.approx(1.0 - ssim(a, b, near_one), abs=1e-8)
        with pytest.raises(ViewaugError):
            LossConfig(ssim_weight=1.0)

    def test_grad_matches_fd(self):
        rng = np.random.default_rng(13)
        target = rng.uniform(size=(7, 7, 3))
        pred = np.clip(target + rng.choice([-1, 1], size=target.shape) * rng.uniform(0.05, 0.25, size=target.shape), 0, 1)
        fd = finite_difference(lambda x: gs_loss(x, target), pred)
        assert_grad_close(gs_loss_grad(pred, target), fd, rel=1e-4)


class TestMaskedWeightedL1:
    def test_hand_example(self):
        pred = np.zeros((1, 2, 3))
        target = np.stack([np.full((1, 3), 0.3), np.full((1, 3), 0.9)], axis=1)
        mask = np.array([[1.0, 1.0]])
        weights = np.array([[1.0, 0.5]])
        # pixel errors 0.3 and 0.9, weighted 0.3 and 0.45, / 2 masked pixels
        assert masked_weighted_l1(pred, target, mask, weights) == pytest.approx(0.375)

    def test_two_pixel_example_with_excluded_pixel(self):
        pred = np.zeros((1, 2, 3))
        target = np.stack([np.full((1, 3), 0.2), np.full((1, 3), 0.4)], axis=1)
        mask = np.array([[1.0, 0.0]])
        weights = np.array([[0.5, 0.9]])
        # only the first pixel counts: 0.5 * 0.2 / 1
        assert masked_weighted_l1(pred, target, mask, weights) == pytest.approx(0.1)

    def test_adding_perfect_pixels_dilutes(self):
        rng = np.random.default_rng(44)
        pred = rng.uniform(size=(4, 4, 3))
        target = pred.copy()
        target[0, 0] += 0.3
        weights = np.ones((4, 4))
        small = np.zeros((4, 4))
        small[0, 0] = 1.0
        loss_small = masked_weighted_l1(pred, target, small, weights)
        loss_full = masked_weighted_l1(pred, target, np.ones((4, 4)), weights)
        assert loss_full == pytest.approx(loss_small / 16)

    def test_mask_excludes_pixels(self):
        pred = np.zeros((1, 2, 3))
        target = np.ones((1, 2, 3))
        mask = np.array([[1.0, 0.0]])
        weights = np.ones((1, 2))
        assert masked_weighted_l1(pred, target, mask, weights) == pytest.approx(1.0)

    def test_empty_mask_is_zero(self):
        pred = np.zeros((2, 2, 3))
        target = np.ones((2, 2, 3))
        assert masked_weighted_l1(pred, target, np.zeros((2, 2)), np.ones((2, 2))) == 0.0

    def test_weights_scale_linearly(self):
        rng = np.random.default_rng(14)
        pred = rng.uniform(size=(6, 6, 3))
        target = rng.uniform(size=(6, 6, 3))
        mask = rng.integers(0, 2, size=(6, 6)).astype(float)
        w = rng.uniform(size=(6, 6))
        assert masked_weighted_l1(pred, target, mask, 2 * w) == pytest.approx(
            2 * masked_weighted_l1(pred, target, mask, w)
        )

    def test_grad_matches_fd(self):
        rng = np.random.default_rng(15)
        target = rng.uniform(size=(6, 6, 3))
        pred = np.clip(target + rng.choice([-1, 1], size=target.shape) * rng.uniform(0.05, 0.3, size=target.shape), 0, 1)
        mask = rng.integers(0, 2, size=(6, 6)).astype(float)
        weights = rng.uniform(size=(6, 6))
        fd = finite_difference(lambda x: masked_weighted_l1(x, target, mask, weights), pred)
        assert_grad_close(masked_weighted_l1_grad(pred, target, mask, weights), fd, rel=1e-6)

    def test_empty_mask_grad_is_zero(self):
        pred = np.ones((3, 3, 3))
        g = masked_weighted_l1_grad(pred, np.zeros_like(pred), np.zeros((3, 3)), np.ones((3, 3)))
        assert not g.any()

    def test_shape_checks(self):
        with pytest.raises(ShapeMismatchError):
            masked_weighted_l1(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), np.zeros((3, 3)), np.zeros((2, 2)))
        with pytest.raises(ShapeMismatchError):
            masked_weighted_l1(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))

    def test_view_wrapper_delegates(self):
        from types import SimpleNamespace

        rng = np.random.default_rng(45)
        pred = rng.uniform(size=(5, 5, 3))
        view = SimpleNamespace(
            image=rng.uniform(size=(5, 5, 3)),
            mask=rng.integers(0, 2, size=(5, 5)).astype(float),
            weights=rng.uniform(size=(5, 5)),
        )
        assert generated_view_loss(pred, view) == masked_weighted_l1(
            pred, view.image, view.mask, view.weights
        )
        assert np.array_equal(
            generated_view_loss_grad(pred, view),
            masked_weighted_l1_grad(pred, view.image, view.mask, view.weights),
        )


class TestPsnr:
    def test_constant_offset_closed_form(self):
        a = np.zeros((8, 8, 3))
        b = np.full((8, 8, 3), 1.0 / 255.0)
        assert psnr(a, b) == pytest.approx(48.1308036086791, abs=1e-9)

    def test_twenty_db(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)

    def test_identical_is_infinite(self):
        x = np.random.default_rng(16).uniform(size=(4, 4, 3))
        assert psnr(x, x) == math.inf

    def test_data_range(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 25.5)
        assert psnr(a, b, data_range=255.0) == pytest.approx(20.0, abs=1e-12)

    def test_rejects_bad_range(self):
        with pytest.raises(ViewaugError):
            psnr(np.zeros((2, 2)), np.zeros((2, 2)), data_range=0.0)


class TestAvge:
    def test_frozen_consistency_rows(self):
        for p, s, lp, expected in METRIC_CONSISTENCY_ROWS:
            assert avge(p, s, lp) == pytest.approx(expected, abs=1e-3)

    def test_perfect_scores_give_zero(self):
        assert avge(math.inf, 0.5, 0.1) == 0.0
        assert avge(30.0, 1.0, 0.1) == 0.0
        assert avge(30.0, 0.5, 0.0) == 0.0

    def test_monotone_in_each_argument(self):
        base = avge(25.0, 0.9, 0.1)
        assert avge(20.0, 0.9, 0.1) > base
        assert avge(25.0, 0.8, 0.1) > base
        assert avge(25.0, 0.9, 0.2) > base

    def test_rejects_out_of_domain(self):
        with pytest.raises(ViewaugError):
            avge(25.0, 1.01, 0.1)
        with pytest.raises(ViewaugError):
            avge(25.0, 0.9, -0.1)


class TestReportAndConfig:
    def test_report_invariant(self):
        MetricReport(psnr=30.0, ssim=0.9)
        MetricReport(psnr=30.0, ssim=0.9, lpips=0.1, avge=0.05)
        with pytest.raises(ViewaugError):
            MetricReport(psnr=30.0, ssim=0.9, lpips=0.1)
        with pytest.raises(ViewaugError):
            MetricReport(psnr=30.0, ssim=0.9, avge=0.05)

    def test_loss_dispatch_names(self):
        assert LOSS_FOR_ORIGINAL == "gs_loss"
        assert LOSS_FOR_GENERATED == "masked_weighted_l1"

    def test_config_validation(self):
        with pytest.raises(ViewaugError):
            LossConfig(ssim_weight=1.5)
        with pytest.raises(ViewaugError):
            LossConfig(ssim_weight=-0.1)
        with pytest.raises(ViewaugError):
            LossConfig(window_size=4)
        with pytest.raises(ViewaugError):
            LossConfig(window_size=1)
        with pytest.raises(ViewaugError):
            LossConfig(sigma=0.0)
        with pytest.raises(ViewaugError):
            LossConfig(data_range=-1.0)
        # default blend keeps l1 dominant
        assert LossConfig().ssim_weight == 0.2
