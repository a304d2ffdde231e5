import numpy as np
import pytest

from splatar.errors import InvalidParamsError
from splatar.losses import (
    PSNR_CAP_DB,
    LossWeights,
    l1_loss,
    mask_loss,
    offset_reg,
    offset_reg_grad,
    psnr,
    ssim,
    total_loss,
)


class TestL1:
    def test_identical_zero(self, rng):
        img = rng.random((8, 8, 3))
        assert l1_loss(img, img) == 0.0

    def test_zeros_vs_ones(self):
        assert l1_loss(np.zeros((4, 4, 3)), np.ones((4, 4, 3))) == 1.0

    def test_matches_loop_oracle(self, rng):
        a, b = rng.random((2, 5, 6, 3))
        total = 0.0
        for i in range(5):
            for j in range(6):
                for c in range(3):
                    total += abs(a[i, j, c] - b[i, j, c])
        assert l1_loss(a, b) == pytest.approx(total / (5 * 6 * 3), abs=1e-12)

    def test_symmetry(self, rng):
        a, b = rng.random((2, 7, 7))
        assert l1_loss(a, b) == l1_loss(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidParamsError):
            l1_loss(np.zeros((3, 3)), np.zeros((4, 4)))


class TestMaskLoss:
    def test_identical_zero(self, rng):
        m = rng.random((9, 9))
        assert mask_loss(m, m) == 0.0

    def test_zeros_vs_ones(self):
        assert mask_loss(np.zeros((4, 4)), np.ones((4, 4))) == 1.0

    def test_matches_loop_oracle(self, rng):
        a, b = rng.random((2, 6, 4))
        total = sum(abs(a[i, j] - b[i, j]) for i in range(6) for j in range(4))
        assert mask_loss(a, b) == pytest.approx(total / 24, abs=1e-12)


class TestOffsetReg:
    def test_zero_offsets_zero_eps(self):
        assert offset_reg(np.zeros((10, 3)), 0.0) == 0.0

    def test_offset_of_length_eps(self):
        eps = 0.02
        offs = np.array([[eps, 0.0, 0.0]])
        assert offset_reg(offs, eps) == pytest.approx(0.0, abs=1e-18)

    def test_matches_loop_oracle(self, rng):
        offs = rng.standard_normal((20, 3)) * 0.05
        eps = 1e-3
        total = 0.0
        for k in range(20):
            n = (offs[k, 0] ** 2 + offs[k, 1] ** 2 + offs[k, 2] ** 2) ** 0.5
            total += (n - eps) ** 2
        assert offset_reg(offs, eps) == pytest.approx(total / 20, abs=1e-15)

    def test_grad_matches_finite_differences(self, rng):
        offs = rng.standard_normal((15, 3)) * 0.05
        eps = 1e-3
        analytic = offset_reg_grad(offs, eps)
        h = 1e-6
        for k in range(15):
            for c in range(3):
                p, m = offs.copy(), offs.copy()
                p[k, c] += h
                m[k, c] -= h
                fd = (offset_reg(p, eps) - offset_reg(m, eps)) / (2 * h)
                assert analytic[k, c] == pytest.approx(fd, rel=1e-4, abs=1e-10)


class TestTotalLoss:
    def test_all_zero(self):
        assert total_loss(0, 0, 0, LossWeights()) == 0.0

    def test_arithmetic(self):
        w = LossWeights(l1=1.0, lpips=1.0, mask=1.0, offset=0.1)
        assert total_loss(1.0, 1.0, 1.0, w, lpips_term=0.0) == pytest.approx(2.1)

    def test_default_weights_paper_values(self):
        w = LossWeights()
        assert (w.l1, w.lpips, w.mask, w.offset) == (1.0, 1.0, 1.0, 0.1)

    def test_linear_in_each_weight(self, rng):
        parts = rng.random(3)
        lp = float(rng.random())
        base = total_loss(*parts, LossWeights(l1=0, lpips=0, mask=0, offset=0), lp)
        assert base == 0.0
        for field, part in (("l1", parts[0]), ("mask", parts[1]), ("offset", parts[2]),
                            ("lpips", lp)):
            w = {f: 0.0 for f in ("l1", "lpips", "mask", "offset")}
            w[field] = 2.0
            assert total_loss(*parts, LossWeights(**w), lp) == pytest.approx(2.0 * part)

    def test_negative_weight_rejected(self):
        with pytest.raises(InvalidParamsError):
            LossWeights(l1=-1.0)


class TestPSNR:
    def test_identical_reports_cap(self, rng):
        img = rng.random((16, 16, 3))
        assert psnr(img, img) == PSNR_CAP_DB

    def test_twenty_db_at_mse_point_zero_one(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)

    def test_symmetry(self, rng):
        a, b = rng.random((2, 8, 8))
        assert psnr(a, b) == psnr(b, a)


class TestSSIM:
    def test_identical_is_one(self, rng):
        img = rng.random((24, 24, 3))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)

    def test_matches_windowed_loop_oracle(self, rng):
        a, b = rng.random((2, 16, 16))
        got = ssim(a, b)
        # direct formula over every 11x11 window
        size, sigma, c1, c2 = 11, 1.5, 0.01**2, 0.03**2
        x = np.arange(size) - 5.0
        g = np.exp(-0.5 * (x / sigma) ** 2)
        w = np.outer(g, g)
        w /= w.sum()
        vals = []
        for i in range(16 - 10):
            for j in range(16 - 10):
                wa = a[i : i + 11, j : j + 11]
                wb = b[i : i + 11, j : j + 11]
                mu_a = (w * wa).sum()
                mu_b = (w * wb).sum()
                var_a = (w * wa * wa).sum() - mu_a**2
                var_b = (w * wb * wb).sum() - mu_b**2
                cov = (w * wa * wb).sum() - mu_a * mu_b
                vals.append(
                    ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                    / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
                )
        assert got == pytest.approx(float(np.mean(vals)), abs=1e-10)

    def test_degraded_image_below_one(self, rng):
        img = rng.random((20, 20))
        noisy = np.clip(img + rng.standard_normal((20, 20)) * 0.2, 0, 1)
        assert ssim(img, noisy) < 0.95
