import numpy as np
import pytest

from hybriddof.postdof import median3x3
from hybriddof.reconstruct import build_mips, gather_reconstruct, lod_for, sample_trilinear


class TestMips:
    def test_constant_all_levels(self):
        mips = build_mips(np.full((16, 16, 3), 0.7))
        assert len(mips) == 4
        for lv in mips:
            assert np.allclose(lv, 0.7)

    def test_sizes_halve_ceil(self):
        mips = build_mips(np.zeros((18, 27, 3)))
        assert mips[1].shape[:2] == (9, 14)
        assert mips[2].shape[:2] == (5, 7)
        assert mips[3].shape[:2] == (3, 4)

    def test_level1_block_means(self):
        img = np.arange(16, dtype=np.float64).reshape(4, 4)[..., None] * np.ones(3)
        mips = build_mips(img)
        want = np.array([[2.5, 4.5], [10.5, 12.5]])
        assert np.allclose(mips[1][..., 0], want)


class TestLod:
    def test_exact_values(self):
        assert lod_for(0.0) == 0.0
        assert lod_for(20.0) == pytest.approx(1.0)
        assert lod_for(100.0) == 3.0

    def test_trilinear_blends_levels(self):
        img = np.zeros((8, 8, 3))
        img[0::2, 0::2] = 1.0  # checker: level0 alternates, level1 ~ 0.25
        mips = build_mips(img)
        x = np.array([[3.0]])
        y = np.array([[3.0]])
        s0 = sample_trilinear(mips, x, y, np.array([[0.0]]))
        s1 = sample_trilinear(mips, x, y, np.array([[1.0]]))
        mid = sample_trilinear(mips, x, y, np.array([[0.5]]))
        assert np.allclose(mid, 0.5 * (s0 + s1))


class TestGather:
    def make_inputs(self, h2=24, w2=24, coc=8.0, sigma=0.0, seed=0):
        rng = np.random.default_rng(seed)
        merged = rng.random((h2, w2, 3))
        c_t = np.full((h2, w2), coc)
        sigma2 = np.full((h2, w2), sigma)
        h = rng.random((h2, w2))
        return merged, c_t, sigma2, h

    def test_zero_variance_identity(self):
        merged, c_t, sigma2, h = self.make_inputs(sigma=0.0)
        out, out_h = gather_reconstruct(merged, c_t, sigma2, h, median_first=False)
        assert np.array_equal(out, merged)
        assert np.array_equal(out_h, h)

    def test_median_prefilter_applied(self):
        merged, c_t, sigma2, h = self.make_inputs(sigma=0.0)
        out, _ = gather_reconstruct(merged, c_t, sigma2, h, median_first=True)
        assert np.array_equal(out, median3x3(merged))

    def test_blend_cap_at_09(self):
        merged, c_t, sigma2, h = self.make_inputs(sigma=4.5e-4)
        b = np.clip(sigma2 * 2000.0, 0, 0.9)
        assert np.all(b == 0.9)
        out, _ = gather_reconstruct(merged, c_t, sigma2, h, median_first=False)
        # reconstruct never exceeds the 0.9 pull toward the gathered estimate
        big_sigma = np.full_like(sigma2, 1.0)
        out2, _ = gather_reconstruct(merged, c_t, big_sigma, h, median_first=False)
        assert np.allclose(out, out2)

    def test_zero_coc_identity_any_blend(self):
        merged, c_t, sigma2, h = self.make_inputs(coc=0.0, sigma=1.0)
        out, _ = gather_reconstruct(merged, c_t, sigma2, h, median_first=False)
        assert np.allclose(out, merged, atol=1e-12)

    def test_constant_region_never_brightens(self):
        h2 = w2 = 16
        merged = np.full((h2, w2, 3), 0.4)
        out, _ = gather_reconstruct(
            merged, np.full((h2, w2), 12.0), np.full((h2, w2), 1e-3), np.zeros((h2, w2)),
            median_first=False,
        )
        assert np.allclose(out, 0.4, atol=1e-9)

    def test_monotone_in_variance(self):
        merged, c_t, _, h = self.make_inputs(coc=10.0, seed=3)
        gathered_full, _ = gather_reconstruct(merged, c_t, np.full_like(c_t, 1.0), h, median_first=False)
        d_prev = None
        for sigma in (0.0, 1e-4, 2e-4, 4e-4):
            out, _ = gather_reconstruct(merged, c_t, np.full_like(c_t, sigma), h, median_first=False)
            d = np.linalg.norm(out - gathered_full)
            if d_prev is not None:
                assert d <= d_prev + 1e-12
            d_prev = d

    def test_output_convex_between_input_and_gather(self):
        merged, c_t, _, h = self.make_inputs(coc=6.0, seed=5)
        sigma2 = np.full_like(c_t, 2e-4)  # b = 0.4
        out, _ = gather_reconstruct(merged, c_t, sigma2, h, median_first=False)
        full, _ = gather_reconstruct(merged, c_t, np.full_like(c_t, 1.0), h, median_first=False)
        # with b=0.4 and b_cap=0.9: out = in + (gath-in)*0.4, full = in + (gath-in)*0.9
        gath = merged + (full - merged) / 0.9
        assert np.allclose(out, merged + (gath - merged) * 0.4, atol=1e-9)

    def test_rejection_uses_sample_own_coc(self):
        # a sharp (c_t=0) island inside a blurred field must not receive its
        # neighbors' color: its own taps sample the island (radius 0), and
        # the island's samples are rejected by neighbors only when the
        # island's own CoC cannot reach them
        h2 = w2 = 17
        merged = np.zeros((h2, w2, 3))
        merged[8, 8] = 1.0
        c_t = np.full((h2, w2), 20.0)
        c_t[8, 8] = 0.0
        sigma2 = np.full((h2, w2), 1.0)  # b = 0.9 everywhere
        out, _ = gather_reconstruct(merged, c_t, sigma2, np.zeros((h2, w2)), median_first=False)
        assert np.allclose(out[8, 8], merged[8, 8], atol=1e-9)
