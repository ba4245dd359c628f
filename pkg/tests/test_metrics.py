import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowsig.errors import ConfigError, DataError
from lowsig.metrics import (
    RoiSpec,
    extract_patch,
    mtf_from_psf,
    mtf_from_wire,
    nps_2d,
    nps_integral,
    nps_radial,
    roi_stats,
)
from lowsig.recon import Image


def gaussian_psf(size, sigma_px):
    c = (size - 1) / 2
    yy, xx = np.mgrid[:size, :size]
    return np.exp(-((yy - c) ** 2 + (xx - c) ** 2) / (2 * sigma_px ** 2))


class TestRoi:
    def test_constant(self):
        assert roi_stats(np.full((20, 20), 4.5), RoiSpec((9.5, 9.5), 6)) == (4.5, 0.0)

    def test_checkerboard(self):
        img = 2.0 * (np.indices((100, 100)).sum(axis=0) % 2)
        mean, std = roi_stats(img, RoiSpec(bounds=(0, 99, 0, 99)))
        assert mean == 1.0
        assert std == pytest.approx(1.0, rel=1e-3)

    def test_single_pixel(self):
        img = np.arange(25.0).reshape(5, 5)
        assert roi_stats(Image(img, 1.0), RoiSpec((2, 3), 0)) == (13.0, 0.0)
        assert roi_stats(img, RoiSpec(bounds=(4, 4, 0, 0))) == (20.0, 0.0)

    @pytest.mark.parametrize("roi", [RoiSpec((2, 2), 5), RoiSpec(bounds=(0, 10, 0, 3)), RoiSpec()])
    def test_out_of_bounds(self, roi):
        with pytest.raises(ConfigError):
            roi_stats(np.zeros((8, 8)), roi)


class TestNps:
    def test_identical_patches(self, rng):
        p = rng.normal(size=(16, 16))
        prof = nps_radial([p] * 10, 0.1)
        np.testing.assert_allclose(prof.values, 0.0, atol=1e-25)

    def test_white_noise_parseval(self, rng):
        patches = rng.normal(size=(64, 64, 64))
        pitch = 0.05
        nps = nps_2d(patches, pitch)
        assert nps_integral(nps, pitch) == pytest.approx(patches.var(ddof=1), rel=0.10)
        prof = nps_radial(patches, pitch)
        # flat spectrum at the white level pitch^2 * variance
        assert np.median(prof.values[1:]) == pytest.approx(pitch ** 2, rel=0.1)
        assert np.all(np.diff(prof.frequencies) > 0)

    def test_sinusoid_lands_in_its_bin(self, rng):
        size, pitch, k = 32, 0.1, 5
        x = np.arange(size)
        patches = [np.tile(np.cos(2 * np.pi * k * x / size + ph), (size, 1)) for ph in rng.uniform(0, 2 * np.pi, 16)]
        prof = nps_radial(patches, pitch)
        peak = prof.frequencies[np.argmax(prof.values)]
        assert peak == pytest.approx(k / (size * pitch))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-1e3, 1e3))
    def test_constant_offset_invariance(self, offset):
        patches = np.random.default_rng(1).normal(size=(10, 16, 16))
        a = nps_2d(patches, 0.1)
        b = nps_2d(patches + offset, 0.1)
        np.testing.assert_allclose(b, a, rtol=1e-6, atol=1e-9)

    def test_errors(self, rng):
        with pytest.raises(DataError):
            nps_2d([np.zeros((4, 4))] * 7, 1.0)
        with pytest.raises(DataError):
            nps_2d([np.zeros((4, 4))] * 8 + [np.zeros((4, 5))], 1.0)


class TestMtf:
    def test_gaussian_crossings(self):
        pitch, sigma_px = 0.02, 2.0
        res = mtf_from_psf(gaussian_psf(64, sigma_px), pitch)
        sigma = sigma_px * pitch
        for lvl, f in res.crossings.items():
            analytic = math.sqrt(-math.log(lvl) / (2 * math.pi ** 2 * sigma ** 2))
            assert f == pytest.approx(analytic, rel=0.03)
        assert res.profile.values[0] == 1.0
        f = [res.crossings[k] for k in (0.5, 0.1, 0.04)]
        assert f[0] < f[1] < f[2]

    def test_impulse(self):
        psf = np.zeros((64, 64))
        psf[32, 32] = 1.0
        res = mtf_from_psf(psf, 0.02)
        np.testing.assert_allclose(res.profile.values, 1.0, atol=1e-12)
        assert all(v is None for v in res.crossings.values())
        assert res.nyquist == 25.0

    def test_no_signal(self):
        with pytest.raises(DataError, match="wire not found"):
            mtf_from_psf(np.zeros((16, 16)), 0.1)

    def test_from_wire_image(self):
        img = np.zeros((128, 128))
        img[40:104, 20:84] = gaussian_psf(64, 1.5)
        res = mtf_from_wire(Image(img, 0.05), (72, 52))
        direct = mtf_from_psf(gaussian_psf(64, 1.5), 0.05)
        assert res.crossings == direct.crossings

    def test_patch_bounds(self):
        with pytest.raises(ConfigError):
            extract_patch(np.zeros((64, 64)), (10, 32))
