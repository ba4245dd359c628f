import math

import numpy as np
import pytest

from lowsig.errors import ConfigError, DataError
from lowsig.grid import SinogramGrid, Stage
from lowsig.metrics import RoiSpec, roi_stats
from lowsig.recon import Image, fbp, neg_log, padded_length, ramp_response
from lowsig.simulator import Ellipse, Geometry, Phantom, forward_project

GEOM = Geometry(512, 0.0703125, rows=1, views=720, fov_radius=18.0)


@pytest.fixture(scope="module")
def disc_projection():
    return forward_project(Phantom((Ellipse((0.0, 0.0), (8.0, 8.0), 0.0, 0.2),)), GEOM)


class TestNegLog:
    def test_values(self):
        i0 = 1e4
        lam = SinogramGrid(np.array([i0, i0 / math.e, i0 * math.exp(-5)]).reshape(3, 1, 1))
        out = neg_log(lam, i0)
        assert out.stage is Stage.PROJECTION
        np.testing.assert_allclose(out.data.ravel(), [0, 1, 5], atol=1e-12)

    def test_nonpositive_names_cell(self):
        data = np.ones((3, 2, 2))
        data[1, 0, 1] = 0.0
        with pytest.raises(DataError, match=r"\(1, 0, 1\)"):
            neg_log(SinogramGrid(data), 10.0)

    def test_clamp(self):
        out = neg_log(SinogramGrid(np.array([-4.0]).reshape(1, 1, 1)), 1.0, clamp=1e-3)
        assert out.data.item() == pytest.approx(-math.log(1e-3))


class TestFilter:
    def test_padding(self):
        assert padded_length(512) == 1024
        assert padded_length(513) == 2048
        assert padded_length(3) == 64

    def test_ramp_shape(self):
        r = ramp_response(256)
        assert abs(r[0]) < 1e-3
        assert r[len(r) // 2] == pytest.approx(0.5, rel=0.01)
        assert ramp_response(256, "hann")[len(r) // 2] == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(ConfigError):
            ramp_response(256, "shepp")


class TestFbp:
    def test_disc_mean(self, disc_projection):
        img = fbp(disc_projection, GEOM, n=512)
        c = (img.n - 1) / 2
        mean, _ = roi_stats(img, RoiSpec((c, c), 20))
        assert mean == pytest.approx(0.2, rel=0.03)

    def test_zero(self):
        img = fbp(np.zeros((GEOM.channels, GEOM.views)), GEOM, n=32)
        np.testing.assert_array_equal(img.data, 0.0)

    def test_linear(self, disc_projection, rng):
        p = disc_projection.data[:, 0, :]
        q = rng.normal(size=p.shape)
        a, b = 2.5, -0.75
        lhs = fbp(a * p + b * q, GEOM, n=64).data
        rhs = a * fbp(p, GEOM, n=64).data + b * fbp(q, GEOM, n=64).data
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))
        np.testing.assert_array_equal(fbp(2 * p, GEOM, n=64).data, 2 * fbp(p, GEOM, n=64).data)

    def test_outside_fov_is_zero(self, disc_projection):
        img = fbp(disc_projection, GEOM, n=64, pitch=0.6)
        xs, ys = img.coords()
        out = xs[None, :] ** 2 + ys[:, None] ** 2 > 18.0 ** 2
        assert out.any()
        np.testing.assert_array_equal(img.data[out], 0.0)

    def test_zoom_matches_full(self, disc_projection):
        full = fbp(disc_projection, GEOM, n=512)
        zoom = fbp(disc_projection, GEOM, n=8, pitch=full.pitch, center=(4 * full.pitch, -2 * full.pitch))
        np.testing.assert_allclose(zoom.data, full.data[250:258, 256:264], rtol=1e-12)

    def test_backends_agree(self, disc_projection, monkeypatch):
        from lowsig import kernels
        if "cython" not in kernels.BACKENDS:
            pytest.skip("compiled backend not built")
        out = {}
        for name in ("cython", "python"):
            monkeypatch.setattr(kernels, "_impl", kernels.get_backend(name))
            out[name] = fbp(disc_projection, GEOM, n=96).data
        np.testing.assert_allclose(out["cython"], out["python"], rtol=1e-12, atol=1e-14)

    def test_errors(self, disc_projection):
        with pytest.raises(ConfigError):
            fbp(disc_projection, GEOM, row=1)
        with pytest.raises(ConfigError):
            fbp(np.zeros((10, 10)), GEOM)
        with pytest.raises(ValueError):
            fbp(SinogramGrid(np.ones((512, 1, 720))), GEOM)


def test_image_geometry():
    img = Image(np.zeros((5, 5)), 0.5, (1.0, -1.0))
    xs, ys = img.coords()
    np.testing.assert_allclose(xs, [0, 0.5, 1, 1.5, 2])
    assert img.pixel_of(1.0, -1.0) == (2.0, 2.0)
    with pytest.raises(ValueError):
        Image(np.zeros((2, 3)), 1.0)
