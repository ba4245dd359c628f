import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lowsig.errors import ConfigError
from lowsig.ft import FtConfig, ft_lsc
from lowsig.grid import SinogramGrid, Stage, WindowSpec


def line(values):
    return SinogramGrid(np.asarray(values, float).reshape(-1, 1, 1))


def test_passthrough_band(backend, rng):
    lam = rng.uniform(20, 1e4, (10, 5, 6))
    np.testing.assert_array_equal(ft_lsc(SinogramGrid(lam)).data, lam)


def test_boxcar_on_gated_cells(backend):
    cfg = FtConfig(lower_th=1.0, boxcar_window=WindowSpec(1, 1, 1))
    out = ft_lsc(line([0, 0, 9, 0, 0]), cfg).data.ravel()
    np.testing.assert_allclose(out, [1e-3, 3, 9, 3, 1e-3])


def test_constant_above_upper(backend):
    lam = np.full((6, 4, 5), 5e4)
    np.testing.assert_array_equal(ft_lsc(SinogramGrid(lam)).data, lam)


def test_median_branch(backend):
    lam = np.full((5, 1, 1), 2e4)
    lam[2] = 9e4
    out = ft_lsc(SinogramGrid(lam)).data.ravel()
    np.testing.assert_array_equal(out, 2e4)


def test_median_even_window_averages_middle(backend):
    out = ft_lsc(line([2e4, 4e4]), FtConfig(median_window=WindowSpec(1, 0, 0))).data.ravel()
    np.testing.assert_array_equal(out, [3e4, 3e4])


def test_upper_branch_can_be_disabled(backend):
    lam = line([2e4, 9e4, 2e4])
    out = ft_lsc(lam, FtConfig(use_upper=False)).data
    np.testing.assert_array_equal(out, lam.data)


def test_reads_original_grid(backend):
    # cascading updates would let the second cell see the first cell's new value
    cfg = FtConfig(lower_th=5.0, boxcar_window=WindowSpec(1, 0, 0))
    out = ft_lsc(line([0, 0, 30]), cfg).data.ravel()
    np.testing.assert_allclose(out, [1e-3, 10.0, 30.0])


def test_output_positive(backend, rng):
    lam = rng.normal(0, 5, (10, 4, 6))
    assert (ft_lsc(SinogramGrid(lam)).data >= 1e-3).all()


def test_config():
    with pytest.raises(ConfigError):
        FtConfig(lower_th=10, upper_th=5)
    cfg = FtConfig.from_dict({"ft_lower_th": 5, "ft_boxcar_window": [3, 3, 1]})
    assert cfg.lower_th == 5 and cfg.boxcar_window.half_widths == (1, 1, 0)
    assert FtConfig.from_dict(cfg.to_dict()) == cfg


def test_rejects_wrong_stage():
    with pytest.raises(ValueError):
        ft_lsc(SinogramGrid(np.ones((2, 2, 2)), Stage.VST))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (7, 3, 4), elements=st.floats(-50, 3e4)))
def test_gated_cells_bounded_by_window(lam):
    cfg = FtConfig()
    out = ft_lsc(SinogramGrid(lam), cfg).data
    mid = (lam >= cfg.lower_th) & (lam <= cfg.upper_th)
    np.testing.assert_array_equal(out[mid], lam[mid])
    hc, hr, hv = 3, 2, 1
    for c, r, v in zip(*np.nonzero(lam < cfg.lower_th)):
        block = lam[max(c - hc, 0):c + hc + 1, max(r - hr, 0):r + hr + 1, max(v - hv, 0):v + hv + 1]
        assert max(block.min(), 1e-3) - 1e-9 <= out[c, r, v] <= max(block.max(), 1e-3) + 1e-9
    for c, r, v in zip(*np.nonzero(lam > cfg.upper_th)):
        block = lam[max(c - 1, 0):c + 2, max(r - 1, 0):r + 2, max(v - 1, 0):v + 2]
        assert block.min() <= out[c, r, v] <= block.max()
