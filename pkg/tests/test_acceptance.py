"""Acceptance criteria, each run at its stated tolerance and runtime budget."""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from lowsig import experiments, kernels
from lowsig.af import VST_MIN, AdaptiveParams, bilateral_filter, vst_forward, vst_inverse
from lowsig.grid import SinogramGrid, Stage, WindowSpec
from lowsig.metrics import mtf_from_psf, nps_2d, nps_integral, nps_radial

GOLDEN = Path(__file__).parent / "golden" / "streak_summary.json"


def counts(values):
    return SinogramGrid(np.asarray(values, float).reshape(-1, 1, 1), Stage.COUNTS)


def spatial_oracle(x, sigma_d, h):
    """Direct double sum with exponential spatial weights only."""
    C, R, V = x.shape
    out = np.empty_like(x)
    for c in range(C):
        c0, c1 = max(0, c - h[0]), min(C, c + h[0] + 1)
        for r in range(R):
            r0, r1 = max(0, r - h[1]), min(R, r + h[1] + 1)
            for v in range(V):
                v0, v1 = max(0, v - h[2]), min(V, v + h[2] + 1)
                dc, dr, dv = np.meshgrid(np.arange(c0, c1) - c, np.arange(r0, r1) - r, np.arange(v0, v1) - v,
                                         indexing="ij")
                w = np.exp(-np.sqrt(dc * dc + dr * dr + dv * dv) / sigma_d[c, r, v])
                out[c, r, v] = math.fsum((w * x[c0:c1, r0:r1, v0:v1]).ravel()) / math.fsum(w.ravel())
    return out


@pytest.fixture(scope="module")
def streak():
    t = time.perf_counter()
    summary, _, profiles = experiments.run_streak(seed=42)
    return summary, profiles, time.perf_counter() - t


def test_c1_vst_stabilises_variance(verdict):
    rng = np.random.default_rng(1)
    t = time.perf_counter()
    stds = {lam: float(vst_forward(counts(rng.poisson(lam, 100_000))).data.std(ddof=1)) for lam in (5, 10, 100, 1000)}
    dt = time.perf_counter() - t
    ok = all(0.90 <= s <= 1.10 for s in stds.values()) and dt < 5
    detail = ", ".join(f"std@{k}={v:.4f}" for k, v in stds.items())
    assert verdict("C1 VST stabilisation", ok, f"{detail} (in [0.90, 1.10]); {dt:.2f}s < 5s")


def test_c2_unbiased_inverse(verdict):
    rng = np.random.default_rng(2)
    t = time.perf_counter()
    errs = {}
    for lam in (5, 20, 100):
        mean_vst = vst_forward(counts(rng.poisson(lam, 1_000_000))).data.mean()
        errs[lam] = abs(vst_inverse(SinogramGrid(np.full((1, 1, 1), mean_vst), Stage.VST)).data.item() - lam) / lam
    at_min = vst_inverse(SinogramGrid(np.full((1, 1, 1), VST_MIN), Stage.VST)).data.item()
    dt = time.perf_counter() - t
    ok = all(e <= 0.02 for e in errs.values()) and abs(at_min) <= 1e-12 and dt < 30
    detail = ", ".join(f"rel@{k}={v:.2e}" for k, v in errs.items())
    assert verdict("C2 unbiased inverse", ok, f"{detail} (<= 2%); inverse(2*sqrt(3/8))={at_min:.1e}; {dt:.2f}s < 30s")


@pytest.mark.parametrize("name", sorted(kernels.BACKENDS))
def test_c3_bilateral_oracle(verdict, monkeypatch, name):
    monkeypatch.setattr(kernels, "_impl", kernels.get_backend(name))
    rng = np.random.default_rng(3)
    x = rng.normal(20.0, 4.0, (64, 16, 8))
    sd = rng.uniform(0.3, 12.0, x.shape)
    grid = SinogramGrid(x, Stage.VST)
    t = time.perf_counter()
    out = bilateral_filter(grid, AdaptiveParams(sd, np.full(x.shape, np.inf)), WindowSpec(6, 3, 1)).data
    ident = bilateral_filter(grid, AdaptiveParams(sd, np.ones(x.shape)), WindowSpec(0, 0, 0)).data
    dt = time.perf_counter() - t
    rel = float(np.max(np.abs(out - spatial_oracle(x, sd, (6, 3, 1))) / np.abs(out)))
    exact = bool(np.array_equal(ident, x))
    ok = rel <= 1e-9 and exact and dt < 10
    assert verdict(f"C3 bilateral oracle [{name}]", ok,
                   f"max rel diff {rel:.1e} (<= 1e-9); identity window bit-exact={exact}; {dt:.2f}s < 10s")


def test_c4_streak_and_bias(verdict, streak):
    summary, _, dt = streak
    golden = json.loads(GOLDEN.read_text())["streak"]
    red = summary["std_reduction_af_vs_none"]
    bias = summary["abs_bias"]
    matches = summary["nps_patches"] == golden["nps_patches"] and all(
        math.isclose(summary[k][m][q], golden[k][m][q], rel_tol=1e-6)
        for k in ("roi",) for m in golden[k] for q in ("mean", "std")
    ) and all(math.isclose(summary["abs_bias"][m], golden["abs_bias"][m], rel_tol=1e-6) for m in golden["abs_bias"])
    ok = red >= 0.30 and bias["af"] <= bias["none"] and matches and dt < 300
    assert verdict("C4 streak/bias reduction", ok,
                   f"AF std reduction {red:.1%} (>= 30%); |bias| AF {bias['af']:.4f} <= none {bias['none']:.4f}; "
                   f"golden match={matches}; {dt:.1f}s < 300s")


def test_c5_high_signal_passthrough(verdict):
    t = time.perf_counter()
    summary, _ = experiments.run_high_signal(seed=42)
    dt = time.perf_counter() - t
    rel = summary["rms_rel_diff_af_vs_none"]
    ok = rel <= 0.01 and dt < 300
    assert verdict("C5 high-signal passthrough", ok, f"RMS rel diff {rel:.2e} (<= 1%); {dt:.1f}s < 300s")


def test_c6_wire_mtf_report(verdict):
    summary, _, _ = experiments.run_wire(seed=42)
    cr = summary["crossings"]
    exist = all(cr[m][k] is not None for m in ("ft", "af") for k in ("50", "10", "4"))
    detail = "; ".join(
        f"{m.upper()} " + "/".join(f"{cr[m][k]:.2f}" if cr[m][k] is not None else "n/a" for k in ("50", "10", "4"))
        for m in ("none", "ft", "af")
    )
    order = ", ".join(f"AF>=FT@{k}%={v}" for k, v in summary["af_ge_ft"].items())
    assert verdict("C6 wire MTF (ordering reported, not asserted)", exist,
                   f"crossings 1/cm {detail}; {order}; reference FT 1.61/5.32/7.37, AF 2.14/6.29/8.27")


def test_c7_nps_ordering(verdict, streak):
    summary, profiles, dt = streak
    nps = summary["nps_integral"]
    have = set(profiles) == {"none", "ft", "af"} and summary["nps_patches"] == 32
    ok = have and nps["af"] <= nps["ft"] <= nps["none"] and dt < 300
    assert verdict("C7 NPS ordering", ok,
                   f"integral AF {nps['af']:.3e} <= FT {nps['ft']:.3e} <= none {nps['none']:.3e}; "
                   f"32 patches, radial profiles for 3 methods={have}")


def test_c8_metric_self_tests(verdict):
    pitch, sigma_px = 0.02, 2.0
    c = 31.5
    yy, xx = np.mgrid[:64, :64]
    psf = np.exp(-((yy - c) ** 2 + (xx - c) ** 2) / (2 * sigma_px ** 2))
    res = mtf_from_psf(psf, pitch)
    sigma = sigma_px * pitch
    errs = {lvl: abs(f / math.sqrt(-math.log(lvl) / (2 * math.pi ** 2 * sigma ** 2)) - 1) for lvl, f in res.crossings.items()}
    patches = np.random.default_rng(8).normal(size=(64, 64, 64))
    integral = nps_integral(nps_2d(patches, 0.05), 0.05)
    var = patches.var(ddof=1)
    nps_radial(patches, 0.05)
    ok = all(e <= 0.03 for e in errs.values()) and abs(integral / var - 1) <= 0.10
    detail = ", ".join(f"{lvl:.0%}: {e:.2%}" for lvl, e in errs.items())
    assert verdict("C8 metric self-tests", ok,
                   f"Gaussian MTF crossing errors {detail} (<= 3%); NPS integral {integral:.4f} vs variance {var:.4f}")
