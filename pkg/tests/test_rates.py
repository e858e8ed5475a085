import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oscbound.rates import (
    CSV_HEADER,
    SpanError,
    SweepConfig,
    SweepTable,
    fit_rate,
    judge,
    resolve_mesh_size,
    run_sweep,
    select_points,
)

HKS = (0.5, 0.25, 0.125, 0.0625)


def small_config(**kw):
    base = dict(degrees=(0, 1), k_values=(8.0,), hk_targets=(0.5, 0.25),
                seeds=2)
    base.update(kw)
    return SweepConfig(**base)


def test_resolve_mesh_size():
    assert resolve_mesh_size(8.0, 0.5) == 101
    assert resolve_mesh_size(40.0, 0.5) == 503
    assert resolve_mesh_size(0.1, 0.5) == 2
    # the realized hk tracks the target once n is large
    n = resolve_mesh_size(80.0, 0.25)
    assert abs(2.0 * math.pi * 80.0 / n - 0.25) < 0.001


def test_config_validation_and_normalization():
    cfg = small_config()
    assert cfg.degrees == (0, 1)
    assert cfg.eval_orders == (0,)
    with pytest.raises(ValueError):
        small_config(degrees=())
    with pytest.raises(ValueError):
        small_config(xi_lo=0.8, xi_hi=0.5)
    with pytest.raises(ValueError):
        small_config(seeds=0)
    rt = SweepConfig(**cfg.to_dict())
    assert rt == cfg


def test_sweep_rows_sorted_and_errors_decrease():
    tab = run_sweep(small_config(), threads=2)
    assert not tab.failures
    keys = [(r.p, r.k, -r.hk, r.seed, r.eval) for r in tab.rows]
    assert keys == sorted(keys)
    for p in (0, 1):
        for seed in (0, 1):
            errs = [r.error for r in tab.rows
                    if r.p == p and r.seed == seed]
            assert len(errs) == 2
            assert errs[1] < errs[0]
    for r in tab.rows:
        assert_allclose(r.unorm, 1.0, rtol=1e-10)


def test_sweep_is_thread_deterministic():
    cfg = small_config()
    csv1 = run_sweep(cfg, threads=1).to_csv()
    csv4 = run_sweep(cfg, threads=4).to_csv()
    assert csv1 == csv4


def test_csv_round_trip():
    tab = run_sweep(small_config(), threads=2)
    text = tab.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = SweepTable.from_csv(text)
    assert back.rows == tab.rows


def test_hypothesis_violation_rows_marked():
    cfg = small_config(degrees=(1,), hk_targets=(1.5, 0.5),
                      lemma_checks=True)
    tab = run_sweep(cfg, threads=1)
    coarse = [r for r in tab.rows if r.hk >= 1.0]
    assert coarse and all(r.failed for r in coarse)
    assert any("hypothesis-violation" in msg for _, msg in tab.failures)
    fine = [r for r in tab.rows if r.hk < 1.0]
    assert fine and all(not r.failed for r in fine)
    # the violating rows never reach a fit
    pts = select_points(tab, 1, 0)
    assert len(pts) == len(fine)


def test_sweep_lemma_checks_record_identities():
    cfg = small_config(degrees=(1,), lemma_checks=True)
    tab = run_sweep(cfg, threads=1)
    assert len(tab.identities) == 4
    for _, rep, ratio in tab.identities:
        assert rep.rel_defect <= 1e-10
        assert ratio >= 0.5 ** 4


def test_bracket_rows_from_negative_eval():
    cfg = small_config(degrees=(1,), smoothness=1, ell=1,
                      eval_orders=(-1,), seeds=1)
    tab = run_sweep(cfg, threads=1)
    assert not tab.failures
    for r in tab.rows:
        assert r.flavor == "spectral_multiplier"
        assert r.bracket_lo is not None
        assert r.bracket_lo <= r.error <= r.bracket_hi
        assert r.bracket_width <= 0.05


def test_select_points_filters():
    tab = run_sweep(small_config(), threads=1)
    assert select_points(tab, 0, 0, k_min=40.0) == []
    assert select_points(tab, 1, 0, k_max=4.0) == []
    pts = select_points(tab, 1, 0)
    assert len(pts) == 4
    assert all(e > 0 for _, e in pts)


def test_fit_exact_power_laws():
    fit = fit_rate([(hk, hk ** 2) for hk in HKS], 2.0)
    assert_allclose(fit.slope, 2.0, atol=1e-12)
    assert_allclose([fit.c_min, fit.c_max], [1.0, 1.0], rtol=1e-12)
    fit4 = fit_rate([(hk, 3.0 * hk ** 4) for hk in HKS], 4.0)
    assert_allclose(fit4.slope, 4.0, atol=1e-12)
    assert_allclose([fit4.c_min, fit4.c_max], [3.0, 3.0], rtol=1e-12)


def test_fit_requires_wide_span():
    with pytest.raises(SpanError):
        fit_rate([(0.5, 0.25), (0.25, 0.0625)], 2.0)
    with pytest.raises(SpanError):
        fit_rate([(0.5, 0.25)], 2.0)


def test_judge_verdicts():
    fit = fit_rate([(hk, hk ** 2) for hk in HKS], 2.0)
    good = judge(fit, 2.0, 0.25, 10.0)
    assert good.passed and good.reasons == ()
    bad_slope = judge(fit_rate([(hk, hk ** 2) for hk in HKS], 3.0),
                      3.0, 0.25, 10.0)
    assert not bad_slope.passed
    assert any("slope" in r for r in bad_slope.reasons)
    # slope inside tolerance but the constant drifts past a tight ratio cap
    drift = [(0.5, 0.25), (0.25, 0.0625), (0.125, 1.3 * 0.015625),
             (0.0625, 1.3 * 0.00390625)]
    vd = judge(fit_rate(drift, 2.0), 2.0, 0.25, 1.2)
    assert not vd.passed
    assert any("constant" in r for r in vd.reasons)
