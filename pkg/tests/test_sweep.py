import numpy as np
import pytest

from dmimo_isac.config import load_scenario
from dmimo_isac.deployment import generate_deployment
from dmimo_isac.positioning.sweep import ordering_sequence, peb_curve, rmse_sweep, validate_ordering


@pytest.fixture(scope="module")
def mmwave_positioning():
    return load_scenario("mmwave_positioning")


def test_peb_curve_rows(mmwave_positioning):
    rows = peb_curve(mmwave_positioning)
    assert len(rows) == 18
    by = {(r.num_aps, r.mode): r.value_m for r in rows}
    for k in range(4, 13):
        assert by[(k, "phase")] / by[(k, "delay")] == pytest.approx(6e6 / (np.sqrt(12) * 28e9), rel=1e-9)


def test_rmse_sweep_independent_of_jobs(mmwave_positioning):
    a = rmse_sweep(mmwave_positioning, "delay", ap_counts=[4, 6], trials=30, chunk=7)
    b = rmse_sweep(mmwave_positioning, "delay", ap_counts=[4, 6], trials=30, jobs=2, chunk=7)
    c = rmse_sweep(mmwave_positioning, "delay", ap_counts=[4, 6], trials=30, chunk=30)
    assert a.rows == b.rows == c.rows


def test_rmse_sweep_counts_failures_instead_of_raising(mmwave_positioning):
    curve = rmse_sweep(mmwave_positioning, "delay", ap_counts=[1], trials=3)
    assert curve.failures == {1: 3}
    assert np.isnan(curve.value(1, "delay", "rmse"))


def test_redraw_nested_reports_rms_bound(mmwave_positioning):
    cfg = mmwave_positioning.with_overrides(positioning=mmwave_positioning.positioning.__class__(geometry="redraw-nested"))
    curve = rmse_sweep(cfg, "delay", ap_counts=[6], trials=40)
    assert curve.failures[6] == 0
    assert 0.7 < curve.ratio(6, "delay") < 1.4


def test_orderings():
    cfg = load_scenario("ap_rollout")
    dep = generate_deployment(cfg)
    one = ordering_sequence(cfg, [0, 1, 2, 9, 8, 7, 6, 5, 4, 3])
    two = ordering_sequence(cfg, [0, 6, 3, 9, 4, 1, 7, 2, 8, 5], label=2)
    assert one[0].gdop == np.inf
    assert one[-1].gdop == pytest.approx(two[-1].gdop, rel=1e-12)
    assert [s.ap_added for s in one] == [0, 1, 2, 9, 8, 7, 6, 5, 4, 3]
    assert dep.num_aps == len(one)
    with pytest.raises(ValueError):
        validate_ordering([0, 1, 1], 3)
