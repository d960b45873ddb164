import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmimo_isac.config import SPEED_OF_LIGHT, SignalModel
from dmimo_isac.deployment import Deployment
from dmimo_isac.positioning import SingularInformationError, fim, gdop, peb

RATIO = 6e6 / (np.sqrt(12) * 28e9)


def _deployment(seed, k, side=100.0):
    r = np.random.default_rng(seed)
    return Deployment(r.uniform(0, side, (k, 2)), r.uniform(0.1 * side, 0.9 * side, (1, 2)), side)




@st.composite
def deployments(draw, min_aps=3, max_aps=12):
    k = draw(st.integers(min_aps, max_aps))
    seed = draw(st.integers(0, 2**32))
    dep = _deployment(seed, k)
    u = dep.ap_positions - dep.ue_positions[0]
    d = np.linalg.norm(u, axis=1)
    u = u / d[:, None]
    if d.min() < 0.5 or np.linalg.cond(u.T @ u) > 1e6:
        dep = _deployment(seed + 1, k)
    return dep


def test_hand_computed_two_ap_bound():
    model = SignalModel(28e9, 6e6, ref_snr_db=30.0)
    # APs due east (10 m) and due north (20 m) of the UE
    dep = Deployment([[10.0, 0.0], [0.0, 20.0]], [[0.0, 0.0]])
    beta2 = 6e6**2 / 12
    w1 = 8 * np.pi**2 * beta2 * 1e3 / 10**2 / SPEED_OF_LIGHT**2
    w2 = 8 * np.pi**2 * beta2 * 1e3 / 20**2 / SPEED_OF_LIGHT**2
    info = fim(dep, 0, model, "delay")
    np.testing.assert_allclose(info.J, np.diag([w1, w2]), rtol=1e-13)
    assert peb(info).peb_m == pytest.approx(np.sqrt(1 / w1 + 1 / w2), rel=1e-13)


@given(deployments())
def test_ratio_law(dep):
    model = SignalModel(28e9, 6e6, ref_snr_db=40.0)
    r = peb(fim(dep, 0, model, "phase")).peb_m / peb(fim(dep, 0, model, "delay")).peb_m
    assert abs(r / RATIO - 1) < 1e-9


@given(deployments(), st.sampled_from(["delay", "phase"]))
def test_symmetric_psd_and_additive(dep, mode):
    model = SignalModel(28e9, 6e6)
    info = fim(dep, 0, model, mode)
    np.testing.assert_array_equal(info.J, info.J.T)
    assert np.linalg.eigvalsh(info.J).min() >= 0
    total = sum(fim(dep.subset([k]), 0, model, mode).J for k in range(dep.num_aps))
    np.testing.assert_allclose(info.J, total, rtol=1e-12)
    np.testing.assert_allclose(info.contributions().sum(0), info.J, rtol=1e-12)


@given(deployments(min_aps=4), st.sampled_from(["delay", "phase"]))
def test_nested_monotonicity(dep, mode):
    model = SignalModel(28e9, 6e6)
    bounds = []
    for k in range(3, dep.num_aps + 1):
        try:
            bounds.append(peb(fim(dep.subset(range(k)), 0, model, mode)).peb_m)
        except SingularInformationError:
            bounds.append(np.inf)
    assert all(b2 <= b1 * (1 + 1e-12) for b1, b2 in zip(bounds, bounds[1:]))


@given(deployments(), st.floats(0, 2 * np.pi))
def test_rotation_equivariance(dep, angle):
    model = SignalModel(28e9, 6e6)
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    ue = dep.ue_positions[0]
    rot = Deployment((dep.ap_positions - ue) @ R.T + ue, dep.ue_positions)
    for mode in ("delay", "phase"):
        a = peb(fim(dep, 0, model, mode)).peb_m
        b = peb(fim(rot, 0, model, mode)).peb_m
        assert b == pytest.approx(a, rel=1e-9)
    assert gdop(rot) == pytest.approx(gdop(dep), rel=1e-9)


def test_gdop_square_corners():
    dep = Deployment([[0, 0], [20, 0], [20, 20], [0, 20]], [[10, 10]])
    assert abs(gdop(dep) - 1.0) < 1e-12


def test_gdop_is_peb_over_common_sigma():
    # equal distances give equal SNRs, so PEB = sigma_range * GDOP
    ang = np.array([0.1, 1.9, 3.0, 4.4])
    dep = Deployment(np.c_[10 * np.cos(ang), 10 * np.sin(ang)], [[0.0, 0.0]])
    model = SignalModel(28e9, 6e6, ref_snr_db=40.0)
    info = fim(dep, 0, model, "delay")
    sigma_range = 1 / np.sqrt(info.weights[0])
    assert peb(info).peb_m == pytest.approx(sigma_range * gdop(dep), rel=1e-12)


def test_singular_geometries():
    model = SignalModel(28e9, 6e6)
    one = Deployment([[0.0, 0.0]], [[5.0, 5.0]])
    with pytest.raises(SingularInformationError):
        peb(fim(one, 0, model, "delay"))
    collinear = Deployment([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]], [[5.0, 0.0]])
    with pytest.raises(SingularInformationError):
        gdop(collinear)


def test_unknown_mode():
    dep = Deployment([[0.0, 0.0], [9.0, 1.0]], [[5.0, 5.0]])
    with pytest.raises(ValueError):
        fim(dep, 0, SignalModel(28e9, 6e6), "tdoa")
