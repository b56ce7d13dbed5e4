import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldr_vms.engine import PAPER_PROFILES, SimConfig, run
from ldr_vms.history import StateHistory
from ldr_vms.vms import (DEFAULT_THRESHOLDS, ComplianceProfile, ConfigurationError, ConstantVms, GenuineVms,
                         LdrVms, LdrVmsPolicy, VmsMessage, choose_route, genuine_message, ldr_score, project)

M = VmsMessage
finite = st.floats(-1e6, 1e6, allow_nan=False)


def _history(vectors, ref=None):
    n = len(vectors[0])
    h = StateHistory(np.ones(n) if ref is None else np.asarray(ref), len(vectors))
    for v in reversed(vectors):  # push oldest first
        h.push(v)
    return h


def test_message_order_and_labels():
    assert [m.label for m in M] == ["Route1Strong", "Route1Moderate", "NoDisplay", "Route2Moderate", "Route2Strong"]
    assert M.from_label("NoDisplay") is M.NO_DISPLAY
    assert M.ROUTE1_STRONG.mirror() is M.ROUTE2_STRONG
    with pytest.raises(ValueError):
        M.from_label("Detour")


def test_zero_policy_scores_zero():
    h = _history([np.arange(24.0)])
    assert ldr_score(LdrVmsPolicy.zero(24), h) == 0.0


def test_coordinate_projection():
    a = np.zeros(24)
    a[0] = 1.0
    q = np.full(24, 0.9)
    q[0] = 0.4
    assert ldr_score(LdrVmsPolicy(a, 1), _history([q])) == pytest.approx(0.4)


def test_two_lag_score_matches_hand_dot_product():
    rng = np.random.default_rng(5)
    a = rng.normal(size=48)
    q1, q2 = rng.uniform(0, 30, 24), rng.uniform(0, 30, 24)
    ref = rng.uniform(5, 50, 24)
    expected = sum(a[i] * q1[i] / ref[i] for i in range(24)) + sum(a[24 + i] * q2[i] / ref[i] for i in range(24))
    assert ldr_score(LdrVmsPolicy(a, 2), _history([q1, q2], ref)) == pytest.approx(expected, rel=1e-12)


def test_missing_lags_are_zero_padded():
    a = np.ones(6)
    h = StateHistory(np.ones(3), 2)
    assert ldr_score(LdrVmsPolicy(a, 2), h) == 0.0
    h.push([1.0, 2.0, 3.0])
    assert ldr_score(LdrVmsPolicy(a, 2), h) == 6.0
    h.push([1.0, 1.0, 1.0])
    assert ldr_score(LdrVmsPolicy(a, 2), h) == 9.0
    assert list(h.raw(3)) == [0.0, 0.0, 0.0]


@given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=4, max_size=4),
       st.lists(finite, min_size=4, max_size=4), st.floats(-100, 100))
def test_score_is_linear(a, h1, h2, k):
    p = LdrVmsPolicy(np.array(a), 1)
    s1, s2, s12 = (ldr_score(p, _history([np.array(v)])) for v in (h1, h2, np.add(h1, h2)))
    assert s12 == pytest.approx(s1 + s2, rel=1e-9, abs=1e-6)
    pk = LdrVmsPolicy(k * np.array(a), 1)
    assert ldr_score(pk, _history([np.array(h1)])) == pytest.approx(k * s1, rel=1e-9, abs=1e-6)


@pytest.mark.parametrize("mu,expected", [
    (-2.0, M.ROUTE1_STRONG), (-1.0, M.ROUTE1_MODERATE), (-0.5, M.ROUTE1_MODERATE), (0.0, M.NO_DISPLAY),
    (0.5, M.NO_DISPLAY), (1.0, M.ROUTE2_MODERATE), (2.0, M.ROUTE2_MODERATE), (3.0, M.ROUTE2_STRONG),
])
def test_projection_bins(mu, expected):
    assert project(mu, DEFAULT_THRESHOLDS) is expected


@given(finite, finite)
def test_projection_monotone(mu1, mu2):
    lo, hi = sorted((mu1, mu2))
    assert project(lo, DEFAULT_THRESHOLDS) <= project(hi, DEFAULT_THRESHOLDS)


def test_policy_validation():
    with pytest.raises(ConfigurationError):
        LdrVmsPolicy(np.zeros(24), 1, (0.0, 0.0, 1.0, 2.0))
    with pytest.raises(ConfigurationError):
        LdrVmsPolicy(np.zeros(25), 2)
    with pytest.raises(ConfigurationError):
        LdrVmsPolicy(np.zeros(24), 0)


@pytest.mark.parametrize("d,expected", [
    (0, M.NO_DISPLAY), (50, M.ROUTE2_STRONG), (-15, M.ROUTE1_MODERATE), (10, M.NO_DISPLAY),
    (10.5, M.ROUTE2_MODERATE), (30, M.ROUTE2_MODERATE), (-30.5, M.ROUTE1_STRONG),
])
def test_genuine_display(d, expected):
    assert genuine_message(d, (10, 30)) is expected


@given(st.floats(-1e4, 1e4))
def test_genuine_display_is_mirror_symmetric(d):
    assert genuine_message(-d).mirror() is genuine_message(d)


def test_genuine_controller_reads_previous_route_volumes(haining):
    occ = np.zeros(24)
    occ[haining.link_index("1")] = 40
    occ[haining.link_index("4")] = 5
    h = StateHistory(np.array(haining.reference_occupancy()), 1)
    h.push(occ)
    assert GenuineVms(haining).decide(h) is M.ROUTE2_STRONG


def test_profile_binding_and_parse():
    prof = ComplianceProfile.parse((0.1, 0.3, 0.5, 0.7, 0.9))
    assert prof.share(M.ROUTE1_STRONG) == 0.9
    assert prof.share(M.NO_DISPLAY) == 0.5
    assert prof.share(M.ROUTE2_STRONG) == 0.1
    assert ComplianceProfile.parse((0.9, 0.7, 0.5, 0.3, 0.1)) == prof
    assert prof.tag() == "0.1,0.3,0.5,0.7,0.9"
    for bad in [(0.0, 0.3, 0.5, 0.7, 0.9), (0.1, 0.3, 0.5, 0.7, 1.0), (0.5, 0.3, 0.6, 0.7, 0.9), (0.1, 0.2)]:
        with pytest.raises(ValueError):
            ComplianceProfile.parse(bad)


@pytest.mark.parametrize("message,p", [(M.ROUTE1_STRONG, 0.9), (M.NO_DISPLAY, 0.5)])
def test_compliance_frequencies(message, p):
    prof = ComplianceProfile.parse(PAPER_PROFILES[2])
    rng = random.Random(2024)
    n = 100_000
    share = sum(choose_route(message, prof, rng) == 1 for _ in range(n)) / n
    assert abs(share - p) <= 0.01
    assert abs(share - p) <= 3 * math.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("profile", PAPER_PROFILES)
def test_compliance_within_three_standard_errors_for_every_message(profile):
    prof = ComplianceProfile.parse(profile)
    rng = random.Random(7)
    n = 20_000
    for msg in M:
        p = prof.share(msg)
        share = sum(choose_route(msg, prof, rng) == 1 for _ in range(n)) / n
        assert abs(share - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_near_deterministic_compliance():
    eps = 1e-9
    prof = ComplianceProfile((1 - eps,) * 5)
    rng = random.Random(1)
    assert all(choose_route(m, prof, rng) == 1 for m in M for _ in range(200))


def test_zero_ldr_equals_constant_no_display(bundle):
    cfg = bundle.config
    for day in bundle.train_days[:2]:
        a = run(bundle.network, day, LdrVms(LdrVmsPolicy.zero(24)), None, cfg)
        b = run(bundle.network, day, ConstantVms(M.NO_DISPLAY), None, cfg)
        assert a.travel_times.tobytes() == b.travel_times.tobytes()
        assert set(a.messages) == {M.NO_DISPLAY}


def test_ldr_controller_rejects_wrong_link_count(haining):
    with pytest.raises(ConfigurationError):
        LdrVms(LdrVmsPolicy.zero(6)).check(haining)
