import numpy as np
import pytest

import reference_kf
from coopfilter.judgment import detect_cue_onset
from coopfilter.kalman import (
    FilterError,
    StateEstimate,
    filter_trial,
    initial_estimate,
    predict,
    update,
)
from coopfilter.model import CueSample, ModelParams, TransitionMatrices, assemble_transition
from coopfilter.simulator import CueTrace, TrialRecord, TrialSpec, simulate_trial
from coopfilter.trial_io import read_trial


def paper_scale_params():
    return ModelParams(lambda1=4.0, k1=9.0, k2=0.01, k3=0.05, k4=0.2, dt=0.01, q_x=1e-3, q_eta=1e-3, q_xi=1e-4, r=1e-6)


def assert_healthy(cov):
    assert np.max(np.abs(cov - cov.T)) <= 1e-12 * np.max(np.abs(cov))
    assert np.linalg.eigvalsh(cov).min() >= -1e-9 * np.trace(cov)


def quiet_trial(n, dt=0.01, y=None, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.normal(0, 1e-3, n) if y is None else y
    return TrialRecord(None, CueTrace(np.arange(n) * dt, np.zeros(n), np.zeros(n)), y, requested_xi=0)


def test_predict_identity_dynamics():
    est = StateEstimate([0.1, -0.2, 0.3, 0.4], np.diag([1.0, 2.0, 3.0, 4.0]) + 0.1)
    mats = TransitionMatrices(np.eye(4), np.zeros(4), np.array([[1.0, 0, 0, 0]]), np.zeros((4, 4)))
    out = predict(est, mats, 5.0)
    np.testing.assert_array_equal(out.mean, est.mean)
    np.testing.assert_array_equal(out.cov, est.cov)


def test_predict_zero_cue_keeps_xi_block_isolated(params):
    rng = np.random.default_rng(1)
    m = rng.normal(size=(3, 3))
    cov = np.zeros((4, 4))
    cov[:3, :3] = m @ m.T
    cov[3, 3] = 0.7
    mats = assemble_transition(params, CueSample(0, 0))
    out = predict(StateEstimate(np.zeros(4), cov), mats, 0.0)
    # dense reference evaluation with plain lists
    a, _, q = reference_kf.model_matrices(params.to_dict(), 0.0, 0.0)
    ref = reference_kf.add(reference_kf.matmul(reference_kf.matmul(a, cov.tolist()), reference_kf.transpose(a)), q)
    np.testing.assert_allclose(out.cov, ref, atol=1e-15)
    np.testing.assert_array_equal(out.cov[3, :3], 0.0)
    assert out.cov[3, 3] == pytest.approx(0.7 + params.dt * params.q_xi, abs=1e-15)


def test_predict_intent_moves_with_cooperativeness():
    p = paper_scale_params()
    est = StateEstimate([0, 0, 0, 1.0], np.eye(4))
    out = predict(est, assemble_transition(p, CueSample(20.0, 1)), 20.0)
    assert out.mean[2] == pytest.approx(0.012, abs=1e-15)


def test_predict_flags_non_finite():
    est = StateEstimate([0, 0, 0, 0], np.eye(4))
    mats = TransitionMatrices(np.full((4, 4), np.inf), np.zeros(4), np.array([[1.0, 0, 0, 0]]), np.zeros((4, 4)))
    with pytest.raises(FilterError, match="tick 12"):
        predict(est, mats, 0.0, tick=12)


def test_update_zero_innovation():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(4, 4))
    prior = StateEstimate(rng.normal(size=4), m @ m.T + np.eye(4))
    post, z, s = update(prior, float(prior.mean[0]), np.array([1.0, 0, 0, 0]), 0.5)
    assert z == 0.0
    np.testing.assert_array_equal(post.mean, prior.mean)
    assert post.cov[0, 0] < prior.cov[0, 0]


def test_update_without_cross_covariance_leaves_xi():
    cov = np.diag([0.2, 0.1, 0.3, 1.0])
    cov[0, 1] = cov[1, 0] = 0.05
    prior = StateEstimate([0.0, 0.0, 0.0, 0.25], cov)
    post, _, _ = update(prior, 0.4, np.array([1.0, 0, 0, 0]), 1e-3)
    assert post.mean[3] == 0.25
    assert post.cov[3, 3] == 1.0


@pytest.mark.parametrize("joseph", [True, False])
def test_scalar_closed_form(joseph):
    prior = StateEstimate([0, 0, 0, 0], np.diag([1.0, 0, 0, 0]))
    post, z, s = update(prior, 2.0, np.array([1.0, 0, 0, 0]), 1.0, joseph=joseph)
    assert s == 2.0 and z == 2.0
    assert post.cov[0, 0] == pytest.approx(0.5)
    assert post.mean[0] == pytest.approx(1.0)  # gain 0.5 times innovation 2


def test_update_rejects_degenerate_innovation():
    prior = StateEstimate([0, 0, 0, 0], np.zeros((4, 4)))
    with pytest.raises(FilterError, match="innovation variance"):
        update(prior, 1.0, np.array([1.0, 0, 0, 0]), 0.0)


def test_joseph_and_simple_forms_agree(params):
    rec = simulate_trial(TrialSpec(1, "hard", "forward", 2, 3.0, seed=4), params)
    a = filter_trial(rec, params, joseph=True)
    b = filter_trial(rec, params, joseph=False)
    np.testing.assert_allclose(a.means, b.means, atol=1e-8)
    np.testing.assert_allclose(a.covs, b.covs, atol=1e-10)


def test_trace_lengths_match_measurements(params):
    rec = simulate_trial(TrialSpec(-1, "soft", "back", -2, 2.0, seed=9), params)
    tr = filter_trial(rec, params)
    assert len(tr) == len(tr.innovations) == len(tr.innovation_vars) == len(tr.estimates) == len(rec.measurements)


@pytest.mark.parametrize("spec", [TrialSpec(1, "hard", "forward", 0, 5.0, seed=1), TrialSpec(-1, "soft", "back", 3, 5.0, seed=2)])
def test_covariance_healthy_every_tick(params, spec):
    tr = filter_trial(simulate_trial(spec, params), params)
    for cov in tr.covs:
        assert_healthy(cov)


def test_zero_cue_xi_unobservable(params):
    tr = filter_trial(quiet_trial(500), params)
    assert np.all(tr.xi == 0.0)
    np.testing.assert_array_equal(tr.covs[:, 3, :3], 0.0)
    np.testing.assert_allclose(tr.covs[:, 3, 3], 1.0 + params.dt * params.q_xi * np.arange(1, 501), rtol=1e-12)


def test_matches_reference_filter(params):
    rec = simulate_trial(TrialSpec(1, "soft", "forward", -1, 1.0, seed=5), params)
    init = initial_estimate(rec.measurements[0])
    tr = filter_trial(rec, params, init)
    ref = reference_kf.run(params.to_dict(), rec.cues.c_p, rec.cues.c_v, rec.measurements, init.mean, init.cov)
    for t, (m, p) in enumerate(ref):
        np.testing.assert_allclose(tr.means[t], m, rtol=0, atol=1e-9)
        np.testing.assert_allclose(tr.covs[t], p, rtol=0, atol=1e-9)


def test_initial_estimate_layout():
    est = initial_estimate(0.03)
    np.testing.assert_array_equal(est.mean, [0.03, 0.0, 0.03, 0.0])
    np.testing.assert_array_equal(np.diag(est.cov), [1e-4, 1e-2, 1e-2, 1.0])


def test_length_mismatch_rejected(params):
    rec = quiet_trial(10)
    short = TrialRecord.__new__(TrialRecord)
    object.__setattr__(short, "cues", rec.cues)
    object.__setattr__(short, "measurements", rec.measurements[:5])
    with pytest.raises(FilterError, match="cue samples"):
        filter_trial(short, params)


def test_non_uniform_time_rejected(params):
    t = np.arange(20) * 0.01
    t[7] += 5e-6
    rec = TrialRecord(None, CueTrace(t, np.zeros(20), np.zeros(20)), np.zeros(20))
    with pytest.raises(FilterError, match="not uniform"):
        filter_trial(rec, params)


def test_small_jitter_accepted(params):
    t = np.arange(20) * 0.01
    t[7] += 5e-7
    rec = TrialRecord(None, CueTrace(t, np.zeros(20), np.zeros(20)), np.zeros(20))
    assert len(filter_trial(rec, params)) == 20


def test_filtering_needs_positive_r(params):
    with pytest.raises(FilterError, match="r must be > 0"):
        filter_trial(quiet_trial(5), params.replace(r=0.0))


def test_cooperative_push_detected_in_monte_carlo(params):
    """xi-hat crosses 0.3 before onset + 0.75 s in at least 90% of 500 seeded runs."""
    hits = 0
    for seed in range(500):
        rec = simulate_trial(TrialSpec(1, "hard", "none", 0, 1.3, seed=seed), params)
        tr = filter_trial(rec, params)
        onset = detect_cue_onset(rec.cues)
        window = rec.times < onset + 0.75 - 1e-9
        hits += bool(np.any(tr.xi[window] > 0.3))
    assert hits / 500 >= 0.90


def eta_pulse_shape(times, eta_hat, push_start, push_end, verbal_t):
    """Return (first peak, trough after it, sustained level) of the intent estimate."""
    in_push = (times >= push_start) & (times <= push_end + 0.2)
    peak_i = np.flatnonzero(in_push)[np.argmax(eta_hat[in_push])]
    between = (times > times[peak_i]) & (times < verbal_t)
    trough = eta_hat[between].min()
    sustained = np.median(eta_hat[times >= verbal_t + 1.0])
    return eta_hat[peak_i], trough, sustained


def test_two_pulse_intent_estimate_on_compliant_subject(params, fixtures_dir):
    """Push attributed to intent (large, brief) then the commanded lean (smaller, sustained)."""
    rec = read_trial(fixtures_dir / "compliant_push_then_verbal.csv")
    tr = filter_trial(rec, params)
    on_push = rec.times[np.flatnonzero(rec.cues.c_p)]
    verbal_t = rec.times[np.flatnonzero(rec.cues.c_v)[0]]
    peak, trough, sustained = eta_pulse_shape(rec.times, tr.eta, on_push[0], on_push[-1], verbal_t)
    assert sustained > 0.1
    assert peak > 1.3 * sustained
    assert trough < 0.6 * sustained
