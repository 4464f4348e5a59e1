import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from coopfilter.model import (
    CueSample,
    ModelError,
    ModelParams,
    NoiseDraw,
    StateVector,
    assemble_transition,
    measure,
    step_truth,
)


def explicit_params(**kw):
    base = dict(lambda1=4.0, k1=9.0, k2=0.01, k3=0.05, k4=0.2, dt=0.01, q_x=1e-3, q_eta=1e-3, q_xi=1e-4, r=1e-6)
    base.update(kw)
    return ModelParams(**base)


def symbolic_transition():
    """Jacobian of the forward-Euler step w.r.t. the state and c_p, derived with sympy."""
    x, xd, eta, xi, cp, cv = sp.symbols("x xd eta xi c_p c_v")
    lam, k1, k2, k3, k4, dt = sp.symbols("lambda1 k1 k2 k3 k4 dt")
    nxt = sp.Matrix(
        [
            x + dt * xd,
            xd + dt * (-lam * xd + k1 * (eta - x) + k2 * cp),
            eta + dt * xi * (k3 * cp + k4 * cv),
            xi,
        ]
    )
    state = sp.Matrix([x, xd, eta, xi])
    # the eta row is bilinear in (xi, cue); A holds the xi coefficient, B the residual c_p term
    a = nxt.jacobian(state)
    b = sp.simplify(nxt - a * state).diff(cp)
    syms = dict(lambda1=lam, k1=k1, k2=k2, k3=k3, k4=k4, dt=dt, c_p=cp, c_v=cv)
    return a, b, syms


A_SYM, B_SYM, SYMS = symbolic_transition()


def eval_symbolic(params, cue):
    subs = {SYMS[k]: getattr(params, k) for k in ("lambda1", "k1", "k2", "k3", "k4", "dt")}
    subs[SYMS["c_p"]] = cue.c_p
    subs[SYMS["c_v"]] = cue.c_v
    a = np.array(A_SYM.subs(subs).evalf(), dtype=float)
    b = np.array(B_SYM.subs(subs).evalf(), dtype=float).reshape(-1)
    return a, b


def test_eta_xi_entry_hand_and_symbolic():
    p = explicit_params()
    cue = CueSample(20.0, 1)
    mats = assemble_transition(p, cue)
    assert mats.a[2, 3] == pytest.approx(0.012, abs=1e-15)
    a_sym, b_sym = eval_symbolic(p, cue)
    R = sp.Rational
    exact = A_SYM[2, 3].subs(
        {SYMS["dt"]: R(1, 100), SYMS["k3"]: R(5, 100), SYMS["k4"]: R(2, 10), SYMS["c_p"]: 20, SYMS["c_v"]: 1}
    )
    assert exact == R(12, 1000)
    np.testing.assert_allclose(mats.a, a_sym, atol=1e-15)
    np.testing.assert_allclose(mats.b, b_sym, atol=1e-15)


@pytest.mark.parametrize("cue", [CueSample(0, 0), CueSample(8.0, -1), CueSample(-3.5, 1), CueSample(20.0, 0)])
def test_transition_matches_symbolic_jacobian(cue):
    p = explicit_params(lambda1=2.5, k1=7.0, k2=0.03, k3=0.11, k4=1.7)
    a_sym, _ = eval_symbolic(p, cue)
    np.testing.assert_allclose(assemble_transition(p, cue).a, a_sym, atol=1e-15)


@pytest.mark.parametrize("cue", [CueSample(0, 0), CueSample(20, 1), CueSample(-8, -1)])
def test_measurement_row_is_position_only(params, cue):
    np.testing.assert_array_equal(assemble_transition(params, cue).h, [[1.0, 0.0, 0.0, 0.0]])


def test_zero_cue_decouples_xi(params):
    a = assemble_transition(params, CueSample(0.0, 0)).a
    np.testing.assert_array_equal(a[2], [0.0, 0.0, 1.0, 0.0])
    assert a[2, 3] == 0.0


def test_process_noise_layout(params):
    q = assemble_transition(params, CueSample()).q
    np.testing.assert_array_equal(q, np.diag([0.0, params.dt * params.q_x, params.dt * params.q_eta, params.dt * params.q_xi]))


def test_only_eta_row_depends_on_cue(params):
    a0 = assemble_transition(params, CueSample(0, 0)).a
    a1 = assemble_transition(params, CueSample(20, -1)).a
    diff = a0 != a1
    assert diff[2, 3] and diff.sum() == 1


def test_step_truth_equilibrium(params):
    for xi in (-1.0, 0.0, 1.0, 0.37):
        s = StateVector(0, 0, 0, xi)
        assert step_truth(s, CueSample(), params, NoiseDraw.zero()) == s


def test_uncooperative_intent_opposes_cue(params):
    s = step_truth(StateVector(0, 0, 0, -1), CueSample(0, 1), params, NoiseDraw.zero())
    assert s.eta < 0


def test_verbal_cue_intent_step_hand_value():
    s = step_truth(StateVector(0, 0, 0, 1), CueSample(0, 1), explicit_params(), NoiseDraw.zero())
    assert s.eta == pytest.approx(0.002, abs=1e-15)


def test_step_truth_adds_noise_at_its_rows(params):
    base = step_truth(StateVector(0.1, 0.2, 0.3, 0.5), CueSample(5, 1), params, NoiseDraw.zero())
    noisy = step_truth(StateVector(0.1, 0.2, 0.3, 0.5), CueSample(5, 1), params, NoiseDraw(0.01, -0.02, 0.03))
    np.testing.assert_allclose(noisy.as_array() - base.as_array(), [0.0, 0.01, -0.02, 0.03], atol=1e-15)


@pytest.mark.parametrize(
    "state, v, expected",
    [
        (StateVector(0.15, 0, 0, 0), 0.0, 0.15),
        (StateVector(0.1, 9, 9, 9), 0.0, 0.1),
        (StateVector(0.1, 0, 0, 0), -0.003, 0.097),
    ],
)
def test_measure(state, v, expected):
    assert measure(state, v) == pytest.approx(expected, abs=1e-15)


def test_non_finite_state_rejected():
    with pytest.raises(ModelError, match="eta"):
        StateVector(0.0, 0.0, math.nan, 1.0)


@pytest.mark.parametrize(
    "override, fragment",
    [
        ({"dt": 0.0}, "dt"),
        ({"dt": -0.01}, "dt"),
        ({"lambda1": -1.0}, "lambda1"),
        ({"k1": -0.1}, "k1"),
        ({"k2": -0.1}, "k2"),
        ({"r": -1e-6}, "r"),
        ({"q_xi": -1.0}, "q_xi"),
        ({"lambda1": 250.0}, "dt\\*lambda1"),
        ({"k1": 50000.0}, "dt\\^2\\*k1"),
        ({"k3": math.inf}, "k3"),
        ({"k4": "fast"}, "k4"),
    ],
)
def test_invalid_params_name_the_invariant(override, fragment):
    with pytest.raises(ModelError, match=fragment):
        explicit_params(**override)


@pytest.mark.parametrize("c_v", [2, 0.5, -3])
def test_cue_domain(c_v):
    with pytest.raises(ModelError, match="c_v"):
        CueSample(0.0, c_v)


def test_defaults_come_from_config_file(params):
    assert params.k1 == 9.0 and params.dt == 0.01 and params.r == 1e-6


finite = st.floats(-5, 5, allow_nan=False)
cues = st.builds(CueSample, st.floats(-30, 30, allow_nan=False), st.sampled_from([-1, 0, 1]))


@given(cue_seq=st.lists(cues, min_size=1, max_size=40))
def test_intent_is_odd_in_cooperativeness(cue_seq):
    params = ModelParams.default()
    pos = StateVector(0, 0, 0, 1)
    neg = StateVector(0, 0, 0, -1)
    for cue in cue_seq:
        pos = step_truth(pos, cue, params, NoiseDraw.zero())
        neg = step_truth(neg, cue, params, NoiseDraw.zero())
        assert pos.eta == -neg.eta


@settings(max_examples=200)
@given(x=finite, xd=finite, eta=finite, xi=finite, cue=cues)
def test_simulator_and_filter_model_agree(x, xd, eta, xi, cue):
    params = ModelParams.default()
    s = StateVector(x, xd, eta, xi)
    mats = assemble_transition(params, cue)
    expected = mats.a @ s.as_array() + mats.b * cue.c_p
    got = step_truth(s, cue, params, NoiseDraw.zero()).as_array()
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-13)
