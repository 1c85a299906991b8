import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from padr.reaction import (
    HypothesisError,
    Reaction,
    check_hypotheses,
    choose_constants,
    extreme_roots,
    lambda_min,
    step_bound,
)


def test_cubic_passes_hypotheses():
    rep = check_hypotheses("cubic")
    assert rep.ok and set(rep.checks) == {"H1", "H2", "H3"}
    df = Reaction.cubic().df
    assert (df(-1), df(0), df(1)) == (2.0, -1.0, 2.0)


def test_pure_cube_fails_h2():
    rep = check_hypotheses([0, 0, 0, 1])
    assert "H2" in rep.failures()
    with pytest.raises(HypothesisError) as err:
        rep.raise_if_failed()
    assert err.value.name == "H2"


def test_wrong_slopes_fail_h3():
    # -(u^3 - u): right zeros, wrong slope signs
    assert check_hypotheses([0, 1, 0, -1]).failures() == ["H3"]


def test_roots_of_g_at_six():
    rep = check_hypotheses("cubic", lam=6.0)
    assert rep.checks["H4"][0]
    um, up = extreme_roots("cubic", 6.0)
    assert up == pytest.approx(math.sqrt(5 / 6), abs=1e-14)
    assert um == pytest.approx(-math.sqrt(5 / 6), abs=1e-14)
    g = Polynomial([0, 1]) + 6.0 * Polynomial([0, -1, 0, 1])
    assert abs(g(up)) <= 1e-12 and abs(g(um)) <= 1e-12


@pytest.mark.parametrize("lam", [2.0, 10.0, 100.0, 1000.0])
def test_extreme_roots_closed_form(lam):
    _, up = extreme_roots("cubic", lam)
    assert up == pytest.approx(math.sqrt(1 - 1 / lam), abs=1e-13)


def test_extreme_roots_ladder_increases_to_one():
    ups = [extreme_roots("cubic", lam)[1] for lam in (10, 100, 1000)]
    assert ups == pytest.approx([0.9486832980505138, 0.99498743710662, 0.99949987493746], abs=1e-12)
    assert ups[0] < ups[1] < ups[2] < 1


def test_h4_fails_for_small_lambda():
    # lam <= 1: g = u + lam f is monotone with a single zero
    rep = check_hypotheses("cubic", lam=0.5)
    assert rep.failures() == ["H4"]
    with pytest.raises(HypothesisError, match="H4"):
        extreme_roots("cubic", 0.5)


def test_choose_constants():
    am, ap = choose_constants("cubic", 0.5)
    assert ap == pytest.approx(math.sqrt(0.5), abs=1e-12) and am == pytest.approx(-ap, abs=1e-12)
    am, ap = choose_constants("cubic", 0.5, round_to=0.05)
    assert (am, ap) == pytest.approx((-0.75, 0.75), abs=1e-12)
    with pytest.raises(ValueError):
        choose_constants("cubic", 2.5)
    _, ap = choose_constants("cubic", 1e-9)
    assert ap == pytest.approx(1 / math.sqrt(3), abs=1e-8)


def test_choose_constants_delta_two_rejected():
    # f' reaches 2 only at the endpoints, leaving no band of positive width
    with pytest.raises(ValueError):
        choose_constants("cubic", 2.0)


def test_lambda_min_examples():
    assert lambda_min("cubic", -0.75, 0.75) == pytest.approx(16 / 3, rel=1e-15)
    assert lambda_min("cubic", -0.8, 0.8) == pytest.approx(6.25, rel=1e-15)
    assert 1.75 + 6 * (0.75**3 - 0.75) == pytest.approx(-0.21875)
    with pytest.raises(ValueError):
        lambda_min("cubic", 0.75, -0.75)


@pytest.mark.parametrize("lam", [16 / 3, 6.0, 7.5, 40.0])
def test_lambda_min_guarantees_band_conditions(lam):
    rep = Reaction.cubic(lam=lam).conditions()
    assert rep.checks["C6"][0] and rep.checks["C7"][0]


def test_step_bound_examples():
    assert step_bound("cubic", 6.0, -0.75, 0.75) == pytest.approx(1 / 13, rel=1e-15)
    assert step_bound("cubic", 16 / 3, -0.75, 0.75) == pytest.approx(3 / 35, rel=1e-15)
    assert step_bound("cubic", 1e9, -0.75, 0.75) < 1e-9


def test_canonical_conditions():
    rx = Reaction.cubic()
    rep = rx.conditions(h=0.0625)
    assert rep.ok, rep.checks
    assert rx.h_max == pytest.approx(1 / 13)
    assert rx.conditions(h=0.07).checks["step"][0]  # 0.07 < 1/13
    assert not rx.conditions(h=0.08).ok


def test_lambda_two_fails_band_conditions():
    rep = Reaction.cubic(lam=2.0).conditions()
    assert {"C5", "C6", "C7"} <= set(rep.failures())
    assert "1.09375" in rep.checks["C6"][1]


def test_potential_normalization():
    rx = Reaction.cubic()
    assert np.allclose(rx.W.deriv().coef, rx.f.coef, atol=1e-15)
    assert rx.eval_W(1.0) == 0.0 and abs(rx.eval_W(-1.0)) <= 1e-15
    u = np.linspace(-1, 1, 101)
    assert np.allclose(rx.eval_W(u), (1 - u**2) ** 2 / 4, atol=1e-15)
    assert np.all(rx.eval_W(u[1:-1]) > 0)


def test_general_polynomial_reaction():
    # f = 2u^3 - 2u also satisfies the structural hypotheses
    rx = Reaction((0, -2, 0, 2), lam=6.0, alpha_minus=-0.75, alpha_plus=0.75)
    assert check_hypotheses(rx.f).ok
    assert rx.u_plus == pytest.approx(math.sqrt(1 - 1 / 12), abs=1e-13)
    assert rx.conditions().ok


@settings(max_examples=40, deadline=None)
@given(st.floats(1.5, 500.0))
def test_g_has_three_roots_above_lambda_min(lam):
    rep = check_hypotheses("cubic", lam=lam)
    assert rep.checks["H4"][0]
    um, up = extreme_roots("cubic", lam)
    assert -1 < um < 0 < up < 1


@settings(max_examples=30, deadline=None)
@given(st.floats(16 / 3, 200.0), st.floats(0.0, 1.0))
def test_band_map_is_increasing(lam, frac):
    rx = Reaction.cubic(lam=lam)
    h = frac * rx.h_max * 0.999 + 1e-6
    for lo, hi in ((-1.0, -0.75), (0.75, 1.0)):
        u = np.linspace(lo, hi, 257)
        # d/du [u - h (u + lam f(u))] > 0
        assert np.all(1 - h * (1 + lam * rx.eval_df(u)) > 0)
        assert np.all(np.diff(u - h * (u + lam * rx.eval_f(u))) > 0)


def test_reaction_validation():
    with pytest.raises(ValueError):
        Reaction(lam=-1.0)
    assert Reaction.cubic().to_dict()["lambda"] == 6.0
