import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chrflow.materials import (MaterialLaw, make_clipped_butler_volmer, make_law, make_quartic_affine,
                               phi_geodesic, quartic_well, surface_tension, validate)


def test_quartic_well_values():
    law = make_quartic_affine(0.1)
    assert law.f(0.5) == 1 / 16
    assert law.df(0.5) == 0.0
    assert law.f(0.0) == 0.0 and law.f(1.0) == 0.0


def test_affine_reaction_examples():
    law = make_quartic_affine(0.1, k=1.0, beta=1.0)
    assert law.R(1.0, 0.0) == 0.0
    assert law.R(0.0, 0.0) == 1.0
    assert law.R(0.5, 1.0) == pytest.approx(-0.5)
    assert law.G(0.5, 1.0) == pytest.approx(0.0, abs=1e-15)
    # G is the primitive of R in w (quadrature oracle)
    val = mp.quad(lambda w: float(law.R(0.5, float(w))), [0, 1])
    assert float(val) == pytest.approx(float(law.G(0.5, 1.0)), abs=1e-14)


@pytest.mark.parametrize("kw", [{"epsilon": 0.0}, {"epsilon": 0.1, "beta": 0.0}, {"epsilon": 0.1, "k": -1.0}])
def test_affine_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        make_quartic_affine(**kw)


def test_butler_volmer_zero_potential_and_monotone():
    law = make_clipped_butler_volmer(0.05, i0=1.0, alpha=0.5, w_max=4.0)
    s = np.linspace(-2, 3, 41)
    assert np.all(law.R(s, 0.0) == 0.0)
    w = np.linspace(-8.0, 8.0, 101)
    assert np.all(np.diff(law.R(0.5, w)) < 0)


def test_butler_volmer_value_high_precision():
    law = make_clipped_butler_volmer(0.05, i0=1.0, alpha=0.5, w_max=4.0)
    mp.mp.dps = 40
    exact = (mp.mpf("0.25") + mp.mpf("0.05")) * (mp.e ** mp.mpf("-0.05") - mp.e ** mp.mpf("0.05"))
    assert float(law.R(0.5, 0.1)) == pytest.approx(float(exact), rel=1e-14)
    assert float(exact) == pytest.approx(-0.0300125, abs=1e-7)


def test_butler_volmer_continuation_is_c1():
    law = make_clipped_butler_volmer(0.05, i0=1.3, alpha=0.3, w_max=2.0)
    for wm in (-2.0, 2.0):
        lo, hi = law.R(0.4, wm - 1e-7), law.R(0.4, wm + 1e-7)
        assert abs(hi - lo) < 1e-5
        dlo, dhi = law.dR_dw(0.4, wm - 1e-9), law.dR_dw(0.4, wm + 1e-9)
        assert dlo == pytest.approx(dhi, rel=1e-6)
    # linear growth beyond the clip
    assert abs(law.R(0.4, 1e4)) < 1e5


@pytest.mark.parametrize("kw", [{"i0": 0.0}, {"alpha": 0.0}, {"alpha": 1.0}, {"w_max": 0.0}])
def test_butler_volmer_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        make_clipped_butler_volmer(0.05, **kw)


def test_surface_tension_closed_forms():
    law = make_quartic_affine(0.1)
    assert surface_tension(law) == pytest.approx(math.sqrt(2) / 6, abs=1e-10)
    assert surface_tension(law.rescaled_well(4.0)) == pytest.approx(2 * math.sqrt(2) / 6, abs=1e-10)
    assert surface_tension(law.rescaled_well(2.0)) == pytest.approx(1 / 3, abs=1e-10)


def test_phi_geodesic_values():
    law = make_quartic_affine(0.1)
    assert phi_geodesic(law, 0.0) == 0.0
    assert phi_geodesic(law, 1.0) == pytest.approx(math.sqrt(2) / 6, abs=1e-8)
    assert phi_geodesic(law, 0.5) == pytest.approx(math.sqrt(2) / 12, abs=1e-10)
    vals = [phi_geodesic(law, s) for s in np.linspace(-1, 2, 13)]
    assert np.all(np.diff(vals) > 0)


def test_validate_quartic_affine_passes():
    law = make_quartic_affine(0.1, k=1.0, beta=1.0)
    rep = validate(law)
    assert rep.passed, rep.as_dict()
    names = [c.name for c in rep.checks]
    assert names == ["well_growth", "well_zeros", "primitive_consistency", "strict_monotonicity",
                     "linear_growth", "bounded_near_zero", "primitive_growth", "flux_coercivity",
                     "primitive_coercivity"]
    by = {c.name: c.constant for c in rep.checks}
    # strict monotonicity constant is exactly 1/beta; the bound near zero is k + beta
    assert by["strict_monotonicity"] == pytest.approx(1.0, rel=1e-6)
    assert by["bounded_near_zero"] <= 2.0 + 1e-9


@pytest.mark.parametrize("beta", [0.25, 4.0])
def test_validate_monotonicity_constant_tracks_beta(beta):
    rep = validate(make_quartic_affine(0.1, k=0.5, beta=beta))
    assert rep.passed
    c = {c.name: c.constant for c in rep.checks}["strict_monotonicity"]
    assert c == pytest.approx(1 / beta, rel=1e-6)


def test_validate_butler_volmer_passes():
    assert validate(make_clipped_butler_volmer(0.05)).passed


def _custom(f, df, d2f, R, dR, G):
    return MaterialLaw(f, df, d2f, R, dR, G, 0.1, "custom")


def test_validate_flags_increasing_reaction():
    f, df, d2f = quartic_well()
    law = _custom(f, df, d2f, lambda s, w: np.asarray(w, float) + 0 * np.asarray(s, float),
                  lambda s, w: np.ones(np.broadcast(np.asarray(s), np.asarray(w)).shape),
                  lambda s, w: 0.5 * np.asarray(w, float) ** 2 + 0 * np.asarray(s, float))
    rep = validate(law)
    assert not rep.passed
    assert rep.first_failure == "strict_monotonicity"
    w1, w2 = rep.checks[-1].witness[1:3] if len(rep.checks[-1].witness) > 2 else (None, None)
    if w1 is not None:
        assert (w2 - w1) ** 2 > 0  # positive product witness: (R(w2) - R(w1))(w2 - w1) = (w2 - w1)^2


def test_validate_flags_single_well():
    base = make_quartic_affine(0.1)
    law = _custom(lambda s: np.asarray(s, float) ** 2, lambda s: 2 * np.asarray(s, float),
                  lambda s: 2 + 0 * np.asarray(s, float), base.R, base.dR_dw, base.G)
    rep = validate(law)
    assert rep.first_failure == "well_zeros"
    assert rep.checks[-1].witness is not None and 1.0 in rep.checks[-1].witness


def test_validate_fails_fast():
    base = make_quartic_affine(0.1)
    law = _custom(lambda s: np.asarray(s, float) ** 2, lambda s: 2 * np.asarray(s, float),
                  lambda s: 2 + 0 * np.asarray(s, float), base.R, base.dR_dw, base.G)
    rep = validate(law)
    assert rep.checks[-1].name == "well_zeros" and len(rep.checks) == 2


def test_make_law_dispatch():
    assert make_law("quartic_affine", 0.1, k=2.0).k == 2.0
    assert make_law("bv", 0.1).variant != "affine"
    with pytest.raises(ValueError):
        make_law("nope", 0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.0, 3.0), st.floats(0.1, 5.0))
def test_affine_primitive_derivative(s, w, k, beta):
    law = make_quartic_affine(0.1, k=k, beta=beta)
    h = 1e-5
    fd = (law.G(s, w + h) - law.G(s, w - h)) / (2 * h)
    assert fd == pytest.approx(float(law.R(s, w)), abs=1e-7 * (1 + abs(w) * beta + k))


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-12, 12), st.floats(0.05, 0.95), st.floats(0.5, 6.0))
def test_butler_volmer_primitive_derivative(s, w, alpha, w_max):
    law = make_clipped_butler_volmer(0.05, i0=1.0, alpha=alpha, w_max=w_max)
    h = 1e-5
    fd = (law.G(s, w + h) - law.G(s, w - h)) / (2 * h)
    assert fd == pytest.approx(float(law.R(s, w)), abs=1e-6 * (1 + abs(float(law.R(s, w)))))
