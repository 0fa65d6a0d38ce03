import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerlab.datasets import REFERENCE_COEFFICIENTS
from steerlab.models import (
    FORM_IDS,
    Coefficients,
    MissingFeatureError,
    ModelForm,
    TrialFeatures,
    catalog,
    design_row,
    predict,
)


def oracle_predict(form_id, intercept, coef, L, K, nl=None):
    """Independent straight-line re-derivation of every formula."""
    a = coef.get("a", 0.0)
    b, c, d = coef.get("b"), coef.get("c"), coef.get("d")
    if form_id == "SL_BASE":
        return a + b * L
    if form_id == "ADD_K":
        return a + b * L + c * K
    if form_id == "ADD_LOGK":
        return a + b * L + c * math.log2(K + 1)
    if form_id == "COMP_K":
        return a + b * L + c * K + d * L * K
    if form_id == "COMP_LOGK":
        return a + b * L + c * math.log2(K + 1) + d * L * K
    if form_id == "YM":
        return a + b * L * L / (L + c * K)
    if form_id == "LIU":
        return 10.0 ** (a + b * math.log10(L) + c * K / L)
    if form_id == "NL":
        return a + b * L * nl
    raise AssertionError(form_id)


def coef_for(form):
    base = {"a": -500.0, "b": 7.5, "c": 30.0, "d": -0.05}
    if form.form_id == "LIU":
        base = {"a": 0.2, "b": 1.2, "c": 8.0}
    if form.form_id == "NL":
        base = {"a": -300.0, "b": 0.04}
    if form.form_id == "YM":
        base = {"a": -3000.0, "b": 9.0, "c": 5.0}  # positive c keeps denominators positive
    kwargs = {k: base[k] for k in form.coef_names}
    return Coefficients(**kwargs)


class TestPredict:
    def test_sl_base_reference_arithmetic(self):
        coef = Coefficients(a=-980.0, b=9.5)
        mt = predict(ModelForm("SL_BASE"), coef, TrialFeatures(L=1500.10, K=10.0))
        assert mt == pytest.approx(13270.95, abs=0.5)

    def test_k_zero_degeneracy(self):
        f = TrialFeatures(L=1700.0, K=0.0, nl=0.0)
        base = predict(ModelForm("SL_BASE"), Coefficients(a=-980.0, b=9.5), f)
        for fid, coef in [
            ("ADD_K", Coefficients(a=-980.0, b=9.5, c=170.0)),
            ("ADD_LOGK", Coefficients(a=-980.0, b=9.5, c=1930.0)),
            ("COMP_K", Coefficients(a=-980.0, b=9.5, c=537.0, d=-0.2)),
            ("COMP_LOGK", Coefficients(a=-980.0, b=9.5, c=5238.0, d=-0.2)),
        ]:
            assert predict(ModelForm(fid), coef, f) == pytest.approx(base, rel=1e-12)

    @given(
        L=st.floats(100.0, 5000.0),
        K=st.floats(0.0, 40.0),
        nl=st.floats(0.0, 400.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_dual_implementation_oracle(self, L, K, nl):
        f = TrialFeatures(L=L, K=K, nl=nl, mt_mean=12000.0)
        for fid in FORM_IDS:
            form = ModelForm(fid)
            coef = coef_for(form)
            expected = oracle_predict(fid, True, {n: getattr(coef, n) for n in form.coef_names}, L, K, nl)
            got = predict(form, coef, f)
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_ym_denominator_error(self):
        f = TrialFeatures(L=100.0, K=20.0)
        with pytest.raises(ValueError, match="denominator"):
            predict(ModelForm("YM"), Coefficients(a=0.0, b=1.0, c=-10.0), f)

    def test_nl_missing_feature_error(self):
        f = TrialFeatures(L=1500.0, K=10.0)
        with pytest.raises(MissingFeatureError):
            predict(ModelForm("NL"), Coefficients(a=1.0, b=2.0), f)

    def test_liu_always_positive(self):
        rng = np.random.default_rng(0)
        form = ModelForm("LIU")
        for _ in range(100):
            f = TrialFeatures(L=float(rng.uniform(10, 5000)), K=float(rng.uniform(0, 50)))
            coef = Coefficients(
                a=float(rng.normal(0, 2)), b=float(rng.normal(0, 2)), c=float(rng.normal(0, 10))
            )
            assert predict(form, coef, f) > 0


class TestDesignRow:
    def test_add_logk_row_at_k_zero(self):
        row = design_row(ModelForm("ADD_LOGK"), TrialFeatures(L=1234.0, K=0.0))
        assert np.allclose(row, [1.0, 1234.0, 0.0])

    def test_liu_row(self):
        row = design_row(ModelForm("LIU"), TrialFeatures(L=1500.0, K=10.0))
        assert np.allclose(row, [1.0, math.log10(1500.0), 10.0 / 1500.0])
        row_ni = design_row(ModelForm("LIU", intercept=False), TrialFeatures(L=1500.0, K=10.0))
        assert np.allclose(row_ni, [math.log10(1500.0), 10.0 / 1500.0])

    def test_rows_reproduce_predict(self):
        rng = np.random.default_rng(1)
        linear_forms = ["SL_BASE", "ADD_K", "ADD_LOGK", "COMP_K", "COMP_LOGK", "NL"]
        for _ in range(50):
            f = TrialFeatures(
                L=float(rng.uniform(100, 4000)),
                K=float(rng.uniform(0, 40)),
                nl=float(rng.uniform(0, 300)),
            )
            for fid in linear_forms:
                form = ModelForm(fid)
                coef = coef_for(form)
                row = design_row(form, f)
                assert float(row @ coef.for_form(form)) == pytest.approx(
                    predict(form, coef, f), rel=1e-12
                )

    def test_ym_residual_closure(self):
        f = TrialFeatures(L=1500.0, K=10.0, mt_mean=14000.0)
        resid = design_row(ModelForm("YM"), f)
        coef = Coefficients(a=-3000.0, b=9.0, c=-10.0)
        expected = 14000.0 - predict(ModelForm("YM"), coef, f)
        assert resid(coef) == pytest.approx(expected, rel=1e-12)
        assert resid(np.array([-3000.0, 9.0, -10.0])) == pytest.approx(expected, rel=1e-12)

    def test_no_intercept_restricted(self):
        with pytest.raises(ValueError):
            ModelForm("SL_BASE", intercept=False)
        ModelForm("NL", intercept=False)
        ModelForm("LIU", intercept=False)


class TestMonotonicity:
    def test_reference_fits_increase_in_length(self):
        ls = np.linspace(1498.0, 2335.0, 40)
        for fid, coef_map in REFERENCE_COEFFICIENTS.items():
            form = ModelForm(fid)
            coef = Coefficients(**coef_map)
            for K in (10.0, 16.0, 22.0):
                mts = [predict(form, coef, TrialFeatures(L=float(L), K=K)) for L in ls]
                assert np.all(np.diff(mts) > 0), (fid, K)


class TestCoefficients:
    def test_arity_enforced(self):
        with pytest.raises(ValueError):
            Coefficients(a=1.0).for_form(ModelForm("SL_BASE"))
        with pytest.raises(ValueError):
            Coefficients(a=1.0, b=2.0, c=3.0).for_form(ModelForm("SL_BASE"))

    def test_from_values_round_trip(self):
        form = ModelForm("COMP_K")
        coef = Coefficients.from_values(form, [1.0, 2.0, 3.0, 4.0])
        assert np.allclose(coef.for_form(form), [1.0, 2.0, 3.0, 4.0])


def test_catalog_lists_all_forms():
    entries = catalog()
    assert [e["form_id"] for e in entries] == list(FORM_IDS)
    nl = next(e for e in entries if e["form_id"] == "NL")
    assert "nl" in nl["required_features"]
