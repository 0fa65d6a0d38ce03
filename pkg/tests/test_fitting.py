import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerlab.datasets import REFERENCE_COEFFICIENTS, reference_features
from steerlab.fitting import (
    InsufficientDataError,
    NonConvergenceError,
    SingularDesignError,
    adjusted_r2,
    aic,
    cross_validate,
    fit_liu,
    fit_linear,
    fit_model,
    fit_nonlinear_ym,
    fit_report_document,
    make_folds,
    rank_models,
    read_features_csv,
    read_repetitions_csv,
    significance_stars,
    write_features_csv,
)
from steerlab.models import Coefficients, ModelForm, TrialFeatures, predict


@pytest.fixture(scope="module")
def paper_features():
    return reference_features()


class TestFitLinear:
    def test_exact_line(self):
        x = np.linspace(0, 10, 12)
        y = 3.0 + 2.0 * x
        fit = fit_linear(np.column_stack([np.ones_like(x), x]), y, ModelForm("SL_BASE"))
        assert fit.coefficient("a") == pytest.approx(3.0, abs=1e-9)
        assert fit.coefficient("b") == pytest.approx(2.0, abs=1e-10)
        assert fit.rss == pytest.approx(0.0, abs=1e-18)
        assert fit.r2_adjusted == pytest.approx(1.0)

    def test_sl_base_reference(self, paper_features):
        fit = fit_model(ModelForm("SL_BASE"), paper_features)
        assert fit.coefficient("a") == pytest.approx(-980.0, abs=60.0)
        assert fit.coefficient("b") == pytest.approx(9.5, abs=0.1)
        assert fit.r2_adjusted == pytest.approx(0.911, abs=0.005)
        assert fit.aic == pytest.approx(152.6, abs=1.0)
        # CI of b overlaps the published interval [7.0, 12.0]
        i = fit.coef_names.index("b")
        assert fit.ci95_low[i] == pytest.approx(7.0, abs=0.1)
        assert fit.ci95_high[i] == pytest.approx(12.0, abs=0.1)

    def test_comp_logk_reference(self, paper_features):
        fit = fit_model(ModelForm("COMP_LOGK"), paper_features)
        assert fit.coefficient("a") == pytest.approx(-22052.8, rel=0.02)
        assert fit.coefficient("b") == pytest.approx(12.0, rel=0.02)
        assert fit.coefficient("c") == pytest.approx(5238.3, rel=0.02)
        assert fit.coefficient("d") == pytest.approx(-0.2, abs=0.05)
        assert fit.r2_adjusted >= 0.985
        assert fit.aic == pytest.approx(133.4, abs=1.0)

    def test_singular_design(self):
        X = np.column_stack([np.ones(8), np.arange(8.0), 2 * np.arange(8.0)])
        with pytest.raises(SingularDesignError):
            fit_linear(X, np.arange(8.0), ModelForm("ADD_K"))

    def test_insufficient_data(self):
        X = np.ones((2, 3))
        with pytest.raises(InsufficientDataError):
            fit_linear(X, np.zeros(2), ModelForm("ADD_K"))

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_residuals_orthogonal_to_design(self, seed):
        rng = np.random.default_rng(seed)
        X = np.column_stack([np.ones(30), rng.normal(size=(30, 2))])
        y = rng.normal(size=30) * 10 + 5
        fit = fit_linear(X, y, ModelForm("ADD_K"))
        resid = y - X @ fit.coefficients
        scale = np.abs(X).sum(axis=0) * max(1.0, np.abs(resid).max())
        assert np.all(np.abs(resid @ X) / scale < 1e-6)

    def test_nested_models_rss_non_increasing(self, paper_features):
        ordered = ["SL_BASE", "ADD_K", "COMP_K"]
        fits = [fit_model(ModelForm(fid), paper_features) for fid in ordered]
        assert fits[0].rss >= fits[1].rss >= fits[2].rss

    def test_ci_brackets_estimate(self, paper_features):
        for fid in ("SL_BASE", "ADD_K", "ADD_LOGK", "COMP_K", "COMP_LOGK"):
            fit = fit_model(ModelForm(fid), paper_features)
            assert np.all(fit.ci95_low < fit.coefficients)
            assert np.all(fit.coefficients < fit.ci95_high)
            assert np.all(fit.ci95_high - fit.ci95_low > 0)

    # published 95% intervals for every reported coefficient
    PUBLISHED_CIS = {
        "SL_BASE": {"a": (-5768.9, 3809.0), "b": (7.0, 12.0)},
        "ADD_K": {"a": (-6368.9, -925.9), "b": (8.3, 10.7), "c": (85.8, 254.3)},
        "ADD_LOGK": {"a": (-12932.9, -4454.3), "b": (8.3, 10.7), "c": (1032.6, 2828.1)},
        "COMP_K": {"a": (-15679.0, -3480.6), "b": (9.5, 15.8), "c": (175.6, 898.8),
                   "d": (-0.4, -0.0)},
        "COMP_LOGK": {"a": (-35672.9, -8432.7), "b": (9.4, 14.7), "c": (1890.6, 8586.0),
                      "d": (-0.3, -0.0)},
        "YM": {"a": (-6375.2, -1167.7), "b": (8.5, 10.9), "c": (-18.7, -8.9)},
        "LIU": {"a": (-0.4, 0.8), "b": (1.0, 1.4), "c": (3.9, 12.3)},
    }

    def test_cis_overlap_every_published_interval(self, paper_features):
        for fid, intervals in self.PUBLISHED_CIS.items():
            fit = fit_model(ModelForm(fid), paper_features)
            for name, (lo, hi) in intervals.items():
                i = fit.coef_names.index(name)
                assert fit.ci95_low[i] <= hi and lo <= fit.ci95_high[i], (
                    fid, name, (fit.ci95_low[i], fit.ci95_high[i]), (lo, hi),
                )


class TestYm:
    def test_noiseless_identifiability(self):
        rng = np.random.default_rng(2)
        L = rng.uniform(1000, 3000, 12)
        K = rng.uniform(5, 25, 12)
        truth = Coefficients(a=-3000.0, b=10.0, c=-10.0)
        feats = [TrialFeatures(L=l, K=k) for l, k in zip(L, K)]
        y = np.array([predict(ModelForm("YM"), truth, f) for f in feats])
        fit = fit_nonlinear_ym(feats, y)
        assert fit.coefficient("a") == pytest.approx(-3000.0, rel=1e-6)
        assert fit.coefficient("b") == pytest.approx(10.0, rel=1e-6)
        assert fit.coefficient("c") == pytest.approx(-10.0, rel=1e-6)

    def test_reference_values(self, paper_features):
        fit = fit_nonlinear_ym(paper_features)
        assert fit.coefficient("a") == pytest.approx(-3771.5, rel=0.02)
        assert fit.coefficient("b") == pytest.approx(9.7, rel=0.02)
        assert fit.coefficient("c") == pytest.approx(-13.8, rel=0.02)
        assert fit.r2_adjusted == pytest.approx(0.981, abs=0.002)
        assert fit.aic == pytest.approx(139.0, abs=1.0)

    def test_warm_start_matches_random_restarts(self, paper_features):
        base = fit_nonlinear_ym(paper_features)
        rng = np.random.default_rng(0)
        best = math.inf
        for _ in range(10):
            init = Coefficients(
                a=float(rng.uniform(-9000, 3000)),
                b=float(rng.uniform(2, 18)),
                c=float(rng.uniform(-20, 5)),
            )
            try:
                fit = fit_nonlinear_ym(paper_features, init=init)
            except (NonConvergenceError, ValueError):
                continue
            best = min(best, fit.rss)
        assert base.rss == pytest.approx(best, abs=1e-9 * base.rss + 1e-9)

    def test_insufficient_points(self):
        feats = [TrialFeatures(L=1000.0 + i, K=10.0, mt_mean=1000.0) for i in range(3)]
        with pytest.raises(InsufficientDataError):
            fit_nonlinear_ym(feats)


class TestLiu:
    def test_reference_values(self, paper_features):
        fit = fit_liu(paper_features)
        assert fit.coefficient("a") == pytest.approx(0.2, abs=0.05)
        assert fit.coefficient("b") == pytest.approx(1.2, abs=0.05)
        assert fit.coefficient("c") == pytest.approx(8.1, abs=0.2)
        assert fit.aic == pytest.approx(140.7, abs=1.5)

    def test_no_intercept_refit(self, paper_features):
        fit = fit_liu(paper_features, intercept=False)
        assert fit.coefficient("b") == pytest.approx(1.267, abs=0.005)
        assert fit.coefficient("c") == pytest.approx(8.887, abs=0.05)

    def test_perfect_power_law(self):
        rng = np.random.default_rng(4)
        L = rng.uniform(500, 4000, 9)
        K = rng.uniform(5, 25, 9)  # K must vary for c to be identifiable
        feats = [TrialFeatures(L=l, K=k) for l, k in zip(L, K)]
        y = L**1.3
        fit = fit_liu(feats, y, intercept=False)
        assert fit.coefficient("b") == pytest.approx(1.3, abs=1e-9)
        assert fit.coefficient("c") == pytest.approx(0.0, abs=1e-9)
        assert fit.rss < 1e-12

    def test_positive_mt_required(self):
        feats = [TrialFeatures(L=100.0 * (i + 1), K=1.0) for i in range(5)]
        with pytest.raises(ValueError, match="positive"):
            fit_liu(feats, np.array([1.0, 2.0, -3.0, 4.0, 5.0]))

    def test_log_scale_diagnostics_retained(self, paper_features):
        fit = fit_liu(paper_features)
        assert fit.log_scale is not None
        assert set(fit.log_scale["coefficients"]) == {"a", "b", "c"}


class TestAic:
    def test_reference_values(self, paper_features):
        sl = fit_model(ModelForm("SL_BASE"), paper_features)
        assert aic(sl.rss, 9, 2) == pytest.approx(152.6, abs=1.0)
        cl = fit_model(ModelForm("COMP_LOGK"), paper_features)
        assert aic(cl.rss, 9, 4) == pytest.approx(133.4, abs=1.0)

    def test_doubling_k_adds_two(self):
        assert aic(100.0, 9, 4) - aic(100.0, 9, 2) == pytest.approx(4.0)
        assert aic(100.0, 9, 3) - aic(100.0, 9, 2) == pytest.approx(2.0)

    def test_perfect_fit_sentinel(self):
        with pytest.warns(RuntimeWarning):
            assert aic(0.0, 9, 2) == -math.inf

    def test_validation(self):
        with pytest.raises(ValueError):
            aic(-1.0, 9, 2)
        with pytest.raises(ValueError):
            aic(1.0, 0, 2)

    def test_all_six_table_rows_simultaneously(self, paper_features):
        expected = {
            "SL_BASE": 152.6, "ADD_K": 140.0, "ADD_LOGK": 139.0,
            "COMP_K": 134.1, "COMP_LOGK": 133.4, "LIU": 140.7,
        }
        for fid, target in expected.items():
            fit = fit_model(ModelForm(fid), paper_features)
            assert fit.aic == pytest.approx(target, abs=1.0), fid


class TestAdjustedR2:
    def test_perfect_fit(self):
        assert adjusted_r2(0.0, 10.0, 9, 1) == 1.0

    def test_penalizes_useless_predictor(self):
        rng = np.random.default_rng(9)
        worse = 0
        for _ in range(50):
            y = rng.normal(size=20)
            x = rng.normal(size=20)
            X = np.column_stack([np.ones(20), x])
            coef, *_ = np.linalg.lstsq(X, y, rcond=None)
            rss = float(((y - X @ coef) ** 2).sum())
            tss = float(((y - y.mean()) ** 2).sum())
            adj = adjusted_r2(rss, tss, 20, 1)
            r2 = 1 - rss / tss
            assert adj <= r2
            if adj < 0:
                worse += 1
        assert worse > 10  # useless predictors often push adjusted r2 negative

    def test_undefined_df(self):
        with pytest.raises(ValueError):
            adjusted_r2(1.0, 2.0, 3, 2)


class TestCrossValidation:
    def _planted(self, form_id, noise_sd, seed, features):
        form = ModelForm(form_id)
        coef = Coefficients(**REFERENCE_COEFFICIENTS[form_id])
        rng = np.random.default_rng(seed)
        truth = np.array([predict(form, coef, f) for f in features])
        return truth[:, None] + rng.normal(0.0, noise_sd, size=(len(features), 15))

    def test_zero_noise_recovery(self, paper_features):
        reps = self._planted("COMP_K", 0.0, 0, paper_features)
        report = cross_validate(paper_features, reps, ModelForm("COMP_K"))
        assert report.mean_rmse < 1e-6

    def test_planted_model_ranks_lowest(self, paper_features):
        wins = 0
        forms = [ModelForm(fid) for fid in ("SL_BASE", "ADD_K", "ADD_LOGK", "COMP_K", "COMP_LOGK", "YM", "LIU")]
        for seed in range(20):
            reps = self._planted("COMP_LOGK", 400.0, seed, paper_features)
            scores = {
                f.form_id: cross_validate(paper_features, reps, f).mean_rmse for f in forms
            }
            best = min(scores, key=scores.get)
            if best in ("COMP_LOGK", "COMP_K"):
                wins += 1
        assert wins >= 18

    def test_folds_partition_repetitions(self):
        for mode, seed in (("contiguous", None), ("random", 7)):
            folds = make_folds(mode, seed)
            assert len(folds) == 5
            flat = sorted(i for f in folds for i in f)
            assert flat == list(range(15))

    def test_contiguous_fold_definitions(self, paper_features):
        reps = self._planted("SL_BASE", 100.0, 1, paper_features)
        report = cross_validate(paper_features, reps, ModelForm("SL_BASE"))
        assert report.fold_definitions[0] == (0, 1, 2)
        assert report.fold_definitions[-1] == (12, 13, 14)

    def test_shape_error(self, paper_features):
        with pytest.raises(ValueError, match="repetition matrix"):
            cross_validate(paper_features, np.zeros((9, 12)), ModelForm("SL_BASE"))


class TestRanking:
    def test_reference_order_matches_published_table(self, paper_features):
        fids = ["SL_BASE", "ADD_K", "ADD_LOGK", "COMP_K", "COMP_LOGK", "YM", "LIU"]
        fits = [fit_model(ModelForm(fid), paper_features) for fid in fids]
        ranked = rank_models(fits)
        assert [r.form_id for r in ranked] == [
            "COMP_LOGK", "COMP_K", "YM", "ADD_LOGK", "ADD_K", "LIU", "SL_BASE",
        ]
        assert ranked[0].comparable and ranked[0].valid
        assert not ranked[-1].valid  # SL_BASE is 19 AIC units above the best

    def test_single_model(self, paper_features):
        fit = fit_model(ModelForm("SL_BASE"), paper_features)
        ranked = rank_models([fit])
        assert ranked[0].rank == 1 and ranked[0].delta_aic == 0.0

    def test_delta_invariant_to_constant_shift(self, paper_features):
        fits = [fit_model(ModelForm(f), paper_features) for f in ("SL_BASE", "ADD_K")]
        ranked = rank_models(fits)
        shifted = [r for r in ranked]
        for r in shifted:
            r.fit.aic += 100.0
        ranked2 = rank_models([r.fit for r in shifted])
        assert [r.delta_aic for r in ranked2] == [r.delta_aic for r in ranked]

    def test_mixed_n_points_incomparable(self, paper_features):
        f1 = fit_model(ModelForm("SL_BASE"), paper_features)
        f2 = fit_model(ModelForm("SL_BASE"), paper_features[:-1])
        with pytest.raises(ValueError, match="incomparable"):
            rank_models([f1, f2])


class TestIo:
    def test_feature_csv_round_trip(self, paper_features, tmp_path):
        path = tmp_path / "features.csv"
        write_features_csv(paper_features, path)
        loaded = read_features_csv(path)
        assert len(loaded) == 9
        for a, b in zip(loaded, paper_features):
            assert a.L == b.L and a.K == b.K and a.mt_mean == b.mt_mean
            assert a.nl is None

    def test_feature_csv_round_trip_with_nl(self, paper_features, tmp_path):
        with_nl = [
            TrialFeatures(L=f.L, K=f.K, nl=10.0 + i, mt_mean=f.mt_mean, trial_id=f.trial_id)
            for i, f in enumerate(paper_features)
        ]
        path = tmp_path / "features_nl.csv"
        write_features_csv(with_nl, path)
        loaded = read_features_csv(path)
        assert [f.nl for f in loaded] == [10.0 + i for i in range(9)]
        # the nl column makes the NL form fittable from a plain CSV
        fit = fit_model(ModelForm("NL"), loaded)
        assert np.isfinite(fit.aic)

    def test_repetitions_csv(self, paper_features, tmp_path):
        path = tmp_path / "reps.csv"
        lines = ["trial_id,L,K,repetition,mt_ms"]
        rng = np.random.default_rng(0)
        for f in paper_features:
            for rep in range(1, 16):
                lines.append(f"{f.trial_id},{f.L},{f.K},{rep},{f.mt_mean + rng.normal(0, 50):.3f}")
        path.write_text("\n".join(lines), encoding="utf-8")
        feats, reps = read_repetitions_csv(path)
        assert reps.shape == (9, 15)
        assert [f.trial_id for f in feats] == sorted(f.trial_id for f in paper_features)

    def test_fit_report_document(self, paper_features):
        fits = [fit_model(ModelForm(f), paper_features) for f in ("SL_BASE", "COMP_LOGK")]
        doc = fit_report_document(fits)
        assert doc["format"] == "fitreport v1"
        assert doc["models"][0]["form_id"] == "COMP_LOGK"
        coefs = doc["models"][0]["coefficients"]
        assert set(coefs) == {"a", "b", "c", "d"}
        assert all({"estimate", "se", "ci95", "p", "stars"} <= set(v) for v in coefs.values())


def test_significance_stars_legend():
    assert significance_stars(0.2) == ""
    assert significance_stars(0.01) == "*"
    assert significance_stars(0.0005) == "**"
    assert significance_stars(0.00005) == "***"
