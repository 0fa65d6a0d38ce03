"""Least-squares estimation, coefficient inference, AIC ranking, and the
5-fold repetition cross-validation used to compare movement-time models.

Linear forms go through ordinary least squares; the rational form (YM) and
the power-of-ten form (LIU) go through damped Gauss-Newton on the MT scale,
warm-started from their linear sub-problems.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .models import Coefficients, ModelForm, TrialFeatures, design_matrix

LN10 = math.log(10.0)


class SingularDesignError(ValueError):
    """The design matrix is rank deficient."""


class InsufficientDataError(ValueError):
    """Fewer data points than coefficients."""


class NonConvergenceError(RuntimeError):
    """The nonlinear solver failed to converge; .trace holds the iterates."""

    def __init__(self, message: str, trace: List[Tuple[int, float, np.ndarray]]):
        super().__init__(message)
        self.trace = trace


@dataclass
class FitResult:
    """Fitted coefficients with Wald inference and fit-quality metrics."""

    form_id: str
    intercept: bool
    coef_names: Tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    ci95_low: np.ndarray
    ci95_high: np.ndarray
    p_values: np.ndarray
    r2_adjusted: float
    aic: float
    rss: float
    n_points: int
    log_scale: Optional[dict] = None  # secondary diagnostics for LIU

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.coef_names.index(name)])

    def as_coefficients(self) -> Coefficients:
        return Coefficients(**dict(zip(self.coef_names, map(float, self.coefficients))))

    @property
    def form(self) -> ModelForm:
        return ModelForm(self.form_id, self.intercept)


def significance_stars(p: float) -> str:
    """Legend: * p<0.05, ** p<0.001, *** p<0.0001."""
    if p < 0.0001:
        return "***"
    if p < 0.001:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def aic(rss: float, n: int, k: int) -> float:
    """Gaussian full-likelihood AIC: n*ln(RSS/n) + n*ln(2*pi) + n + 2k.

    k counts regression coefficients only.
    """
    if n <= 0 or k < 0:
        raise ValueError("n must be positive and k non-negative")
    if rss < 0:
        raise ValueError("RSS must be non-negative")
    if rss == 0.0:
        warnings.warn("AIC of a perfect fit; returning -inf", RuntimeWarning)
        return -math.inf
    return n * math.log(rss / n) + n * math.log(2.0 * math.pi) + n + 2.0 * k


def adjusted_r2(rss: float, tss: float, n: int, p: int) -> float:
    """1 - (1 - r^2)(n-1)/(n-p-1), r^2 = 1 - RSS/TSS.

    p is the predictor count excluding the intercept; for no-intercept fits
    pass an uncentered TSS and count all coefficients in p.
    """
    if tss <= 0:
        raise ValueError("TSS must be positive")
    if n - p - 1 <= 0:
        raise ValueError("adjusted r^2 undefined: n - p - 1 must be positive")
    r2 = 1.0 - rss / tss
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


def _wald(coefficients, cov, df):
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, coefficients / se, np.inf)
    pvals = 2.0 * stats.t.sf(np.abs(tvals), df)
    tcrit = stats.t.ppf(0.975, df)
    return se, coefficients - tcrit * se, coefficients + tcrit * se, pvals


def _diagnostics(y: np.ndarray, rss: float, n: int, form: ModelForm) -> Tuple[float, float]:
    if form.intercept:
        tss = float(((y - y.mean()) ** 2).sum())
        p = form.n_coefficients - 1
    else:
        tss = float((y**2).sum())
        p = form.n_coefficients
    return adjusted_r2(rss, tss, n, p), aic(rss, n, form.n_coefficients)


def fit_linear(
    rows: np.ndarray,
    targets: np.ndarray,
    form: Optional[ModelForm] = None,
    coef_names: Optional[Sequence[str]] = None,
) -> FitResult:
    """Ordinary least squares with t-based inference.

    ``rows`` is the full design matrix (including the intercept column when
    the form has one).
    """
    X = np.asarray(rows, dtype=float)
    y = np.asarray(targets, dtype=float)
    n, p = X.shape
    if n <= p:
        raise InsufficientDataError(f"{n} points cannot identify {p} coefficients")
    if np.linalg.matrix_rank(X) < p:
        raise SingularDesignError("design matrix is rank deficient")

    q, r = np.linalg.qr(X)
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    rss = float(resid @ resid)
    df = n - p
    xtx_inv = np.linalg.inv(r.T @ r)
    cov = (rss / df) * xtx_inv
    se, lo, hi, pvals = _wald(coef, cov, df)

    if form is not None:
        names = tuple(coef_names) if coef_names else form.coef_names
        r2a, aic_val = _diagnostics(y, rss, n, form)
        return FitResult(form.form_id, form.intercept, names, coef, se, lo, hi,
                         pvals, r2a, aic_val, rss, n)
    # generic fit: first column treated as the intercept
    names = tuple(coef_names) if coef_names else tuple(f"b{i}" for i in range(p))
    tss = float(((y - y.mean()) ** 2).sum())
    r2a = adjusted_r2(rss, tss, n, p - 1)
    return FitResult("LINEAR", True, names, coef, se, lo, hi, pvals, r2a,
                     aic(rss, n, p), rss, n)


def _damped_gauss_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    guard: Optional[Callable[[np.ndarray], bool]] = None,
    max_iter: int = 500,
    rss_tol: float = 1e-12,
    grad_tol: float = 1e-9,
):
    """Gauss-Newton with multiplicative damping.

    Steps solve (J'J + lam*diag(J'J)) dx = -J'r; steps that fail the guard or
    increase the RSS reject and raise the damping.  Returns (x, residual,
    jacobian, trace).
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    rss = float(r @ r)
    lam = 1e-3
    trace: List[Tuple[int, float, np.ndarray]] = [(0, rss, x.copy())]
    for it in range(1, max_iter + 1):
        J = jacobian(x)
        g = 2.0 * J.T @ r
        if np.linalg.norm(g) < grad_tol:
            return x, r, J, trace
        jtj = J.T @ J
        damp = np.diag(np.maximum(np.diag(jtj), 1e-12))
        accepted = False
        while lam < 1e16:
            try:
                dx = np.linalg.solve(jtj + lam * damp, -J.T @ r)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = x + dx
            if guard is not None and not guard(cand):
                lam *= 10.0  # step rejected: constraint crossing
                continue
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = residual(cand)
                rss_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
            if rss_new <= rss * (1.0 + 1e-15):
                improvement = (rss - rss_new) / max(rss, 1e-300)
                x, r, rss = cand, r_new, rss_new
                lam = max(lam * 0.1, 1e-12)
                accepted = True
                trace.append((it, rss, x.copy()))
                if improvement < rss_tol:
                    return x, r, jacobian(x), trace
                break
            lam *= 10.0
        if not accepted:
            # damping saturated: no descent direction improves at this scale
            return x, r, jacobian(x), trace
    raise NonConvergenceError(f"no convergence after {max_iter} iterations", trace)


def _nonlinear_result(form, names, x, r, J, y):
    n, p = len(y), len(x)
    rss = float(r @ r)
    df = n - p
    try:
        cov = (rss / df) * np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((p, p), np.nan)
    se, lo, hi, pvals = _wald(x, cov, df)
    r2a, aic_val = _diagnostics(y, rss, n, form)
    return FitResult(form.form_id, form.intercept, names, x, se, lo, hi, pvals, r2a, aic_val, rss, n)


def fit_nonlinear_ym(
    features: Sequence[TrialFeatures],
    targets: Optional[np.ndarray] = None,
    init: Optional[Coefficients] = None,
) -> FitResult:
    """Fit MT = a + b*L^2/(L + c*K) by damped Gauss-Newton.

    Default warm start: the c = 0 linear sub-model MT = a + b*L.
    """
    L = np.array([f.L for f in features], dtype=float)
    K = np.array([f.K for f in features], dtype=float)
    y = _targets_from(features, targets)
    n = len(y)
    if n <= 3:
        raise InsufficientDataError("YM needs more than 3 points")

    form = ModelForm("YM")
    if init is None:
        warm = fit_linear(np.column_stack([np.ones(n), L]), y, ModelForm("SL_BASE"))
        x0 = np.array([warm.coefficient("a"), warm.coefficient("b"), 0.0])
    else:
        x0 = init.for_form(form)

    def residual(p):
        a, b, c = p
        return y - (a + b * L**2 / (L + c * K))

    def jacobian(p):
        a, b, c = p
        denom = L + c * K
        return np.column_stack([-np.ones(n), -(L**2) / denom, b * L**2 * K / denom**2])

    def guard(p):
        return bool(np.all(L + p[2] * K > 0))

    if not guard(x0):
        raise ValueError("initial c makes a YM denominator non-positive")
    x, r, J, _ = _damped_gauss_newton(residual, jacobian, x0, guard=guard)
    return _nonlinear_result(form, form.coef_names, x, r, J, y)


def fit_liu(
    features: Sequence[TrialFeatures],
    targets: Optional[np.ndarray] = None,
    intercept: bool = True,
) -> FitResult:
    """Fit MT = 10^(a + b*log10(L) + c*K/L) by damped Gauss-Newton on the MT
    scale, warm-started from the log10-linear fit.

    The log-scale linear diagnostics are kept on ``result.log_scale``.
    """
    y = _targets_from(features, targets)
    if np.any(y <= 0):
        raise ValueError("LIU requires positive movement times")
    form = ModelForm("LIU", intercept=intercept)
    X = design_matrix(form, features)  # rows for the log10 target
    n, p = X.shape
    if n <= p:
        raise InsufficientDataError(f"{n} points cannot identify {p} coefficients")
    warm = fit_linear(X, np.log10(y), form)

    def residual(beta):
        return y - 10.0 ** (X @ beta)

    def jacobian(beta):
        pred = 10.0 ** (X @ beta)
        return -(pred * LN10)[:, None] * X

    x, r, J, _ = _damped_gauss_newton(residual, jacobian, warm.coefficients.copy())
    result = _nonlinear_result(form, form.coef_names, x, r, J, y)
    result.log_scale = {
        "coefficients": dict(zip(form.coef_names, map(float, warm.coefficients))),
        "rss": warm.rss,
        "r2_adjusted": warm.r2_adjusted,
    }
    return result


def _targets_from(features: Sequence[TrialFeatures], targets) -> np.ndarray:
    if targets is not None:
        return np.asarray(targets, dtype=float)
    missing = [f.trial_id or "?" for f in features if f.mt_mean is None]
    if missing:
        raise ValueError(f"features lack mt_mean (trials {missing}) and no targets were given")
    return np.array([f.mt_mean for f in features], dtype=float)


def fit_model(
    form: ModelForm,
    features: Sequence[TrialFeatures],
    targets: Optional[np.ndarray] = None,
) -> FitResult:
    """Fit any catalog form on per-trial features."""
    if form.form_id == "YM":
        return fit_nonlinear_ym(features, targets)
    if form.form_id == "LIU":
        return fit_liu(features, targets, intercept=form.intercept)
    return fit_linear(design_matrix(form, features), _targets_from(features, targets), form)


def predict_fit(fit: FitResult, features: Sequence[TrialFeatures]) -> np.ndarray:
    from .models import predict

    coef = fit.as_coefficients()
    return np.array([predict(fit.form, coef, f) for f in features])


# ---------------------------------------------------------------------------
# cross-validation

N_REPETITIONS = 15
N_FOLDS = 5
FOLD_SIZE = 3


@dataclass
class CvReport:
    form_id: str
    intercept: bool
    fold_rmse: List[float]
    mean_rmse: float
    fold_definitions: List[Tuple[int, ...]]


def make_folds(mode: str = "contiguous", seed: Optional[int] = None) -> List[Tuple[int, ...]]:
    """Partition repetition indices 0..14 into 5 disjoint triples."""
    if mode == "contiguous":
        order = np.arange(N_REPETITIONS)
    elif mode == "random":
        order = np.random.default_rng(seed).permutation(N_REPETITIONS)
    else:
        raise ValueError(f"unknown fold mode {mode!r}")
    return [tuple(int(i) for i in order[f * FOLD_SIZE : (f + 1) * FOLD_SIZE]) for f in range(N_FOLDS)]


def cross_validate(
    features: Sequence[TrialFeatures],
    repetitions: np.ndarray,
    form: ModelForm,
    folds: str = "contiguous",
    seed: Optional[int] = None,
) -> CvReport:
    """5-fold CV over repetitions: fit on the 9 cell means of 12 repetitions,
    test RMSE against the means of the 3 held out.
    """
    reps = np.asarray(repetitions, dtype=float)
    if reps.shape != (len(features), N_REPETITIONS):
        raise ValueError(
            f"repetition matrix must be (n_cells, {N_REPETITIONS}); got {reps.shape}"
        )
    fold_defs = make_folds(folds, seed)
    rmses = []
    all_idx = set(range(N_REPETITIONS))
    for held_out in fold_defs:
        train_idx = sorted(all_idx - set(held_out))
        train_y = reps[:, train_idx].mean(axis=1)
        test_y = reps[:, list(held_out)].mean(axis=1)
        fit = fit_model(form, features, train_y)
        pred = predict_fit(fit, features)
        rmses.append(float(np.sqrt(np.mean((pred - test_y) ** 2))))
    return CvReport(form.form_id, form.intercept, rmses, float(np.mean(rmses)), fold_defs)


# ---------------------------------------------------------------------------
# ranking

COMPARABLE_AIC_WINDOW = 2.0
VALID_AIC_WINDOW = 10.0


@dataclass
class RankedFit:
    rank: int
    form_id: str
    intercept: bool
    aic: float
    delta_aic: float
    n_coefficients: int
    comparable: bool  # within 2 AIC units of the minimum
    valid: bool  # within 10 AIC units of the minimum
    fit: FitResult = field(repr=False)


def rank_models(fits: Sequence[FitResult]) -> List[RankedFit]:
    """Sort fits by AIC ascending and flag the paper-style AIC windows."""
    if len(fits) < 1:
        raise ValueError("nothing to rank")
    n_points = {f.n_points for f in fits}
    if len(n_points) > 1:
        raise ValueError(f"fits are incomparable: differing n_points {sorted(n_points)}")
    ordered = sorted(fits, key=lambda f: (f.aic, len(f.coef_names), f.form_id))
    best = ordered[0].aic
    return [
        RankedFit(
            rank=i + 1,
            form_id=f.form_id,
            intercept=f.intercept,
            aic=f.aic,
            delta_aic=f.aic - best,
            n_coefficients=len(f.coef_names),
            comparable=f.aic - best <= COMPARABLE_AIC_WINDOW,
            valid=f.aic - best <= VALID_AIC_WINDOW,
            fit=f,
        )
        for i, f in enumerate(ordered)
    ]


# ---------------------------------------------------------------------------
# fitreport v1 and feature-table I/O


def fit_report_document(fits: Sequence[FitResult]) -> dict:
    ranked = rank_models(fits)
    models = []
    for r in ranked:
        f = r.fit
        models.append(
            {
                "form_id": f.form_id,
                "intercept": f.intercept,
                "coefficients": {
                    name: {
                        "estimate": float(f.coefficients[i]),
                        "se": float(f.standard_errors[i]),
                        "ci95": [float(f.ci95_low[i]), float(f.ci95_high[i])],
                        "p": float(f.p_values[i]),
                        "stars": significance_stars(float(f.p_values[i])),
                    }
                    for i, name in enumerate(f.coef_names)
                },
                "r2_adjusted": f.r2_adjusted,
                "aic": f.aic,
                "rss": f.rss,
                "n_points": f.n_points,
                "rank": r.rank,
                "delta_aic": r.delta_aic,
                "comparable": r.comparable,
                "valid": r.valid,
            }
        )
    return {"format": "fitreport v1", "models": models}


def write_fit_report(fits: Sequence[FitResult], path) -> Path:
    p = Path(path)
    p.write_text(json.dumps(fit_report_document(fits), indent=2), encoding="utf-8")
    return p


def anova_report_document(effects) -> dict:
    """Effects table in the fitreport container (see inference.rm_anova)."""
    return {
        "format": "fitreport v1",
        "anova_effects": [
            {
                "effect": e.effect,
                "F": e.F,
                "p": e.p,
                "gg_epsilon": e.gg_epsilon,
                "partial_eta_sq": e.partial_eta_sq,
            }
            for e in effects
        ],
    }


FEATURE_COLUMNS = ("trial_id", "L", "K", "nl", "mt_mean")


def read_features_csv(path) -> List[TrialFeatures]:
    """Feature table: header trial_id,L,K[,nl],mt_mean."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError("feature CSV is empty")
        required = {"trial_id", "L", "K", "mt_mean"}
        missing = required - set(reader.fieldnames)
        if missing:
            raise ValueError(f"feature CSV missing columns: {sorted(missing)}")
        rows = []
        for rec in reader:
            nl = rec.get("nl")
            rows.append(
                TrialFeatures(
                    L=float(rec["L"]),
                    K=float(rec["K"]),
                    nl=float(nl) if nl not in (None, "") else None,
                    mt_mean=float(rec["mt_mean"]),
                    trial_id=rec["trial_id"],
                )
            )
    if not rows:
        raise ValueError("feature CSV has no data rows")
    return rows


def write_features_csv(features: Sequence[TrialFeatures], path) -> Path:
    p = Path(path)
    with open(p, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_COLUMNS)
        for f in features:
            writer.writerow(
                [
                    f.trial_id or "",
                    repr(float(f.L)),
                    repr(float(f.K)),
                    "" if f.nl is None else repr(float(f.nl)),
                    "" if f.mt_mean is None else repr(float(f.mt_mean)),
                ]
            )
    return p


def read_repetitions_csv(path) -> Tuple[List[TrialFeatures], np.ndarray]:
    """Long-format repetition table: trial_id,L,K[,nl],repetition,mt_ms."""
    cells: Dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"trial_id", "L", "K", "repetition", "mt_ms"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"repetition CSV missing columns: {sorted(missing)}")
        for rec in reader:
            cell = cells.setdefault(
                rec["trial_id"],
                {"L": float(rec["L"]), "K": float(rec["K"]),
                 "nl": float(rec["nl"]) if rec.get("nl") not in (None, "") else None,
                 "reps": {}},
            )
            cell["reps"][int(rec["repetition"])] = float(rec["mt_ms"])
    features, rows = [], []
    for trial_id in sorted(cells):
        cell = cells[trial_id]
        if len(cell["reps"]) != N_REPETITIONS:
            raise ValueError(
                f"{trial_id}: expected {N_REPETITIONS} repetitions, found {len(cell['reps'])}"
            )
        order = sorted(cell["reps"])
        rows.append([cell["reps"][i] for i in order])
        mt_mean = float(np.mean(rows[-1]))
        features.append(TrialFeatures(L=cell["L"], K=cell["K"], nl=cell["nl"],
                                      mt_mean=mt_mean, trial_id=trial_id))
    return features, np.array(rows)
