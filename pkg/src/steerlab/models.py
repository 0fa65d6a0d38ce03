"""Movement-time model catalog: the base steering model plus the
curvature-extended, interaction, and adapted prior-work forms.

Linear forms expose design rows for least-squares fitting; the nonlinear
forms (YM rational, LIU power-of-ten) expose residual closures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

FORM_IDS = ("SL_BASE", "ADD_K", "ADD_LOGK", "NL", "YM", "LIU", "COMP_K", "COMP_LOGK")

FORMULAS = {
    "SL_BASE": "MT = a + b*L",
    "ADD_K": "MT = a + b*L + c*K",
    "ADD_LOGK": "MT = a + b*L + c*log2(K+1)",
    "NL": "MT = a + b*L*integral(|kappa|^(1/3) ds)",
    "YM": "MT = a + b*L^2/(L + c*K)",
    "LIU": "MT = 10^(a + b*log10(L) + c*K/L)",
    "COMP_K": "MT = a + b*L + c*K + d*L*K",
    "COMP_LOGK": "MT = a + b*L + c*log2(K+1) + d*L*K",
}

REQUIRED_FEATURES = {form: ("L", "K") for form in FORM_IDS}
REQUIRED_FEATURES["SL_BASE"] = ("L",)
REQUIRED_FEATURES["NL"] = ("L", "nl")

_NO_INTERCEPT_FORMS = ("NL", "LIU")


class MissingFeatureError(ValueError):
    """A model form was evaluated on features lacking a required field."""


@dataclass(frozen=True)
class TrialFeatures:
    """Per-trial predictors and (optionally) the observed mean movement time."""

    L: float
    K: float
    nl: Optional[float] = None
    mt_mean: Optional[float] = None
    trial_id: Optional[str] = None

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if self.mt_mean is not None and self.mt_mean <= 0:
            raise ValueError("mt_mean must be positive when present")


@dataclass(frozen=True)
class ModelForm:
    form_id: str
    intercept: bool = True

    def __post_init__(self):
        if self.form_id not in FORM_IDS:
            raise ValueError(f"unknown form_id {self.form_id!r}")
        if not self.intercept and self.form_id not in _NO_INTERCEPT_FORMS:
            raise ValueError(f"no-intercept refits are defined only for {_NO_INTERCEPT_FORMS}")

    @property
    def coef_names(self) -> tuple:
        names = {
            "SL_BASE": ("a", "b"),
            "ADD_K": ("a", "b", "c"),
            "ADD_LOGK": ("a", "b", "c"),
            "NL": ("a", "b"),
            "YM": ("a", "b", "c"),
            "LIU": ("a", "b", "c"),
            "COMP_K": ("a", "b", "c", "d"),
            "COMP_LOGK": ("a", "b", "c", "d"),
        }[self.form_id]
        return names if self.intercept else names[1:]

    @property
    def n_coefficients(self) -> int:
        return len(self.coef_names)

    @property
    def formula(self) -> str:
        text = FORMULAS[self.form_id]
        if not self.intercept:
            text = text.replace("a + ", "").replace("(a + ", "(")
        return text

    @property
    def required_features(self) -> tuple:
        return REQUIRED_FEATURES[self.form_id]


@dataclass(frozen=True)
class Coefficients:
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    d: Optional[float] = None

    def for_form(self, form: ModelForm) -> np.ndarray:
        vals = []
        for name in form.coef_names:
            v = getattr(self, name)
            if v is None:
                raise ValueError(f"{form.form_id} requires coefficient {name!r}")
            vals.append(float(v))
        for name in set("abcd") - set(form.coef_names):
            if getattr(self, name) is not None:
                raise ValueError(f"{form.form_id} does not take coefficient {name!r}")
        return np.array(vals)

    @classmethod
    def from_values(cls, form: ModelForm, values: Sequence[float]) -> "Coefficients":
        if len(values) != form.n_coefficients:
            raise ValueError("coefficient count does not match the form")
        return cls(**dict(zip(form.coef_names, map(float, values))))


def _require_nl(form: ModelForm, f: TrialFeatures) -> float:
    if f.nl is None:
        raise MissingFeatureError("NL form requires the nl feature (integral of |kappa|^(1/3) ds)")
    return f.nl


def predict(form: ModelForm, coef: Coefficients, f: TrialFeatures) -> float:
    """Model movement time (ms) for one trial's features."""
    v = coef.for_form(form)
    fid = form.form_id
    if fid == "YM":
        a, b, c = v
        denom = f.L + c * f.K
        if denom <= 0:
            raise ValueError(f"YM denominator L + c*K = {denom} is not positive")
        return a + b * f.L**2 / denom
    if fid == "LIU":
        exponent = float(np.dot(_liu_log_row(form, f), v))
        return 10.0**exponent
    row = design_row(form, f)
    return float(np.dot(row, v))


def _liu_log_row(form: ModelForm, f: TrialFeatures) -> np.ndarray:
    row = [math.log10(f.L), f.K / f.L]
    return np.array(([1.0] if form.intercept else []) + row)


def design_row(form: ModelForm, f: TrialFeatures) -> Union[np.ndarray, Callable]:
    """Predictor row for the linear forms; for LIU the row targets log10(MT).

    For YM (nonlinear in c) a residual closure over (a, b, c) is returned,
    requiring the observed mt_mean.
    """
    fid = form.form_id
    if fid == "YM":
        if f.mt_mean is None:
            raise ValueError("YM residual closure requires mt_mean")

        def residual(params) -> float:
            a, b, c = (params.for_form(form) if isinstance(params, Coefficients) else params)
            denom = f.L + c * f.K
            if denom <= 0:
                raise ValueError(f"YM denominator L + c*K = {denom} is not positive")
            return f.mt_mean - (a + b * f.L**2 / denom)

        return residual
    if fid == "LIU":
        return _liu_log_row(form, f)
    if fid == "SL_BASE":
        row = [f.L]
    elif fid == "ADD_K":
        row = [f.L, f.K]
    elif fid == "ADD_LOGK":
        row = [f.L, math.log2(f.K + 1.0)]
    elif fid == "COMP_K":
        row = [f.L, f.K, f.L * f.K]
    elif fid == "COMP_LOGK":
        row = [f.L, math.log2(f.K + 1.0), f.L * f.K]
    elif fid == "NL":
        row = [f.L * _require_nl(form, f)]
    else:  # pragma: no cover
        raise AssertionError(fid)
    return np.array(([1.0] if form.intercept else []) + row)


def design_matrix(form: ModelForm, features: Sequence[TrialFeatures]) -> np.ndarray:
    return np.vstack([design_row(form, f) for f in features])


def catalog() -> List[dict]:
    """Model listing for the CLI: id, formula, required features."""
    return [
        {
            "form_id": fid,
            "formula": FORMULAS[fid],
            "required_features": list(REQUIRED_FEATURES[fid]),
            "no_intercept_refit": fid in _NO_INTERCEPT_FORMS,
        }
        for fid in FORM_IDS
    ]
