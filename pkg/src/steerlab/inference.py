"""Two-way repeated-measures ANOVA with Greenhouse-Geisser correction and
partial eta squared, plus the power-law-of-practice learning fit.

Inputs are per-participant cell means on a complete, balanced two-factor
design (subjects x levels_A x levels_B).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import stats

_ZERO_SS = 1e-300


@dataclass(frozen=True)
class AnovaEffect:
    effect: str
    F: float
    p: float
    gg_epsilon: float
    partial_eta_sq: float
    df_effect: float
    df_error: float
    ss_effect: float
    ss_error: float


@dataclass(frozen=True)
class RmDataset:
    """Complete balanced within-subject data: values[s, i, j] is one measure
    for participant s at factor-A level i and factor-B level j."""

    values: np.ndarray
    factor_a: str = "L"
    factor_b: str = "K"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise ValueError("values must be (participants, levels_a, levels_b)")
        if v.shape[0] < 2 or v.shape[1] < 2 or v.shape[2] < 2:
            raise ValueError("need at least 2 participants and 2 levels per factor")
        if not np.all(np.isfinite(v)):
            raise ValueError("dataset is unbalanced or incomplete (non-finite cells)")
        object.__setattr__(self, "values", v)


def _orthonormal_contrasts(k: int) -> np.ndarray:
    """(k-1, k) orthonormal basis of the subspace orthogonal to the mean."""
    helmert = np.zeros((k - 1, k))
    for i in range(k - 1):
        helmert[i, : i + 1] = 1.0
        helmert[i, i + 1] = -(i + 1.0)
    return helmert / np.linalg.norm(helmert, axis=1, keepdims=True)


def _gg_epsilon(scores: np.ndarray, contrasts: np.ndarray) -> float:
    """Greenhouse-Geisser epsilon from the covariance of subject-level scores.

    scores: (n_subjects, k) values across the effect's k levels/cells.
    """
    d = contrasts.shape[0]
    cov = np.cov(scores, rowvar=False, ddof=1)
    m = contrasts @ np.atleast_2d(cov) @ contrasts.T
    tr = float(np.trace(m))
    tr2 = float(np.trace(m @ m))
    if tr2 <= _ZERO_SS or tr <= 0:
        return 1.0  # degenerate covariance: no measurable sphericity violation
    return min(1.0, tr * tr / (d * tr2))


def _effect(name, ss_eff, ss_err, df_eff, df_err, epsilon, tol=_ZERO_SS) -> AnovaEffect:
    # tol is relative to the whole decomposition's scale: sums of squares that
    # are pure floating-point cancellation residue count as zero
    if ss_eff <= tol:
        return AnovaEffect(name, 0.0, 1.0, epsilon, 0.0, df_eff, df_err, ss_eff, ss_err)
    if ss_err <= tol:
        warnings.warn(f"zero error variance for effect {name}; F set to +inf", RuntimeWarning)
        return AnovaEffect(name, math.inf, 0.0, epsilon, 1.0, df_eff, df_err, ss_eff, ss_err)
    f = (ss_eff / df_eff) / (ss_err / df_err)
    p = float(stats.f.sf(f, epsilon * df_eff, epsilon * df_err))
    eta = ss_eff / (ss_eff + ss_err)
    return AnovaEffect(name, float(f), p, epsilon, float(eta), df_eff, df_err, ss_eff, ss_err)


def rm_anova(data: RmDataset) -> List[AnovaEffect]:
    """Within-subjects decomposition for both main effects and the interaction.

    Each effect is tested against its own effect-by-subject error term;
    p-values use Greenhouse-Geisser-scaled degrees of freedom; the effect size
    is partial eta squared SS_effect / (SS_effect + SS_error).
    """
    y = data.values
    n, a, b = y.shape
    grand = y.mean()
    m_s = y.mean(axis=(1, 2))
    m_a = y.mean(axis=(0, 2))
    m_b = y.mean(axis=(0, 1))
    m_sa = y.mean(axis=2)
    m_sb = y.mean(axis=1)
    m_ab = y.mean(axis=0)

    ss_a = n * b * float(((m_a - grand) ** 2).sum())
    ss_b = n * a * float(((m_b - grand) ** 2).sum())
    ss_ab = n * float(((m_ab - m_a[:, None] - m_b[None, :] + grand) ** 2).sum())
    ss_as = b * float(((m_sa - m_s[:, None] - m_a[None, :] + grand) ** 2).sum())
    ss_bs = a * float(((m_sb - m_s[:, None] - m_b[None, :] + grand) ** 2).sum())
    resid = (
        y
        - m_ab[None, :, :]
        - m_sa[:, :, None]
        - m_sb[:, None, :]
        + m_a[None, :, None]
        + m_b[None, None, :]
        + m_s[:, None, None]
        - grand
    )
    ss_abs = float((resid**2).sum())

    c_a = _orthonormal_contrasts(a)
    c_b = _orthonormal_contrasts(b)
    eps_a = _gg_epsilon(m_sa, c_a)
    eps_b = _gg_epsilon(m_sb, c_b)
    eps_ab = _gg_epsilon(y.reshape(n, a * b), np.kron(c_a, c_b))

    tol = 1e-12 * (ss_a + ss_b + ss_ab + ss_as + ss_bs + ss_abs) + _ZERO_SS
    return [
        _effect(data.factor_a, ss_a, ss_as, a - 1, (a - 1) * (n - 1), eps_a, tol),
        _effect(data.factor_b, ss_b, ss_bs, b - 1, (b - 1) * (n - 1), eps_b, tol),
        _effect(f"{data.factor_a}x{data.factor_b}", ss_ab, ss_abs,
                (a - 1) * (b - 1), (a - 1) * (b - 1) * (n - 1), eps_ab, tol),
    ]


def rm_anova_oneway(values: np.ndarray, factor: str = "condition") -> AnovaEffect:
    """One-way within-subjects ANOVA on (participants, levels) data.

    Used e.g. to compare fitted learning rates across trial types.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 2 or y.shape[0] < 2 or y.shape[1] < 2:
        raise ValueError("values must be (participants, levels) with at least 2 of each")
    n, k = y.shape
    grand = y.mean()
    m_s = y.mean(axis=1)
    m_k = y.mean(axis=0)
    ss_eff = n * float(((m_k - grand) ** 2).sum())
    ss_err = float(((y - m_s[:, None] - m_k[None, :] + grand) ** 2).sum())
    eps = _gg_epsilon(y, _orthonormal_contrasts(k))
    tol = 1e-12 * (ss_eff + ss_err) + _ZERO_SS
    return _effect(factor, ss_eff, ss_err, k - 1, (k - 1) * (n - 1), eps, tol)


def rm_dataset_from_cells(
    cell_values: Dict[Tuple[int, int], Sequence[float]],
    factor_a: str = "L",
    factor_b: str = "K",
) -> RmDataset:
    """Build an RmDataset from {(level_a, level_b): per-participant values}."""
    levels_a = sorted({k[0] for k in cell_values})
    levels_b = sorted({k[1] for k in cell_values})
    counts = {len(v) for v in cell_values.values()}
    if len(counts) != 1:
        raise ValueError("cells have differing participant counts")
    n = counts.pop()
    out = np.full((n, len(levels_a), len(levels_b)), np.nan)
    for (la, lb), vals in cell_values.items():
        out[:, levels_a.index(la), levels_b.index(lb)] = np.asarray(vals, dtype=float)
    return RmDataset(out, factor_a, factor_b)


@dataclass(frozen=True)
class PowerLawFit:
    """MT(n) = a * (n+1)^(-b): initial level a, learning rate b."""

    a: float
    b: float
    se_a: float
    se_b: float


def fit_power_law_of_practice(mt_series: Sequence[float]) -> PowerLawFit:
    """Log-log regression of movement time on completed-trial count.

    mt_series[i] is the movement time after i completed trials; the model is
    MT(n) = a * (n+1)^(-b), fitted as ln MT = ln a - b ln(n+1).
    """
    y = np.asarray(mt_series, dtype=float)
    if len(y) < 3:
        raise ValueError("need at least 3 points")
    if np.any(y <= 0):
        raise ValueError("movement times must be positive")
    n = np.arange(len(y), dtype=float)
    x = np.log(n + 1.0)
    ly = np.log(y)
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ coef
    dof = len(y) - 2
    if dof > 0:
        cov = (resid @ resid / dof) * np.linalg.inv(X.T @ X)
        se = np.sqrt(np.diag(cov))
    else:
        se = np.zeros(2)
    a = math.exp(coef[0])
    return PowerLawFit(a=a, b=-float(coef[1]), se_a=a * float(se[0]), se_b=float(se[1]))
