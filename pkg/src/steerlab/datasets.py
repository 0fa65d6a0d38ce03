"""Reference fixtures from the original 20-participant fixed-width
mouse-steering study: per-trial-type geometry and measured summary statistics.

Movement time is the full round trip (out and back through the tunnel), while
length is the one-way centerline length; the regression constants absorb the
factor of two.
"""

from __future__ import annotations

from pathlib import Path
from typing import List

from .fitting import write_features_csv
from .models import TrialFeatures

WIDTH_PX = 50.0
X_MAX_PX = 1300.0
K_TARGETS = (10.0, 16.0, 22.0)

# trial_id -> (length px, total curvature, MT mean ms, MT std, OPM mean, OPM std,
#              v_avg mean px/ms, v_avg std)
REFERENCE_TRIALS = {
    "L0-K0": (1502.0, 10.0, 11932.85, 2724.46, 0.0021, 0.0024, 0.261, 0.058),
    "L0-K1": (1498.0, 16.0, 13084.73, 2439.85, 0.0013, 0.0020, 0.232, 0.041),
    "L0-K2": (1500.0, 22.0, 14809.09, 3480.69, 0.0005, 0.0007, 0.205, 0.049),
    "L1-K0": (1885.0, 10.0, 15867.06, 3521.73, 0.0028, 0.0031, 0.250, 0.052),
    "L1-K1": (1880.0, 16.0, 17152.55, 4598.70, 0.0027, 0.0020, 0.235, 0.063),
    "L1-K2": (1882.0, 22.0, 18038.69, 3587.48, 0.0019, 0.0021, 0.215, 0.041),
    "L2-K0": (2303.0, 10.0, 20092.95, 4214.74, 0.0052, 0.0042, 0.242, 0.043),
    "L2-K1": (2322.0, 16.0, 21704.08, 5663.71, 0.0034, 0.0029, 0.229, 0.057),
    "L2-K2": (2335.0, 22.0, 21432.13, 4601.69, 0.0018, 0.0017, 0.224, 0.046),
}

# per length level: (mean px, std px) across that level's three trial types
LENGTH_LEVEL_STATS = ((1500.10, 2.25), (1882.33, 2.23), (2319.75, 16.18))

# published coefficients of the best-fitting movement-time models, usable as
# ground truth for planted-model simulations: form_id -> {name: value}
REFERENCE_COEFFICIENTS = {
    "SL_BASE": {"a": -980.0, "b": 9.5},
    "ADD_K": {"a": -3647.4, "b": 9.5, "c": 170.1},
    "ADD_LOGK": {"a": -8693.6, "b": 9.5, "c": 1930.3},
    "COMP_K": {"a": -9579.8, "b": 12.6, "c": 537.2, "d": -0.2},
    "COMP_LOGK": {"a": -22052.8, "b": 12.0, "c": 5238.3, "d": -0.2},
    "YM": {"a": -3771.5, "b": 9.7, "c": -13.8},
    "LIU": {"a": 0.2, "b": 1.2, "c": 8.1},
}


def reference_features() -> List[TrialFeatures]:
    """The nine (L, K, mean MT) fitting points."""
    return [
        TrialFeatures(L=vals[0], K=vals[1], mt_mean=vals[2], trial_id=trial_id)
        for trial_id, vals in sorted(REFERENCE_TRIALS.items())
    ]


def write_reference_features_csv(path) -> Path:
    return write_features_csv(reference_features(), path)
