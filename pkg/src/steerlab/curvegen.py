"""Sinusoid-sum tunnel family: amplitude solving, grid search, trial assembly.

Centerlines are x(t) = t, y(t) = (a/c) * sum_i sin(AM[i] * phi * t) with
phi = periods * 2*pi / x_max.  The search targets a total-curvature value per
K level and a length band per L level, then picks one curve per cell so that
lengths within each L level are as consistent as possible.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import CurveSamples, DEFAULT_SAMPLES, Tunnel, sample_curve, total_curvature

log = logging.getLogger(__name__)

X_MAX_DEFAULT = 1300.0
WIDTH_DEFAULT = 50.0
K_TARGETS = (10.0, 16.0, 22.0)
# length level -> (mean, std) of the reference trial set
LENGTH_LEVELS = ((1500.10, 2.25), (1882.33, 2.23), (2319.75, 16.18))
K_TOLERANCE_SPEC = 0.01  # stored total curvature must sit this close to its target

TRIALSPEC_FIELDS = (
    "trial_id", "level_L", "level_K", "width_px", "x_max_px", "flipped",
    "components", "angle_multipliers", "periods", "amplitude_px",
    "length_px", "total_curvature", "polyline",
)


class AmplitudeSolverError(RuntimeError):
    """Total curvature was found non-monotonic across the bisection bracket."""


class TargetUnreachableError(RuntimeError):
    """No amplitude below the cap reaches the requested total curvature."""


class AssemblyError(ValueError):
    """A trial-set cell has no candidate to pick from."""


@dataclass(frozen=True)
class SinusoidSpec:
    """Generative parameters of one tunnel centerline."""

    angle_multipliers: Tuple[int, ...]
    periods: float
    amplitude: float
    x_max: float = X_MAX_DEFAULT
    flipped: bool = False

    def __post_init__(self):
        ams = tuple(int(m) for m in self.angle_multipliers)
        if not 1 <= len(ams) <= 3:
            raise ValueError("between 1 and 3 sine components are supported")
        if any(m <= 0 for m in ams):
            raise ValueError("angle multipliers must be positive integers")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.periods <= 0 or self.x_max <= 0:
            raise ValueError("periods and x_max must be positive")
        object.__setattr__(self, "angle_multipliers", ams)

    @property
    def components(self) -> int:
        return len(self.angle_multipliers)

    @property
    def phi(self) -> float:
        return self.periods * 2.0 * math.pi / self.x_max


def realize(spec: SinusoidSpec, n_samples: int = DEFAULT_SAMPLES) -> CurveSamples:
    """Sample the spec's centerline with closed-form derivatives."""
    w = np.array(spec.angle_multipliers, dtype=float) * spec.phi
    scale = spec.amplitude / spec.components
    sign = -1.0 if spec.flipped else 1.0

    def y(t):
        t = np.asarray(t, dtype=float)
        return sign * scale * np.sin(np.outer(w, t)).sum(axis=0)

    def dy(t):
        t = np.asarray(t, dtype=float)
        return sign * scale * (w[:, None] * np.cos(np.outer(w, t))).sum(axis=0)

    def d2y(t):
        t = np.asarray(t, dtype=float)
        return -sign * scale * (w[:, None] ** 2 * np.sin(np.outer(w, t))).sum(axis=0)

    zeros = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    ones = lambda t: np.ones_like(np.asarray(t, dtype=float))
    return sample_curve(
        lambda t: np.asarray(t, dtype=float), y, (0.0, spec.x_max), n_samples,
        derivatives=(ones, zeros, dy, d2y),
    )


def solve_amplitude(
    base: SinusoidSpec,
    target_k: float,
    *,
    tol: float = 1e-3,
    n_samples: int = DEFAULT_SAMPLES,
    amplitude_cap: float = 1e4,
) -> float:
    """Amplitude whose realized curve has total curvature target_k (+/- tol).

    Bracketing by doubling followed by bisection; K(0) = 0 guarantees the
    bracket when K is continuous in the amplitude.  Non-monotonic behaviour
    inside the bracket raises AmplitudeSolverError instead of returning a
    silently wrong root.
    """
    if target_k <= 0:
        raise ValueError("target total curvature must be positive")

    def k_of(a: float) -> float:
        return total_curvature(realize(replace(base, amplitude=a), n_samples))

    lo, k_lo = 0.0, 0.0
    hi = 1.0
    k_hi = k_of(hi)
    while k_hi < target_k:
        lo, k_lo = hi, k_hi
        hi *= 2.0
        if hi > amplitude_cap:
            raise TargetUnreachableError(
                f"total curvature {target_k} unreachable with amplitude <= {amplitude_cap}"
            )
        k_hi = k_of(hi)

    slack = 1e-9 * max(1.0, target_k)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        k_mid = k_of(mid)
        if k_mid < k_lo - slack or k_mid > k_hi + slack:
            raise AmplitudeSolverError(
                f"total curvature is non-monotonic in amplitude on [{lo}, {hi}]: "
                f"K({lo})={k_lo:.6f}, K({mid})={k_mid:.6f}, K({hi})={k_hi:.6f}"
            )
        if abs(k_mid - target_k) <= tol:
            return mid
        if k_mid < target_k:
            lo, k_lo = mid, k_mid
        else:
            hi, k_hi = mid, k_mid
    raise AmplitudeSolverError(
        f"bisection failed to reach |K - {target_k}| <= {tol} (bracket [{lo}, {hi}])"
    )


@dataclass(frozen=True)
class TrialSpec:
    """One selected curved-tunnel trial with its measured geometry."""

    trial_id: str
    sinusoid: SinusoidSpec
    width: float
    length: float
    total_curvature: float
    level_L: int
    level_K: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if not (0 <= self.level_L <= 2 and 0 <= self.level_K <= 2):
            raise ValueError("levels must be in {0, 1, 2}")
        expected_id = f"L{self.level_L}-K{self.level_K}"
        if self.trial_id != expected_id:
            raise ValueError(f"trial_id {self.trial_id!r} does not match levels ({expected_id})")
        target = K_TARGETS[self.level_K]
        if abs(self.total_curvature - target) > K_TOLERANCE_SPEC:
            raise ValueError(
                f"total curvature {self.total_curvature} outside {target} +/- {K_TOLERANCE_SPEC}"
            )

    def realize(self, n_samples: int = DEFAULT_SAMPLES) -> CurveSamples:
        return realize(self.sinusoid, n_samples)

    def tunnel(self, n_samples: int = DEFAULT_SAMPLES, flipped: Optional[bool] = None) -> Tunnel:
        spec = self.sinusoid if flipped is None else replace(self.sinusoid, flipped=flipped)
        return Tunnel(realize(spec, n_samples), self.width)


def default_length_bands() -> Tuple[Tuple[float, float], ...]:
    """Admissible length band per L level: reference mean +/- 3 std."""
    return tuple((m - 3 * sd, m + 3 * sd) for m, sd in LENGTH_LEVELS)


def default_param_grid(
    max_multiplier: int = 5,
    np_values: Optional[Sequence[float]] = None,
) -> List[Tuple[Tuple[int, ...], float]]:
    """(angle_multipliers, periods) grid, deduplicated by effective frequencies.

    Two grid points produce the same curve family when they share the component
    count and the multiset {AM[i] * periods}; only the first is kept.
    """
    if np_values is None:
        np_values = np.round(np.arange(0.5, 4.0 + 1e-9, 0.1), 10)
    am_lists: List[Tuple[int, ...]] = []
    rng = range(1, max_multiplier + 1)
    am_lists += [(m,) for m in rng]
    am_lists += list(itertools.combinations(rng, 2))
    am_lists += list(itertools.combinations(rng, 3))

    grid: List[Tuple[Tuple[int, ...], float]] = []
    seen = set()
    for ams in am_lists:
        for np_ in np_values:
            key = (len(ams), tuple(sorted(round(m * np_, 9) for m in ams)))
            if key in seen:
                continue
            seen.add(key)
            grid.append((ams, float(np_)))
    return grid


def grid_search(
    k_targets: Sequence[float] = K_TARGETS,
    length_bands: Optional[Sequence[Tuple[float, float]]] = None,
    param_grid: Optional[Sequence[Tuple[Tuple[int, ...], float]]] = None,
    *,
    width: float = WIDTH_DEFAULT,
    x_max: float = X_MAX_DEFAULT,
    min_radius_px: float = 15.0,
    k_tol: float = 1e-3,
    solve_samples: int = 4096,
    measure_samples: int = DEFAULT_SAMPLES,
) -> List[TrialSpec]:
    """Search the sinusoid grid for curves matching every (L band, K) cell.

    For each grid point and K target the amplitude is solved, the curve is
    re-measured on the fine grid, and candidates falling inside a length band
    are kept.  Candidates whose sharpest bend has radius below
    ``min_radius_px`` are rejected (corner-kink screen).  Cells left empty are
    logged per cell; the caller decides whether that is fatal.
    """
    if length_bands is None:
        length_bands = default_length_bands()
    if param_grid is None:
        param_grid = default_param_grid()

    # trial levels are the canonical design's: each requested target must be
    # one of the canonical total-curvature values
    target_levels = []
    for target in k_targets:
        matches = [i for i, kt in enumerate(K_TARGETS) if abs(target - kt) <= K_TOLERANCE_SPEC]
        if not matches:
            raise ValueError(
                f"total-curvature target {target} is not one of the canonical values {K_TARGETS}"
            )
        target_levels.append(matches[0])

    candidates: List[TrialSpec] = []
    for ams, np_ in param_grid:
        base = SinusoidSpec(ams, np_, 0.0, x_max=x_max)
        for level_k, target in zip(target_levels, k_targets):
            try:
                amp = solve_amplitude(base, target, tol=k_tol, n_samples=solve_samples)
            except TargetUnreachableError:
                continue  # flat family: this K is simply not reachable here
            except AmplitudeSolverError as exc:
                log.warning("skipping grid point AM=%s np=%s for K=%s: %s",
                            ams, np_, target, exc)
                continue
            spec = replace(base, amplitude=amp)
            curve = realize(spec, measure_samples)
            k_meas = total_curvature(curve)
            if abs(k_meas - target) > K_TOLERANCE_SPEC:
                continue
            if curve.kappa.max() > 1.0 / min_radius_px:
                continue
            length = curve.length
            for level_l, (lo, hi) in enumerate(length_bands):
                if lo <= length <= hi:
                    candidates.append(
                        TrialSpec(
                            trial_id=f"L{level_l}-K{level_k}",
                            sinusoid=spec,
                            width=width,
                            length=length,
                            total_curvature=k_meas,
                            level_L=level_l,
                            level_K=level_k,
                        )
                    )
    filled = {(c.level_L, c.level_K) for c in candidates}
    for level_l in range(len(length_bands)):
        for level_k in target_levels:
            if (level_l, level_k) not in filled:
                log.warning("grid search found no candidate for cell L%d-K%d", level_l, level_k)
    return candidates


def assemble_trialset(
    candidates: Sequence[TrialSpec],
    selection_policy: str = "min_length_spread",
) -> List[TrialSpec]:
    """Pick one candidate per cell; the default policy minimizes, per L level,
    the length range across that level's three K cells.

    Deterministic: combinations are scanned in candidate order and the first
    minimum wins.
    """
    cells: Dict[Tuple[int, int], List[TrialSpec]] = {}
    for c in candidates:
        cells.setdefault((c.level_L, c.level_K), []).append(c)
    levels_l = sorted({lk[0] for lk in cells})
    levels_k = sorted({lk[1] for lk in cells})
    for ll in levels_l:
        for kk in levels_k:
            if (ll, kk) not in cells:
                raise AssemblyError(f"no candidate for cell L{ll}-K{kk}")

    chosen: List[TrialSpec] = []
    for ll in levels_l:
        row = [cells[(ll, kk)] for kk in levels_k]
        if selection_policy == "first":
            chosen.extend(r[0] for r in row)
            continue
        if selection_policy != "min_length_spread":
            raise ValueError(f"unknown selection policy {selection_policy!r}")
        best, best_spread = None, math.inf
        for combo in itertools.product(*row):
            lengths = [c.length for c in combo]
            spread = max(lengths) - min(lengths)
            if spread < best_spread:
                best, best_spread = combo, spread
        chosen.extend(best)
    return chosen


# ---------------------------------------------------------------------------
# trialspec v1 serialization


def trialspec_document(trial: TrialSpec, polyline_points: int = 1024) -> dict:
    """UTF-8 JSON document for one trial (trialspec v1 field set)."""
    poly = realize(trial.sinusoid, polyline_points).points
    return {
        "trial_id": trial.trial_id,
        "level_L": trial.level_L,
        "level_K": trial.level_K,
        "width_px": trial.width,
        "x_max_px": trial.sinusoid.x_max,
        "flipped": trial.sinusoid.flipped,
        "components": trial.sinusoid.components,
        "angle_multipliers": list(trial.sinusoid.angle_multipliers),
        "periods": trial.sinusoid.periods,
        "amplitude_px": trial.sinusoid.amplitude,
        "length_px": trial.length,
        "total_curvature": trial.total_curvature,
        "polyline": [[float(x), float(y)] for x, y in poly],
    }


def trialspec_from_document(doc: dict) -> TrialSpec:
    missing = set(TRIALSPEC_FIELDS) - set(doc)
    if missing:
        raise ValueError(f"trialspec document missing fields: {sorted(missing)}")
    extra = set(doc) - set(TRIALSPEC_FIELDS)
    if extra:
        raise ValueError(f"trialspec document has unknown fields: {sorted(extra)}")
    if len(doc["polyline"]) < 1024:
        raise ValueError("trialspec polyline must have at least 1024 points")
    spec = SinusoidSpec(
        angle_multipliers=tuple(doc["angle_multipliers"]),
        periods=doc["periods"],
        amplitude=doc["amplitude_px"],
        x_max=doc["x_max_px"],
        flipped=doc["flipped"],
    )
    if spec.components != doc["components"]:
        raise ValueError("components field disagrees with angle_multipliers")
    return TrialSpec(
        trial_id=doc["trial_id"],
        sinusoid=spec,
        width=doc["width_px"],
        length=doc["length_px"],
        total_curvature=doc["total_curvature"],
        level_L=doc["level_L"],
        level_K=doc["level_K"],
    )


def write_trialset(trials: Sequence[TrialSpec], path, polyline_points: int = 1024) -> List[Path]:
    """Write one trialspec v1 JSON file per trial into a directory."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for trial in trials:
        doc = trialspec_document(trial, polyline_points)
        target = out / f"{trial.trial_id}.json"
        target.write_text(json.dumps(doc), encoding="utf-8")
        written.append(target)
    return written


def read_trialset_documents(path) -> List[dict]:
    """Load trialspec v1 documents from a directory or a JSON array file."""
    p = Path(path)
    if p.is_dir():
        docs = [json.loads(f.read_text(encoding="utf-8")) for f in sorted(p.glob("*.json"))]
    else:
        loaded = json.loads(p.read_text(encoding="utf-8"))
        docs = loaded if isinstance(loaded, list) else [loaded]
    if not docs:
        raise ValueError(f"no trialspec documents found at {path}")
    for doc in docs:
        trialspec_from_document(doc)  # validation
    return sorted(docs, key=lambda d: d["trial_id"])


def read_trialset(path) -> List[TrialSpec]:
    return [trialspec_from_document(d) for d in read_trialset_documents(path)]


def tunnel_from_document(doc: dict, n_samples: int = DEFAULT_SAMPLES) -> Tunnel:
    """Rebuild the exact tunnel (honoring the stored orientation)."""
    return trialspec_from_document(doc).tunnel(n_samples, flipped=doc["flipped"])
