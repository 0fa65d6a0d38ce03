"""Trajectory analytics: 200 Hz spline resampling, movement time, out-of-path
movement, average speed, exit counting, effective width, heatmaps, and the
trajlog v1 / measures-CSV file formats.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import Tunnel, signed_offsets

RESAMPLE_HZ = 200.0
W_E_FACTOR = 4.133  # effective width per unit offset standard deviation

EVENT_KINDS = ("start_click", "flag_click", "end_click", "tunnel_exit", "tunnel_reenter")
_CLICK_ORDER = ("start_click", "flag_click", "end_click")


class IncompleteTrialError(ValueError):
    """A required trial event (start/end click) is missing."""


@dataclass(frozen=True)
class Trajectory:
    """Timestamped pointer samples with protocol events."""

    t: np.ndarray  # ms
    x: np.ndarray  # px
    y: np.ndarray  # px
    events: Tuple[Tuple[float, str], ...] = ()
    trial_id: str = ""
    participant_id: str = ""
    repetition: int = 0
    flipped: bool = False
    session_id: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if not (t.shape == x.shape == y.shape) or t.ndim != 1 or len(t) < 1:
            raise ValueError("t, x, y must be equal-length 1-d arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        events = tuple((float(et), str(kind)) for et, kind in self.events)
        for _, kind in events:
            if kind not in EVENT_KINDS:
                raise ValueError(f"unknown event kind {kind!r}")
        clicks = [e for e in events if e[1] in _CLICK_ORDER]
        order = [_CLICK_ORDER.index(k) for _, k in clicks]
        times = [et for et, _ in clicks]
        if order != sorted(order) or times != sorted(times):
            raise ValueError("click events out of order (start before flag before end)")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "events", events)

    def event_time(self, kind: str) -> Optional[float]:
        for et, k in self.events:
            if k == kind:
                return et
        return None

    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


def resample(traj: Trajectory, rate: float = RESAMPLE_HZ) -> Trajectory:
    """Natural cubic splines through (t, x) and (t, y) on a uniform 1/rate
    grid spanning the recorded time range; events pass through untouched."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if len(traj.t) < 4:
        raise ValueError("resampling needs at least 4 samples")
    dt = 1000.0 / rate
    t0, t1 = traj.t[0], traj.t[-1]
    n_steps = int(math.floor((t1 - t0) / dt + 1e-9))
    grid = t0 + dt * np.arange(n_steps + 1)
    sx = CubicSpline(traj.t, traj.x, bc_type="natural")
    sy = CubicSpline(traj.t, traj.y, bc_type="natural")
    return replace(traj, t=grid, x=sx(grid), y=sy(grid))


def _window(traj: Trajectory) -> np.ndarray:
    start = traj.event_time("start_click")
    end = traj.event_time("end_click")
    if start is None or end is None:
        raise IncompleteTrialError("trial window requires start_click and end_click events")
    mask = (traj.t >= start) & (traj.t <= end)
    if not mask.any():
        raise IncompleteTrialError("no samples inside the trial window")
    return mask


def movement_time(traj: Trajectory) -> float:
    """t(end_click) - t(start_click), in ms."""
    start = traj.event_time("start_click")
    end = traj.event_time("end_click")
    if start is None or end is None:
        raise IncompleteTrialError("movement time requires start_click and end_click events")
    return end - start


def phase_durations(traj: Trajectory) -> Tuple[float, float]:
    """(outbound, inbound) ms split at the flag click."""
    flag = traj.event_time("flag_click")
    if flag is None:
        raise IncompleteTrialError("phase split requires a flag_click event")
    start = traj.event_time("start_click")
    end = traj.event_time("end_click")
    if start is None or end is None:
        raise IncompleteTrialError("phase split requires start and end clicks")
    return flag - start, end - flag


def path_distance(traj: Trajectory) -> float:
    mask = _window(traj)
    x, y = traj.x[mask], traj.y[mask]
    return float(np.sqrt(np.diff(x) ** 2 + np.diff(y) ** 2).sum())


def average_speed(traj: Trajectory) -> float:
    """Path distance over movement time, px/ms."""
    return path_distance(traj) / movement_time(traj)


def _membership(traj: Trajectory, tunnel: Tunnel, mask: np.ndarray):
    pts = np.column_stack([traj.x[mask], traj.y[mask]])
    offsets, s_at, inside = signed_offsets(tunnel, pts)
    # endpoint button discs count as inside
    for anchor in (tunnel.start, tunnel.end):
        d = np.sqrt(((pts - np.asarray(anchor)) ** 2).sum(axis=1))
        inside = inside | (d <= tunnel.width)
    return offsets, s_at, inside


def out_of_path_movement(traj: Trajectory, tunnel: Tunnel) -> float:
    """Fraction of trial-window samples outside the tunnel boundary.

    Expects a resampled trajectory so rates are comparable across devices.
    """
    mask = _window(traj)
    _, _, inside = _membership(traj, tunnel, mask)
    return float((~inside).sum()) / float(inside.size)


def count_exits(traj: Trajectory, tunnel: Tunnel) -> int:
    """Number of inside -> outside transitions within the trial window."""
    mask = _window(traj)
    _, _, inside = _membership(traj, tunnel, mask)
    return int(np.sum(inside[:-1] & ~inside[1:]))


def perpendicular_offsets(traj: Trajectory, tunnel: Tunnel) -> np.ndarray:
    """Signed offsets from the centerline for trial-window samples."""
    mask = _window(traj)
    offsets, _, _ = _membership(traj, tunnel, mask)
    return offsets


def effective_width(offsets: Sequence[float]) -> float:
    """W_e = 4.133 x sample standard deviation of perpendicular offsets."""
    o = np.asarray(offsets, dtype=float)
    if o.size < 2:
        raise ValueError("effective width needs at least 2 offsets")
    return W_E_FACTOR * float(np.std(o, ddof=1))


@dataclass(frozen=True)
class TrialMeasures:
    mt: float  # ms
    opm: float  # fraction
    v_avg: float  # px/ms
    exits: int
    w_e: float  # px
    path_distance: float  # px

    def __post_init__(self):
        if self.mt <= 0:
            raise ValueError("movement time must be positive")
        if not 0.0 <= self.opm <= 1.0:
            raise ValueError("OPM must be a fraction in [0, 1]")


def trial_measures(traj: Trajectory, tunnel: Tunnel) -> TrialMeasures:
    """All dependent measures for one (resampled) trajectory."""
    mask = _window(traj)
    offsets, _, inside = _membership(traj, tunnel, mask)
    mt = movement_time(traj)
    dist = path_distance(traj)
    return TrialMeasures(
        mt=mt,
        opm=float((~inside).sum()) / float(inside.size),
        v_avg=dist / mt,
        exits=int(np.sum(inside[:-1] & ~inside[1:])),
        w_e=effective_width(offsets),
        path_distance=dist,
    )


# ---------------------------------------------------------------------------
# heatmap


@dataclass(frozen=True)
class Heatmap:
    counts: np.ndarray  # (ny, nx) sample counts
    origin: Tuple[float, float]
    cell_px: float


def heatmap(trajectories: Iterable[Trajectory], tunnel: Tunnel, cell_px: float) -> Heatmap:
    """Per-cell sample counts on a grid covering the tunnel's padded bbox.

    Samples outside the grid clamp to the border cells so the total count is
    conserved.
    """
    if cell_px <= 0:
        raise ValueError("cell size must be positive")
    trajs = list(trajectories)
    if not trajs:
        raise ValueError("heatmap needs at least one trajectory")
    pts = tunnel.centerline.points
    pad = tunnel.width
    x0, y0 = pts[:, 0].min() - pad, pts[:, 1].min() - pad
    x1, y1 = pts[:, 0].max() + pad, pts[:, 1].max() + pad
    nx = max(1, int(math.ceil((x1 - x0) / cell_px)))
    ny = max(1, int(math.ceil((y1 - y0) / cell_px)))
    counts = np.zeros((ny, nx), dtype=np.int64)
    for traj in trajs:
        ix = np.clip(((traj.x - x0) // cell_px).astype(int), 0, nx - 1)
        iy = np.clip(((traj.y - y0) // cell_px).astype(int), 0, ny - 1)
        np.add.at(counts, (iy, ix), 1)
    return Heatmap(counts, (float(x0), float(y0)), float(cell_px))


def write_heatmap_csv(hm: Heatmap, path) -> Tuple[Path, Path]:
    """Matrix CSV plus a sidecar carrying origin and cell size."""
    p = Path(path)
    with open(p, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in hm.counts:
            writer.writerow([int(v) for v in row])
    sidecar = p.with_suffix(p.suffix + ".meta")
    sidecar.write_text(
        f"origin_x={hm.origin[0]!r}\norigin_y={hm.origin[1]!r}\ncell_px={hm.cell_px!r}\n",
        encoding="utf-8",
    )
    return p, sidecar


# ---------------------------------------------------------------------------
# summaries


def summarize(
    trajectories: Iterable[Trajectory],
    tunnels: Dict[str, Tunnel],
    resample_rate: Optional[float] = RESAMPLE_HZ,
) -> Dict[str, Dict[str, Tuple[float, float]]]:
    """Per-trial-type mean/std table of all measures.

    Trajectories are first averaged per (trial_id, participant) over
    repetitions, then aggregated across participants, so each participant
    contributes one value per trial type.
    """
    per_pair: Dict[Tuple[str, str], List[TrialMeasures]] = {}
    flipped_cache: Dict[str, Tunnel] = {}
    for traj in trajectories:
        if traj.trial_id not in tunnels:
            raise KeyError(f"unknown trial_id {traj.trial_id!r}")
        tunnel = tunnels[traj.trial_id]
        if traj.flipped:
            if traj.trial_id not in flipped_cache:
                flipped_cache[traj.trial_id] = tunnel.flipped()
            tunnel = flipped_cache[traj.trial_id]
        if resample_rate:
            traj = resample(traj, resample_rate)
        per_pair.setdefault((traj.trial_id, traj.participant_id), []).append(
            trial_measures(traj, tunnel)
        )

    fields = ("mt", "opm", "v_avg", "exits", "w_e", "path_distance")
    per_type: Dict[str, Dict[str, List[float]]] = {}
    for (trial_id, _participant), ms in sorted(per_pair.items()):
        bucket = per_type.setdefault(trial_id, {f: [] for f in fields})
        for f in fields:
            bucket[f].append(float(np.mean([getattr(m, f) for m in ms])))

    out: Dict[str, Dict[str, Tuple[float, float]]] = {}
    for trial_id in sorted(per_type):
        out[trial_id] = {
            f: (float(np.mean(vals)), float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
            for f, vals in per_type[trial_id].items()
        }
    return out


# ---------------------------------------------------------------------------
# trajlog v1

TRAJLOG_MAGIC = "trajlog v1"
MEASURES_HEADER = "trial_id,participant_id,mt_ms,opm,v_avg,exits,w_e,path_px"


def format_trajlog(traj: Trajectory) -> str:
    """Serialize to trajlog v1: a header line, then one `t,x,y[,event]` record
    per sample.  Events must coincide with sample timestamps."""
    events = dict((float(t), kind) for t, kind in traj.events)
    lines = [
        f"{TRAJLOG_MAGIC},session_id={traj.session_id},participant_id={traj.participant_id},"
        f"trial_id={traj.trial_id},repetition={traj.repetition},"
        f"flipped={'true' if traj.flipped else 'false'}"
    ]
    for t, x, y in zip(traj.t, traj.x, traj.y):
        rec = f"{t:.6f},{x:.6f},{y:.6f}"
        if float(t) in events:
            rec += f",{events.pop(float(t))}"
        lines.append(rec)
    if events:
        raise ValueError(f"events not aligned with sample timestamps: {sorted(events.items())}")
    return "\n".join(lines) + "\n"


def write_trajlog(traj: Trajectory, path) -> Path:
    p = Path(path)
    p.write_text(format_trajlog(traj), encoding="utf-8")
    return p


def parse_trajlog(text: str) -> Trajectory:
    """Parse trajlog v1 text; raises ValueError on malformed content."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(TRAJLOG_MAGIC):
        raise ValueError("missing trajlog v1 header line")
    header: Dict[str, str] = {}
    for part in lines[0].split(",")[1:]:
        if "=" not in part:
            raise ValueError(f"malformed header field {part!r}")
        key, value = part.split("=", 1)
        header[key] = value
    required = {"session_id", "participant_id", "trial_id", "repetition", "flipped"}
    missing = required - set(header)
    if missing:
        raise ValueError(f"trajlog header missing fields: {sorted(missing)}")
    if header["flipped"] not in ("true", "false"):
        raise ValueError("flipped must be 'true' or 'false'")

    ts, xs, ys, events = [], [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) not in (3, 4):
            raise ValueError(f"malformed sample record: {ln!r}")
        try:
            t, x, y = float(parts[0]), float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ValueError(f"non-numeric sample record: {ln!r}") from exc
        ts.append(t)
        xs.append(x)
        ys.append(y)
        if len(parts) == 4:
            events.append((t, parts[3]))
    if len(ts) < 2:
        raise ValueError("trajlog must contain at least 2 samples")
    return Trajectory(
        t=np.array(ts),
        x=np.array(xs),
        y=np.array(ys),
        events=tuple(events),
        trial_id=header["trial_id"],
        participant_id=header["participant_id"],
        repetition=int(header["repetition"]),
        flipped=header["flipped"] == "true",
        session_id=header["session_id"],
    )


def read_trajlog(path) -> Trajectory:
    return parse_trajlog(Path(path).read_text(encoding="utf-8"))


def format_measures_row(trial_id: str, participant_id: str, m: TrialMeasures) -> str:
    """One measures-CSV row; the shared formatter keeps service and CLI output
    byte-identical."""
    return ",".join(
        [
            trial_id,
            participant_id,
            format(m.mt, ".6f"),
            format(m.opm, ".6f"),
            format(m.v_avg, ".6f"),
            str(m.exits),
            format(m.w_e, ".6f"),
            format(m.path_distance, ".6f"),
        ]
    )


def write_measures_csv(rows: Sequence[Tuple[str, str, TrialMeasures]], path) -> Path:
    p = Path(path)
    lines = [MEASURES_HEADER] + [format_measures_row(t, pid, m) for t, pid, m in rows]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def read_measures_csv(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = MEASURES_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ValueError(f"measures CSV header must be exactly {MEASURES_HEADER!r}")
        rows = []
        for rec in reader:
            rows.append(
                {
                    "trial_id": rec["trial_id"],
                    "participant_id": rec["participant_id"],
                    "mt_ms": float(rec["mt_ms"]),
                    "opm": float(rec["opm"]),
                    "v_avg": float(rec["v_avg"]),
                    "exits": int(rec["exits"]),
                    "w_e": float(rec["w_e"]),
                    "path_px": float(rec["path_px"]),
                }
            )
    return rows
