"""Deterministic synthetic steering agent.

A test instrument, not a cognitive model: it tracks the tunnel centerline at
a curvature-modulated speed with smoothed lateral noise, emitting round-trip
trajectories at 200 Hz.  Identical (config, tunnel, participant, trial,
repetition) inputs produce bit-identical logs.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np
from scipy.signal import lfilter

from .curvegen import TrialSpec
from .geometry import Tunnel
from .metrics import Trajectory

SAMPLE_HZ = 200.0
_NOISE_RHO = 0.95  # AR(1) smoothing of the lateral perturbation


@dataclass(frozen=True)
class AgentConfig:
    """Speed model: v = base_speed * (1 + curvature_gain*|kappa|)^(-beta)."""

    base_speed: float = 0.25  # px/ms, one-way cruising speed
    curvature_gain: float = 150.0  # px, scales local curvature before slowdown
    beta: float = 0.6  # slowdown exponent; 0 disables curvature response
    lateral_noise_sd: float = 0.0  # px
    lookahead: float = 40.0  # px ahead along the centerline for speed sensing
    seed: int = 0

    def __post_init__(self):
        if self.base_speed <= 0:
            raise ValueError("base_speed must be positive")
        if self.lookahead <= 0:
            raise ValueError("lookahead must be positive")
        if self.lateral_noise_sd < 0:
            raise ValueError("lateral_noise_sd must be non-negative")


def _trial_rng(cfg: AgentConfig, participant_index: int, trial_id: str, repetition: int):
    key = (cfg.seed, participant_index, zlib.crc32(trial_id.encode("utf-8")), repetition)
    return np.random.default_rng(np.random.SeedSequence(key))


def _leg_times(tunnel: Tunnel, cfg: AgentConfig, backward: bool) -> np.ndarray:
    """Cumulative traversal time at each centerline sample for one leg.

    Speed depends on the curvature sensed ``lookahead`` px ahead in the travel
    direction, so t(s) integrates 1/v(s) exactly on the sample grid.
    """
    s = tunnel.centerline.s
    kappa = tunnel.centerline.kappa
    length = s[-1]
    if cfg.lookahead >= length:
        raise ValueError("lookahead must be smaller than the tunnel length")
    ahead = np.clip(s + (-cfg.lookahead if backward else cfg.lookahead), 0.0, length)
    k_ahead = np.interp(ahead, s, kappa)
    v = cfg.base_speed * (1.0 + cfg.curvature_gain * np.abs(k_ahead)) ** (-cfg.beta)
    inv = 1.0 / v
    dt = (inv[1:] + inv[:-1]) * 0.5 * np.diff(s)
    return np.concatenate([[0.0], np.cumsum(dt)])


def simulate_trial(
    tunnel: Tunnel,
    cfg: AgentConfig,
    *,
    trial_id: str = "",
    participant_id: str = "sim",
    participant_index: int = 0,
    repetition: int = 0,
    session_id: str = "sim",
    flipped: bool = False,
) -> Trajectory:
    """One round trip through the tunnel, sampled at 200 Hz.

    The agent's arc position follows the exact kinematics of the speed model
    (no stepping error); the emitted position is the centerline point plus a
    smoothed Gaussian perpendicular offset.  start/flag/end click events land
    on the samples where each leg begins/ends.
    """
    s_grid = tunnel.centerline.s
    pts = tunnel.centerline.points
    length = s_grid[-1]

    t_out = _leg_times(tunnel, cfg, backward=False)
    t_back = _leg_times(tunnel, cfg, backward=True)
    T_out, T_back = t_out[-1], t_back[-1]
    total = T_out + T_back

    dt = 1000.0 / SAMPLE_HZ
    n_samples = int(np.ceil(total / dt)) + 1
    t = dt * np.arange(n_samples)

    out_mask = t <= T_out
    s_of_t = np.empty(n_samples)
    s_of_t[out_mask] = np.interp(t[out_mask], t_out, s_grid)
    # inbound leg: time since turnaround maps to distance travelled back
    back_elapsed = np.clip(t[~out_mask] - T_out, 0.0, T_back)
    s_of_t[~out_mask] = _invert_leg(back_elapsed, t_back, s_grid)

    x = np.interp(s_of_t, s_grid, pts[:, 0])
    y = np.interp(s_of_t, s_grid, pts[:, 1])

    if cfg.lateral_noise_sd > 0:
        rng = _trial_rng(cfg, participant_index, trial_id, repetition)
        white = rng.standard_normal(n_samples)
        scale = cfg.lateral_noise_sd * np.sqrt(1.0 - _NOISE_RHO**2)
        noise = lfilter([scale], [1.0, -_NOISE_RHO], white)
        tangents = np.gradient(pts, s_grid, axis=0)
        tx = np.interp(s_of_t, s_grid, tangents[:, 0])
        ty = np.interp(s_of_t, s_grid, tangents[:, 1])
        norm = np.sqrt(tx**2 + ty**2)
        x = x + noise * (-ty / norm)
        y = y + noise * (tx / norm)

    flag_idx = int(np.searchsorted(t, T_out))
    flag_idx = min(flag_idx, n_samples - 1)
    events = (
        (float(t[0]), "start_click"),
        (float(t[flag_idx]), "flag_click"),
        (float(t[-1]), "end_click"),
    )
    return Trajectory(
        t=t, x=x, y=y, events=events,
        trial_id=trial_id, participant_id=participant_id,
        repetition=repetition, flipped=flipped, session_id=session_id,
    )


def _invert_leg(elapsed: np.ndarray, leg_times: np.ndarray, s_grid: np.ndarray):
    """Arc position on the return leg: leg_times integrates travel time in
    increasing-s order, but the leg runs from s = length down to 0, so elapsed
    time e lands at the s whose remaining integral up to the far end equals e."""
    time_from_far = leg_times[-1] - leg_times
    return np.interp(elapsed, time_from_far[::-1], s_grid[::-1])


@dataclass(frozen=True)
class CorpusConfig:
    """Per-participant jitter applied to the base agent configuration."""

    speed_jitter_sd: float = 0.08  # lognormal sigma of the base-speed factor
    noise_jitter_sd: float = 0.2  # lognormal sigma of the lateral-noise factor

    def draw(self, cfg: AgentConfig, rng) -> AgentConfig:
        speed = cfg.base_speed * float(np.exp(rng.normal(0.0, self.speed_jitter_sd)))
        noise = cfg.lateral_noise_sd * float(np.exp(rng.normal(0.0, self.noise_jitter_sd)))
        return replace(cfg, base_speed=speed, lateral_noise_sd=noise)


def simulate_corpus(
    trials: Sequence[TrialSpec],
    participants: int,
    repetitions: int,
    cfg: AgentConfig = AgentConfig(),
    corpus_cfg: CorpusConfig = CorpusConfig(),
    seed: int = 0,
    *,
    block_structure: bool = False,
    tunnel_samples: int = 8192,
) -> List[Trajectory]:
    """Full synthetic corpus: participants x repetitions x trials.

    Per-participant configurations are drawn from the seeded jitter
    distribution; per-trial randomness derives from (seed, participant, trial,
    repetition), so the corpus is reproducible and order-independent.
    """
    if participants < 1 or repetitions < 1:
        raise ValueError("participants and repetitions must be positive")
    if block_structure and repetitions % 3 != 0:
        raise ValueError("block structure requires repetitions divisible by 3")
    cfg = replace(cfg, seed=seed)
    tunnels = {t.trial_id: t.tunnel(tunnel_samples) for t in trials}
    logs: List[Trajectory] = []
    for p_idx in range(participants):
        p_rng = np.random.default_rng(np.random.SeedSequence((seed, 10_000 + p_idx)))
        p_cfg = corpus_cfg.draw(cfg, p_rng)
        pid = f"p{p_idx:02d}"
        for trial in trials:
            for rep in range(repetitions):
                logs.append(
                    simulate_trial(
                        tunnels[trial.trial_id],
                        p_cfg,
                        trial_id=trial.trial_id,
                        participant_id=pid,
                        participant_index=p_idx,
                        repetition=rep,
                        session_id=f"simcorpus-{seed}",
                    )
                )
    return logs
