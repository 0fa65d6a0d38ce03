"""Experiment session protocol: the 135-trial plan (27 homogeneous blocks of
5, seeded order, pre-randomized orientation flips, optional reversal for
counterbalancing) and the live state machine with tutorial gating and
between-block breaks.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Deque, Optional, Sequence, Tuple

import numpy as np

N_BLOCKS = 27
TRIALS_PER_BLOCK = 5
BLOCKS_PER_TYPE = 3
REPS_PER_TYPE = TRIALS_PER_BLOCK * BLOCKS_PER_TYPE  # 15
BREAK_MS = 15000.0

TUTORIAL_WINDOW = 8
TUTORIAL_SPEED_CV_MAX = 0.15
TUTORIAL_MEAN_EXITS_MAX = 2.0
TUTORIAL_MAX_TRIALS = 30

PHASES = ("tutorial", "experiment", "break", "done", "failed_tutorial")


class PlanError(ValueError):
    """The session plan could not be built from the given trial set."""


class ProtocolError(RuntimeError):
    """An event arrived that is illegal for the current phase."""

    def __init__(self, phase: str, event: str, detail: str = ""):
        msg = f"event {event!r} is illegal in phase {phase!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.phase = phase
        self.event = event


@dataclass(frozen=True)
class PlannedTrial:
    trial_id: str
    flipped: bool


@dataclass(frozen=True)
class SessionPlan:
    participant_id: str
    seed: int
    order_reversed: bool
    blocks: Tuple[Tuple[PlannedTrial, ...], ...]

    def __post_init__(self):
        if len(self.blocks) != N_BLOCKS:
            raise PlanError(f"plan must have {N_BLOCKS} blocks")
        counts: Counter = Counter()
        for block in self.blocks:
            if len(block) != TRIALS_PER_BLOCK:
                raise PlanError(f"blocks must hold {TRIALS_PER_BLOCK} trials")
            types = {t.trial_id for t in block}
            if len(types) != 1:
                raise PlanError(f"block mixes trial types: {sorted(types)}")
            counts.update(t.trial_id for t in block)
        bad = {k: v for k, v in counts.items() if v != REPS_PER_TYPE}
        if bad:
            raise PlanError(f"each type must appear {REPS_PER_TYPE} times; got {bad}")

    @property
    def queue(self) -> Tuple[PlannedTrial, ...]:
        return tuple(t for block in self.blocks for t in block)

    def to_document(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "seed": self.seed,
            "order_reversed": self.order_reversed,
            "blocks": [
                [{"trial_id": t.trial_id, "flipped": t.flipped} for t in block]
                for block in self.blocks
            ],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "SessionPlan":
        return cls(
            participant_id=doc["participant_id"],
            seed=int(doc["seed"]),
            order_reversed=bool(doc["order_reversed"]),
            blocks=tuple(
                tuple(PlannedTrial(t["trial_id"], bool(t["flipped"])) for t in block)
                for block in doc["blocks"]
            ),
        )


def make_plan(
    participant_id: str,
    trial_ids: Sequence[str],
    seed: int,
    reversed_order: bool = False,
) -> SessionPlan:
    """Seeded block shuffle with per-trial orientation flips.

    The reversed plan for a given seed is the exact reversal of the
    non-reversed plan's 135-trial queue.
    """
    ids = list(dict.fromkeys(trial_ids))
    if len(ids) != 9:
        raise PlanError(f"expected 9 distinct trial types, got {len(ids)}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed),)))
    block_types = [tid for tid in ids for _ in range(BLOCKS_PER_TYPE)]
    rng.shuffle(block_types)
    flips = rng.random(N_BLOCKS * TRIALS_PER_BLOCK) < 0.5
    queue = [
        PlannedTrial(block_types[b], bool(flips[b * TRIALS_PER_BLOCK + i]))
        for b in range(N_BLOCKS)
        for i in range(TRIALS_PER_BLOCK)
    ]
    if reversed_order:
        queue.reverse()
    blocks = tuple(
        tuple(queue[b * TRIALS_PER_BLOCK : (b + 1) * TRIALS_PER_BLOCK]) for b in range(N_BLOCKS)
    )
    return SessionPlan(participant_id, int(seed), reversed_order, blocks)


# The tutorial runs a pre-randomized sequence of the 9 trial types (with
# orientations), standardized across participants; it repeats if a
# participant needs more than one pass before reaching the threshold.
TUTORIAL_SEQUENCE: Tuple[PlannedTrial, ...] = (
    PlannedTrial("L1-K2", False), PlannedTrial("L0-K1", True), PlannedTrial("L2-K0", False),
    PlannedTrial("L0-K0", True), PlannedTrial("L2-K2", False), PlannedTrial("L1-K0", True),
    PlannedTrial("L0-K2", False), PlannedTrial("L2-K1", True), PlannedTrial("L1-K1", False),
)


@dataclass
class SessionState:
    """Mutable run state; one logical owner applies events serially."""

    plan: SessionPlan
    phase: str = "tutorial"
    tutorial_trials_done: int = 0
    tutorial_window: Deque[Tuple[float, float]] = field(
        default_factory=lambda: deque(maxlen=TUTORIAL_WINDOW)
    )
    block_index: int = 0
    trial_in_block: int = 0
    trials_completed: int = 0
    break_started_ms: Optional[float] = None

    def current_trial(self) -> Optional[PlannedTrial]:
        if self.phase == "tutorial":
            return TUTORIAL_SEQUENCE[self.tutorial_trials_done % len(TUTORIAL_SEQUENCE)]
        if self.phase == "experiment":
            return self.plan.blocks[self.block_index][self.trial_in_block]
        return None

    def repetition_index(self) -> int:
        """Occurrence count of the current trial's type so far (0-based)."""
        if self.phase == "tutorial":
            return self.tutorial_trials_done
        current = self.plan.blocks[self.block_index][self.trial_in_block]
        done = self.plan.queue[: self.trials_completed]
        return sum(1 for t in done if t.trial_id == current.trial_id)


def tutorial_step(
    state: SessionState, avg_speed: float, exits: float
) -> Tuple[SessionState, str]:
    """Record one tutorial trial and decide: continue, pass, or fail.

    The threshold needs a full 8-trial window with speed CV below 0.15 and
    mean exits below 2; 30 trials without reaching it fails the tutorial.
    """
    if state.phase != "tutorial":
        raise ProtocolError(state.phase, "tutorial_step")
    state.tutorial_window.append((float(avg_speed), float(exits)))
    state.tutorial_trials_done += 1

    decision = "continue"
    if len(state.tutorial_window) >= TUTORIAL_WINDOW:
        speeds = np.array([s for s, _ in state.tutorial_window])
        exits_arr = np.array([e for _, e in state.tutorial_window])
        mean_speed = speeds.mean()
        cv = float(np.std(speeds, ddof=1) / mean_speed) if mean_speed > 0 else float("inf")
        if cv < TUTORIAL_SPEED_CV_MAX and exits_arr.mean() < TUTORIAL_MEAN_EXITS_MAX:
            decision = "pass"
    if decision != "pass" and state.tutorial_trials_done >= TUTORIAL_MAX_TRIALS:
        decision = "fail"

    if decision == "pass":
        state.phase = "experiment"
    elif decision == "fail":
        state.phase = "failed_tutorial"
    return state, decision


def advance(
    state: SessionState,
    event: str,
    *,
    avg_speed: Optional[float] = None,
    exits: Optional[float] = None,
    elapsed_ms: Optional[float] = None,
    break_ms: float = BREAK_MS,
) -> SessionState:
    """Apply one protocol event.

    Events: ``trial_completed`` (tutorial or experiment phases; tutorial needs
    avg_speed and exits) and ``break_elapsed`` (break phase, with the elapsed
    break time, gated by the minimum ``break_ms``).  Anything else is a
    protocol error naming phase and event.
    """
    if event == "trial_completed":
        if state.phase == "tutorial":
            if avg_speed is None or exits is None:
                raise ProtocolError(state.phase, event, "tutorial trials need avg_speed and exits")
            tutorial_step(state, avg_speed, exits)
            return state
        if state.phase == "experiment":
            state.trials_completed += 1
            state.trial_in_block += 1
            if state.trial_in_block >= TRIALS_PER_BLOCK:
                state.trial_in_block = 0
                state.block_index += 1
                if state.block_index >= N_BLOCKS:
                    state.phase = "done"
                else:
                    state.phase = "break"
                    state.break_started_ms = None
            return state
        raise ProtocolError(state.phase, event)
    if event == "break_elapsed":
        if state.phase != "break":
            raise ProtocolError(state.phase, event)
        if elapsed_ms is None or elapsed_ms < break_ms:
            raise ProtocolError(state.phase, event, f"break requires at least {break_ms:.0f} ms")
        state.phase = "experiment"
        state.break_started_ms = None
        return state
    raise ProtocolError(state.phase, event)
