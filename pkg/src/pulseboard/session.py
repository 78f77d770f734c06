"""Shared-session state: who sees whose heart rate, and when.

Everything here is a pure function over immutable snapshots; the server owns
the single mutable reference and applies commands in arrival order. Rendering
never mutates, so any number of reader tasks can serialize concurrently.

The privacy rule is structural: a hidden seat's vitals are absent from the
rendered message, not zeroed or masked, so no client-side bug can unhide them.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace

from .errors import (
    ConfigError,
    RoutingError,
    SequencingError,
    TimeRegression,
)
from .estimator import BeatPhase, HrTrace, advance_phase

N_SEATS = 3
HIST_SECONDS = 20


class Condition(enum.Enum):
    """Visibility conditions: everyone's rates, only the others', or none."""

    HR_ALL = "hr_all"
    HR_OTHERS = "hr_others"
    HR_NONE = "hr_none"


def condition_from_str(s: str) -> Condition:
    try:
        return Condition(s.strip().lower())
    except ValueError:
        raise ConfigError(
            f"unknown condition {s!r}, want one of "
            + ", ".join(c.value for c in Condition)
        ) from None


def visible(condition: Condition, viewer: int, subject: int) -> bool:
    """May `viewer` see `subject`'s vitals under `condition`?"""
    if condition is Condition.HR_ALL:
        return True
    if condition is Condition.HR_OTHERS:
        return viewer != subject
    return False


# The two complementary 3x3 latin squares; their six rows are all six
# orderings, so each condition lands in each ordinal position exactly twice.
_A, _B, _C = Condition.HR_ALL, Condition.HR_OTHERS, Condition.HR_NONE
_SQUARE_ROWS = [
    (_A, _B, _C), (_B, _C, _A), (_C, _A, _B),
    (_A, _C, _B), (_C, _B, _A), (_B, _A, _C),
]


def schedule_conditions(n_groups: int) -> list[tuple[Condition, ...]]:
    """Counterbalanced per-group condition orderings.

    n_groups must be a multiple of 3; six groups cover both squares, i.e.
    every possible ordering once.
    """
    if n_groups <= 0 or n_groups % 3 != 0:
        raise ConfigError(f"n_groups must be a positive multiple of 3, got {n_groups}")
    return [_SQUARE_ROWS[i % 6] for i in range(n_groups)]


@dataclass(frozen=True)
class HistBuckets:
    """Rolling 20 s of one-second rate buckets, keyed by floor(t)."""

    entries: tuple[tuple[int, float], ...] = ()
    last_t: float | None = None


def push_bpm(hist: HistBuckets, t: float, bpm: float) -> HistBuckets:
    """Add a sample; same-second pushes overwrite; old buckets fall off."""
    if hist.last_t is not None and t < hist.last_t:
        raise TimeRegression(f"push at {t} after one at {hist.last_t}")
    bucket = int(t // 1)
    kept = {b: v for b, v in hist.entries if b > bucket - HIST_SECONDS}
    kept[bucket] = bpm
    return HistBuckets(tuple(sorted(kept.items())), t)


def render_hist(hist: HistBuckets) -> list[float | None]:
    """Fixed 20-slot view, oldest first, None where a second has no sample."""
    if not hist.entries:
        return [None] * HIST_SECONDS
    newest = hist.entries[-1][0]
    have = dict(hist.entries)
    return [have.get(b) for b in range(newest - HIST_SECONDS + 1, newest + 1)]


@dataclass(frozen=True)
class SeatState:
    seat: int
    name: str
    phase: BeatPhase | None = None
    bpm: float | None = None
    confidence: float = 0.0
    hist: HistBuckets = HistBuckets()

    @property
    def idle(self) -> bool:
        return self.bpm is None


@dataclass(frozen=True)
class SessionState:
    seats: tuple[SeatState, ...]
    condition: Condition
    schedule: tuple[Condition, ...]
    schedule_position: int  # index of the next entry to apply; == len when done
    game_running: bool = False


def new_session(names, schedule: tuple[Condition, ...],
                initial: Condition = Condition.HR_NONE) -> SessionState:
    names = list(names)
    if len(names) != N_SEATS:
        raise ConfigError(f"need exactly {N_SEATS} seat names, got {len(names)}")
    seats = tuple(SeatState(i, names[i]) for i in range(N_SEATS))
    return SessionState(seats, initial, tuple(schedule), 0)


def ingest_estimate(state: SessionState, seat: int, t: float,
                    bpm: float, confidence: float) -> SessionState:
    """Fold one estimator sample into a seat: phase, histogram, latest rate.

    Phase starts at 0 on the first sample and thereafter integrates the
    previous rate across the gap, so the beat animation never jumps.
    """
    if not 0 <= seat < len(state.seats):
        raise RoutingError(f"no seat {seat}")
    if not (40.0 <= bpm <= 200.0):
        raise ConfigError(f"bpm {bpm} outside [40, 200]")
    if not (0.0 <= confidence <= 1.0):
        raise ConfigError(f"confidence {confidence} outside [0, 1]")
    s = state.seats[seat]
    if s.phase is None:
        phase = BeatPhase(0.0, t)
    elif t == s.phase.as_of:
        phase = s.phase
    else:
        held = HrTrace([s.phase.as_of], [s.bpm], [s.confidence])
        phase = advance_phase(s.phase, held, t)
    s2 = replace(s, phase=phase, bpm=bpm, confidence=confidence,
                 hist=push_bpm(s.hist, t, bpm))
    seats = state.seats[:seat] + (s2,) + state.seats[seat + 1 :]
    return replace(state, seats=seats)


def apply_operator_command(state: SessionState, cmd: dict) -> tuple[SessionState, dict]:
    """Apply one operator command; returns (new state, reply message).

    Condition changes are refused mid-game: swapping visibility under the
    players invalidates the block design.
    """
    name = cmd.get("cmd")
    if name == "set_condition":
        if state.game_running:
            raise SequencingError("cannot change condition while a game is running")
        cond = condition_from_str(str(cmd.get("condition", "")))
        return replace(state, condition=cond), _ack(name)
    if name == "advance_schedule":
        if state.game_running:
            raise SequencingError("cannot advance the schedule while a game is running")
        if state.schedule_position >= len(state.schedule):
            return state, {"type": "notice", "notice": "schedule_complete"}
        cond = state.schedule[state.schedule_position]
        return replace(state, condition=cond,
                       schedule_position=state.schedule_position + 1), _ack(name)
    if name == "start_game":
        if state.game_running:
            raise SequencingError("game already running")
        return replace(state, game_running=True), _ack(name)
    if name == "end_game":
        if not state.game_running:
            raise SequencingError("no game running")
        return replace(state, game_running=False), _ack(name)
    if name == "set_name":
        seat = cmd.get("seat")
        if not (isinstance(seat, int) and 0 <= seat < len(state.seats)):
            raise RoutingError(f"no seat {seat!r}")
        label = str(cmd.get("name", "")).strip()
        if not label:
            raise ConfigError("empty name")
        s2 = replace(state.seats[seat], name=label)
        seats = state.seats[:seat] + (s2,) + state.seats[seat + 1 :]
        return replace(state, seats=seats), _ack(name)
    raise ConfigError(f"unknown command {name!r}")


def _ack(cmd: str) -> dict:
    return {"type": "ack", "cmd": cmd}


def _phase_at(s: SeatState, now: float) -> float:
    # extrapolate between 1 Hz estimates so a 20 Hz broadcast animates smoothly
    if s.phase is None:
        return 0.0
    if now <= s.phase.as_of:
        return s.phase.phase
    held = HrTrace([s.phase.as_of], [s.bpm], [s.confidence])
    return advance_phase(s.phase, held, now).phase


def render_state(state: SessionState, viewer, now: float) -> dict:
    """Build the wire message one client should see at time `now`.

    viewer is a seat index or "operator". Pure: identical (state, viewer,
    now) yields an identical message. Vitals of hidden or idle seats are
    simply not present.
    """
    operator = viewer == "operator"
    if not operator and not (isinstance(viewer, int) and 0 <= viewer < len(state.seats)):
        raise RoutingError(f"no viewer {viewer!r}")
    seats = []
    for s in state.seats:
        if operator:
            label = s.name
            can_see = True
        else:
            label = "me" if s.seat == viewer else s.name
            can_see = visible(state.condition, viewer, s.seat)
        entry: dict = {"seat": s.seat, "label": label, "idle": s.idle}
        if can_see and not s.idle:
            entry["bpm"] = round(s.bpm, 3)
            entry["confidence"] = round(s.confidence, 4)
            entry["phase"] = round(_phase_at(s, now), 4)
            entry["hist"] = [v if v is None else round(v, 3)
                             for v in render_hist(s.hist)]
        seats.append(entry)
    msg = {
        "type": "state",
        "viewer": "operator" if operator else viewer,
        "t_ms": round(now * 1000),
        "condition": state.condition.value,
        "seats": seats,
    }
    if operator:
        msg["game_running"] = state.game_running
        msg["schedule"] = [c.value for c in state.schedule]
        msg["schedule_position"] = state.schedule_position
    return msg


def encode_message(msg: dict) -> bytes:
    """Canonical NDJSON encoding shared by every transport."""
    return json.dumps(msg, separators=(",", ":"), sort_keys=True).encode() + b"\n"
