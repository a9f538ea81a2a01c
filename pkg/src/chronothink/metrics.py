"""Turn-taking and barge-in metrics over simulation traces.

Latencies are frame differences converted to seconds exactly; the 1.5 s
success window is compared against the exact rational latency, so the
threshold itself is never rounded to a frame.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from .alignment import CompletenessReport
from .sim import EventKind, SimTrace

DEFAULT_WINDOW_S = 1.5
NOT_APPLICABLE = "NOT_APPLICABLE"


@dataclass(frozen=True)
class TurnTakingResult:
    latency_s: Optional[float]
    overlap: bool = False
    latency_frames: Optional[int] = None


@dataclass(frozen=True)
class BargeInResult:
    frame: int
    latency_s: Optional[float]
    success: bool
    latency_frames: Optional[int] = None


def _first(trace: SimTrace, kind: EventKind, after: int = -1) -> Optional[int]:
    for e in trace.events:
        if e.kind is kind and e.frame >= after:
            return e.frame
    return None


def turn_taking_latency(trace: SimTrace) -> TurnTakingResult:
    """Delay from the end of the first user utterance to the agent's first speech onset.

    An agent that starts before the user stops gets latency 0 and
    ``overlap=True``.

    Raises:
        ValueError: if the trace has no USER_END event.
    """
    user_end = _first(trace, EventKind.USER_END)
    if user_end is None:
        raise ValueError(f"trace {trace.dialogue_id!r} has no USER_END event")
    onset = _first(trace, EventKind.AGENT_SPEECH_START)
    if onset is None:
        return TurnTakingResult(None)
    frames = onset - user_end
    overlap = frames < 0
    frames = max(frames, 0)
    return TurnTakingResult(trace.config.clock.seconds_from_frames(frames), overlap, frames)


def per_turn_latencies(trace: SimTrace) -> List[TurnTakingResult]:
    """Latency after every USER_END, not just the first.

    Not one of the reported duplex metrics; a diagnostic only.
    """
    starts = [e.frame for e in trace.events if e.kind is EventKind.AGENT_SPEECH_START]
    out = []
    for e in trace.events:
        if e.kind is not EventKind.USER_END:
            continue
        nxt = next((s for s in starts if s >= e.frame), None)
        if nxt is None:
            out.append(TurnTakingResult(None))
        else:
            out.append(TurnTakingResult(trace.config.clock.seconds_from_frames(nxt - e.frame), False, nxt - e.frame))
    return out


def _speaking_at(trace: SimTrace, frame: int) -> bool:
    speaking = False
    for e in trace.events:
        if e.frame > frame:
            break
        if e.kind is EventKind.AGENT_SPEECH_START:
            speaking = True
        elif e.kind is EventKind.AGENT_SPEECH_STOP:
            speaking = False
    return speaking


def barge_in_results(trace: SimTrace, window_s: float = DEFAULT_WINDOW_S) -> List[BargeInResult]:
    """One result per BARGE_IN_START.

    Latency runs to the first AGENT_SPEECH_STOP at or before the end of the
    interrupted turn; if the agent was already silent it is 0. An agent still
    talking when the turn ends gets no latency and counts as a failure.
    """
    if not window_s > 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    clock = trace.config.clock
    window = Fraction(str(window_s))
    results = []
    for e in trace.events:
        if e.kind is not EventKind.BARGE_IN_START:
            continue
        turn_end = e.payload.get("turn_end", trace.n_frames)
        if not _speaking_at(trace, e.frame):
            frames: Optional[int] = 0
        else:
            stop = next(
                (
                    s.frame
                    for s in trace.events
                    if s.kind is EventKind.AGENT_SPEECH_STOP and e.frame < s.frame <= turn_end
                ),
                None,
            )
            frames = None if stop is None else stop - e.frame
        if frames is None:
            results.append(BargeInResult(e.frame, None, False))
        else:
            ok = clock.exact_seconds(frames) <= window
            results.append(BargeInResult(e.frame, clock.seconds_from_frames(frames), ok, frames))
    return results


def _mean(values: Sequence[float]) -> Optional[float]:
    # fsum is exact, so the mean does not depend on trace order
    if not values:
        return None
    return math.fsum(sorted(values)) / len(values)


def _median(values: Sequence[float]) -> Optional[float]:
    return statistics.median(sorted(values)) if values else None


@dataclass(frozen=True)
class MetricsReport:
    turn_taking_latency_s: Optional[float]
    turn_taking_latency_median_s: Optional[float]
    barge_in_latency_s: Optional[float]
    barge_in_latency_median_s: Optional[float]
    barge_in_success_rate_pct: Optional[float]  # None == not applicable
    n_dialogues: int
    n_turns: int
    n_barge_ins: int
    n_barge_in_successes: int
    n_overlaps: int
    window_s: float
    completeness_raw_pct: Optional[float] = None
    completeness_placement_pct: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        rate = self.barge_in_success_rate_pct
        return {
            "turn_taking_latency_s": self.turn_taking_latency_s,
            "barge_in_latency_s": self.barge_in_latency_s,
            "barge_in_success_rate_pct": NOT_APPLICABLE if rate is None else rate,
            "n_dialogues": self.n_dialogues,
            "n_turns": self.n_turns,
            "n_barge_ins": self.n_barge_ins,
            "completeness_raw_pct": self.completeness_raw_pct,
            "completeness_placement_pct": self.completeness_placement_pct,
            "turn_taking_latency_median_s": self.turn_taking_latency_median_s,
            "barge_in_latency_median_s": self.barge_in_latency_median_s,
            "n_barge_in_successes": self.n_barge_in_successes,
            "n_turn_taking_overlaps": self.n_overlaps,
            "window_s": self.window_s,
        }


def aggregate(
    traces: Sequence[SimTrace],
    completeness: Optional[CompletenessReport] = None,
    window_s: float = DEFAULT_WINDOW_S,
) -> MetricsReport:
    if not traces:
        raise ValueError("aggregate needs at least one trace")
    turn_taking, barge_lat = [], []
    n_barge = n_ok = n_overlap = 0
    for trace in traces:
        if any(e.kind is EventKind.USER_END for e in trace.events):
            tt = turn_taking_latency(trace)
            if tt.latency_s is not None:
                turn_taking.append(tt.latency_s)
            n_overlap += tt.overlap
        for r in barge_in_results(trace, window_s):
            n_barge += 1
            n_ok += r.success
            if r.latency_s is not None:
                barge_lat.append(r.latency_s)
    rate = float(Fraction(100 * n_ok, n_barge)) if n_barge else None
    return MetricsReport(
        turn_taking_latency_s=_mean(turn_taking),
        turn_taking_latency_median_s=_median(turn_taking),
        barge_in_latency_s=_mean(barge_lat),
        barge_in_latency_median_s=_median(barge_lat),
        barge_in_success_rate_pct=rate,
        n_dialogues=len(traces),
        n_turns=sum(t.n_turns for t in traces),
        n_barge_ins=n_barge,
        n_barge_in_successes=n_ok,
        n_overlaps=n_overlap,
        window_s=window_s,
        completeness_raw_pct=None if completeness is None else completeness.raw_pct,
        completeness_placement_pct=None if completeness is None else completeness.placement_pct,
    )
