"""Frame-synchronous full-duplex interaction simulator.

The simulator walks the dialogue's frame timeline once. On every frame it
replays the user's speech activity from the record, asks the agent policy
for one text token plus a speaking flag, and turns activity edges and
control-token emissions into timestamped events.

Timeline conventions:

* Turn ``i`` occupies ``S_i + L_i`` frames, where ``L_i`` is the agent span
  after any barge-in truncation; turns are laid end to end.
* The user speaks on the first ``S_i`` frames of a turn. A barge-in at
  ``cut_frame`` makes the user speak again from that frame of the agent
  span onwards, running straight into the next turn's listening window.
* Rising edges are stamped on the first active frame, falling edges on the
  first inactive one.
* One trailing drain frame (user silent) follows the last turn so that
  activity ending on the final frame still yields its falling edge.

Barge-in draws use ``random.Random`` (MT19937) seeded with the string
``"{seed}:{dialogue index}:{dialogue id}"``, and only ``random()`` is
called, so draws are reproducible across platforms and Python versions
and do not depend on how dialogues are distributed over worker processes.
"""

from __future__ import annotations

import enum
import json
import random
from collections.abc import Sequence as SequenceABC
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Any, Dict, Iterable, Iterator, List, Optional, Protocol, Sequence, Tuple, Union

from .alignment import AlignedTurn, BargeInMark, align_dialogue
from .corpus.records import DialogueRecord
from .stream import (
    BOC,
    BOS,
    DEFAULT_CLOCK,
    EOC,
    EOS,
    SIL,
    AgentTextToken,
    FrameClock,
    check_token,
    token_from_json,
    token_to_json,
)
from .tokenizer import get_tokenizer

TRACE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    barge_in_probability: float = 0.5
    stop_delay_s: float = 0.64
    clock: FrameClock = DEFAULT_CLOCK

    def __post_init__(self) -> None:
        if not 0.0 <= self.barge_in_probability <= 1.0:
            raise ValueError(f"barge_in_probability must lie in [0, 1], got {self.barge_in_probability}")
        if self.stop_delay_s < 0:
            raise ValueError(f"stop_delay_s must be non-negative, got {self.stop_delay_s}")

    @property
    def stop_delay_frames(self) -> int:
        return self.clock.frames_from_seconds(self.stop_delay_s)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "barge_in_probability": self.barge_in_probability,
            "stop_delay_s": self.stop_delay_s,
            "rate_hz": self.clock.rate_hz,
            "frame_duration_s": self.clock.frame_duration_s,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SimConfig":
        return cls(
            seed=d["seed"],
            barge_in_probability=d["barge_in_probability"],
            stop_delay_s=d["stop_delay_s"],
            clock=FrameClock(d["rate_hz"], d["frame_duration_s"]),
        )


class EventKind(enum.Enum):
    USER_START = "USER_START"
    USER_END = "USER_END"
    AGENT_SPEECH_START = "AGENT_SPEECH_START"
    AGENT_SPEECH_STOP = "AGENT_SPEECH_STOP"
    BARGE_IN_START = "BARGE_IN_START"
    BOC_EMITTED = "BOC_EMITTED"
    EOC_EMITTED = "EOC_EMITTED"
    BOS_EMITTED = "BOS_EMITTED"
    EOS_EMITTED = "EOS_EMITTED"
    PROTOCOL_ERROR = "PROTOCOL_ERROR"


_TOKEN_EVENTS = {
    BOC: EventKind.BOC_EMITTED,
    EOC: EventKind.EOC_EMITTED,
    BOS: EventKind.BOS_EMITTED,
    EOS: EventKind.EOS_EMITTED,
}


@dataclass(frozen=True)
class SimEvent:
    frame: int
    kind: EventKind
    payload: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SimTrace:
    dialogue_id: str
    n_turns: int
    n_frames: int
    events: Tuple[SimEvent, ...]
    emitted_tokens: Tuple[AgentTextToken, ...]
    config: SimConfig

    def of_kind(self, kind: EventKind) -> List[SimEvent]:
        return [e for e in self.events if e.kind is kind]


class AgentPolicy(Protocol):
    def act(
        self, frame: int, user_active: bool, history: Sequence[AgentTextToken]
    ) -> Tuple[AgentTextToken, bool]:
        """Return this frame's text token and whether the agent is speaking."""
        ...


class _History(SequenceABC):
    """Read-only view of the first ``n`` emitted tokens."""

    __slots__ = ("_tokens", "_n")

    def __init__(self, tokens: List[AgentTextToken], n: int) -> None:
        self._tokens = tokens
        self._n = n

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return tuple(self._tokens[: self._n][idx])
        if idx < 0:
            idx += self._n
        if not 0 <= idx < self._n:
            raise IndexError("history index out of range")
        return self._tokens[idx]


class ScriptedPolicy:
    """Replays a precomputed alignment; speaks on frames after BOS up to and including EOS."""

    def __init__(self, aligned: Sequence[AlignedTurn]) -> None:
        self.tokens: List[AgentTextToken] = []
        self.speaking: List[bool] = []
        for turn in aligned:
            flags = [False] * len(turn.tokens)
            for i in range(turn.bos_index + 1, turn.eos_index + 1):
                flags[i] = True
            self.tokens.extend(turn.tokens)
            self.speaking.extend(flags)

    def act(self, frame: int, user_active: bool, history: Sequence[AgentTextToken]) -> Tuple[AgentTextToken, bool]:
        if frame < len(self.tokens):
            return self.tokens[frame], self.speaking[frame]
        return SIL, False


def scripted_policy(aligned: Sequence[AlignedTurn]) -> ScriptedPolicy:
    return ScriptedPolicy(aligned)


def dialogue_seed(seed: int, index: int, dialogue_id: str) -> str:
    return f"{seed}:{index}:{dialogue_id}"


def inject_barge_ins(
    dialogue: DialogueRecord,
    config: SimConfig,
    rng_seed: Union[int, str, None] = None,
) -> DialogueRecord:
    """Independently mark each turn as interrupted with ``barge_in_probability``.

    Existing marks are replaced. The cut point is uniform over
    ``[1, agent_frames - 1]``; one-frame agent spans are never marked.
    """
    rng = random.Random(config.seed if rng_seed is None else rng_seed)
    p = config.barge_in_probability
    delay = config.stop_delay_frames
    turns = []
    for turn in dialogue.turns:
        mark = None
        if rng.random() < p and turn.agent_frames >= 2:
            cut = 1 + int(rng.random() * (turn.agent_frames - 1))
            mark = BargeInMark(cut, delay)
        turns.append(turn.with_barge_in(mark))
    return DialogueRecord(dialogue.id, tuple(turns), dialogue.speaker_a, dialogue.speaker_b)


@dataclass(frozen=True)
class _Timeline:
    user_active: Tuple[bool, ...]
    barge_ins: Dict[int, Dict[str, int]]
    n_frames: int


def _timeline(dialogue: DialogueRecord) -> _Timeline:
    spans = [t.timing for t in dialogue.turns]
    body = sum(s.total_frames for s in spans)
    n_frames = body + 1 if body else 0
    active = [False] * n_frames
    barge_ins = {}
    offset = 0
    for i, timing in enumerate(spans):
        s, end = timing.user_frames, offset + timing.total_frames
        for f in range(offset, offset + s):
            active[f] = True
        if timing.barge_in is not None:
            onset = offset + s + timing.barge_in.cut_frame
            for f in range(onset, end):
                active[f] = True
            barge_ins[onset] = {"turn": i, "turn_end": end}
        offset = end
    return _Timeline(tuple(active), barge_ins, n_frames)


def run_dialogue(dialogue: DialogueRecord, policy: AgentPolicy, config: SimConfig) -> SimTrace:
    """Simulate one dialogue against ``policy``.

    Policy misbehaviour (BOS while a turn is open, EOS with none open) is
    logged as a PROTOCOL_ERROR event and the run continues.
    """
    tl = _timeline(dialogue)
    events: List[SimEvent] = []
    emitted: List[AgentTextToken] = []
    user_prev = speaking_prev = in_turn = False
    for f in range(tl.n_frames):
        user = tl.user_active[f]
        if user and not user_prev:
            events.append(SimEvent(f, EventKind.USER_START))
        elif user_prev and not user:
            events.append(SimEvent(f, EventKind.USER_END))
        if f in tl.barge_ins:
            events.append(SimEvent(f, EventKind.BARGE_IN_START, dict(tl.barge_ins[f])))

        token, speaking = policy.act(f, user, _History(emitted, f))
        token = check_token(token)
        emitted.append(token)
        kind = _TOKEN_EVENTS.get(token)
        if token is BOS and in_turn:
            events.append(SimEvent(f, EventKind.PROTOCOL_ERROR, {"reason": "BOS while speaking"}))
        elif token is EOS and not in_turn:
            events.append(SimEvent(f, EventKind.PROTOCOL_ERROR, {"reason": "EOS outside a turn"}))
        elif kind is not None:
            events.append(SimEvent(f, kind))
            if token is BOS:
                in_turn = True
            elif token is EOS:
                in_turn = False

        if speaking and not speaking_prev:
            events.append(SimEvent(f, EventKind.AGENT_SPEECH_START))
        elif speaking_prev and not speaking:
            events.append(SimEvent(f, EventKind.AGENT_SPEECH_STOP))
        user_prev, speaking_prev = user, bool(speaking)
    return SimTrace(
        dialogue_id=dialogue.id,
        n_turns=len(dialogue.turns),
        n_frames=tl.n_frames,
        events=tuple(events),
        emitted_tokens=tuple(emitted),
        config=config,
    )


def simulate_dialogue(
    dialogue: DialogueRecord,
    index: int,
    config: SimConfig,
    tokenizer_name: str = "whitespace",
    thinking_enabled: bool = True,
) -> SimTrace:
    """Inject barge-ins, align, and replay the alignment with the scripted policy."""
    marked = inject_barge_ins(dialogue, config, dialogue_seed(config.seed, index, dialogue.id))
    aligned = align_dialogue(marked, get_tokenizer(tokenizer_name), thinking_enabled)
    return run_dialogue(marked, scripted_policy(aligned), config)


def _simulate_star(args: Tuple[Any, ...]) -> SimTrace:
    return simulate_dialogue(*args)


def simulate_corpus(
    dialogues: Sequence[DialogueRecord],
    config: SimConfig,
    tokenizer_name: str = "whitespace",
    thinking_enabled: bool = True,
    jobs: int = 1,
) -> List[SimTrace]:
    work = [(d, i, config, tokenizer_name, thinking_enabled) for i, d in enumerate(dialogues)]
    if jobs <= 1 or len(work) <= 1:
        return [_simulate_star(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_simulate_star, work, chunksize=max(1, len(work) // (4 * jobs))))


# --------------------------------------------------------------------------
# trace files
#
# Line-delimited JSON, one object per line, keys in the order shown:
#   {"type": "trace", "schema": 1, "dialogue_id": ..., "n_turns": ..., "n_frames": ..., "config": {...}}
#   {"type": "event", "frame": 12, "kind": "BOS_EMITTED", "payload": {}}
#   ...
#   {"type": "tokens", "tokens": ["<SIL>", 31337, ...]}
# A file holds any number of traces back to back.


def trace_lines(trace: SimTrace) -> Iterator[str]:
    yield json.dumps(
        {
            "type": "trace",
            "schema": TRACE_SCHEMA_VERSION,
            "dialogue_id": trace.dialogue_id,
            "n_turns": trace.n_turns,
            "n_frames": trace.n_frames,
            "config": trace.config.to_dict(),
        },
        ensure_ascii=False,
    )
    for e in trace.events:
        payload = {k: e.payload[k] for k in sorted(e.payload)}
        yield json.dumps({"type": "event", "frame": e.frame, "kind": e.kind.value, "payload": payload})
    yield json.dumps({"type": "tokens", "tokens": [token_to_json(t) for t in trace.emitted_tokens]})


def write_traces(traces: Iterable[SimTrace], fh: IO[str]) -> None:
    for trace in traces:
        for line in trace_lines(trace):
            fh.write(line)
            fh.write("\n")


class TraceFormatError(ValueError):
    pass


def read_traces(fh: IO[str]) -> List[SimTrace]:
    traces: List[SimTrace] = []
    header: Optional[Dict[str, Any]] = None
    events: List[SimEvent] = []

    def close(tokens: Sequence[AgentTextToken]) -> None:
        assert header is not None
        traces.append(
            SimTrace(
                dialogue_id=header["dialogue_id"],
                n_turns=header["n_turns"],
                n_frames=header["n_frames"],
                events=tuple(events),
                emitted_tokens=tuple(tokens),
                config=SimConfig.from_dict(header["config"]),
            )
        )

    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            kind = obj["type"]
            if kind == "trace":
                if header is not None:
                    raise TraceFormatError("trace header before previous trace was closed")
                if obj.get("schema") != TRACE_SCHEMA_VERSION:
                    raise TraceFormatError(f"unsupported trace schema {obj.get('schema')!r}")
                header, events = obj, []
            elif kind == "event":
                if header is None:
                    raise TraceFormatError("event outside a trace")
                events.append(SimEvent(obj["frame"], EventKind(obj["kind"]), dict(obj.get("payload") or {})))
            elif kind == "tokens":
                if header is None:
                    raise TraceFormatError("tokens outside a trace")
                close([token_from_json(t) for t in obj["tokens"]])
                header = None
            else:
                raise TraceFormatError(f"unknown record type {kind!r}")
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
    if header is not None:
        raise TraceFormatError("truncated trace file: missing tokens record")
    return traces
