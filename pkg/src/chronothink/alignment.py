"""Agent text-channel layout for one dialogue turn.

A turn occupies ``S + D`` frames: ``S`` listening frames followed by the
agent's ``D``-frame speech span. Without thinking the layout is::

    SIL * S, BOS, R_1 .. R_T, PAD * (D - T - 2), EOS

With thinking, the tail of the silence run is overwritten by
``BOC, chain tokens, EOC`` so that EOC sits right before BOS. Chains that
do not fit are cut back to the longest prefix of whole nodes that does.
Nothing from BOS onwards changes, so the response starts on the same frame
either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

from .chain import ThinkingChain, node_token_lengths, node_tokens
from .stream import BOC, BOS, EOC, EOS, PAD, SIL, AgentTextToken, check_token
from .tokenizer import Tokenizer

if TYPE_CHECKING:
    from .corpus.records import DialogueRecord

DEFAULT_STOP_DELAY_FRAMES = 8  # 0.64 s at 12.5 Hz


class CapacityError(ValueError):
    """The agent span is too short for BOS, the response and EOS."""

    def __init__(self, response_tokens: int, agent_frames: int, turn: Optional[int] = None):
        where = "" if turn is None else f"turn {turn}: "
        super().__init__(
            f"{where}{response_tokens} response tokens need {response_tokens + 2} frames, "
            f"agent span has {agent_frames}"
        )
        self.response_tokens = response_tokens
        self.agent_frames = agent_frames
        self.turn = turn


@dataclass(frozen=True)
class BargeInMark:
    """User interruption ``cut_frame`` frames into the agent span."""

    cut_frame: int
    stop_delay_frames: int = DEFAULT_STOP_DELAY_FRAMES

    def __post_init__(self) -> None:
        if self.cut_frame < 1:
            raise ValueError(f"cut_frame must be >= 1, got {self.cut_frame}")
        if self.stop_delay_frames < 0:
            raise ValueError(f"stop_delay_frames must be >= 0, got {self.stop_delay_frames}")


@dataclass(frozen=True)
class TurnTiming:
    user_frames: int
    agent_frames: int
    barge_in: Optional[BargeInMark] = None

    def __post_init__(self) -> None:
        if self.user_frames < 1:
            raise ValueError(f"user_frames must be >= 1, got {self.user_frames}")
        if self.agent_frames < 1:
            raise ValueError(f"agent_frames must be >= 1, got {self.agent_frames}")
        if self.barge_in is not None and self.barge_in.cut_frame >= self.agent_frames:
            raise ValueError(
                f"cut_frame {self.barge_in.cut_frame} must be < agent_frames {self.agent_frames}"
            )

    @property
    def eos_offset(self) -> int:
        """EOS position relative to BOS."""
        last = self.agent_frames - 1
        if self.barge_in is None:
            return last
        stop = self.barge_in.cut_frame + self.barge_in.stop_delay_frames - 1
        # BOS and EOS need separate slots even for a zero delay at cut_frame 1
        return max(1, min(stop, last))

    @property
    def effective_agent_frames(self) -> int:
        return self.eos_offset + 1

    @property
    def total_frames(self) -> int:
        return self.user_frames + self.effective_agent_frames


@dataclass(frozen=True)
class PlacementResult:
    silence_count: int
    placed_tokens: Tuple[AgentTextToken, ...]
    retained_nodes: int
    truncated: bool
    retained_token_sum: int

    @property
    def window(self) -> Tuple[AgentTextToken, ...]:
        """The full listening-window token run."""
        return (SIL,) * self.silence_count + self.placed_tokens


@dataclass(frozen=True)
class AlignedTurn:
    tokens: Tuple[AgentTextToken, ...]
    response_token_count: int
    bos_index: int
    eos_index: int
    placement: Optional[PlacementResult] = field(default=None, compare=False)

    @property
    def listening_window(self) -> Tuple[AgentTextToken, ...]:
        return self.tokens[: self.bos_index]

    @property
    def response_region(self) -> Tuple[AgentTextToken, ...]:
        return self.tokens[self.bos_index : self.eos_index + 1]

    def __len__(self) -> int:
        return len(self.tokens)


def layout_silence_turn(timing: TurnTiming, response_tokens: Sequence[int]) -> AlignedTurn:
    """Lay out a turn with a pure silence listening window.

    A barge-in mark moves EOS to the stop frame and drops everything after it.

    Raises:
        CapacityError: if ``agent_frames < len(response_tokens) + 2``.
    """
    response = tuple(check_token(t) for t in response_tokens)
    n_resp, span = len(response), timing.agent_frames
    if span < n_resp + 2:
        raise CapacityError(n_resp, span)
    agent = (BOS,) + response + (PAD,) * (span - n_resp - 2) + (EOS,)
    eos_offset = timing.eos_offset
    if eos_offset != span - 1:
        agent = agent[:eos_offset] + (EOS,)
    tokens = (SIL,) * timing.user_frames + agent
    return AlignedTurn(
        tokens=tokens,
        response_token_count=n_resp,
        bos_index=timing.user_frames,
        eos_index=timing.user_frames + eos_offset,
    )


def place_thinking_chain(
    silence_frames: int,
    node_lengths: Sequence[int],
    chain_tokens: Sequence[Sequence[int]],
) -> PlacementResult:
    """Fit a tokenized chain into the last slots of an ``S``-frame silence window.

    If the whole chain (plus BOC/EOC) fits, it is placed as is. Otherwise
    only the longest prefix of whole nodes with ``sum <= S - 2`` is kept; if
    not even the first node fits, the window stays all silence.
    """
    if silence_frames < 0:
        raise ValueError(f"silence window must be non-negative, got {silence_frames}")
    if len(node_lengths) != len(chain_tokens):
        raise ValueError("node_lengths and chain_tokens differ in length")
    for j, (m, toks) in enumerate(zip(node_lengths, chain_tokens)):
        if m <= 0:
            raise ValueError(f"node {j} has non-positive token length {m}")
        if m != len(toks):
            raise ValueError(f"node {j}: length {m} != {len(toks)} tokens")

    budget = silence_frames - 2
    kept, used = 0, 0
    for m in node_lengths:
        if used + m > budget:
            break
        used += m
        kept += 1
    truncated = kept < len(node_lengths)
    if kept == 0:
        return PlacementResult(silence_frames, (), 0, truncated, 0)
    block = [BOC]
    for toks in chain_tokens[:kept]:
        block.extend(check_token(t) for t in toks)
    block.append(EOC)
    return PlacementResult(
        silence_count=silence_frames - (used + 2),
        placed_tokens=tuple(block),
        retained_nodes=kept,
        truncated=truncated,
        retained_token_sum=used,
    )


def align_turn(
    timing: TurnTiming,
    chain: ThinkingChain,
    response_tokens: Sequence[int],
    tokenizer: Tokenizer,
) -> AlignedTurn:
    """Silence layout with the thinking chain written over the tail of the window."""
    base = layout_silence_turn(timing, response_tokens)
    per_node = node_tokens(chain, tokenizer)
    placement = place_thinking_chain(timing.user_frames, [len(t) for t in per_node], per_node)
    tokens = placement.window + base.tokens[base.bos_index :]
    return AlignedTurn(
        tokens=tokens,
        response_token_count=base.response_token_count,
        bos_index=base.bos_index,
        eos_index=base.eos_index,
        placement=placement,
    )


def align_dialogue(
    dialogue: "DialogueRecord",
    tokenizer: Tokenizer,
    thinking_enabled: bool = True,
) -> List[AlignedTurn]:
    """Align every turn; turns are laid end to end on the frame timeline.

    Raises:
        CapacityError: for the first turn whose agent span is too short,
            with ``turn`` set to its index.
    """
    empty = ThinkingChain()
    out = []
    for i, turn in enumerate(dialogue.turns):
        timing = turn.timing
        response = tokenizer.tokenize(turn.agent_text)
        try:
            out.append(align_turn(timing, turn.chain if thinking_enabled else empty, response, tokenizer))
        except CapacityError as exc:
            raise CapacityError(exc.response_tokens, exc.agent_frames, turn=i) from None
    return out


def turn_offsets(aligned: Sequence[AlignedTurn]) -> List[int]:
    """Global frame index at which each aligned turn starts."""
    offsets, pos = [], 0
    for turn in aligned:
        offsets.append(pos)
        pos += len(turn.tokens)
    return offsets


def flatten(aligned: Sequence[AlignedTurn]) -> List[AgentTextToken]:
    return [tok for turn in aligned for tok in turn.tokens]


@dataclass(frozen=True)
class CompletenessReport:
    """Share of turns whose chain fits the listening window, as percentages.

    ``raw_pct`` counts ``M < S``; ``placement_pct`` counts turns whose chain
    is placed without truncation (``M == 0`` or ``M + 2 <= S``).
    """

    raw_pct: float
    placement_pct: float
    n_turns: int
    raw_hits: int
    placement_hits: int

    @classmethod
    def from_counts(cls, raw_hits: int, placement_hits: int, n_turns: int) -> "CompletenessReport":
        if n_turns <= 0:
            raise ValueError("completeness needs at least one turn")
        pct = lambda k: float(Fraction(100 * k, n_turns))  # noqa: E731
        return cls(pct(raw_hits), pct(placement_hits), n_turns, raw_hits, placement_hits)

    @property
    def raw_ratio(self) -> Fraction:
        return Fraction(self.raw_hits, self.n_turns)

    @property
    def placement_ratio(self) -> Fraction:
        return Fraction(self.placement_hits, self.n_turns)


def chain_fits(chain_tokens: int, user_frames: int) -> Tuple[bool, bool]:
    """(raw, placement) completeness flags for one turn."""
    raw = chain_tokens < user_frames
    placement = chain_tokens == 0 or chain_tokens + 2 <= user_frames
    return raw, placement


def completeness_stats(dialogues: Sequence["DialogueRecord"], tokenizer: Tokenizer) -> CompletenessReport:
    raw = placed = n = 0
    for dialogue in dialogues:
        for turn in dialogue.turns:
            m = sum(node_token_lengths(turn.chain, tokenizer))
            r, p = chain_fits(m, turn.user_frames)
            raw += r
            placed += p
            n += 1
    return CompletenessReport.from_counts(raw, placed, n)
