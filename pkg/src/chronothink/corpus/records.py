from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from ..alignment import BargeInMark, TurnTiming
from ..chain import ThinkingChain


@dataclass(frozen=True)
class Turn:
    """One user utterance followed by the agent's reply."""

    user_text: str
    user_frames: int
    agent_text: str
    agent_frames: int
    chain: ThinkingChain = field(default_factory=ThinkingChain)
    barge_in: Optional[BargeInMark] = None

    def __post_init__(self) -> None:
        # TurnTiming carries the frame-count checks
        self.timing

    @property
    def timing(self) -> TurnTiming:
        return TurnTiming(self.user_frames, self.agent_frames, self.barge_in)

    def with_barge_in(self, mark: Optional[BargeInMark]) -> "Turn":
        return replace(self, barge_in=mark)


@dataclass(frozen=True)
class DialogueRecord:
    id: str
    turns: Tuple[Turn, ...]
    speaker_a: str = "user"
    speaker_b: str = "agent"

    def __post_init__(self) -> None:
        object.__setattr__(self, "turns", tuple(self.turns))

    @property
    def chains(self) -> Tuple[ThinkingChain, ...]:
        return tuple(t.chain for t in self.turns)

    @property
    def text(self) -> str:
        """User and agent texts of every turn, newline-joined in speaking order."""
        parts = []
        for t in self.turns:
            parts.append(t.user_text)
            parts.append(t.agent_text)
        return "\n".join(parts)
