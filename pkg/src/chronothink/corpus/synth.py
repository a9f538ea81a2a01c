"""Seeded synthetic corpora for completeness and simulation experiments.

Chain lengths are exact token counts under the whitespace tokenizer.
Integer ranges are inclusive ``(lo, hi)`` pairs drawn uniformly; a
zero-width range yields its single value.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Tuple

from ..chain import NodeType, ThinkingChain, ThinkingNode
from .records import DialogueRecord, Turn

Range = Tuple[int, int]

_WORDS = (
    "table restaurant birthday weekend booking menu price guest time station "
    "train ticket hotel room museum music pizza coffee weather route city "
    "friend family dinner lunch order discount park river window evening"
).split()

_NODE_TYPES = list(NodeType)


@dataclass(frozen=True)
class SynthSpec:
    n_dialogues: int
    turns: Range = (1, 4)
    user_frames: Range = (20, 80)
    chain_tokens: Range = (0, 30)
    response_tokens: Range = (2, 20)
    agent_slack: Range = (0, 20)

    def __post_init__(self) -> None:
        if self.n_dialogues < 0:
            raise ValueError("n_dialogues must be non-negative")
        for name in ("turns", "user_frames", "chain_tokens", "response_tokens", "agent_slack"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
        if self.turns[0] < 1 or self.user_frames[0] < 1:
            raise ValueError("turns and user_frames must be at least 1")
        if min(self.chain_tokens[0], self.response_tokens[0], self.agent_slack[0]) < 0:
            raise ValueError("token counts and slack must be non-negative")
        if self.chain_tokens == (1, 1):
            raise ValueError("a chain cannot have exactly one token")


def _draw(rng: random.Random, bounds: Range) -> int:
    lo, hi = bounds
    return lo if lo == hi else rng.randint(lo, hi)


def _words(rng: random.Random, n: int) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(n))


def synth_chain(rng: random.Random, n_tokens: int) -> ThinkingChain:
    """Random chain whose STREAM lines total exactly ``n_tokens`` whitespace tokens.

    Every node costs one tag token plus at least one attribute word, so a
    single-token chain is impossible and 1 is bumped to 2.
    """
    if n_tokens == 1:
        n_tokens = 2
    nodes: List[ThinkingNode] = []
    left = n_tokens
    while left > 0:
        size = left if left <= 6 else rng.randint(2, min(6, left - 2))
        node_type = rng.choice(_NODE_TYPES)
        segment = None if node_type is NodeType.KNOWLEDGE else _words(rng, rng.randint(1, 4))
        nodes.append(ThinkingNode(node_type, _words(rng, size - 1), segment))
        left -= size
    return ThinkingChain(tuple(nodes))


def synth_corpus(spec: SynthSpec, seed: int) -> List[DialogueRecord]:
    rng = random.Random(seed)
    corpus = []
    for d in range(spec.n_dialogues):
        turns = []
        for _ in range(_draw(rng, spec.turns)):
            user_frames = _draw(rng, spec.user_frames)
            n_chain = _draw(rng, spec.chain_tokens)
            n_resp = _draw(rng, spec.response_tokens)
            turns.append(
                Turn(
                    user_text=_words(rng, max(1, user_frames // 4)),
                    user_frames=user_frames,
                    agent_text=_words(rng, n_resp),
                    agent_frames=n_resp + 2 + _draw(rng, spec.agent_slack),
                    chain=synth_chain(rng, n_chain),
                )
            )
        corpus.append(DialogueRecord(f"synth-{seed}-{d:06d}", tuple(turns)))
    return corpus
