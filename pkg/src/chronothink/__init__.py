"""Chronological thinking for full-duplex dialogue streams.

Chain parsing, silence-slot alignment, frame-level duplex simulation with
barge-in, and turn-taking metrics. No neural model is involved.
"""

from .alignment import (
    AlignedTurn,
    BargeInMark,
    CapacityError,
    CompletenessReport,
    PlacementResult,
    TurnTiming,
    align_dialogue,
    align_turn,
    completeness_stats,
    layout_silence_turn,
    place_thinking_chain,
)
from .chain import (
    BindingError,
    ChainFormat,
    NodeType,
    ParseError,
    ThinkingChain,
    ThinkingNode,
    node_token_lengths,
    parse_chain,
    serialize_chain,
    validate_ctx_bindings,
)
from .metrics import MetricsReport, aggregate, barge_in_results, turn_taking_latency
from .sim import SimConfig, SimEvent, SimTrace, inject_barge_ins, run_dialogue, scripted_policy
from .stream import ControlToken, FrameClock, frames_from_seconds, seconds_from_frames
from .tokenizer import CharTokenizer, Tokenizer, WhitespaceTokenizer, get_tokenizer

__version__ = "0.1.0"

__all__ = [
    "aggregate",
    "align_dialogue",
    "align_turn",
    "AlignedTurn",
    "barge_in_results",
    "BargeInMark",
    "BindingError",
    "CapacityError",
    "ChainFormat",
    "CharTokenizer",
    "completeness_stats",
    "CompletenessReport",
    "ControlToken",
    "FrameClock",
    "frames_from_seconds",
    "get_tokenizer",
    "inject_barge_ins",
    "layout_silence_turn",
    "MetricsReport",
    "node_token_lengths",
    "NodeType",
    "parse_chain",
    "ParseError",
    "place_thinking_chain",
    "PlacementResult",
    "run_dialogue",
    "scripted_policy",
    "seconds_from_frames",
    "serialize_chain",
    "SimConfig",
    "SimEvent",
    "SimTrace",
    "ThinkingChain",
    "ThinkingNode",
    "Tokenizer",
    "turn_taking_latency",
    "TurnTiming",
    "validate_ctx_bindings",
    "WhitespaceTokenizer",
]
