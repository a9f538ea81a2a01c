"""Chronological thinking chains: data model, parser and serializer.

A chain is an ordered list of typed nodes. Two text forms exist:

``ANNOTATED`` (data generation)::

    [Help me]{INTENT} Request assistance
    {KNOWLEDGE} Birthday: Decorations, discounts, or special perks

``STREAM`` (what the dialogue model sees)::

    {INTENT} Request assistance

Entities are bound across turns with context ids. An ENTITY node defines
id ``N`` by carrying ``#ctx:N`` in its attribute; any node refers back to
it with ``@ctx:N``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .tokenizer import Tokenizer


class NodeType(enum.Enum):
    ENTITY = "ENTITY"
    INTENT = "INTENT"
    ACTION = "ACTION"
    KNOWLEDGE = "KNOWLEDGE"
    LOGIC = "LOGIC"

    @property
    def description(self) -> str:
        return _NODE_ROLES[self][0]

    @property
    def actr_module(self) -> str:
        return _NODE_ROLES[self][1]


_NODE_ROLES = {
    NodeType.ENTITY: ("Extracts entities from the dialogue.", "Visual module"),
    NodeType.INTENT: ("Represents the user's goal", "Goal module"),
    NodeType.ACTION: ("Denotes the agent's executable operation", "Manual module"),
    NodeType.KNOWLEDGE: ("Retrieves factual or procedural knowledge.", "Declarative module"),
    NodeType.LOGIC: ("Captures rules or logic generated by the agent", "Production system"),
}


class ChainFormat(enum.Enum):
    ANNOTATED = "ANNOTATED"
    STREAM = "STREAM"


CTX_REF_RE = re.compile(r"@ctx:(\d+)")
CTX_DEF_RE = re.compile(r"#ctx:(\d+)")


class ParseError(ValueError):
    """Malformed chain text. ``line`` is 1-based."""

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


@dataclass(frozen=True)
class ThinkingNode:
    """One typed reasoning node.

    Context bindings are read off the attribute text, so a node always
    serializes to exactly what it was parsed from.
    """

    node_type: NodeType
    attribute: str
    source_segment: Optional[str] = None

    def __post_init__(self) -> None:
        attribute = self.attribute.strip()
        if not attribute:
            raise ValueError("node attribute must be non-empty")
        if "\n" in attribute or "\r" in attribute:
            raise ValueError("node attribute must be a single line")
        object.__setattr__(self, "attribute", attribute)
        seg = self.source_segment
        if seg is not None and ("]" in seg or "\n" in seg or "\r" in seg):
            raise ValueError(f"source segment may not contain ']' or newlines: {seg!r}")
        if self.node_type is not NodeType.ENTITY and CTX_DEF_RE.search(attribute):
            raise ValueError("only ENTITY nodes may define a context id")
        if len(CTX_DEF_RE.findall(attribute)) > 1:
            raise ValueError("a node may define at most one context id")

    @property
    def ctx_def(self) -> Optional[int]:
        if self.node_type is not NodeType.ENTITY:
            return None
        m = CTX_DEF_RE.search(self.attribute)
        return int(m.group(1)) if m else None

    @property
    def ctx_refs(self) -> Tuple[int, ...]:
        return tuple(int(x) for x in CTX_REF_RE.findall(self.attribute))

    def to_line(self, fmt: ChainFormat = ChainFormat.STREAM) -> str:
        line = "{" + self.node_type.value + "} " + self.attribute
        if fmt is ChainFormat.ANNOTATED and self.source_segment is not None:
            line = "[" + self.source_segment + "]" + line
        return line


@dataclass(frozen=True)
class ThinkingChain:
    nodes: Tuple[ThinkingNode, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __bool__(self) -> bool:
        return bool(self.nodes)

    def types(self) -> List[NodeType]:
        return [n.node_type for n in self.nodes]

    def without_segments(self) -> "ThinkingChain":
        return ThinkingChain(
            tuple(ThinkingNode(n.node_type, n.attribute) for n in self.nodes)
        )


def _parse_line(line: str, lineno: int, fmt: ChainFormat) -> ThinkingNode:
    rest = line.strip()
    segment = None
    if fmt is ChainFormat.ANNOTATED and rest.startswith("["):
        close = rest.find("]")
        if close < 0:
            raise ParseError("unclosed '[' segment", lineno)
        segment = rest[1:close]
        rest = rest[close + 1 :].lstrip()
    if not rest.startswith("{"):
        raise ParseError("missing '{TYPE}' tag", lineno)
    close = rest.find("}")
    if close < 0:
        raise ParseError("unclosed '{' tag", lineno)
    tag = rest[1:close]
    try:
        node_type = NodeType(tag)
    except ValueError:
        raise ParseError(f"unknown node type {tag!r}", lineno) from None
    attribute = rest[close + 1 :].strip()
    if not attribute:
        raise ParseError("empty node attribute", lineno)
    try:
        return ThinkingNode(node_type, attribute, segment)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def parse_chain(text: str, fmt: ChainFormat = ChainFormat.STREAM) -> ThinkingChain:
    """Parse a chain block, one node per non-blank line.

    Raises:
        ParseError: on an unknown type tag, a missing or unclosed tag or
            segment, or an empty attribute.
    """
    nodes = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        nodes.append(_parse_line(line, lineno, fmt))
    return ThinkingChain(tuple(nodes))


def serialize_chain(chain: ThinkingChain, fmt: ChainFormat = ChainFormat.STREAM) -> str:
    return "\n".join(node.to_line(fmt) for node in chain.nodes)


@dataclass(frozen=True)
class BindingError:
    turn: int
    node_index: int
    ctx_id: int

    def __str__(self) -> str:
        return f"turn {self.turn}, node {self.node_index}: dangling @ctx:{self.ctx_id}"


def validate_ctx_bindings(chains: Sequence[ThinkingChain]) -> List[BindingError]:
    """Check that every ``@ctx:N`` resolves to a definition in the same or an earlier turn."""
    defined = set()
    errors = []
    for turn, chain in enumerate(chains):
        # definitions anywhere in the current turn count
        defined.update(n.ctx_def for n in chain.nodes if n.ctx_def is not None)
        for idx, node in enumerate(chain.nodes):
            for ref in node.ctx_refs:
                if ref not in defined:
                    errors.append(BindingError(turn, idx, ref))
    return errors


def node_token_lengths(chain: ThinkingChain, tokenizer: Tokenizer) -> List[int]:
    """Token count of each node's STREAM line, tokenized one node at a time."""
    lengths = []
    for node in chain.nodes:
        n = len(tokenizer.tokenize(node.to_line(ChainFormat.STREAM)))
        if n <= 0:
            raise ValueError(f"tokenizer produced no tokens for node {node.to_line()!r}")
        lengths.append(n)
    return lengths


def node_tokens(chain: ThinkingChain, tokenizer: Tokenizer) -> List[List[int]]:
    return [tokenizer.tokenize(node.to_line(ChainFormat.STREAM)) for node in chain.nodes]


def concat_chains(chains: Iterable[ThinkingChain]) -> ThinkingChain:
    return ThinkingChain(tuple(n for c in chains for n in c.nodes))
