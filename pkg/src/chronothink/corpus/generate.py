"""Thinking-chain generators.

``RuleBasedGenerator`` is a deterministic keyword tagger used as a test
oracle and for offline corpora. ``ExternalClient`` talks to a remote
text-generation endpoint and only accepts output that parses as an
ANNOTATED chain.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

from ..chain import (
    CTX_DEF_RE,
    ChainFormat,
    NodeType,
    ParseError,
    ThinkingChain,
    ThinkingNode,
    parse_chain,
    serialize_chain,
)

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "CHRONOTHINK_GENERATOR_CONFIG"


class ChainGenerator(Protocol):
    def generate(self, turn_text: str, context: Sequence[ThinkingChain] = ()) -> ThinkingChain: ...


# --------------------------------------------------------------------------
# rule-based oracle

DEFAULT_LEXICON: Dict[str, NodeType] = {
    "help me": NodeType.INTENT,
    "i want": NodeType.INTENT,
    "i'd like": NodeType.INTENT,
    "i would like": NodeType.INTENT,
    "i need": NodeType.INTENT,
    "can you": NodeType.INTENT,
    "could you": NodeType.INTENT,
    "looking for": NodeType.INTENT,
    "order": NodeType.ACTION,
    "book": NodeType.ACTION,
    "reserve": NodeType.ACTION,
    "find": NodeType.ACTION,
    "cancel": NodeType.ACTION,
    "buy": NodeType.ACTION,
    "schedule": NodeType.ACTION,
    "recommend": NodeType.ACTION,
    "to celebrate": NodeType.LOGIC,
    "because": NodeType.LOGIC,
    "so that": NodeType.LOGIC,
    "in order to": NodeType.LOGIC,
    "if": NodeType.LOGIC,
    "since": NodeType.LOGIC,
    "for": NodeType.LOGIC,
    "plus": NodeType.LOGIC,
}

DEFAULT_KNOWLEDGE: Dict[str, str] = {
    "birthday": "Decorations, discounts, or special perks",
    "anniversary": "Quiet seating, dessert or champagne offers",
    "vegetarian": "Check for meat-free menu options",
}

_LABELS = {
    NodeType.ENTITY: "Entity",
    NodeType.INTENT: "Goal",
    NodeType.ACTION: "Operation",
    NodeType.LOGIC: "Rule",
}

_TIME_WORDS = (
    "weekend|tonight|tomorrow|today|morning|afternoon|evening|"
    "monday|tuesday|wednesday|thursday|friday|saturday|sunday|"
    "january|february|march|april|may|june|july|august|september|october|november|december"
)
_TEMPORAL_RE = re.compile(
    rf"\b(?:(?:this|next|last)\s+)?(?:{_TIME_WORDS})\b"
    r"|\b\d+(?:[:.]\d+)?(?:\s*(?:am|pm|people|persons|guests))?\b",
    re.IGNORECASE,
)
# multi-word capitalised names, or one capitalised word after a lowercase word
_PROPER_RE = re.compile(r"\b[A-Z][a-z]+(?:\s+[A-Z][a-z]+)+\b|(?<=[a-z] )[A-Z][a-z]+\b")
# capitalised only because they open a sentence or question
_LEADING_FUNCTION_WORDS = frozenset(
    "a an the i is are was do does did can could will would shall should may might "
    "please yes no what when where which who how why".split()
)
_CLAUSE_SPLIT_RE = re.compile(r"[.,;:!?]+|\s+(?:and|but|then|or)\s+", re.IGNORECASE)


@dataclass(frozen=True)
class _Anchor:
    start: int
    end: int
    node_type: NodeType
    proper: bool = False


def _find_anchors(clause: str, lexicon: Mapping[str, NodeType]) -> List[_Anchor]:
    found = []
    lowered = clause.lower()
    for keyword, node_type in lexicon.items():
        for m in re.finditer(rf"\b{re.escape(keyword.lower())}\b", lowered):
            found.append(_Anchor(m.start(), m.end(), node_type))
    for m in _TEMPORAL_RE.finditer(clause):
        found.append(_Anchor(m.start(), m.end(), NodeType.ENTITY))
    for m in _PROPER_RE.finditer(clause):
        start = m.start()
        words = m.group().split()
        while len(words) > 1 and words[0].lower() in _LEADING_FUNCTION_WORDS:
            start = clause.index(words[1], start + len(words[0]))
            words.pop(0)
        if words[0].lower() not in _LEADING_FUNCTION_WORDS:
            found.append(_Anchor(start, m.end(), NodeType.ENTITY, proper=True))
    # earliest first, longest wins at equal start; overlapping anchors are dropped
    found.sort(key=lambda a: (a.start, -(a.end - a.start)))
    anchors, cursor = [], -1
    for a in found:
        if a.start >= cursor:
            anchors.append(a)
            cursor = a.end
    return anchors


def _segments(text: str, lexicon: Mapping[str, NodeType]) -> List[Tuple[str, _Anchor, str]]:
    out = []
    for clause in _CLAUSE_SPLIT_RE.split(text):
        anchors = _find_anchors(clause, lexicon)
        for i, a in enumerate(anchors):
            stop = anchors[i + 1].start if i + 1 < len(anchors) else len(clause)
            seg = clause[a.start : stop].strip()
            if seg:
                out.append((seg.replace("]", ")"), a, clause[a.start : a.end]))
    return out


def _knowledge_nodes(text: str, knowledge_table: Mapping[str, str]) -> List[ThinkingNode]:
    hits = []
    for key, fact in knowledge_table.items():
        m = re.search(rf"\b{re.escape(key)}\b", text, re.IGNORECASE)
        if m:
            hits.append((m.start(), key, fact))
    hits.sort()
    return [ThinkingNode(NodeType.KNOWLEDGE, f"{key.capitalize()}: {fact}") for _, key, fact in hits]


def rule_based_chain(
    turn_text: str,
    lexicon: Mapping[str, NodeType] = DEFAULT_LEXICON,
    knowledge_table: Mapping[str, str] = DEFAULT_KNOWLEDGE,
) -> ThinkingChain:
    """Deterministic keyword chain for one user utterance.

    The utterance is cut at punctuation, at conjunctions and in front of
    every lexicon keyword or entity pattern (dates, numbers, capitalised
    names). Each piece becomes one node typed by its leading keyword, with
    the piece kept as the source segment. Knowledge-table hits are appended
    as KNOWLEDGE nodes.
    """
    return RuleBasedGenerator(lexicon, knowledge_table).generate(turn_text, bind_context=False)


def _defined_entities(context: Sequence[ThinkingChain]) -> Dict[str, int]:
    names = {}
    for chain in context:
        for node in chain.nodes:
            if node.ctx_def is None:
                continue
            name = CTX_DEF_RE.sub("", node.attribute).strip()
            name = name.split(":", 1)[1].strip() if ":" in name else name
            names[name.lower()] = node.ctx_def
    return names


class RuleBasedGenerator:
    """Rule-based ``ChainGenerator`` with cross-turn entity binding.

    A capitalised name seen for the first time gets ``#ctx:N``; later
    mentions in subsequent turns carry ``@ctx:N``.
    """

    def __init__(
        self,
        lexicon: Mapping[str, NodeType] = DEFAULT_LEXICON,
        knowledge_table: Mapping[str, str] = DEFAULT_KNOWLEDGE,
    ) -> None:
        if not lexicon:
            raise ValueError("lexicon must not be empty")
        self.lexicon = dict(lexicon)
        self.knowledge_table = dict(knowledge_table)

    def generate(
        self,
        turn_text: str,
        context: Sequence[ThinkingChain] = (),
        bind_context: bool = True,
    ) -> ThinkingChain:
        known = _defined_entities(context) if bind_context else {}
        next_id = max(known.values(), default=0) + 1
        nodes = []
        for seg, anchor, name in _segments(turn_text, self.lexicon):
            attribute = f"{_LABELS[anchor.node_type]}: {seg}"
            if bind_context and anchor.proper:
                attribute = f"{_LABELS[anchor.node_type]}: {name}"
                key = name.lower()
                if key in known:
                    attribute += f" @ctx:{known[key]}"
                else:
                    known[key] = next_id
                    attribute += f" #ctx:{next_id}"
                    next_id += 1
            nodes.append(ThinkingNode(anchor.node_type, attribute, seg))
        nodes.extend(_knowledge_nodes(turn_text, self.knowledge_table))
        return ThinkingChain(tuple(nodes))


# --------------------------------------------------------------------------
# external endpoint client


class TransientError(Exception):
    """Retryable transport failure (timeouts, 5xx)."""


class GenerationRejected(ValueError):
    """The endpoint answered with text that is not a valid ANNOTATED chain."""

    def __init__(self, request_key: Optional[str], reason: str, text: str) -> None:
        super().__init__(f"rejected generation for {request_key or '<anonymous>'}: {reason}")
        self.request_key = request_key
        self.text = text


#: ``transport(request_body, request_key) -> response_body``
Transport = Callable[[Dict[str, Any], Optional[str]], Dict[str, Any]]


def build_request(turn_text: str, context: Sequence[ThinkingChain]) -> Dict[str, Any]:
    return {
        "turn_text": turn_text,
        "context": [serialize_chain(c, ChainFormat.ANNOTATED) for c in context],
        "format": ChainFormat.ANNOTATED.value,
    }


class HttpTransport:
    """POSTs the request as JSON; the request key travels as ``Idempotency-Key``."""

    def __init__(self, url: str, token: Optional[str] = None, timeout_s: float = 60.0, client=None) -> None:
        import httpx

        self.url = url
        self._httpx = httpx
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = client or httpx.Client(timeout=timeout_s, headers=headers)

    def __call__(self, body: Dict[str, Any], request_key: Optional[str]) -> Dict[str, Any]:
        headers = {"Idempotency-Key": request_key} if request_key else {}
        try:
            resp = self._client.post(self.url, json=body, headers=headers)
        except self._httpx.TransportError as exc:
            raise TransientError(str(exc)) from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransientError(f"HTTP {resp.status_code}")
        resp.raise_for_status()
        return resp.json()

    def close(self) -> None:
        self._client.close()


class ExternalClient:
    """Chain generator backed by a remote endpoint.

    Requests carrying the same key are sent at most once per client; the
    accepted chain is cached. Transient failures are retried with
    exponential backoff. ``generate_many`` caps concurrent requests at
    ``max_in_flight``.
    """

    def __init__(
        self,
        transport: Transport,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        max_in_flight: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.transport = transport
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.max_in_flight = max(1, max_in_flight)
        self._sleep = sleep
        self._cache: Dict[str, ThinkingChain] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, path: str, **kwargs: Any) -> "ExternalClient":
        """Build from a JSON file: ``{"url": ..., "token_env": ..., "timeout_s": ...}``."""
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
        token = os.environ.get(cfg["token_env"]) if cfg.get("token_env") else None
        transport = HttpTransport(cfg["url"], token=token, timeout_s=cfg.get("timeout_s", 60.0))
        for key in ("max_retries", "backoff_s", "max_in_flight"):
            if key in cfg:
                kwargs.setdefault(key, cfg[key])
        return cls(transport, **kwargs)

    @classmethod
    def from_env(cls, **kwargs: Any) -> Optional["ExternalClient"]:
        path = os.environ.get(CONFIG_ENV_VAR)
        return cls.from_config(path, **kwargs) if path else None

    def _call(self, body: Dict[str, Any], key: Optional[str]) -> Dict[str, Any]:
        attempt = 0
        while True:
            try:
                return self.transport(body, key)
            except TransientError as exc:
                if attempt >= self.max_retries:
                    raise
                delay = self.backoff_s * (2**attempt)
                logger.info("retrying %s after %s (%.2fs)", key, exc, delay)
                self._sleep(delay)
                attempt += 1

    def generate(
        self,
        turn_text: str,
        context: Sequence[ThinkingChain] = (),
        request_key: Optional[str] = None,
    ) -> ThinkingChain:
        if request_key is not None:
            with self._lock:
                if request_key in self._cache:
                    return self._cache[request_key]
        response = self._call(build_request(turn_text, context), request_key)
        text = response.get("chain_text")
        if not isinstance(text, str):
            logger.warning("rejected generation %s: no chain_text in response", request_key)
            raise GenerationRejected(request_key, "response has no 'chain_text' string", repr(response))
        try:
            chain = parse_chain(text, ChainFormat.ANNOTATED)
        except ParseError as exc:
            logger.warning("rejected generation %s: %s", request_key, exc)
            raise GenerationRejected(request_key, str(exc), text) from None
        if request_key is not None:
            with self._lock:
                self._cache[request_key] = chain
        return chain

    def generate_many(
        self, requests: Iterable[Tuple[str, str, Sequence[ThinkingChain]]]
    ) -> List[Optional[ThinkingChain]]:
        """Run ``(request_key, turn_text, context)`` requests; rejected ones come back as ``None``."""

        def one(req: Tuple[str, str, Sequence[ThinkingChain]]) -> Optional[ThinkingChain]:
            key, text, ctx = req
            try:
                return self.generate(text, ctx, request_key=key)
            except GenerationRejected:
                return None

        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(one, list(requests)))


def request_key(dialogue_id: str, turn_index: int) -> str:
    return f"{dialogue_id}:{turn_index}"
