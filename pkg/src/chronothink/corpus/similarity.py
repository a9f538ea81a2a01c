"""Levenshtein similarity and near-duplicate filtering of generated dialogues."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .records import DialogueRecord

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 90.0


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance.

    Bit-parallel formulation (Myers 1999, Hyyrö 2001) over Python integers:
    one pass over ``b`` with the column of ``a`` packed into a bit vector.
    """
    if a == b:
        return 0
    # shared prefix/suffix never contribute
    start = 0
    while start < len(a) and start < len(b) and a[start] == b[start]:
        start += 1
    end_a, end_b = len(a), len(b)
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a, b = a[start:end_a], b[start:end_b]
    if len(a) > len(b):
        a, b = b, a
    m = len(a)
    if m == 0:
        return len(b)

    peq = {}
    for i, ch in enumerate(a):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    full = (1 << m) - 1
    top = 1 << (m - 1)
    pv, mv, score = full, 0, m
    for ch in b:
        eq = peq.get(ch, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = (mv | ~(xh | pv)) & full
        mh = pv & xh
        if ph & top:
            score += 1
        elif mh & top:
            score -= 1
        ph = ((ph << 1) | 1) & full
        mh = (mh << 1) & full
        pv = (mh | ~(xv | ph)) & full
        mv = ph & xv
    return score


def similarity_ratio(a: str, b: str) -> float:
    """``100 * (1 - lev(a, b) / max(len(a), len(b)))``; 100 for two empty strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 100.0
    return float(100 * (1 - Fraction(levenshtein(a, b), longest)))


@dataclass(frozen=True)
class DiscardEntry:
    generated_id: str
    seed_id: str
    score: float


@dataclass
class FilterResult:
    kept: List[DialogueRecord]
    discarded: List[DiscardEntry]


def best_seed_match(text: str, seeds: Sequence[DialogueRecord]) -> Tuple[Optional[str], float]:
    """Highest-scoring seed for ``text``; the first seed wins ties."""
    best_id, best = None, -1.0
    for seed in seeds:
        score = similarity_ratio(text, seed.text)
        if score > best:
            best_id, best = seed.id, score
    return best_id, best


def filter_corpus(
    generated: Sequence[DialogueRecord],
    seeds: Sequence[DialogueRecord],
    threshold: float = DEFAULT_THRESHOLD,
) -> FilterResult:
    """Drop generated dialogues scoring strictly above ``threshold`` against any seed."""
    if not 0 <= threshold <= 100:
        raise ValueError(f"threshold must lie in [0, 100], got {threshold}")
    if not seeds:
        logger.warning("no seed dialogues given; keeping all %d generated dialogues", len(generated))
        return FilterResult(list(generated), [])
    kept, discarded = [], []
    for record in generated:
        seed_id, score = best_seed_match(record.text, seeds)
        if score > threshold:
            discarded.append(DiscardEntry(record.id, seed_id, score))
        else:
            kept.append(record)
    return FilterResult(kept, discarded)
