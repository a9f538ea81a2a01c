from __future__ import annotations

import pytest

from chronothink.chain import ChainFormat, parse_chain
from chronothink.corpus.records import DialogueRecord, Turn
from chronothink.tokenizer import WhitespaceTokenizer

BIRTHDAY_UTTERANCE = "Help me order a restaurant to celebrate my birthday this weekend."

BIRTHDAY_CHAIN = """\
[Help me]{INTENT} Request assistance
[order a restaurant]{ACTION} Initiate booking process
[to celebrate my birthday]{LOGIC} Purpose: birthday celebration
[this weekend]{ENTITY} Timeframe: weekend
{KNOWLEDGE} Birthday: Decorations, discounts, or special perks"""

# Three-turn restaurant booking with cross-turn entity binding. The
# restaurant is bound in turn 0 and referenced from the last node of turn 2.
BOOKING_TURNS = [
    (
        "Help me book a table at Trattoria Bella to celebrate my birthday this weekend.",
        """\
[Help me]{INTENT} Request assistance
[book a table]{ACTION} Initiate booking process
[at Trattoria Bella]{ENTITY} Restaurant: Trattoria Bella #ctx:1
[to celebrate my birthday]{LOGIC} Purpose: birthday celebration
[this weekend]{ENTITY} Timeframe: weekend
{KNOWLEDGE} Birthday: Decorations, discounts, or special perks""",
        "Happy early birthday! Trattoria Bella has a lovely terrace. How many guests?",
    ),
    (
        "It will be me and three friends on Saturday evening.",
        """\
[me and three friends]{LOGIC} Party size: me + 3 people = 4 people
[on Saturday evening]{ENTITY} Date: Saturday evening
{ACTION} Check availability for 4 people""",
        "A table for four on Saturday evening is available. Shall I book it?",
    ),
    (
        "Yes please, and can they prepare a cake there?",
        """\
[Yes please]{INTENT} Confirm booking
[can they prepare a cake]{INTENT} Request special arrangement
{KNOWLEDGE} Restaurants usually need advance notice for cakes
[there]{ENTITY} Venue: Trattoria Bella @ctx:1""",
        "Booked. I will ask Trattoria Bella to prepare a birthday cake for you.",
    ),
]


@pytest.fixture
def tokenizer():
    return WhitespaceTokenizer()


@pytest.fixture
def birthday_chain():
    return parse_chain(BIRTHDAY_CHAIN, ChainFormat.ANNOTATED)


@pytest.fixture
def booking_dialogue():
    turns = []
    for user, chain, agent in BOOKING_TURNS:
        turns.append(
            Turn(
                user_text=user,
                user_frames=60,
                agent_text=agent,
                agent_frames=40,
                chain=parse_chain(chain, ChainFormat.ANNOTATED),
            )
        )
    return DialogueRecord("booking", tuple(turns), "user", "agent")


# --------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion

_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    if "acceptance" not in report.keywords:
        return
    _ACCEPTANCE.append((report.nodeid, report.outcome, getattr(report, "_label", None)))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    report._label = doc


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, outcome, label in _ACCEPTANCE:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")
