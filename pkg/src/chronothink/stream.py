"""Frame clock and the agent text-channel vocabulary.

Every timing quantity in the package is an integer count of 80 ms frames.
Seconds only appear at the edges (CLI flags, reports), and conversions go
through exact decimal arithmetic so that 0.64 s is always 8 frames.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Union


class ControlToken(enum.Enum):
    """Control symbols of the agent text channel.

    A plain ``Enum`` (not ``IntEnum``) so a control token never compares
    equal to a text token id.
    """

    SIL = "<SIL>"
    BOS = "<BOS>"
    EOS = "<EOS>"
    PAD = "<PAD>"
    BOC = "<BOC>"
    EOC = "<EOC>"

    def __str__(self) -> str:
        return self.value


SIL = ControlToken.SIL
BOS = ControlToken.BOS
EOS = ControlToken.EOS
PAD = ControlToken.PAD
BOC = ControlToken.BOC
EOC = ControlToken.EOC

#: One slot of the agent text channel: a control symbol or an opaque text id.
AgentTextToken = Union[ControlToken, int]

_CONTROL_BY_LITERAL = {tok.value: tok for tok in ControlToken}


def is_control(token: AgentTextToken) -> bool:
    return isinstance(token, ControlToken)


def check_token(token: AgentTextToken) -> AgentTextToken:
    """Return ``token`` unchanged if it is a valid agent text token."""
    if isinstance(token, ControlToken):
        return token
    if isinstance(token, bool) or not isinstance(token, int) or token < 0:
        raise ValueError(f"text token ids must be non-negative integers, got {token!r}")
    return token


def token_to_json(token: AgentTextToken) -> Union[str, int]:
    """Control tokens become their literal string, text ids stay integers."""
    if isinstance(token, ControlToken):
        return token.value
    return check_token(token)


def token_from_json(value: Union[str, int]) -> AgentTextToken:
    if isinstance(value, str):
        try:
            return _CONTROL_BY_LITERAL[value]
        except KeyError:
            raise ValueError(f"unknown control token literal {value!r}") from None
    return check_token(value)


@dataclass(frozen=True)
class FrameClock:
    """Fixed-rate frame clock (12.5 Hz, 80 ms frames by default)."""

    rate_hz: float = 12.5
    frame_duration_s: float = 0.08

    def __post_init__(self) -> None:
        if not self.rate_hz > 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")
        if self.rate_fraction * self.duration_fraction != 1:
            raise ValueError(
                f"rate_hz={self.rate_hz} and frame_duration_s={self.frame_duration_s} "
                "are not reciprocal"
            )

    # decimal strings, not binary floats: 0.08 must mean exactly 2/25
    @property
    def rate_fraction(self) -> Fraction:
        return Fraction(Decimal(repr(self.rate_hz)))

    @property
    def duration_fraction(self) -> Fraction:
        return Fraction(Decimal(repr(self.frame_duration_s)))

    def frames_from_seconds(self, seconds: float) -> int:
        """Nearest frame count, ties rounded away from zero."""
        if seconds < 0:
            raise ValueError(f"seconds must be non-negative, got {seconds}")
        exact = Decimal(repr(float(seconds))) * Decimal(repr(self.rate_hz))
        return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))

    def seconds_from_frames(self, frames: int) -> float:
        if frames < 0:
            raise ValueError(f"frames must be non-negative, got {frames}")
        return float(self.exact_seconds(frames))

    def exact_seconds(self, frames: int) -> Fraction:
        """Exact rational duration of ``frames`` frames (may be negative)."""
        return frames * self.duration_fraction


DEFAULT_CLOCK = FrameClock()


def frames_from_seconds(seconds: float, clock: FrameClock = DEFAULT_CLOCK) -> int:
    return clock.frames_from_seconds(seconds)


def seconds_from_frames(frames: int, clock: FrameClock = DEFAULT_CLOCK) -> float:
    return clock.seconds_from_frames(frames)
