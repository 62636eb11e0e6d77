"""Three-valued logic with drive strengths."""

from enum import IntEnum
from typing import NamedTuple


class Logic(IntEnum):
    ZERO = 0
    ONE = 1
    X = 2

    @classmethod
    def parse(cls, text: str) -> "Logic":
        try:
            return {"0": cls.ZERO, "1": cls.ONE, "x": cls.X}[text.strip().lower()]
        except KeyError:
            raise ValueError(f"logic value must be 0, 1 or x, got {text!r}") from None

    @property
    def char(self) -> str:
        return "01x"[self]


class Strength(IntEnum):
    STORED = 0
    WEAK = 1
    STRONG = 2


class SignalState(NamedTuple):
    value: Logic
    strength: Strength

    def __str__(self) -> str:
        return f"{self.value.char}/{self.strength.name.lower()}"


def resolve(a: SignalState, b: SignalState) -> SignalState:
    """Wired resolution: stronger wins, equal-strength disagreement is X."""
    if a.strength != b.strength:
        return a if a.strength > b.strength else b
    if a.value == b.value:
        return a
    return SignalState(Logic.X, a.strength)


def is_full_swing(old: Logic, new: Logic) -> bool:
    return old != new and old != Logic.X and new != Logic.X


UNKNOWN = SignalState(Logic.X, Strength.STORED)
STRONG_ZERO = SignalState(Logic.ZERO, Strength.STRONG)
STRONG_ONE = SignalState(Logic.ONE, Strength.STRONG)
