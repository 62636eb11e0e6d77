import itertools

import pytest

from detffsim.logic import Logic, SignalState, Strength, is_full_swing, resolve

STATES = [SignalState(v, s) for v in Logic for s in Strength]


def test_commutative():
    for a, b in itertools.product(STATES, repeat=2):
        assert resolve(a, b) == resolve(b, a)


def test_associative():
    for a, b, c in itertools.product(STATES, repeat=3):
        assert resolve(resolve(a, b), c) == resolve(a, resolve(b, c))


def test_idempotent():
    for a in STATES:
        assert resolve(a, a) == a


def test_stronger_wins():
    weak_one = SignalState(Logic.ONE, Strength.WEAK)
    strong_zero = SignalState(Logic.ZERO, Strength.STRONG)
    assert resolve(strong_zero, weak_one) == strong_zero
    assert resolve(SignalState(Logic.ZERO, Strength.STORED), weak_one) == weak_one


def test_equal_strength_conflict_is_x():
    for s in Strength:
        assert resolve(SignalState(Logic.ZERO, s), SignalState(Logic.ONE, s)) == SignalState(Logic.X, s)


def test_parse_and_char():
    assert [Logic.parse(c) for c in "01xX"] == [Logic.ZERO, Logic.ONE, Logic.X, Logic.X]
    assert "".join(v.char for v in Logic) == "01x"
    with pytest.raises(ValueError):
        Logic.parse("2")


def test_full_swing():
    assert is_full_swing(Logic.ZERO, Logic.ONE) and is_full_swing(Logic.ONE, Logic.ZERO)
    assert not is_full_swing(Logic.X, Logic.ONE)
    assert not is_full_swing(Logic.ZERO, Logic.X)
