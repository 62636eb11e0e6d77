"""Engineering-notation quantities used by the file formats and the CLI."""

import re

SCALE = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3, "k": 1e3, "meg": 1e6, "g": 1e9}

_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(.*)$")


def parse_quantity(text: str, unit: str = "") -> float:
    """Parse ``600n``, ``21fF``, ``7.5ns``, ``125MHz`` or ``1.8V`` to an SI float.

    ``unit`` is the base unit that may trail the number (``s``, ``Hz``, ``F``,
    ``V``).  A bare number is already in SI units.  SPICE prefixes apply, with
    ``meg`` for 1e6; ``MHz`` is the one place an upper-case ``M`` means mega.
    """
    m = _NUMBER.match(text.strip())
    if m is None:
        raise ValueError(f"not a quantity: {text!r}")
    value = float(m.group(1))
    rest = m.group(2)
    scale = 1.0
    if rest.lower().startswith("meg"):
        scale, rest = 1e6, rest[3:]
    elif unit.lower() == "hz" and rest.startswith("M"):
        scale, rest = 1e6, rest[1:]
    elif rest and rest[0].lower() in SCALE:
        scale, rest = SCALE[rest[0].lower()], rest[1:]
    if rest and rest.lower() != unit.lower():
        raise ValueError(f"bad unit suffix in {text!r}")
    return value * scale


def to_ps(text: str) -> int:
    """Parse a time quantity to integer picoseconds."""
    return int(round(parse_quantity(text, "s") * 1e12))


def format_number(value: float) -> str:
    return f"{value:.12g}"
