"""Switch-level CMOS simulation and dual-edge flip-flop characterization."""

__version__ = "0.1.0"
