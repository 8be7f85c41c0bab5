"""dB <-> linear conversions, kept in one place so the two domains never drift."""

import math


def db_to_linear(db: float) -> float:
    """Convert a dB value to a linear power ratio."""
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    """Convert a linear power ratio to dB; 0 maps to -inf."""
    if x < 0.0:
        raise ValueError(f"negative power has no dB representation: {x}")
    if x == 0.0:
        return -math.inf
    return 10.0 * math.log10(x)


def wrap_angle_deg(angle: float) -> float:
    """Wrap an angle in degrees to the interval [-180, 180)."""
    return (angle + 180.0) % 360.0 - 180.0
