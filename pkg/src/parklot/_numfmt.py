import math


def fmt_real(value):
    """Shortest round-trip text for a real, with integral values printed bare."""
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"cannot format non-finite value {value!r}")
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)
