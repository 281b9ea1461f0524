"""Time handling. All times are integer nanosecond ticks internally."""

from decimal import Decimal, InvalidOperation
import re

_SCALE = {"ns": 1, "us": 1000, "µs": 1000}
_TIME_RE = re.compile(r"^\s*(\+?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ns|us|µs)\s*$")


def parse_time(text):
    """Parse ``"12.5us"`` or ``"500ns"`` into integer nanoseconds.

    The unit suffix is mandatory and the value must be a non-negative, exact
    number of nanoseconds; ``"0.3ns"`` is rejected rather than rounded.
    """
    if not isinstance(text, str):
        raise ValueError(f"time value {text!r} needs a unit suffix (ns or us)")
    m = _TIME_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse time {text!r}; expected e.g. '500ns' or '12.5us'")
    try:
        ns = Decimal(m.group(1)) * _SCALE[m.group(2)]
    except InvalidOperation as exc:  # pragma: no cover - regex already filters
        raise ValueError(f"cannot parse time {text!r}") from exc
    if ns != ns.to_integral_value():
        raise ValueError(f"time {text!r} is not a whole number of nanoseconds")
    return int(ns)


def format_time(ns):
    """Render integer nanoseconds with the shortest exact unit."""
    ns = int(ns)
    if ns != 0 and ns % 1000 == 0:
        return f"{ns // 1000}us"
    if ns % 100 == 0 and abs(ns) >= 1000:
        return f"{Decimal(ns) / 1000}us"
    return f"{ns}ns"


def us(value):
    """Microseconds to integer nanoseconds."""
    return parse_time(f"{value}us")
