"""Data series container and its text format.

File layout::

    # AlphaVsDelay: x,y,y_err
    500,0.061,0.004
    ...

Delay-type series carry ``x`` in nanoseconds; excitation-type series carry
the per-write herald probability.
"""

from dataclasses import dataclass
import enum

import numpy as np


class SeriesKind(enum.Enum):
    G2_VS_PAS = "G2vsPas"
    G2_VS_DELAY = "G2vsDelay"
    ALPHA_VS_PAS = "AlphaVsPas"
    ALPHA_VS_DELAY = "AlphaVsDelay"


@dataclass(frozen=True)
class DataSeries:
    kind: SeriesKind
    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray

    def __post_init__(self):
        kind = SeriesKind(self.kind) if isinstance(self.kind, str) else self.kind
        x, y, e = (np.asarray(a, dtype=float) for a in (self.x, self.y, self.y_err))
        if not (x.ndim == y.ndim == e.ndim == 1 and len(x) == len(y) == len(e)):
            raise ValueError("x, y and y_err must be 1-D and of equal length")
        if np.any(~(e > 0)):
            raise ValueError("every y_err must be positive")
        if np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_err", e)

    def __len__(self):
        return len(self.x)

    def to_text(self, sep=","):
        lines = [f"# {self.kind.value}: x{sep}y{sep}y_err"]
        lines += [sep.join(repr(float(v)) for v in row) for row in zip(self.x, self.y, self.y_err)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, sep=","):
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ValueError("missing '# <kind>: x,y,y_err' header line")
        head = lines[0].lstrip("#").strip()
        kind, _, cols = head.partition(":")
        if [c.strip() for c in cols.split(sep)] != ["x", "y", "y_err"]:
            raise ValueError(f"expected columns x{sep}y{sep}y_err, got {cols.strip()!r}")
        rows = np.array([[float(v) for v in ln.split(sep)] for ln in lines[1:]], dtype=float)
        rows = rows.reshape(-1, 3)
        return cls(SeriesKind(kind.strip()), rows[:, 0], rows[:, 1], rows[:, 2])
