"""Mergeable coincidence counters and the g2 / alpha estimators built on them.

Quoted errors are one standard deviation.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .oracle import PATTERNS


class UndefinedEstimate(ArithmeticError):
    """An estimator's denominator count is zero."""


def _pattern_index(d1, d2, d3):
    return 4 * int(d1) + 2 * int(d2) + int(d3)


@dataclass
class CountAccumulator:
    """Sufficient statistics for herald, g2 and alpha estimation.

    All named counters derive from ``pattern_counts`` (indexed
    ``4*d1 + 2*d2 + d3``), so merging is plain integer addition.
    ``provenance`` tags the run configuration; ``None`` marks an empty
    accumulator that merges with anything.
    """

    n_slots: int = 1
    open_loop: bool = False
    provenance: str | None = None
    pattern_counts: np.ndarray = field(default_factory=lambda: np.zeros(8, dtype=np.int64))
    herald_slot_hist: np.ndarray = None
    pairs_at_herald: np.ndarray = None  # diagnostic only, never used by estimators

    def __post_init__(self):
        self.pattern_counts = np.asarray(self.pattern_counts, dtype=np.int64).copy()
        if self.herald_slot_hist is None:
            self.herald_slot_hist = np.zeros(self.n_slots, dtype=np.int64)
        self.herald_slot_hist = np.asarray(self.herald_slot_hist, dtype=np.int64).copy()
        if self.pairs_at_herald is None:
            self.pairs_at_herald = np.zeros(1, dtype=np.int64)
        self.pairs_at_herald = np.asarray(self.pairs_at_herald, dtype=np.int64).copy()
        if self.pattern_counts.shape != (8,) or len(self.herald_slot_hist) != self.n_slots:
            raise ValueError("inconsistent accumulator shapes")

    @classmethod
    def zero(cls, n_slots=1, open_loop=False, provenance=None):
        return cls(n_slots=n_slots, open_loop=open_loop, provenance=provenance)

    def _count(self, pred):
        return int(sum(c for p, c in zip(PATTERNS, self.pattern_counts) if pred(*p)))

    @property
    def n_trials(self):
        return int(self.pattern_counts.sum())

    @property
    def n_herald(self):
        return self._count(lambda d1, d2, d3: d1)

    @property
    def n_s(self):
        return self._count(lambda d1, d2, d3: d2 or d3)

    @property
    def n_coinc(self):
        return self._count(lambda d1, d2, d3: d1 and (d2 or d3))

    @property
    def n_d2_given_herald(self):
        return self._count(lambda d1, d2, d3: d1 and d2)

    @property
    def n_d3_given_herald(self):
        return self._count(lambda d1, d2, d3: d1 and d3)

    @property
    def n_d23_given_herald(self):
        return self._count(lambda d1, d2, d3: d1 and d2 and d3)

    def add(self, record):
        """Fold one TrialRecord in place."""
        self.pattern_counts[_pattern_index(record.d1, record.d2, record.d3)] += 1
        if record.herald_slot is not None:
            self.herald_slot_hist[record.herald_slot] += 1
            n = record.true_pairs_at_herald
            if n >= len(self.pairs_at_herald):
                self.pairs_at_herald = np.concatenate(
                    [self.pairs_at_herald, np.zeros(n + 1 - len(self.pairs_at_herald), dtype=np.int64)])
            self.pairs_at_herald[n] += 1
        return self

    def counters(self):
        """Named counters in export order."""
        out = {
            "n_trials": self.n_trials,
            "n_herald": self.n_herald,
            "n_s": self.n_s,
            "n_coinc": self.n_coinc,
            "n_d2_given_herald": self.n_d2_given_herald,
            "n_d3_given_herald": self.n_d3_given_herald,
            "n_d23_given_herald": self.n_d23_given_herald,
        }
        for p, c in zip(PATTERNS, self.pattern_counts):
            out["pattern_" + "".join("1" if x else "0" for x in p)] = int(c)
        for i, c in enumerate(self.herald_slot_hist):
            out[f"herald_slot_{i}"] = int(c)
        return out

    def snapshot(self, sep=","):
        """One counter per line: ``name,value``."""
        return "".join(f"{k}{sep}{v}\n" for k, v in self.counters().items())

    def __add__(self, other):
        return merge(self, other)

    def __eq__(self, other):
        if not isinstance(other, CountAccumulator):
            return NotImplemented
        return (
            self.n_slots == other.n_slots
            and self.open_loop == other.open_loop
            and self.provenance == other.provenance
            and np.array_equal(self.pattern_counts, other.pattern_counts)
            and np.array_equal(self.herald_slot_hist, other.herald_slot_hist)
            and np.array_equal(_trim(self.pairs_at_herald), _trim(other.pairs_at_herald))
        )


def _trim(a):
    nz = np.flatnonzero(a)
    return a[: nz[-1] + 1] if len(nz) else a[:0]


def _pad_add(a, b):
    out = np.zeros(max(len(a), len(b)), dtype=np.int64)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


def accumulate(acc, record):
    return acc.add(record)


def merge(a, b):
    """Field-wise sum of two accumulators from the same run configuration."""
    if a.provenance is not None and b.provenance is not None and a.provenance != b.provenance:
        raise ValueError("cannot merge accumulators from different configurations")
    if a.n_slots != b.n_slots or a.open_loop != b.open_loop:
        raise ValueError("cannot merge accumulators from different protocols")
    return CountAccumulator(
        n_slots=a.n_slots,
        open_loop=a.open_loop,
        provenance=a.provenance if a.provenance is not None else b.provenance,
        pattern_counts=a.pattern_counts + b.pattern_counts,
        herald_slot_hist=a.herald_slot_hist + b.herald_slot_hist,
        pairs_at_herald=_pad_add(a.pairs_at_herald, b.pairs_at_herald),
    )


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    std_error: float
    count_basis: dict

    def __iter__(self):
        yield self.value
        yield self.std_error


def herald_fraction(acc):
    """Fraction of trials (trains) that heralded, with a binomial error."""
    n, h = acc.n_trials, acc.n_herald
    if n == 0:
        raise UndefinedEstimate("no trials")
    p = h / n
    return EstimateWithError(p, math.sqrt(p * (1 - p) / n), {"n_trials": n, "n_herald": h})


def g2_ratio(n_trials, n_herald, n_s, n_coinc):
    """Cross-correlation estimate and delta-method error from raw counts."""
    if n_herald == 0 or n_s == 0:
        raise UndefinedEstimate("g2 undefined: zero herald or Stokes counts")
    g2 = n_coinc * n_trials / (n_herald * n_s)
    rel = math.sqrt(1 / max(n_coinc, 1) + 1 / n_herald + 1 / n_s)
    err = g2 * rel if n_coinc else n_trials / (n_herald * n_s)
    return g2, err


def g2_estimate(acc):
    """g2 = n_coinc * n_trials / (n_herald * n_s) for an open-loop single-write run.

    The error treats the three counts as independent Poisson variables. A
    zero coincidence count reports the one-count scale as its error.
    """
    if not acc.open_loop:
        raise ValueError("g2 needs an open-loop run: feedback runs only read after a herald")
    basis = {"n_trials": acc.n_trials, "n_herald": acc.n_herald, "n_s": acc.n_s, "n_coinc": acc.n_coinc}
    return EstimateWithError(*g2_ratio(**basis), basis)


def alpha_ratio(n_herald, n_d2, n_d3, n_d23):
    if n_herald == 0 or n_d2 == 0 or n_d3 == 0:
        raise UndefinedEstimate("alpha undefined: zero herald or conditional single counts")
    scale = n_herald / (n_d2 * n_d3)
    alpha = n_d23 * scale
    if n_d23 == 0:
        return 0.0, scale
    return alpha, alpha * math.sqrt(1 / n_d23 + 1 / n_herald + 1 / n_d2 + 1 / n_d3)


def alpha_estimate(acc):
    """alpha = n_d23 * n_herald / (n_d2 * n_d3), all conditioned on a herald."""
    basis = {
        "n_herald": acc.n_herald,
        "n_d2": acc.n_d2_given_herald,
        "n_d3": acc.n_d3_given_herald,
        "n_d23": acc.n_d23_given_herald,
    }
    return EstimateWithError(*alpha_ratio(**basis), basis)


def bootstrap_error(acc, statistic, n_boot=200, seed=0):
    """Multinomial bootstrap standard error of ``statistic(acc)`` over the click patterns.

    Meant for validating the delta-method errors; resamples that leave the
    statistic undefined are skipped.
    """
    rng = np.random.default_rng(seed)
    n = acc.n_trials
    p = acc.pattern_counts / n
    values = []
    for counts in rng.multinomial(n, p, size=n_boot):
        boot = CountAccumulator(acc.n_slots, acc.open_loop, acc.provenance, counts)
        try:
            values.append(statistic(boot).value)
        except UndefinedEstimate:
            continue
    if len(values) < 2:
        raise UndefinedEstimate("too few valid bootstrap resamples")
    return float(np.std(values, ddof=1))
