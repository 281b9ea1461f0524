"""Exact click-pattern probabilities by enumeration over the pair number.

Detectors are threshold detectors. The herald D1 sees each of the ``n``
anti-Stokes photons with probability ``eta_as`` plus one background event
with probability ``min(bg_as * eta_as, 1)``. On the read side each stored
excitation is retrieved and detected with probability ``gamma(t) * eta_s``
and routed to D2 or D3 with probability 1/2; one Stokes background event
fires with probability ``min(bg_s * eta_s, 1)`` and is routed the same way.

Pattern index convention used across the package: ``4*d1 + 2*d2 + d3``.
"""

from dataclasses import dataclass
import itertools

import numpy as np

from .model import conditional_feedback_probability, herald_slot_weights, retrieve_efficiency

PATTERNS = tuple(itertools.product((False, True), repeat=3))
MAX_N_MAX = 100_000


class TruncationError(ValueError):
    """Requested accuracy needs more pair-number terms than allowed."""


@dataclass(frozen=True)
class ClickPatternDistribution:
    probs: dict
    n_max: int
    truncation_bound: float

    def as_array(self):
        return np.array([self.probs[p] for p in PATTERNS])

    @property
    def total(self):
        return float(sum(self.probs.values()))

    def marginal(self, detector):
        """Click probability of detector 1, 2 or 3."""
        k = {1: 0, 2: 1, 3: 2}[detector]
        return float(sum(v for p, v in self.probs.items() if p[k]))

    def conditional(self, d2, d3):
        """P(D2 = d2 and D3 = d3 | D1 click); ``None`` leaves a detector unconstrained."""
        herald = self.marginal(1)
        if herald == 0:
            raise ZeroDivisionError("herald probability is zero")
        num = sum(v for (a, b, c), v in self.probs.items()
                  if a and (d2 is None or b == d2) and (d3 is None or c == d3))
        return float(num / herald)


def _required_n_max(chi, n_max, tol):
    if tol is None or chi == 0.0:
        return n_max
    while chi ** (n_max + 1) >= tol:
        n_max += 1
        if n_max > MAX_N_MAX:
            raise TruncationError(f"chi={chi} needs more than {MAX_N_MAX} terms for tol={tol}")
    return n_max


def _pair_weights(chi, n_max, pair_probs):
    if pair_probs is not None:
        w = np.asarray(pair_probs, dtype=float)
        if np.any(w < 0):
            raise ValueError("pair probabilities must be non-negative")
        return w, max(0.0, 1.0 - float(w.sum()))
    chi = np.asarray(chi, dtype=float)[..., None]
    n = np.arange(n_max + 1)
    return (1.0 - chi) * chi ** n, chi[..., 0] ** (n_max + 1)


def _pattern_table(weights, herald_eff, bg_as_click, stokes_eff, bg_s_click):
    """Joint probabilities over the 8 patterns, broadcast over leading axes.

    ``weights`` has the pair number on its last axis; the efficiencies
    broadcast against it. Returns shape ``(..., 8)``.
    """
    n = np.arange(weights.shape[-1])
    q = np.asarray(stokes_eff, dtype=float)[..., None]
    no_herald = (1.0 - herald_eff) ** n * (1.0 - bg_as_click)
    none = (1.0 - q) ** n * (1.0 - bg_s_click)
    no_d2 = (1.0 - q / 2) ** n * (1.0 - bg_s_click / 2)
    stokes = {
        (False, False): none,
        (True, False): no_d2 - none,   # D2 only == P(no D3) - P(none)
        (False, True): no_d2 - none,
        (True, True): 1.0 - 2 * no_d2 + none,
    }
    out = []
    for d1, d2, d3 in PATTERNS:
        h = (1.0 - no_herald) if d1 else no_herald
        out.append(np.sum(weights * h * stokes[(d2, d3)], axis=-1))
    return np.clip(np.stack(out, axis=-1), 0.0, None)


def _clicks(params):
    return min(params.bg_as * params.eta_as, 1.0), min(params.bg_s * params.eta_s, 1.0)


def exact_click_distribution(params, delta_t, n_max=8, tol=1e-12, pair_probs=None):
    """Exact joint distribution of (D1, D2, D3) for one write followed by one read.

    ``n_max`` is raised until the omitted pair mass ``chi**(n_max+1)`` is
    below ``tol``; pass ``tol=None`` to use ``n_max`` as given. ``pair_probs``
    replaces the thermal pair distribution (index = pair number).
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    if pair_probs is None:
        n_max = _required_n_max(params.chi, n_max, tol)
    else:
        n_max = len(pair_probs) - 1
    weights, bound = _pair_weights(params.chi, n_max, pair_probs)
    q = retrieve_efficiency(params.gamma0, params.tau_c, delta_t) * params.eta_s
    b, c = _clicks(params)
    table = _pattern_table(weights, params.eta_as, b, q, c)
    return ClickPatternDistribution(dict(zip(PATTERNS, map(float, table))), n_max, float(bound))


def conditional_click_probabilities(params, delta_t, n_max=8, tol=1e-12, pair_probs=None):
    """(P(D2|D1), P(D3|D1), P(D2 and D3|D1)) at storage time ``delta_t``."""
    dist = exact_click_distribution(params, delta_t, n_max, tol, pair_probs)
    return dist.conditional(True, None), dist.conditional(None, True), dist.conditional(True, True)


def exact_alpha(params, delta_t, n_max=8, tol=1e-12, pair_probs=None):
    """Heralded anti-correlation parameter from the exact distribution."""
    p2, p3, p23 = conditional_click_probabilities(params, delta_t, n_max, tol, pair_probs)
    if p2 == 0 or p3 == 0:
        raise ZeroDivisionError("alpha undefined: a conditional single-click probability is zero")
    return p23 / (p2 * p3)


def herald_probability(params, n_max=8, tol=1e-12):
    """Exact per-write herald probability."""
    n_max = _required_n_max(params.chi, n_max, tol)
    w, _ = _pair_weights(params.chi, n_max, None)
    b, _ = _clicks(params)
    n = np.arange(n_max + 1)
    return float(np.sum(w * (1.0 - (1.0 - params.eta_as) ** n * (1.0 - b))))


def conditional_pair_distribution(params, n_max=8, tol=1e-12):
    """P(n pairs | D1 click), n = 0..n_max."""
    n_max = _required_n_max(params.chi, n_max, tol)
    w, _ = _pair_weights(params.chi, n_max, None)
    b, _ = _clicks(params)
    n = np.arange(n_max + 1)
    joint = w * (1.0 - (1.0 - params.eta_as) ** n * (1.0 - b))
    return joint / joint.sum()


def storage_delays(protocol):
    """Storage time of each write slot under ``protocol``."""
    from .protocol import storage_delay

    return np.array([storage_delay(protocol, i) for i in range(protocol.n_pulses)], dtype=float)


def feedback_conditional_probabilities(params, protocol, n_max=8, tol=1e-12):
    """Herald-conditioned (P2, P3, P23) for a feedback write train.

    Each conditional probability is the first-success weighted average over
    the heralding slot, with the exact per-write herald probability as the
    slot weight.
    """
    p_h = herald_probability(params, n_max, tol)
    if p_h == 0:
        raise ZeroDivisionError("herald probability is zero")
    cache = {}

    def per_delay(t):
        if t not in cache:
            cache[t] = conditional_click_probabilities(params, t, n_max, tol)
        return cache[t]

    if protocol.mode.name == "FIXED_RETRIEVAL_TIME":
        delta_T, dt_w = protocol.delta_T, protocol.dt_w
        n = protocol.n_pulses
    else:
        # fixed delay: every slot waits delta_t, a one-slot average is exact
        delta_T, dt_w, n = protocol.delta_t, 0, 1
    return tuple(
        conditional_feedback_probability(lambda t, k=k: per_delay(t)[k], p_h, n, delta_T, dt_w)
        for k in range(3)
    )


def feedback_alpha(params, protocol, n_max=8, tol=1e-12):
    """Anti-correlation parameter of a feedback (or single-write) run."""
    p2, p3, p23 = feedback_conditional_probabilities(params, protocol, n_max, tol)
    return p23 / (p2 * p3)


def alpha_grid(params, chis, delays, slot_weights=None, n_max=8, tol=1e-12):
    """Vectorized alpha over excitation levels ``chis`` for a set of storage ``delays``.

    ``slot_weights`` (shape ``(len(chis), len(delays))``) averages the
    conditional probabilities over delays; ``None`` uses first-success
    weights from the exact herald probability. Returns one alpha per chi.
    """
    chis = np.atleast_1d(np.asarray(chis, dtype=float))
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    if np.any(chis < 0) or np.any(chis >= 1):
        raise ValueError("chi must be in [0, 1)")
    n_max = _required_n_max(float(chis.max()), n_max, tol)
    w, _ = _pair_weights(chis, n_max, None)            # (X, N)
    q = retrieve_efficiency(params.gamma0, params.tau_c, delays) * params.eta_s
    b, c = _clicks(params)
    table = _pattern_table(w[:, None, :], params.eta_as, b, np.atleast_1d(q)[None, :], c)  # (X, D, 8)
    herald = table[..., 4:].sum(axis=-1)
    p2 = (table[..., 6] + table[..., 7])
    p3 = (table[..., 5] + table[..., 7])
    p23 = table[..., 7]
    if slot_weights is None:
        ph = herald[:, 0]
        slot_weights = ph[:, None] * (1.0 - ph[:, None]) ** np.arange(len(delays))[None, :]
    sw = np.asarray(slot_weights, dtype=float)
    # conditional probabilities at each delay, then weighted over the heralding slot
    with np.errstate(divide="ignore", invalid="ignore"):
        c2, c3, c23 = p2 / herald, p3 / herald, p23 / herald
        norm = sw.sum(axis=-1)
        P2 = (sw * c2).sum(axis=-1) / norm
        P3 = (sw * c3).sum(axis=-1) / norm
        P23 = (sw * c23).sum(axis=-1) / norm
        return P23 / (P2 * P3)


__all__ = [
    "PATTERNS",
    "ClickPatternDistribution",
    "TruncationError",
    "alpha_grid",
    "conditional_click_probabilities",
    "conditional_pair_distribution",
    "exact_alpha",
    "exact_click_distribution",
    "feedback_alpha",
    "feedback_conditional_probabilities",
    "herald_probability",
    "herald_slot_weights",
    "storage_delays",
]
