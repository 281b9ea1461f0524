"""Closed-form probability model of the heralded memory source.

Times are nanoseconds. Every function here is pure.
"""

from dataclasses import asdict, dataclass, field, fields
import math

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters of the source.

    Attributes
    ----------
    chi : float
        Probability of one spin flip per write pulse, in [0, 1).
    eta_as, eta_s : float
        Overall anti-Stokes (herald) and Stokes detection efficiencies.
    gamma0 : float
        Retrieve efficiency at zero storage time.
    tau_c : float
        Memory lifetime in ns (Gaussian 1/e time of the retrieve efficiency).
    bg_as, bg_s : float
        Mean background events per write (read) window, before detection
        efficiency is applied.
    efficiency_factors : dict
        Optional breakdown of ``eta_as``/``eta_s`` (transmission, coupling,
        detector, mode match). Recorded only; never enters a formula.
    """

    chi: float = 0.01
    eta_as: float = 0.07
    eta_s: float = 0.1
    gamma0: float = 0.3
    tau_c: float = 12500.0
    bg_as: float = 0.0
    bg_s: float = 0.0
    efficiency_factors: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.chi < 1.0:
            raise ValueError(f"chi must be in [0, 1), got {self.chi}")
        for name in ("eta_as", "eta_s", "gamma0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not self.tau_c > 0:
            raise ValueError(f"tau_c must be > 0, got {self.tau_c}")
        for name in ("bg_as", "bg_s"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValueError(f"{name} must be >= 0, got {v}")

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return PhysicalParams(**values)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DetectionProbabilities:
    p_as: float
    p_s: float
    p_as_s: float

    @property
    def g2(self):
        return self.p_as_s / (self.p_as * self.p_s)


def pair_number_distribution(params, n):
    """Probability of ``n`` photon/spin-wave pairs after one write pulse.

    The state's amplitudes 1, sqrt(chi), chi, ... extend to the thermal
    distribution ``(1 - chi) * chi**n``.
    """
    chi = params.chi if isinstance(params, PhysicalParams) else float(params)
    if not 0.0 <= chi < 1.0:
        raise ValueError(f"chi must be in [0, 1), got {chi}")
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("pair number must be non-negative")
    out = (1.0 - chi) * np.power(chi, n.astype(float))
    return float(out) if out.ndim == 0 else out


def retrieve_efficiency(gamma0, tau_c, delta_t):
    """Retrieve efficiency after storing for ``delta_t`` ns (Gaussian decay)."""
    if tau_c <= 0:
        raise ValueError("tau_c must be positive")
    delta_t = np.asarray(delta_t, dtype=float)
    if np.any(delta_t < 0):
        raise ValueError("storage time must be non-negative")
    out = gamma0 * np.exp(-(delta_t / tau_c) ** 2)
    return float(out) if out.ndim == 0 else out


def detection_probabilities(params, delta_t):
    """Herald, Stokes and joint click probabilities to first order in chi."""
    gamma = retrieve_efficiency(params.gamma0, params.tau_c, delta_t)
    p_as = (params.chi + params.bg_as) * params.eta_as
    p_s = (params.chi * gamma + params.bg_s) * params.eta_s
    p_as_s = params.chi * gamma * params.eta_as * params.eta_s + p_as * p_s
    for name, p in (("p_as", p_as), ("p_s", p_s), ("p_as_s", p_as_s)):
        if np.any(np.asarray(p) > 1.0):
            raise ValueError(f"unphysical parameters: {name} = {p} exceeds 1")
    return DetectionProbabilities(p_as, p_s, p_as_s)


def g2_cross(params, delta_t):
    """Normalized anti-Stokes/Stokes cross-correlation at storage time ``delta_t``."""
    d = detection_probabilities(params, delta_t)
    if np.any(np.asarray(d.p_as) == 0) or np.any(np.asarray(d.p_s) == 0):
        raise ZeroDivisionError("g2 undefined: a marginal click probability is zero")
    return d.g2


def g2_of_delay(chi, bg_as, d_const, gamma_fn, delta_t=None):
    """Cross-correlation versus storage time with the Stokes background lumped into ``d_const``.

    ``gamma_fn`` is either a callable of the storage time or an already
    evaluated retrieve efficiency (scalar or array).
    """
    if d_const < 0:
        raise ValueError("d_const must be non-negative")
    gamma = gamma_fn(delta_t) if callable(gamma_fn) else gamma_fn
    gamma = np.asarray(gamma, dtype=float)
    out = 1.0 + gamma / ((bg_as + chi) * gamma + d_const)
    return float(out) if out.ndim == 0 else out


def d_constant(params):
    """Lumped constant that reproduces the full first-order g2 for ``params``."""
    return (params.chi + params.bg_as) * params.bg_s / params.chi


def cumulative_excitation_probability(p_as, n_pulses):
    """Probability that at least one of ``n_pulses`` independent writes heralds."""
    if not 0.0 <= p_as <= 1.0:
        raise ValueError(f"p_as must be in [0, 1], got {p_as}")
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    return -math.expm1(n_pulses * math.log1p(-p_as)) if p_as < 1.0 else 1.0


def herald_slot_weights(p_as, n_pulses):
    """Unnormalized probability ``p(1-p)**i`` that slot ``i`` is the first to herald."""
    i = np.arange(n_pulses)
    return p_as * (1.0 - p_as) ** i


def conditional_feedback_probability(per_delay_prob, p_as, n_pulses, delta_T, dt_w):
    """Average a per-storage-time conditional probability over the heralding slot.

    Slot ``i`` fires at ``i * dt_w`` and is read at ``delta_T``, so the stored
    excitation waits ``delta_T - i * dt_w``. Weights follow the first-success
    distribution of the write train.
    """
    if not (n_pulses >= 1 and dt_w >= 0 and delta_T >= (n_pulses - 1) * dt_w):
        raise ValueError("need delta_T >= (n_pulses - 1) * dt_w >= 0")
    if p_as <= 0:
        raise ValueError("p_as must be positive; no slot can herald")
    w = herald_slot_weights(p_as, n_pulses)
    delays = delta_T - np.arange(n_pulses) * dt_w
    vals = np.array([per_delay_prob(float(t)) for t in delays], dtype=float)
    return float(np.dot(w, vals) / w.sum())
