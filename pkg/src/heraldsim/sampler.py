"""Monte Carlo engine for the heralded source.

Every trial owns a counter-based random stream keyed on ``(seed, trial_index)``:
draw ``k`` of trial ``t`` is ``mix64(key(seed, t) + (k + 1) * GOLDEN)``. A
trial's outcome therefore never depends on which shard ran it or in what
order, and sharded runs are bit-identical to sequential ones.

Two implementations share that stream and the draw order:

* :func:`sample_trial` steps the protocol state machine in Python and
  returns a full :class:`TrialRecord`.
* the compiled batch kernel behind :func:`run_batch` folds trials straight
  into counters.

Draw order per write slot: one uniform for the pair number, one per pair for
herald detection, one for the herald background. If a read follows: per pair
one retrieval uniform and, if retrieved, one routing uniform; then one for
the Stokes background and, if it fired, one routing uniform.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import hashlib
import json
import math
import os

import numba
import numpy as np

from .estimators import CountAccumulator, merge
from .model import PhysicalParams, retrieve_efficiency
from .protocol import Phase, ProtocolConfig, ProtocolState, advance, storage_delay

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53
PAIR_HIST_LEN = 64
CHUNK = 1 << 20


def mix64(z):
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def trial_key(seed, trial_index):
    return mix64((mix64(seed & MASK) + trial_index * GOLDEN) & MASK)


class TrialStream:
    """Uniform draws for one trial; pure-Python twin of the kernel's stream."""

    def __init__(self, seed, trial_index):
        self.key = trial_key(seed, trial_index)
        self.counter = 0

    def uniform(self):
        self.counter += 1
        return (mix64((self.key + self.counter * GOLDEN) & MASK) >> 11) * _INV53


@dataclass(frozen=True)
class TrialRecord:
    herald_slot: int | None
    storage_delay: int | None
    d1: bool
    d2: bool
    d3: bool
    true_pairs_at_herald: int = 0


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    protocol: ProtocolConfig
    n_trials: int
    seed: int
    shards: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.shards < 1:
            raise ValueError(f"shards must be >= 1, got {self.shards}")
        if not 0 <= self.seed <= MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def fingerprint(self):
        """Hash of everything that determines results; excludes ``shards``."""
        blob = json.dumps(
            {"params": self.params.to_dict(), "protocol": self.protocol.to_dict(),
             "n_trials": self.n_trials, "seed": self.seed},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _pairs(u, chi):
    # P(n >= k) = chi**k; v = 1 - u lies in (0, 1]
    v = 1.0 - u
    if chi <= 0.0 or v > chi:
        return 0
    return int(math.floor(math.log(v) / math.log(chi)))


def _read(stream, n, q, c_click):
    d2 = d3 = False
    for _ in range(n):
        if stream.uniform() < q:
            if stream.uniform() < 0.5:
                d2 = True
            else:
                d3 = True
    if stream.uniform() < c_click:
        if stream.uniform() < 0.5:
            d2 = True
        else:
            d3 = True
    return d2, d3


def sample_trial(params, protocol, stream):
    """Run one write train through the protocol state machine.

    ``stream`` is a :class:`TrialStream` (or anything with ``uniform()``).
    """
    b_click = min(params.bg_as * params.eta_as, 1.0)
    c_click = min(params.bg_s * params.eta_s, 1.0)
    state, _ = advance(ProtocolState(), protocol)
    n = 0
    clicked = False
    d2 = d3 = False
    while not state.terminal:
        if state.phase is Phase.WRITING:
            n = _pairs(stream.uniform(), params.chi)
            clicked = False
            for _ in range(n):
                if stream.uniform() < params.eta_as:
                    clicked = True
            if stream.uniform() < b_click:
                clicked = True
            state, _ = advance(state, protocol, clicked)
            # no herald under feedback: a cleaning pulse empties the memory
        elif state.phase is Phase.READING:
            delay = storage_delay(protocol, state.slot)
            q = retrieve_efficiency(params.gamma0, params.tau_c, delay) * params.eta_s
            d2, d3 = _read(stream, n, q, c_click)
            state, _ = advance(state, protocol)
        else:
            state, _ = advance(state, protocol)
    if state.phase is Phase.EXHAUSTED:
        return TrialRecord(None, None, False, False, False, 0)
    delay = storage_delay(protocol, state.slot)
    if state.herald_slot is None:  # open loop, read without a herald
        return TrialRecord(None, delay, False, d2, d3, 0)
    return TrialRecord(state.herald_slot, delay, True, d2, d3, n)


def iter_trials(config, start=0, stop=None):
    stop = config.n_trials if stop is None else stop
    for t in range(start, stop):
        yield sample_trial(config.params, config.protocol, TrialStream(config.seed, t))


_U11 = np.uint64(11)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_UG = np.uint64(GOLDEN)
_UM1 = np.uint64(_M1)
_UM2 = np.uint64(_M2)


@numba.njit(cache=True, inline="always")
def _mix64_nb(z):
    z = (z ^ (z >> _U30)) * _UM1
    z = (z ^ (z >> _U27)) * _UM2
    return z ^ (z >> _U31)


@numba.njit(cache=True, inline="always")
def _uniform_nb(key, k):
    return np.float64(_mix64_nb(key + np.uint64(k) * _UG) >> _U11) * _INV53


@numba.njit(cache=True, nogil=True)
def _kernel(seed_mixed, start, stop, chi, log_chi, eta_as, b_click, q_slot, c_click,
            feedback, patterns, slot_hist, pair_hist):
    n_slots = q_slot.shape[0]
    for t in range(start, stop):
        key = _mix64_nb(seed_mixed + np.uint64(t) * _UG)
        k = 0
        heralded = False
        read = False
        n = 0
        slot = 0
        d2 = False
        d3 = False
        for i in range(n_slots):
            k += 1
            v = 1.0 - _uniform_nb(key, k)
            n = 0
            if chi > 0.0 and v <= chi:
                n = int(math.floor(math.log(v) / log_chi))
            clicked = False
            for _ in range(n):
                k += 1
                if _uniform_nb(key, k) < eta_as:
                    clicked = True
            k += 1
            if _uniform_nb(key, k) < b_click:
                clicked = True
            if clicked or not feedback:
                heralded = clicked
                read = True
                slot = i
                break
        if read:
            q = q_slot[slot]
            for _ in range(n):
                k += 1
                if _uniform_nb(key, k) < q:
                    k += 1
                    if _uniform_nb(key, k) < 0.5:
                        d2 = True
                    else:
                        d3 = True
            k += 1
            if _uniform_nb(key, k) < c_click:
                k += 1
                if _uniform_nb(key, k) < 0.5:
                    d2 = True
                else:
                    d3 = True
        idx = 4 * heralded + 2 * d2 + d3
        patterns[idx] += 1
        if heralded:
            slot_hist[slot] += 1
            pair_hist[min(n, pair_hist.shape[0] - 1)] += 1


def _slot_efficiencies(params, protocol):
    delays = np.array([storage_delay(protocol, i) for i in range(protocol.n_pulses)], dtype=float)
    return np.asarray(retrieve_efficiency(params.gamma0, params.tau_c, delays), dtype=float) * params.eta_s


def run_range(config, start, stop):
    """Counters for trials ``start..stop-1`` of ``config``."""
    p, proto = config.params, config.protocol
    patterns = np.zeros(8, dtype=np.int64)
    slot_hist = np.zeros(proto.n_pulses, dtype=np.int64)
    pair_hist = np.zeros(PAIR_HIST_LEN, dtype=np.int64)
    log_chi = math.log(p.chi) if p.chi > 0 else 0.0
    q_slot = np.atleast_1d(_slot_efficiencies(p, proto))
    _kernel(np.uint64(mix64(config.seed)), start, stop, p.chi, log_chi, p.eta_as,
            min(p.bg_as * p.eta_as, 1.0), q_slot, min(p.bg_s * p.eta_s, 1.0),
            proto.feedback, patterns, slot_hist, pair_hist)
    return CountAccumulator(proto.n_pulses, not proto.feedback, config.fingerprint(),
                            patterns, slot_hist, pair_hist)


def _shard_bounds(n_trials, shards):
    edges = [n_trials * s // shards for s in range(shards + 1)]
    return list(zip(edges[:-1], edges[1:]))


def _run_shard(config, lo, hi):
    acc = CountAccumulator.zero(config.protocol.n_pulses, not config.protocol.feedback, config.fingerprint())
    for a in range(lo, hi, CHUNK):
        acc = merge(acc, run_range(config, a, min(a + CHUNK, hi)))
    return acc


def run_batch(config, max_workers=None):
    """Run ``config.n_trials`` trials over ``config.shards`` shards and merge the counters."""
    bounds = _shard_bounds(config.n_trials, config.shards)
    workers = max_workers or min(config.shards, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda b: _run_shard(config, *b), bounds))
    else:
        parts = [_run_shard(config, lo, hi) for lo, hi in bounds]
    acc = parts[0]
    for part in parts[1:]:
        acc = merge(acc, part)
    return acc


def run_until(config, stop, block=CHUNK):
    """Run consecutive blocks of trials until ``stop(acc)`` is true or ``n_trials`` is reached.

    Blocks always start at multiples of ``block``, so the result depends
    only on the config, the block size and the stopping rule.
    """
    acc = CountAccumulator.zero(config.protocol.n_pulses, not config.protocol.feedback, config.fingerprint())
    for a in range(0, config.n_trials, block):
        acc = merge(acc, run_range(config, a, min(a + block, config.n_trials)))
        if stop(acc):
            break
    return acc
