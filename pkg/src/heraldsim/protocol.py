"""Feedback time sequence as a deterministic state machine.

A train starts with write slot 0 at t = 0; slot ``i`` fires at ``i * dt_w``.
A herald stops the train and schedules one read. A write without a herald
is followed by a cleaning pulse that resets the ensemble.
"""

from dataclasses import asdict, dataclass, replace
import enum

from .units import format_time


class Mode(enum.Enum):
    FIXED_RETRIEVAL_TIME = "fixed_retrieval_time"  # read at delta_T after train start
    FIXED_DELAY = "fixed_delay"                    # read at delta_t after the herald write


class Phase(enum.Enum):
    IDLE = "idle"
    WRITING = "writing"
    AWAITING_READ = "awaiting_read"
    READING = "reading"
    SUCCEEDED = "succeeded"
    EXHAUSTED = "exhausted"


TERMINAL = (Phase.SUCCEEDED, Phase.EXHAUSTED)


class ActionKind(enum.Enum):
    WRITE = "write"
    HERALD = "herald"
    CLEAN = "clean"
    READ = "read"


@dataclass(frozen=True)
class ProtocolConfig:
    """Timing of one write train. All times in integer ns.

    ``feedback=False`` describes the open-loop reference run: a single write
    always followed by a read, whether or not D1 clicked.
    """

    mode: Mode = Mode.FIXED_RETRIEVAL_TIME
    n_pulses: int = 12
    dt_w: int = 1000
    delta_T: int = 12500
    delta_t: int = 500
    write_duration: int = 100
    read_duration: int = 75
    feedback: bool = True

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_pulses < 1:
            raise ValueError(f"n_pulses must be >= 1, got {self.n_pulses}")
        for name in ("dt_w", "delta_T", "delta_t", "write_duration", "read_duration"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_pulses > 1 and self.dt_w < self.write_duration:
            raise ValueError(f"dt_w ({self.dt_w} ns) must be >= write_duration ({self.write_duration} ns)")
        if self.mode is Mode.FIXED_RETRIEVAL_TIME and self.delta_T < (self.n_pulses - 1) * self.dt_w:
            raise ValueError(
                f"delta_T ({self.delta_T} ns) must be >= (n_pulses - 1) * dt_w "
                f"({(self.n_pulses - 1) * self.dt_w} ns)"
            )
        if not self.feedback and self.n_pulses != 1:
            raise ValueError("open-loop runs (feedback=False) use exactly one write pulse")

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass(frozen=True)
class ProtocolState:
    phase: Phase = Phase.IDLE
    slot: int = -1
    herald_slot: int | None = None
    read_time: int | None = None
    clock: int = 0

    @property
    def terminal(self):
        return self.phase in TERMINAL


@dataclass(frozen=True)
class Action:
    time: int
    kind: ActionKind
    slot: int


def storage_delay(config, herald_slot):
    """Time the excitation heralded in ``herald_slot`` waits before the read."""
    if not 0 <= herald_slot < config.n_pulses:
        raise ValueError(f"herald slot {herald_slot} outside 0..{config.n_pulses - 1}")
    if config.mode is Mode.FIXED_RETRIEVAL_TIME:
        delay = config.delta_T - herald_slot * config.dt_w
    else:
        delay = config.delta_t
    if delay < 0:
        raise ValueError("negative storage delay: invalid protocol config")
    return delay


def read_time(config, herald_slot):
    return herald_slot * config.dt_w + storage_delay(config, herald_slot)


def advance(state, config, herald=False):
    """One transition. Returns ``(new_state, actions)``.

    ``herald`` is only read in the WRITING phase; it reports whether D1
    clicked during the current write window.
    """
    if state.terminal:
        raise RuntimeError(f"cannot advance a terminal state ({state.phase.value})")

    if state.phase is Phase.IDLE:
        return (ProtocolState(Phase.WRITING, 0, clock=0), [Action(0, ActionKind.WRITE, 0)])

    if state.phase is Phase.WRITING:
        i = state.slot
        t_end = i * config.dt_w + config.write_duration
        if herald or not config.feedback:
            actions = [Action(t_end, ActionKind.HERALD, i)] if herald else []
            t_read = read_time(config, i)
            return ProtocolState(Phase.AWAITING_READ, i, i if herald else None, t_read, t_end), actions
        actions = [Action(t_end, ActionKind.CLEAN, i)]
        if i + 1 >= config.n_pulses:
            return ProtocolState(Phase.EXHAUSTED, i, clock=t_end), actions
        t_next = (i + 1) * config.dt_w
        actions.append(Action(t_next, ActionKind.WRITE, i + 1))
        return ProtocolState(Phase.WRITING, i + 1, clock=t_next), actions

    if state.phase is Phase.AWAITING_READ:
        return (replace(state, phase=Phase.READING, clock=state.read_time),
                [Action(state.read_time, ActionKind.READ, state.slot)])

    # READING
    return replace(state, phase=Phase.SUCCEEDED, clock=state.read_time + config.read_duration), []


def run_protocol(config, heralds):
    """Drive a full train from Idle; ``heralds[i]`` is D1's outcome in slot ``i``.

    Returns the final state and the full action list.
    """
    state, actions = advance(ProtocolState(), config)
    heralds = list(heralds)
    while not state.terminal:
        h = False
        if state.phase is Phase.WRITING:
            h = bool(heralds[state.slot]) if state.slot < len(heralds) else False
        state, new = advance(state, config, h)
        actions.extend(new)
    return state, actions


def format_trace(actions, sep=","):
    """Timeline as delimiter-separated text: ``time_ns,action,slot``."""
    lines = [sep.join(("time_ns", "action", "slot"))]
    lines += [sep.join((str(a.time), a.kind.value, str(a.slot))) for a in actions]
    return "\n".join(lines) + "\n"


def describe(config):
    """Short human-readable summary used in output headers."""
    if config.mode is Mode.FIXED_RETRIEVAL_TIME:
        timing = f"delta_T={format_time(config.delta_T)}"
    else:
        timing = f"delta_t={format_time(config.delta_t)}"
    loop = "feedback" if config.feedback else "open-loop"
    return f"{config.mode.value} N={config.n_pulses} dt_w={format_time(config.dt_w)} {timing} {loop}"
