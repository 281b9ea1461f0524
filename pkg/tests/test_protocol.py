import pytest
from hypothesis import given
from hypothesis import strategies as st

from heraldsim.protocol import (
    ActionKind,
    Mode,
    Phase,
    ProtocolConfig,
    ProtocolState,
    advance,
    describe,
    format_trace,
    read_time,
    run_protocol,
    storage_delay,
)

MODE1 = ProtocolConfig(mode=Mode.FIXED_RETRIEVAL_TIME, n_pulses=12, dt_w=1000, delta_T=12500)
MODE2 = ProtocolConfig(mode=Mode.FIXED_DELAY, n_pulses=12, dt_w=1000, delta_t=500)


def kinds(actions, kind):
    return [a for a in actions if a.kind is kind]


def test_mode1_herald_in_slot_three():
    heralds = [False, False, False, True]
    state, actions = run_protocol(MODE1, heralds)
    assert state.phase is Phase.SUCCEEDED
    assert state.herald_slot == 3
    assert state.read_time == 12500
    assert storage_delay(MODE1, 3) == 9500
    assert len(kinds(actions, ActionKind.CLEAN)) == 3
    assert kinds(actions, ActionKind.READ)[0].time == 12500


def test_no_herald_exhausts_after_twelve_cleanings():
    state, actions = run_protocol(MODE1, [False] * 12)
    assert state.phase is Phase.EXHAUSTED
    assert len(kinds(actions, ActionKind.CLEAN)) == 12
    assert len(kinds(actions, ActionKind.WRITE)) == 12
    assert not kinds(actions, ActionKind.READ)


def test_mode2_read_after_slot_zero():
    state, actions = run_protocol(MODE2, [True])
    assert kinds(actions, ActionKind.READ)[0].time == 500
    assert state.read_time == 500


def test_mode2_read_follows_heralding_slot():
    assert read_time(MODE2, 5) == 5 * 1000 + 500


def test_storage_delay_examples():
    assert storage_delay(MODE1, 0) == 12500
    assert storage_delay(MODE1, 11) == 1500
    assert {storage_delay(MODE2, i) for i in range(12)} == {500}
    with pytest.raises(ValueError):
        storage_delay(MODE1, 12)


def test_config_validation():
    with pytest.raises(ValueError, match="delta_T"):
        ProtocolConfig(mode="fixed_retrieval_time", n_pulses=12, dt_w=1000, delta_T=10_000)
    with pytest.raises(ValueError, match="dt_w"):
        ProtocolConfig(mode="fixed_delay", n_pulses=2, dt_w=50, write_duration=100)
    with pytest.raises(ValueError):
        ProtocolConfig(n_pulses=0)
    with pytest.raises(ValueError):
        ProtocolConfig(mode="fixed_delay", n_pulses=2, feedback=False)
    assert ProtocolConfig(mode="fixed_delay").mode is Mode.FIXED_DELAY


def test_terminal_state_cannot_advance():
    state, _ = run_protocol(MODE1, [True])
    with pytest.raises(RuntimeError):
        advance(state, MODE1, False)


def test_open_loop_reads_without_herald():
    cfg = ProtocolConfig(mode="fixed_delay", n_pulses=1, delta_t=500, feedback=False)
    state, actions = run_protocol(cfg, [False])
    assert state.phase is Phase.SUCCEEDED and state.herald_slot is None
    assert not kinds(actions, ActionKind.CLEAN)
    assert len(kinds(actions, ActionKind.READ)) == 1


def test_trace_format():
    _, actions = run_protocol(MODE1, [False, True])
    lines = format_trace(actions).splitlines()
    assert lines[0] == "time_ns,action,slot"
    assert lines[1] == "0,write,0"
    assert lines[2] == "100,clean,0"
    assert lines[-1] == "12500,read,1"
    assert "12.5us" in describe(MODE1)


slots = st.integers(0, 11)


@given(slots)
def test_cleanings_before_herald_equal_slot(i):
    heralds = [False] * i + [True]
    state, actions = run_protocol(MODE1, heralds)
    assert state.herald_slot == i
    assert len(kinds(actions, ActionKind.CLEAN)) == i
    assert len(kinds(actions, ActionKind.HERALD)) == 1


@given(st.lists(st.booleans(), min_size=12, max_size=12))
def test_slots_strictly_increase_and_deterministic(heralds):
    s1, a1 = run_protocol(MODE1, heralds)
    s2, a2 = run_protocol(MODE1, heralds)
    assert (s1, a1) == (s2, a2)
    writes = [a.slot for a in kinds(a1, ActionKind.WRITE)]
    assert writes == sorted(set(writes))
    times = [a.time for a in a1]
    assert times == sorted(times)


@given(st.integers(1, 30), st.integers(100, 5000), st.integers(0, 10_000))
def test_mode1_delays_arithmetic_and_nonnegative(n, dt_w, slack):
    cfg = ProtocolConfig(mode="fixed_retrieval_time", n_pulses=n, dt_w=dt_w, delta_T=(n - 1) * dt_w + slack)
    delays = [storage_delay(cfg, i) for i in range(n)]
    assert all(d >= 0 for d in delays)
    assert all(a - b == dt_w for a, b in zip(delays, delays[1:]))


def test_advance_from_idle():
    state, actions = advance(ProtocolState(), MODE1)
    assert state.phase is Phase.WRITING and state.slot == 0
    assert actions[0].kind is ActionKind.WRITE
