import math

import numpy as np
import pytest

from gazeintent.control import (
    ARRIVE_DIST,
    ControlParams,
    EffectorState,
    Event,
    InteractionState,
    Mode,
    NoCandidate,
    commit_intent,
    integrate_effector,
    post_command_velocity,
    pre_command_velocity,
    slerp,
    step_interaction,
    virtual_target,
)
from gazeintent.intent import ConfidenceField

PARAMS = ControlParams()


def field_with(confidences, intent=None, prev_intent=()):
    entries = tuple(((oid, 0), c) for oid, c in sorted(confidences.items()))
    if intent is None:
        intent = tuple(sorted(oid for oid, c in confidences.items() if c >= 0.3))
        if not intent:
            intent = tuple(prev_intent)
    return ConfidenceField(entries=entries, intent_set=tuple(intent))


def _norm(v):
    return math.sqrt(sum(c * c for c in v))


def test_virtual_target_single_full_confidence():
    field = field_with({"a": 1.0})
    grasp = {"a": (0.3, 0.2, 0.4)}
    assert virtual_target(field, grasp, "literal") == pytest.approx((0.3, 0.2, 0.4))
    assert virtual_target(field, grasp, "normalized") == pytest.approx((0.3, 0.2, 0.4))


def test_virtual_target_two_equal_candidates():
    field = field_with({"a": 1.0, "b": 1.0})
    grasp = {"a": (0.0, 0.0, 0.3), "b": (0.2, 0.0, 0.3)}
    for mode in ("literal", "normalized"):
        assert virtual_target(field, grasp, mode) == pytest.approx((0.1, 0.0, 0.3))


def test_virtual_target_literal_vs_normalized_at_half_confidence():
    field = field_with({"a": 0.5})
    grasp = {"a": (0.4, 0.0, 0.0)}
    assert virtual_target(field, grasp, "literal") == pytest.approx((0.2, 0.0, 0.0))
    assert virtual_target(field, grasp, "normalized") == pytest.approx((0.4, 0.0, 0.0))


def test_virtual_target_empty_intent_is_none():
    assert virtual_target(field_with({"a": 0.1}), {"a": (0.1, 0.2, 0.3)}) is None


def test_pre_command_speed_far_field():
    field = field_with({"a": 1.0})
    grasp = {"a": (0.2, 0.0, 0.0)}
    eff = EffectorState((0.0, 0.0, 0.0))
    v = pre_command_velocity(eff, field, grasp, PARAMS)
    assert _norm(v) == pytest.approx(0.10, abs=1e-12)
    assert v[0] > 0.0


def test_pre_command_speed_inside_ramp():
    field = field_with({"a": 1.0})
    grasp = {"a": (0.025, 0.0, 0.0)}
    eff = EffectorState((0.0, 0.0, 0.0))
    v = pre_command_velocity(eff, field, grasp, PARAMS)
    assert _norm(v) == pytest.approx(0.05, abs=1e-12)


def test_pre_command_zero_without_intent():
    field = field_with({})
    assert pre_command_velocity(EffectorState((0, 0, 0)), field, {}, PARAMS) == (0.0, 0.0, 0.0)


def test_pre_command_scales_with_mean_confidence():
    field = field_with({"a": 0.5})
    grasp = {"a": (0.4, 0.0, 0.0)}
    v = pre_command_velocity(EffectorState((0.0, 0.0, 0.0)), field, grasp, PARAMS)
    assert _norm(v) == pytest.approx(0.05, abs=1e-12)  # half confidence, far field


def test_commit_intent_argmax_and_rejection():
    field = field_with({"a": 0.9, "b": 0.4})
    assert commit_intent(field) == "a"
    assert commit_intent(field, frozenset({"a"})) == "b"
    tie = field_with({"a": 0.6, "b": 0.6})
    assert commit_intent(tie) == "a"
    with pytest.raises(NoCandidate):
        commit_intent(field, frozenset({"a", "b"}))


def test_post_command_velocity_ramp():
    eff = EffectorState((0.0, 0.0, 0.0))
    assert _norm(post_command_velocity(eff, (1.0, 0.0, 0.0), PARAMS)) == pytest.approx(0.10, abs=1e-12)
    assert _norm(post_command_velocity(eff, (0.01, 0.0, 0.0), PARAMS)) == pytest.approx(0.02, abs=1e-12)
    assert post_command_velocity(eff, (0.0, 0.0, 0.0), PARAMS) == (0.0, 0.0, 0.0)


def test_post_command_speed_ramp_exact_inside_delta_r():
    eff = EffectorState((0.0, 0.0, 0.0))
    for d in np.linspace(0.001, 0.049, 25):
        v = post_command_velocity(eff, (float(d), 0.0, 0.0), PARAMS)
        assert _norm(v) == pytest.approx(0.10 * d / 0.05, abs=1e-9)


def test_integrate_effector():
    eff = EffectorState((0.0, 0.0, 0.0))
    stepped = integrate_effector(eff, (0.1, 0.0, 0.0), 0.1)
    assert stepped.position == pytest.approx((0.01, 0.0, 0.0))
    assert integrate_effector(eff, (0.0, 0.0, 0.0), 0.1).position == (0.0, 0.0, 0.0)
    fast = integrate_effector(eff, (0.3, 0.4, 0.0), 1.0)  # |v| = 0.5, clamped to 0.1
    assert _norm(fast.velocity) == pytest.approx(0.10, abs=1e-12)


def test_integrate_effector_z_floor():
    eff = EffectorState((0.0, 0.0, 0.4))
    sunk = integrate_effector(eff, (0.0, 0.0, -0.1), 1.0, z_floor=0.35)
    assert sunk.position[2] == 0.35


def test_speed_bound_under_fuzz():
    rng = np.random.default_rng(11)
    for _ in range(500):
        c = {oid: float(rng.uniform(0, 1)) for oid in ("a", "b", "c")}
        field = field_with(c)
        grasp = {oid: tuple(rng.uniform(-0.5, 0.5, 3)) for oid in c}
        eff = EffectorState(tuple(rng.uniform(-0.5, 0.5, 3)))
        v = pre_command_velocity(eff, field, grasp, PARAMS)
        assert _norm(v) <= 0.10 + 1e-12
        target = tuple(rng.uniform(-0.5, 0.5, 3))
        assert _norm(post_command_velocity(eff, target, PARAMS)) <= 0.10 + 1e-12


def test_slerp_endpoints_and_midpoint():
    q0 = (1.0, 0.0, 0.0, 0.0)
    q1 = (0.0, 0.0, 0.0, 1.0)  # 180 deg about z, quaternion angle 90 deg
    assert slerp(q0, q1, 0.0) == pytest.approx(q0)
    assert slerp(q0, q1, 1.0) == pytest.approx(q1)
    mid = slerp(q0, q1, 0.5)
    assert mid == pytest.approx((math.sqrt(0.5), 0.0, 0.0, math.sqrt(0.5)))
    assert _norm(mid) == pytest.approx(1.0, abs=1e-12)


def test_interaction_happy_path():
    state = InteractionState(home=(0.0, 0.0, 0.5))
    field = field_with({"a": 0.8})
    result = step_interaction(state, Event("command", command_kind="pick"), field)
    assert result.state.mode is Mode.POST_COMMAND
    assert result.state.committed == "a"
    assert result.state.pending_kind == "pick"
    result = step_interaction(result.state, Event("arrived"), field)
    assert result.state.mode is Mode.AWAIT_CONFIRM
    result = step_interaction(result.state, Event("confirm"), field)
    assert result.state.mode is Mode.EXECUTING
    done = step_interaction(result.state, Event("arrived"), field)
    assert done.state.mode is Mode.PRE_COMMAND
    assert done.reset_field


def test_interaction_reject_retargets_second():
    field = field_with({"a": 0.8, "b": 0.5})
    state = InteractionState()
    state = step_interaction(state, Event("command", command_kind="pick"), field).state
    state = step_interaction(state, Event("arrived"), field).state
    result = step_interaction(state, Event("reject"), field)
    assert result.state.mode is Mode.SECOND_CANDIDATE
    assert result.state.committed == "b"
    assert result.state.rejected == frozenset({"a"})
    state = step_interaction(result.state, Event("arrived"), field).state
    assert state.mode is Mode.AWAIT_CONFIRM
    result = step_interaction(state, Event("reject"), field)
    assert result.state.mode is Mode.RETURN_HOME
    assert result.state.committed is None
    home = step_interaction(result.state, Event("arrived"), field)
    assert home.state.mode is Mode.PRE_COMMAND
    assert home.state.rejected == frozenset()
    assert home.reset_field


def test_interaction_single_candidate_reject_goes_home():
    field = field_with({"a": 0.8})
    state = InteractionState()
    state = step_interaction(state, Event("command", command_kind="grasp"), field).state
    state = step_interaction(state, Event("arrived"), field).state
    result = step_interaction(state, Event("reject"), field)
    assert result.state.mode is Mode.RETURN_HOME


def test_interaction_command_without_intent_is_ignored():
    field = field_with({})
    state = InteractionState()
    result = step_interaction(state, Event("command", command_kind="pick"), field)
    assert result.state.mode is Mode.PRE_COMMAND
    assert any("no intent" in n for n in result.notices)


def test_interaction_confirm_in_pre_command_notices():
    result = step_interaction(InteractionState(), Event("confirm"), field_with({}))
    assert result.state.mode is Mode.PRE_COMMAND
    assert any("nothing to confirm" in n for n in result.notices)


def test_executing_only_reachable_through_confirm():
    # exhaustive walk over event sequences of length <= 4 from PreCommand:
    # every path that lands in Executing passes AwaitConfirm + confirm
    field = field_with({"a": 0.9, "b": 0.6})
    events = [Event("command", command_kind="pick"), Event("confirm"), Event("reject"), Event("arrived")]

    def walk(state, depth, seen_confirm_at_await):
        if state.mode is Mode.EXECUTING:
            assert seen_confirm_at_await
            return
        if depth == 0:
            return
        for ev in events:
            res = step_interaction(state, ev, field)
            walk(
                res.state,
                depth - 1,
                seen_confirm_at_await
                or (state.mode is Mode.AWAIT_CONFIRM and ev.kind == "confirm"),
            )

    walk(InteractionState(), 4, False)


def test_interaction_state_invariants():
    with pytest.raises(ValueError):
        InteractionState(mode=Mode.POST_COMMAND, committed=None)
    with pytest.raises(ValueError):
        InteractionState(mode=Mode.PRE_COMMAND, committed="a")
    assert ARRIVE_DIST == 0.005
