import pytest

from src.models.agent_profile import AgentProfile, BiasStage, KeyAction
from src.models.categories import AppearanceSignature
from src.models.errors import IdentificationFailed
from src.models.learner_config import IdentifyConfig
from src.models.world_state import ObservedObject
from src.services.agent_id import (
    discover_key_bindings,
    filter_permanent,
    filter_unique,
    identify_agent,
    motion_binding_test,
    observe_window,
    identify_and_bind,
)
from src.services.engine import GameEnv

A, B, C = (1, 1, 1), (2, 2, 2), (3, 3, 3)


def sig(color):
    return AppearanceSignature(color, (1, 1))


def frame(*colors):
    return tuple(ObservedObject(i, (i, 0), (1, 1), color) for i, color in enumerate(colors))


def test_filter_unique_drops_repeated_signatures():
    frames = [frame(A, B), frame(A, B, B), frame(A, C)]
    assert filter_unique(frames) == frozenset({sig(A), sig(C)})


def test_filter_permanent_keeps_always_present():
    frames = [frame(A, B), frame(A, C), frame(A, B)]
    assert filter_permanent(frames, {sig(A), sig(B), sig(C)}) == frozenset({sig(A)})


def test_observe_window_length(specs):
    frames = observe_window(GameEnv(specs["roadrash"]), 25, seed=1)
    assert len(frames) == 25
    assert all(any(o.color == (0, 120, 255) for o in f) for f in frames)


def test_identify_by_uniqueness(specs):
    profile, report = identify_agent(GameEnv(specs["myaliensv1"]), window=50, seed=0)
    assert profile.signature == AppearanceSignature((255, 255, 255), (1, 1))
    assert report.bias_used is BiasStage.UNIQUENESS
    assert report.sizes() == [1]
    assert profile.instance_handle == 0


def test_identify_roadrash_car(specs):
    profile, report = identify_agent(GameEnv(specs["roadrash"]), window=50, seed=0)
    assert profile.signature == AppearanceSignature((0, 120, 255), (1, 2))
    assert "agent identified by" in report.render()


def test_motion_binding_separates_self_propelled_objects(parade):
    profile, report = identify_agent(GameEnv(parade), window=30, trials=5, seed=0)
    assert profile.signature == AppearanceSignature((255, 255, 255), (1, 1))
    assert report.bias_used is BiasStage.MOTION_BINDING
    assert report.sizes() == [2, 2, 1]


def test_motion_binding_needs_candidates(parade):
    with pytest.raises(IdentificationFailed):
        motion_binding_test(GameEnv(parade), frozenset())


def test_motion_binding_rejects_unresponsive_objects(parade):
    drone = AppearanceSignature((0, 0, 255), (1, 1))
    with pytest.raises(IdentificationFailed):
        motion_binding_test(GameEnv(parade), frozenset({drone}), trials=3)


def test_key_bindings_with_fire(specs):
    ship = AgentProfile(AppearanceSignature((0, 255, 0), (1, 1)))
    key_map = discover_key_bindings(GameEnv(specs["spaceinvaders"]), ship)
    assert key_map == {
        "none": KeyAction.NO_EFFECT,
        "left": KeyAction.MOVE_LEFT,
        "right": KeyAction.MOVE_RIGHT,
        "space": KeyAction.FIRE,
    }


def test_identify_and_bind_maps_keys(specs):
    profile, _ = identify_and_bind(GameEnv(specs["myaliensv1"]), IdentifyConfig(window=40), seed=3)
    assert profile.key_map == {"none": KeyAction.NO_EFFECT, "left": KeyAction.MOVE_LEFT,
                               "right": KeyAction.MOVE_RIGHT}
    assert profile.fire_keys() == ()
    assert "MoveLeft" in profile.render_key_map()


class SeedLog(GameEnv):
    def __init__(self, spec):
        super().__init__(spec)
        self.seeds = []

    def reset(self, seed=None):
        self.seeds.append(seed)
        return super().reset(seed)


def test_motion_binding_trials_use_their_own_seeds(parade):
    env = SeedLog(parade)
    hero = AppearanceSignature((255, 255, 255), (1, 1))
    drone = AppearanceSignature((0, 0, 255), (1, 1))
    assert motion_binding_test(env, frozenset({hero, drone}), trials=4, seed=2) == hero
    assert env.seeds == [2, 3, 4, 5] * len(parade.actions)


def test_key_presses_use_their_own_seeds(specs):
    env = SeedLog(specs["spaceinvaders"])
    ship = AgentProfile(AppearanceSignature((0, 255, 0), (1, 1)))
    discover_key_bindings(env, ship, presses=5, seed=10)
    assert env.seeds == [10, 11, 12, 13, 14] * 4
