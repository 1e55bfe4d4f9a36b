"""
Tests for the plant models, disturbances and task environments.
"""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.errors import DynamicsDivergedError, InputBoundsError
from systems.disturbance import DisturbanceModel
from systems.environments import PointMassEnvironment, RacingEnvironment, make_environment
from systems.point_mass import PlantModel, point_mass_dynamics, point_mass_plant, point_mass_step
from systems.single_track import load_vehicle_parameters, rk4, single_track_plant, single_track_step
from systems.track import FrenetPose, TrackGeometry, from_frenet
from tests.conftest import CONFIG_DIR
from utils.experiment_config import EnvironmentSettings


@pytest.fixture(scope='module')
def vehicle():
    return load_vehicle_parameters(CONFIG_DIR / 'vehicles' / 'vehicle_id1.json')


@pytest.fixture(scope='module')
def desk_track():
    return TrackGeometry.from_csv(CONFIG_DIR / 'tracks' / 'desk_oval.csv')


class TestPointMass:
    def test_zero_order_hold_step(self):
        x_next = point_mass_step(np.zeros(4), np.array([1.0, 0.0]))
        np.testing.assert_allclose(x_next, [0.005, 0.0, 0.1, 0.0], atol=1e-15)

    def test_constant_velocity(self):
        x_next = point_mass_dynamics(np.array([1.0, 2.0, 3.0, -4.0]), np.zeros(2))
        np.testing.assert_allclose(x_next, [1.3, 1.6, 3.0, -4.0])

    def test_batched_dynamics(self):
        x = np.zeros((5, 3, 4))
        u = np.ones((5, 3, 2))
        assert point_mass_dynamics(x, u).shape == (5, 3, 4)

    def test_input_outside_box(self):
        with pytest.raises(InputBoundsError):
            point_mass_step(np.zeros(4), np.array([1.5, 0.0]))
        with pytest.raises(InputBoundsError):
            point_mass_step(np.zeros(4), np.array([0.0]))

    def test_bounds_inclusive(self):
        point_mass_step(np.zeros(4), np.array([1.0, -1.0]))

    def test_actuation_noise_saturates(self):
        x_next = point_mass_plant().step(np.zeros(4), np.array([1.0, 0.0]), w=np.array([0.5, 0.0]))
        assert x_next[2] == pytest.approx(0.1)

    def test_divergence_detected(self):
        plant = PlantModel(name='blow_up', n_x=1, n_u=1, dt=0.1, u_lo=np.array([-1.0]), u_hi=np.array([1.0]),
                           dynamics=lambda x, u: x * np.inf)
        with pytest.raises(DynamicsDivergedError):
            plant.step(np.ones(1), np.zeros(1))


class TestSingleTrack:
    def test_straight_driving(self, vehicle):
        plant = single_track_plant(vehicle)
        x = np.array([0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0])
        x_next = plant.step(x, np.zeros(2))
        np.testing.assert_allclose(x_next, [0.25, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0], atol=1e-12)

    def test_kinematic_yaw_rate(self, vehicle):
        plant = single_track_plant(vehicle)
        v, delta = 0.5, 0.1
        x = np.array([0.0, 0.0, v, delta, 0.0, 0.0, 0.0])
        x_next = plant.step(x, np.zeros(2))
        yaw_rate = x_next[4] / plant.dt
        assert yaw_rate == pytest.approx(v * np.tan(delta) / vehicle.wheelbase, rel=1e-9)
        assert yaw_rate == pytest.approx(v * delta / vehicle.wheelbase, rel=1e-2)

    def test_dynamic_steady_state_yaw_rate(self, vehicle):
        # Equal front and rear cornering stiffness: neutral steer, gain v / L
        assert vehicle.C_Sf == vehicle.C_Sr
        plant = single_track_plant(vehicle)
        v, delta = 8.0, 0.05
        x = np.array([0.0, 0.0, v, delta, 0.0, 0.0, 0.0])
        for _ in range(60):
            x = plant.step(x, np.zeros(2))
        assert x[2] == pytest.approx(v)
        assert x[5] == pytest.approx(v * delta / vehicle.wheelbase, rel=1e-6)
        assert x[5] < v * np.tan(delta) / vehicle.wheelbase

    def test_single_step_matches_plant(self, vehicle):
        x = np.array([1.0, -2.0, 2.5, 0.05, 0.3, 0.0, 0.0])
        u = np.array([1.0, 0.2])
        np.testing.assert_array_equal(single_track_step(x, u, vehicle), single_track_plant(vehicle).step(x, u))

    def test_steering_rate_clipped_at_limit(self, vehicle):
        x = np.array([0.0, 0.0, 5.0, vehicle.steering_max, 0.0, 0.0, 0.0])
        x_next = rk4(x, np.array([0.0, vehicle.steering_rate_max]), 0.05, vehicle)
        assert x_next[3] == pytest.approx(vehicle.steering_max)

    def test_substeps_shrink_with_smaller_cap(self, vehicle):
        x = np.array([0.0, 0.0, 0.5, 0.05, 0.0, 0.0, 0.0])
        u = np.array([0.2, 0.1])
        coarse = rk4(x, u, 0.05, vehicle, max_substep=0.05)
        fine = rk4(x, u, 0.05, vehicle, max_substep=0.005)
        np.testing.assert_allclose(coarse, fine, atol=1e-6)

    def test_input_box_from_parameters(self, vehicle):
        plant = single_track_plant(vehicle)
        np.testing.assert_allclose(plant.u_lo, [-vehicle.a_max, vehicle.steering_rate_min])
        np.testing.assert_allclose(plant.u_hi, [vehicle.a_max, vehicle.steering_rate_max])
        with pytest.raises(InputBoundsError):
            plant.step(np.zeros(7), np.array([0.0, 1.0]))


class TestDisturbance:
    @given(st.integers(min_value=0, max_value=2 ** 31), st.floats(min_value=0.5, max_value=3.0))
    def test_draws_stay_within_truncation(self, seed, truncation):
        model = DisturbanceModel.from_scales([0.1, 0.2, 0.0, 1.0], [0.05, 0.3], truncation)
        rng = np.random.default_rng(seed)
        obs = model.sample_observation(rng, size=500)
        act = model.sample_actuation(rng, size=500)
        assert obs.shape == (500, 4)
        assert act.shape == (500, 2)
        assert np.all(np.abs(obs) <= model.observation_bound + 1e-12)
        assert np.all(np.abs(act) <= model.actuation_bound + 1e-12)
        assert np.all(obs[:, 2] == 0.0)

    def test_noise_free(self):
        model = DisturbanceModel.noise_free(4, 2)
        assert model.is_noise_free
        assert not DisturbanceModel.from_scales([0.0], [0.1]).is_noise_free

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            DisturbanceModel.from_scales([-0.1], [0.0])


class TestPointMassEnvironment:
    def test_admissible_distance(self, point_mass_env):
        assert point_mass_env.admissible_distance(np.array([30.0, 0.0, 0.0, 0.0])) == 10.0
        assert point_mass_env.admissible_distance(np.array([45.0, 0.0, 0.0, 0.0])) == 0.0
        assert point_mass_env.admissible_distance(np.array([30.0, 4.0, 0.0, 0.0])) == pytest.approx(6.0)

    def test_target_inclusion(self, point_mass_env):
        assert point_mass_env.in_target(np.array([60.0, 0.0, 0.0, 0.0]))
        assert point_mass_env.in_target(np.array([60.5, 0.5, 0.3, 0.0]))
        assert not point_mass_env.in_target(np.array([58.0, 0.0, 0.0, 0.0]))
        assert not point_mass_env.in_target(np.array([60.0, 0.0, 1.0, 0.0]))

    def test_stage_cost_is_step_count(self, point_mass_env):
        x = np.array([[0.0, 0.0, 0.0, 0.0], [60.0, 0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(point_mass_env.stage_cost(x, np.zeros((2, 2))), [1.0, 0.0])
        assert point_mass_env.cost_seconds(25.0) == pytest.approx(2.5)

    def test_observe_without_noise_is_identity(self, point_mass_env, rng):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(point_mass_env.observe(x, rng), x)
        np.testing.assert_array_equal(point_mass_env.observe(x), x)

    def test_from_settings(self):
        env = make_environment(EnvironmentSettings(kind='point_mass', observation_std=(0.1, 0.1, 0.0, 0.0),
                                                   actuation_std=(0.0, 0.0)))
        assert isinstance(env, PointMassEnvironment)
        assert env.dt == pytest.approx(0.1)
        assert not env.disturbance.is_noise_free


class TestRacingEnvironment:
    def test_initial_state_on_centerline(self, desk_track, vehicle):
        env = RacingEnvironment(desk_track, vehicle, v0=3.0)
        assert env.in_admissible(env.initial_state)
        assert not env.in_target(env.initial_state)
        s, e_y, e_psi = env.frenet(env.initial_state)
        assert float(s) == 0.0
        assert float(e_y) == pytest.approx(0.0, abs=1e-6)
        assert float(e_psi) == pytest.approx(0.0, abs=1e-6)

    def test_admissible_distance_beyond_edge(self, desk_track, vehicle):
        env = RacingEnvironment(desk_track, vehicle)
        s = 2.0
        for side in (1.0, -1.0):
            px, py, psi = from_frenet(FrenetPose(s, side * (desk_track.half_width + 0.3), 0.0), desk_track)
            x = np.array([px, py, 3.0, 0.0, psi, 0.0, 0.0, s])
            assert float(env.admissible_distance(x)) == pytest.approx(0.3, abs=1e-6)

    def test_progress_accumulates(self, desk_track, vehicle):
        env = RacingEnvironment(desk_track, vehicle, v0=4.0)
        x = env.initial_state
        for _ in range(10):
            x = env.apply(x, np.zeros(2))
        assert x[7] == pytest.approx(2.0, abs=0.05)
        np.testing.assert_allclose(env.step(env.initial_state[None, :], np.zeros((1, 2)))[0], env.apply(env.initial_state, np.zeros(2)))

    def test_target_is_completed_lap(self, desk_track, vehicle):
        env = RacingEnvironment(desk_track, vehicle)
        x = env.initial_state.copy()
        x[7] = desk_track.length
        assert env.in_target(x)
        assert env.stage_cost(x, np.zeros(2)) == 0.0

    def test_features(self, desk_track, vehicle):
        env = RacingEnvironment(desk_track, vehicle, v0=3.0)
        features = env.features(env.initial_state)
        assert features.shape == (env.n_features,)
        assert features[3] == 3.0
