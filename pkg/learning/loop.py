"""
Iterative learning loop: run an episode with the sampling controller, grow the
safe set from feasible episodes, retrain the value model, repeat.

Every random draw is keyed by (seed, purpose, iteration, step), so the state of
a run is fully described by its iteration index together with the safe set and
model, and a resumed run continues bit-for-bit.
"""
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from core.errors import SitLmpcError, TrainingError
from core.safe_set import SafeSet, build_dataset, update_safe_set
from core.types import IterationRecord, StepDiagnostics, Trajectory
from learning.bootstrap import demonstration, demonstration_policy, initial_safe_set
from solver.controller import ApMppiController
from solver.mppi import MppiConfig
from solver.sampling import SamplerConfig
from systems.environments import Environment, make_environment
from utils.experiment_config import ExperimentConfig
from utils.log import get_logger
from utils.rng import ACTUATION, CEM, CONTROLS, LATENT, OBSERVATION, PENALTY, TRAINING, stream
from valuefn import SplineFlowModel, initial_model, train, value_estimate

logger = get_logger('loop')

TERMINATIONS = ('target', 'violation', 'step_cap', 'solver_error')


@dataclass
class RunState:
    """
    Everything needed to continue a run.

    ``records`` holds the learning iterations only; the demonstration is kept
    in ``bootstrap``. ``iteration`` is the number of learning iterations
    executed and doubles as the RNG cursor.
    """
    config: ExperimentConfig
    seed: int
    iteration: int
    safe_set: SafeSet
    model: SplineFlowModel
    bootstrap: IterationRecord
    step_cap: int
    records: List[IterationRecord] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.iteration >= self.config.iterations


def build_controller(env: Environment, config: ExperimentConfig) -> ApMppiController:
    sampler = SamplerConfig(
        variance=np.asarray(config.sampler.variance, dtype=float),
        u_lo=env.u_lo,
        u_hi=env.u_hi,
        n_samples=config.sampler.n_samples,
        horizon=config.sampler.horizon,
    )
    mppi = MppiConfig(sampler, temperature=config.mppi.temperature, weight_floor=config.mppi.weight_floor)
    return ApMppiController(env, mppi, config.penalty,
                            k_neighbors=config.safe_set.k_neighbors,
                            hull_max_iter=config.safe_set.hull_max_iter,
                            hull_tol=config.safe_set.hull_tol,
                            optimizer=config.mppi.optimizer,
                            cem=config.cem,
                            backup=config.mppi.backup)


def penalty_lambdas(controller: ApMppiController, seed: int, iteration: int, t: int) -> np.ndarray:
    """Penalty pairs in force at step t of an iteration, per the resample policy."""
    policy = controller.penalty.resample
    if policy == 'run':
        rng = stream(seed, PENALTY, 0)
    elif policy == 'iteration':
        rng = stream(seed, PENALTY, iteration)
    else:
        rng = stream(seed, PENALTY, iteration, t)
    return controller.penalty_pairs(rng)


def start_run(config: ExperimentConfig, seed: int, env: Optional[Environment] = None) -> RunState:
    """
    Demonstration, initial safe set and initial value model for one seed.

    Raises:
        BootstrapError: If the demonstration is infeasible
    """
    env = env or make_environment(config.environment)
    policy = demonstration_policy(env, config.environment.bootstrap_speed)
    demo = demonstration(env, policy, seed)
    safe_set = initial_safe_set(env, demo, config.safe_set.normalize)
    dataset = build_dataset(safe_set)
    rng = stream(seed, TRAINING, 0)
    if config.loop.pretrain_on_bootstrap:
        model = train(dataset, config.value_function, rng)
    else:
        model = initial_model(dataset, config.value_function, rng)
    step_cap = config.loop.resolve_step_cap(len(demo.trajectory), config.sampler.horizon)
    logger.info(f"Seed {seed}: safe set of {len(safe_set)} states, step cap {step_cap}")
    return RunState(config=config, seed=seed, iteration=0, safe_set=safe_set, model=model,
                    bootstrap=demo, step_cap=step_cap)


def run_episode(run: RunState, env: Environment, controller: Optional[ApMppiController] = None) -> IterationRecord:
    """
    One closed-loop episode with the current safe set and value model.

    The episode ends when the state leaves the admissible set, reaches the
    target, or hits the step cap, checked in that order before every step.
    Any library error raised while solving or applying a step ends the episode
    as infeasible with the error as its message.
    """
    config = run.config
    controller = controller or build_controller(env, config)
    controller.reset()
    seed = run.seed
    iteration = run.iteration + 1
    n_latent = config.value_function.latent_samples
    started = time.perf_counter()

    x = env.initial_state.copy()
    states = [x]
    inputs = []
    steps: List[StepDiagnostics] = []
    message = ''
    t = 0
    while True:
        if not env.in_admissible(x):
            termination = 'violation'
            break
        if env.in_target(x):
            termination = 'target'
            break
        if t >= run.step_cap:
            termination = 'step_cap'
            break
        value_fn = _value_function(run.model, n_latent, stream(seed, LATENT, iteration, t))
        try:
            y = env.observe(x, stream(seed, OBSERVATION, iteration, t))
            result = controller.step(y, run.safe_set, value_fn,
                                     penalty_lambdas(controller, seed, iteration, t),
                                     stream(seed, CONTROLS, iteration, t),
                                     stream(seed, CEM, iteration, t))
            x = env.apply(x, result.control, stream(seed, ACTUATION, iteration, t))
        except SitLmpcError as e:
            termination = 'solver_error'
            message = f"step {t}: {e}"
            logger.warning(f"Iteration {iteration}: {message}")
            break
        states.append(x)
        inputs.append(result.control)
        steps.append(result.diagnostics)
        t += 1

    trajectory = Trajectory(np.array(states), np.array(inputs).reshape(len(inputs), env.n_u))
    violations = int(np.count_nonzero(env.admissible_distance(trajectory.states) > 0))
    cost = float(np.sum(env.stage_cost(trajectory.states[:-1], trajectory.inputs))) if inputs else 0.0
    feasible = termination == 'target' and violations == 0
    record = IterationRecord(iteration=iteration, trajectory=trajectory, feasible=feasible,
                             iteration_cost=cost, violation_count=violations,
                             wall_time=time.perf_counter() - started, termination=termination,
                             message=message, steps=steps)
    logger.info(f"Seed {seed} iteration {iteration}: cost {cost:g} ({env.cost_seconds(cost):.2f} s), "
                f"feasible={feasible}, violations={violations}, {termination}, "
                f"{record.wall_time:.1f}s wall")
    return record


def _value_function(model: SplineFlowModel, n_latent: int, rng: np.random.Generator) -> Callable:
    def value_fn(features: np.ndarray) -> np.ndarray:
        return value_estimate(np.array(features, dtype=float, ndmin=2), model, n_latent, rng)
    return value_fn


def advance_iteration(run: RunState, record: IterationRecord, env: Environment) -> RunState:
    """
    Fold a finished episode into the run.

    Feasible episodes extend the safe set and trigger retraining on the grown
    dataset. Infeasible episodes leave both the safe set and the model as they
    were. If retraining fails the previous model is kept and the failure is
    noted on the record.
    """
    records = run.records + [record]
    if not record.feasible:
        return replace(run, iteration=record.iteration, records=records)

    safe_set = update_safe_set(run.safe_set, record, env.stage_cost, env.features)
    dataset = build_dataset(safe_set)
    try:
        model = train(dataset, run.config.value_function, stream(run.seed, TRAINING, record.iteration),
                      init_model=run.model)
    except TrainingError as e:
        logger.error(f"Seed {run.seed} iteration {record.iteration}: retraining failed, keeping previous model: {e}")
        record.message = f"retraining failed: {e}"
        model = run.model
    return replace(run, iteration=record.iteration, records=records, safe_set=safe_set, model=model)


def run_iterations(run: RunState, env: Optional[Environment] = None,
                   on_iteration: Optional[Callable[[RunState], None]] = None) -> RunState:
    """
    Execute the remaining iterations of a run.

    Args:
        run: Fresh or resumed run state
        env: Environment (built from the config if omitted)
        on_iteration: Called with the new state after every iteration,
            e.g. to write a checkpoint

    Returns:
        Final run state
    """
    env = env or make_environment(run.config.environment)
    controller = build_controller(env, run.config)
    while not run.done:
        record = run_episode(run, env, controller)
        run = advance_iteration(run, record, env)
        if on_iteration is not None:
            on_iteration(run)
    return run
