"""Executable model of the wind-compensated car.

State evolves in exact rational arithmetic: the wind shifts by a bounded
amount per step, position integrates velocity and wind, the sensor reads
position plus a bounded error, and the controller adjusts velocity from
the current and previous sensor readings.  `final_state` folds
observations from the right: the last list element is applied first.

The module also builds adversarial observation sequences that steer the
system onto a falsifying sensor pair found by the verifier, which is how
verification counterexamples transfer to concrete misbehaving runs.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .network import Network, eval_network

Q = Fraction


@dataclass(frozen=True)
class State:
    wind_speed: Fraction
    position: Fraction
    velocity: Fraction
    sensor: Fraction


@dataclass(frozen=True)
class Observation:
    wind_shift: Fraction
    sensor_error: Fraction


INITIAL_STATE = State(Q(0), Q(0), Q(0), Q(0))

ROAD_HALF_WIDTH = Q(3)          # road of width 6 centred on the x-axis
SENSOR_GUARD = Q(13, 4)         # controller inputs stay within +-3.25
WIND_SHIFT_BOUND = Q(1)
SENSOR_ERROR_BOUND = Q(1, 4)


def valid_observation(o: Observation,
                      wind_bound=WIND_SHIFT_BOUND,
                      sensor_bound=SENSOR_ERROR_BOUND) -> bool:
    return abs(o.wind_shift) <= wind_bound \
        and abs(o.sensor_error) <= sensor_bound


def next_state(o: Observation, s: State, controller) -> State:
    new_wind = s.wind_speed + o.wind_shift
    new_position = s.position + s.velocity + new_wind
    new_sensor = new_position + o.sensor_error
    new_velocity = s.velocity + controller(new_sensor, s.sensor)
    return State(new_wind, new_position, new_velocity, new_sensor)


def final_state(observations, controller) -> State:
    """Right fold: the last observation in the list is applied first."""
    state = INITIAL_STATE
    for o in reversed(list(observations)):
        state = next_state(o, state, controller)
    return state


def trace_states(observations, controller) -> list:
    """All intermediate states of the right fold, initial state first."""
    states = [INITIAL_STATE]
    for o in reversed(list(observations)):
        states.append(next_state(o, states[-1], controller))
    return states


def check_on_road(trace) -> bool:
    return all(abs(s.position) <= ROAD_HALF_WIDTH for s in trace)


def network_controller(net: Network):
    """u . f . e with e(v) = (v + 4) / 8 applied to both sensor readings
    and u the identity on the single output."""
    def controller(x: Fraction, y: Fraction) -> Fraction:
        embedded = [(Q(x) + 4) / 8, (Q(y) + 4) / 8]
        return Fraction(eval_network(net, embedded, exact=True)[0])
    return controller


@dataclass
class RunReport:
    on_road: bool
    max_abs_position: Fraction
    guard_violations: int        # controller called outside |sensor|<=3.25


def run_trace(observations, controller) -> RunReport:
    trace = [INITIAL_STATE]
    guard_violations = 0
    state = INITIAL_STATE
    for o in reversed(list(observations)):
        new_wind = state.wind_speed + o.wind_shift
        new_position = state.position + state.velocity + new_wind
        new_sensor = new_position + o.sensor_error
        if abs(new_sensor) > SENSOR_GUARD or abs(state.sensor) > SENSOR_GUARD:
            guard_violations += 1
        state = next_state(o, state, controller)
        trace.append(state)
    return RunReport(check_on_road(trace),
                     max(abs(s.position) for s in trace),
                     guard_violations)


def random_observations(rng: random.Random, steps: int,
                        wind_bound=WIND_SHIFT_BOUND,
                        sensor_bound=SENSOR_ERROR_BOUND,
                        resolution: int = 10**6) -> list:
    """Uniform valid observations with exact rational values."""
    out = []
    for _ in range(steps):
        w = Q(rng.randint(-resolution, resolution), resolution) * wind_bound
        e = Q(rng.randint(-resolution, resolution), resolution) * sensor_bound
        out.append(Observation(w, e))
    return out


def monte_carlo(net: Network, steps: int, runs: int, seed: int,
                wind_bound=WIND_SHIFT_BOUND,
                sensor_bound=SENSOR_ERROR_BOUND) -> list:
    controller = network_controller(net)
    rng = random.Random(seed)
    reports = []
    for _ in range(runs):
        obs = random_observations(rng, steps, wind_bound, sensor_bound)
        reports.append(run_trace(obs, controller))
    return reports


# ---------------------------------------------------------------------------
# Witness transfer: steer the system onto a falsifying sensor pair
# ---------------------------------------------------------------------------

def margin_holds(controller, x: Fraction, y: Fraction) -> bool:
    return abs(controller(x, y) + 2 * x - y) < Q(5, 4)


def adversarial_observations(controller, current: Fraction,
                             previous: Fraction, max_steps: int = 400):
    """Observations (in `final_state` list order) driving the sensors to
    read `previous` then `current` on consecutive steps.

    Wind shifts stay within +-1 and sensor errors within +-0.25; the wind
    is pumped until a one-step landing on `previous` and a follow-up
    strike on `current` are both reachable.  Raises ValueError when no
    plan is found (possible for strongly stabilising controllers).
    """
    for dive in range(0, 60, 3):
        plan = _plan(controller, current, previous, dive, max_steps)
        if plan is not None:
            return list(reversed(plan))   # temporal order -> foldr order
    raise ValueError("no adversarial observation sequence found")


def _plan(controller, current, previous, dive, max_steps):
    jump = current - previous
    state = INITIAL_STATE
    temporal = []
    dive_dir = -1 if jump > 0 else 1
    for step in range(max_steps):
        w, p, v = state.wind_speed, state.position, state.velocity
        # two-step lookahead: land the sensor exactly on `previous`, then
        # check the strike wind is reachable from the landing wind
        w_land = previous - p - v
        if abs(w_land - w) <= 1:
            o1 = Observation(w_land - w, Q(0))
            mid = next_state(o1, state, controller)
            w_strike = current - mid.position - mid.velocity
            if abs(w_strike - mid.wind_speed) <= 1:
                o2 = Observation(w_strike - mid.wind_speed, Q(0))
                return temporal + [o1, o2]
        if step < dive:
            shift = Q(dive_dir)
        else:
            aim = jump - v          # wind needed at the strike step
            shift = max(Q(-1), min(Q(1), aim - w))
        state = next_state(Observation(shift, Q(0)), state, controller)
        temporal.append(Observation(shift, Q(0)))
    return None
