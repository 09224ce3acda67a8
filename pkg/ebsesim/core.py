import logging
import typing

import numpy as np

from ebsesim.agent import (
    AgentState,
    agent_predict,
    agent_update,
    compute_control,
    is_reset_step,
    synchronous_reset,
    update_input_estimate,
)
from ebsesim.bus import Bus, BusFrame, FrameKind
from ebsesim.model import measure, sample_noise, step_process
from ebsesim.observer import CentralEstimate, central_predict, central_update
from ebsesim.options import Options
from ebsesim.scenario import InputExchange, Scenario
from ebsesim.trace import RunTrace
from ebsesim.trigger import input_trigger, measurement_trigger
from ebsesim.utils import vector_norm

logger = logging.getLogger(__name__)

PROCESS_STREAM = 0
MEASUREMENT_STREAM = 1


def prepare(scenario: Scenario, options: Options) -> Scenario:
    """Apply the run-level seed and horizon overrides."""
    if options.seed is not None:
        scenario = scenario.reseeded(options.seed)
    if options.horizon is not None:
        scenario = scenario.replace(horizon=options.horizon)

    return scenario


class Simulation:
    """Lock-step simulation of every agent, the bus, the plant and the centralized reference."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.model = scenario.model
        self.gain = scenario.observer_gain
        self.controller = scenario.controller_gain if scenario.control_enabled else None
        self.agents = [AgentState(a, spec, self.model, scenario.initial_estimate)
                       for a, spec in enumerate(scenario.agents)]
        self.bus = Bus(range(scenario.n_agents), scenario.drop_model, scenario.capacity)
        self.sensor_owners = scenario.sensor_owners
        self.input_owners = scenario.input_owners
        self.trace = RunTrace(scenario.horizon, self.model.n, self.model.p, self.model.q, scenario.n_agents,
                              self.sensor_owners, self.input_owners, scenario.pairs,
                              scenario.measurement_trigger.delta_est, scenario.input_trigger.delta_ctrl)
        self.trace.bus_log = self.bus.log
        self.central = CentralEstimate(scenario.initial_estimate.copy(), scenario.initial_estimate.copy())

    def run(self, progress: typing.Optional[typing.Callable[[int], None]] = None) -> RunTrace:
        self.initialize()
        for k in range(1, self.scenario.horizon + 1):
            self.step(k)
            if progress is not None:
                progress(k)

        logger.info('Run %s finished after %d steps', self.scenario.name, self.scenario.horizon)
        return self.trace

    def initialize(self):
        trace = self.trace
        trace.x[0] = self.scenario.initial_state
        trace.x_c[0] = self.central.x_filt
        trace.x_c_pred[0] = self.central.x_pred
        for agent in self.agents:
            injected = self.scenario.injection.sample(0, agent.id)
            agent.x_filt = agent.x_filt + injected
            agent.x_pred = agent.x_filt.copy()
            trace.d_injected[0, agent.id] = injected
            trace.d[0, agent.id] = injected
            trace.x_pred[0, agent.id] = agent.x_pred
            trace.x_hat_pre[0, agent.id] = agent.x_filt
            trace.x_hat[0, agent.id] = agent.x_filt

        self.control(0)

    def step(self, k: int):
        model, trace, scenario = self.model, self.trace, self.scenario

        # plant, centralized reference and predictions
        trace.v[k - 1] = sample_noise(scenario.process_noise, k - 1, PROCESS_STREAM)
        trace.x[k] = step_process(model, trace.x[k - 1], trace.u[k - 1], trace.v[k - 1])
        trace.w[k] = sample_noise(scenario.measurement_noise, k, MEASUREMENT_STREAM)
        trace.y[k] = measure(model, trace.x[k], trace.w[k])
        x_c_pred = central_predict(model, self.gain, self.central, trace.u[k - 1])
        self.central = CentralEstimate(x_c_pred, central_update(model, self.gain, x_c_pred, trace.y[k]))
        trace.x_c_pred[k] = self.central.x_pred
        trace.x_c[k] = self.central.x_filt

        for agent in self.agents:
            agent.x_pred = agent_predict(model, agent.x_filt, agent.u_hat)
            trace.x_pred[k, agent.id] = agent.x_pred

        # measurement triggers, evaluated by each channel's owner on its own prediction
        frames = []
        delta = scenario.measurement_trigger.delta_est
        norm = scenario.measurement_trigger.norm
        for channel, owner in enumerate(self.sensor_owners):
            rows = model.sensor_rows(channel)
            y_channel = trace.y[k, rows]
            y_pred = model.C_block(channel) @ self.agents[owner].x_pred
            trace.innovations[k, channel] = vector_norm(y_channel - y_pred, norm)
            if measurement_trigger(y_channel, y_pred, float(delta[channel]), norm):
                trace.sensor_triggers[k, channel] = True
                frames.append(BusFrame(FrameKind.MEASUREMENT, owner, channel, y_channel.copy(), k))

        delivered = self.bus.send(frames, k)
        triggered = [frame.channel for frame in frames]

        # subset fusion with the equivalent disturbance of every agent
        identity = np.eye(model.n)
        fused = identity - sum((self.gain.block(c) @ model.C_block(c) for c in triggered),
                               np.zeros((model.n, model.n)))
        for agent in self.agents:
            received = {f.channel: f.payload for f in delivered[agent.id] if f.kind == FrameKind.MEASUREMENT}
            injected = scenario.injection.sample(k, agent.id)
            agent.x_filt = agent_update(model, self.gain, agent.x_pred, sorted(received.items()), injected)

            d = injected + fused @ model.B @ (agent.u_hat - trace.u[k - 1])
            for channel in triggered:
                if channel not in received:
                    trace.missed[k, agent.id, channel] = True
                    innovation = trace.y[k, model.sensor_rows(channel)] - model.C_block(channel) @ agent.x_pred
                    d = d - self.gain.block(channel) @ innovation
            trace.d_injected[k, agent.id] = injected
            trace.d[k, agent.id] = d
            trace.x_hat_pre[k, agent.id] = agent.x_filt

        if is_reset_step(k, scenario.reset_period):
            self.reset(k)

        for agent in self.agents:
            trace.x_hat[k, agent.id] = agent.x_filt

        self.control(k)

    def reset(self, k: int):
        frames = [BusFrame(FrameKind.RESET_ESTIMATE, agent.id, agent.id, agent.x_filt.copy(), k)
                  for agent in self.agents]
        delivered = self.bus.send(frames, k)
        for agent in self.agents:
            estimates = [f.payload for f in sorted(delivered[agent.id], key=lambda f: f.sender)
                         if f.kind == FrameKind.RESET_ESTIMATE]
            agent.x_filt = synchronous_reset(estimates, k, self.scenario.reset_period)[agent.id]

        self.trace.reset_steps.append(k)
        logger.debug('Synchronous reset at step %d', k)

    def control(self, k: int):
        """Compute the inputs applied at step ``k`` and refresh every agent's input estimate."""
        trace, model = self.trace, self.model
        if self.controller is None:
            for agent in self.agents:
                trace.u_hat[k, agent.id] = agent.u_hat
            return

        frames = []
        periodic = self.scenario.exchange == InputExchange.PERIODIC
        delta = self.scenario.input_trigger.delta_ctrl
        norm = self.scenario.input_trigger.norm
        for block, owner in sorted(self.input_owners.items()):
            agent = self.agents[owner]
            agent.u = compute_control(self.controller, agent, block)
            trace.u[k, model.input_columns(block)] = agent.u
            if periodic or input_trigger(agent.u, agent.u_last, float(delta[block]), norm):
                agent.u_last = agent.u.copy()
                trace.input_triggers[k, block] = True
                frames.append(BusFrame(FrameKind.INPUT, owner, block, agent.u.copy(), k))

        delivered = self.bus.send(frames, k)
        for agent in self.agents:
            agent.u_hat = update_input_estimate(model, agent, delivered[agent.id])
            trace.u_hat[k, agent.id] = agent.u_hat
