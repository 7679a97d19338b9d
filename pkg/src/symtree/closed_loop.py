"""Closed-loop plant simulation under any controller, plus evaluation metrics.

The plant ODE is integrated with RK4 at a fine internal step while the
controller output is held constant between sampling instants (zero-order
hold). The controller inside the loop may be the receding-horizon optimizer,
a learned tree model, or a constant.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ControllerError, DomainError, SymtreeError
from .learner import Dataset
from .mpc import MpcSpec, PlantSpec, plant_rhs, solve_mpc
from .tree import TreeModel, predict

H_INT_DEFAULT = 0.01  # internal RK4 step, minutes


@dataclass
class Controller:
    """Uniform state -> control map; output is clipped to u_bounds."""

    kind: str
    u_bounds: tuple
    fn: object  # callable state -> raw control

    def __call__(self, x: float) -> float:
        u = float(self.fn(float(x)))
        return float(np.clip(u, self.u_bounds[0], self.u_bounds[1]))


def mpc_controller(spec: MpcSpec) -> Controller:
    return Controller(kind="mpc", u_bounds=spec.u_bounds,
                      fn=lambda x: solve_mpc(spec, x).first_action)


def model_controller(model: TreeModel, u_bounds) -> Controller:
    return Controller(kind="model", u_bounds=tuple(u_bounds),
                      fn=lambda x: predict(model, x))


def constant_controller(value: float, u_bounds) -> Controller:
    return Controller(kind="constant", u_bounds=tuple(u_bounds),
                      fn=lambda x: value)


@dataclass
class SimTrace:
    times: np.ndarray      # sample instants, length n_steps + 1
    states: np.ndarray     # states at sample instants, length n_steps + 1
    controls: np.ndarray   # control applied over each interval, length n_steps
    latencies: np.ndarray  # controller call latency per step, seconds
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "u", "latency_s"])
        for i, (t, x) in enumerate(zip(self.times, self.states)):
            t, x = float(t), float(x)
            if i < len(self.controls):
                w.writerow([repr(t), repr(x), repr(float(self.controls[i])),
                            repr(float(self.latencies[i]))])
            else:
                w.writerow([repr(t), repr(x), "", ""])
        return buf.getvalue()


def rk4_step(plant: PlantSpec, x: float, u: float, h: float) -> float:
    k1 = plant_rhs(plant, x, u)
    k2 = plant_rhs(plant, x + 0.5 * h * k1, u)
    k3 = plant_rhs(plant, x + 0.5 * h * k2, u)
    k4 = plant_rhs(plant, x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_hold(plant: PlantSpec, x: float, u: float, dt: float,
                   h_int: float = H_INT_DEFAULT) -> float:
    """Advance the plant by dt with the control held constant."""
    n_sub = max(1, round(dt / h_int))
    h = dt / n_sub
    for _ in range(n_sub):
        x = rk4_step(plant, x, u, h)
    return x


def simulate(plant: PlantSpec, ctrl: Controller, x0: float, t_final: float,
             dt_sample: float, h_int: float = H_INT_DEFAULT) -> SimTrace:
    """Zero-order-hold closed loop; latency is measured around the controller call."""
    if dt_sample <= 0 or t_final < dt_sample:
        raise ControllerError(f"invalid horizon/sampling ({t_final}, {dt_sample})")
    n_steps = round(t_final / dt_sample)
    times = np.arange(n_steps + 1) * dt_sample
    states = np.empty(n_steps + 1)
    controls = np.empty(n_steps)
    lats = np.empty(n_steps)
    x = float(x0)
    states[0] = x
    for i in range(n_steps):
        t0 = time.perf_counter()
        try:
            u = ctrl(x)
        except (DomainError, SymtreeError) as exc:
            raise ControllerError(
                f"controller failed at t={times[i]:.4g}, x={x!r}: {exc}") from exc
        lats[i] = time.perf_counter() - t0
        controls[i] = u
        x = integrate_hold(plant, x, u, dt_sample, h_int)
        states[i + 1] = x
    return SimTrace(times=times, states=states, controls=controls, latencies=lats,
                    config={"x0": x0, "t_final": t_final, "dt_sample": dt_sample,
                            "h_int": h_int, "controller": ctrl.kind})


def iae(trace: SimTrace, x_sp: float) -> float:
    """Sum of |x_t - x_sp| over the sample instants (discrete sum, not integral)."""
    return float(np.sum(np.abs(trace.states - x_sp)))


def mae(ctrl: Controller, data: Dataset) -> float:
    """Mean absolute prediction error of a controller over a labeled dataset."""
    errs = [abs(data.y[i] - ctrl(float(data.X[i, 0]))) for i in range(data.n_points)]
    return float(np.mean(errs))


def latency_stats(trace: SimTrace):
    """(mean, max) of the per-step controller latencies in seconds."""
    if len(trace.latencies) == 0:
        raise ControllerError("empty trace")
    return float(np.mean(trace.latencies)), float(np.max(trace.latencies))
