"""Ground-truth control actions for the reactor case study.

Solves the finite-horizon tracking problem (single shooting, explicit Euler
inside the horizon) with an augmented-Lagrangian outer loop for rate and
state constraints and a projected-gradient inner loop for the flow box
bounds. Also generates MPC-labeled datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, ConvergenceError
from .learner import Dataset

KKT_TOL = 1e-6
CON_TOL = 1e-6
_MAX_OUTER = 50
_MAX_INNER = 2000


@dataclass(frozen=True)
class PlantSpec:
    """Isothermal CSTR: volume (L), feed concentration (mol/L), rate constant."""

    V: float = 50.0
    x_f: float = 1.0
    k_rate: float = 2.0

    def __post_init__(self):
        if min(self.V, self.x_f, self.k_rate) <= 0:
            raise ConfigError("plant parameters must be positive")


@dataclass(frozen=True)
class MpcSpec:
    T: int = 10
    h: float = 0.5
    P: float = 100.0
    x_sp: float = 0.6
    u_rate_max: float = 50.0
    x_bounds: tuple = (0.0, 1.0)
    u_bounds: tuple = (0.0, 75.0)
    plant: PlantSpec = field(default_factory=PlantSpec)

    def __post_init__(self):
        if self.T < 2:
            raise ConfigError("horizon T must be >= 2")
        if self.h <= 0:
            raise ConfigError("step h must be positive")
        if not (self.x_bounds[0] < self.x_bounds[1] and self.u_bounds[0] < self.u_bounds[1]):
            raise ConfigError("bounds must be ordered lo < hi")


@dataclass
class MpcSolution:
    controls: np.ndarray   # u_1..u_{T-1}
    states: np.ndarray     # x_1..x_T
    objective: float
    kkt_residual: float
    first_action: float


def plant_rhs(plant: PlantSpec, x: float, u: float) -> float:
    """dx/dt = (u/V)(x_f - x) - k x^3."""
    return (u / plant.V) * (plant.x_f - x) - plant.k_rate * x**3


def steady_state_flow(plant: PlantSpec, x: float) -> float:
    """Flow that holds concentration x: F = V k x^3 / (x_f - x)."""
    return plant.V * plant.k_rate * x**3 / (plant.x_f - x)


def rollout(spec: MpcSpec, x0: float, u_seq):
    """Euler states, tracking objective, and its exact gradient w.r.t. u_seq.

    The gradient is the reverse-mode chain rule through the discrete rollout,
    so it is exact for the Euler system (not an ODE approximation).
    """
    u = np.asarray(u_seq, dtype=float)
    T = spec.T
    if u.shape != (T - 1,):
        raise ConfigError(f"expected {T - 1} controls, got {u.shape}")
    plant = spec.plant
    x = np.empty(T)
    x[0] = x0
    for t in range(T - 1):
        x[t + 1] = x[t] + spec.h * plant_rhs(plant, x[t], u[t])
    dev = x - spec.x_sp
    objective = float(dev @ dev + spec.P * dev[-1] ** 2)
    # Adjoint pass.
    lam = np.zeros(T)
    lam[-1] = 2.0 * dev[-1] * (1.0 + spec.P)
    grad = np.zeros(T - 1)
    for t in range(T - 2, -1, -1):
        dfdx = -u[t] / plant.V - 3.0 * plant.k_rate * x[t] ** 2
        dfdu = (plant.x_f - x[t]) / plant.V
        grad[t] = lam[t + 1] * spec.h * dfdu
        lam[t] = 2.0 * dev[t] + lam[t + 1] * (1.0 + spec.h * dfdx)
    return x, objective, grad


def _constraints(spec: MpcSpec, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """All g <= 0 constraint values: rate pairs, then state bound pairs."""
    parts = []
    du = np.diff(u)
    lim = spec.h * spec.u_rate_max
    parts.append(du - lim)
    parts.append(-du - lim)
    xs = x[1:]  # x_1 is pinned to x0
    parts.append(xs - spec.x_bounds[1])
    parts.append(spec.x_bounds[0] - xs)
    return np.concatenate(parts)


def _al_value_grad(spec: MpcSpec, x0: float, u: np.ndarray, mu: np.ndarray, rho: float):
    """Augmented Lagrangian value and gradient (box bounds excluded)."""
    plant = spec.plant
    T = spec.T
    x = np.empty(T)
    x[0] = x0
    for t in range(T - 1):
        x[t + 1] = x[t] + spec.h * plant_rhs(plant, x[t], u[t])
    g = _constraints(spec, x, u)
    s = np.maximum(0.0, g + mu / rho)
    dev = x - spec.x_sp
    val = float(dev @ dev + spec.P * dev[-1] ** 2 + 0.5 * rho * s @ s)
    coef = rho * s  # d(penalty)/dg for active terms
    n_rate = T - 2
    c_rp = coef[:n_rate]
    c_rm = coef[n_rate : 2 * n_rate]
    c_xu = coef[2 * n_rate : 2 * n_rate + T - 1]
    c_xl = coef[2 * n_rate + T - 1 :]
    # State-cost terms per stage (state-bound penalties act on x_2..x_T).
    dldx = 2.0 * dev.copy()
    dldx[-1] += 2.0 * spec.P * dev[-1]
    dldx[1:] += c_xu - c_xl
    grad = np.zeros(T - 1)
    lam = dldx[-1]
    for t in range(T - 2, -1, -1):
        dfdx = -u[t] / plant.V - 3.0 * plant.k_rate * x[t] ** 2
        dfdu = (plant.x_f - x[t]) / plant.V
        grad[t] = lam * spec.h * dfdu
        lam = dldx[t] + lam * (1.0 + spec.h * dfdx)
    # Rate-constraint terms act directly on u.
    for t in range(n_rate):
        grad[t + 1] += c_rp[t] - c_rm[t]
        grad[t] += -c_rp[t] + c_rm[t]
    return val, grad, g


def _project(spec: MpcSpec, u: np.ndarray) -> np.ndarray:
    return np.clip(u, spec.u_bounds[0], spec.u_bounds[1])


def _inner_minimize(spec: MpcSpec, x0: float, u: np.ndarray, mu: np.ndarray, rho: float):
    """Box-bounded minimization of the augmented Lagrangian subproblem.

    L-BFGS-B keeps the flow bounds exact by projection; the gradient is the
    exact adjoint from _al_value_grad.
    """
    res = minimize(
        lambda uu: _al_value_grad(spec, x0, uu, mu, rho)[:2],
        u, jac=True, method="L-BFGS-B",
        bounds=[spec.u_bounds] * (spec.T - 1),
        options=dict(maxiter=_MAX_INNER, ftol=1e-16, gtol=0.01 * KKT_TOL),
    )
    val, grad, g = _al_value_grad(spec, x0, res.x, mu, rho)
    return res.x, val, grad, g


def _solve_from(spec: MpcSpec, x0: float, u0: np.ndarray):
    u = _project(spec, u0.astype(float))
    mu = np.zeros(2 * (spec.T - 2) + 2 * (spec.T - 1))
    rho = 10.0
    prev_viol = np.inf
    for _ in range(_MAX_OUTER):
        u, val, grad, g = _inner_minimize(spec, x0, u, mu, rho)
        viol = float(np.max(np.maximum(g, 0.0), initial=0.0))
        pg = np.linalg.norm(u - _project(spec, u - grad))
        if viol <= CON_TOL and pg <= KKT_TOL:
            x, obj, _ = rollout(spec, x0, u)
            return MpcSolution(controls=u, states=x, objective=obj,
                               kkt_residual=float(pg), first_action=float(u[0]))
        mu = np.maximum(0.0, mu + rho * g)
        if viol > 0.25 * prev_viol:
            rho = min(rho * 4.0, 1e10)
        prev_viol = viol
    return None


def solve_mpc(spec: MpcSpec, x0: float) -> MpcSolution:
    """Best solution over three starts: low flow, high flow, steady-state flow."""
    if not spec.x_bounds[0] <= x0 <= spec.x_bounds[1]:
        raise ConfigError(f"initial state {x0} outside bounds {spec.x_bounds}")
    n = spec.T - 1
    u_lo, u_hi = spec.u_bounds
    starts = [np.full(n, u_lo), np.full(n, u_hi)]
    if x0 < spec.plant.x_f:
        starts.append(np.full(n, np.clip(steady_state_flow(spec.plant, x0), u_lo, u_hi)))
    best = None
    for u0 in starts:
        sol = _solve_from(spec, x0, u0)
        if sol is not None and (best is None or sol.objective < best.objective):
            best = sol
    if best is None:
        raise ConvergenceError(f"no start converged for x0={x0}")
    return best


def generate_dataset(spec: MpcSpec, n: int, lo: float, hi: float,
                     mode: str = "uniform-grid", seed: int = 0) -> Dataset:
    """n initial states on [lo, hi] labeled with the first optimal control."""
    if not (spec.x_bounds[0] <= lo <= hi <= spec.x_bounds[1]):
        raise ConfigError(f"sampling range [{lo}, {hi}] invalid within {spec.x_bounds}")
    if mode == "uniform-grid":
        xs = np.linspace(lo, hi, n)
    elif mode == "seeded-random":
        rng = np.random.default_rng(seed)
        xs = np.sort(rng.uniform(lo, hi, size=n))
    else:
        raise ConfigError(f"unknown sampling mode {mode!r}")
    labels = np.empty(n)
    for i, x0 in enumerate(xs):
        try:
            labels[i] = solve_mpc(spec, float(x0)).first_action
        except ConvergenceError as exc:
            raise ConvergenceError(f"x0={x0}: {exc}") from exc
    return Dataset(X=xs.reshape(-1, 1), y=labels)
