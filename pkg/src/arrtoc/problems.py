"""Built-in benchmark problems for the robust set-point solvers.

Three families: a two-variable polynomial whose global maximum sits on a
narrow peak (the robust optimum lives on a broad one), the GP-surrogate
chemostat productivity problem, and the evaporator profit problem over
(composition, level, pressure) set-points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import plants, surrogate
from .plants import CostParams, EvaporatorParams
from .solver import ProblemSpec
from .uncertainty import UncertaintySet

__all__ = [
    "BENCHMARKS",
    "ControllerSetting",
    "TUNED_SETTINGS",
    "illustrative_objective",
    "illustrative_gradient",
    "illustrative_problem",
    "bioreactor_dataset",
    "bioreactor_problem",
    "evaporator_problem",
    "evaporator_setpoint_profit",
]

BENCHMARKS = ("illustrative", "illustrative-ellipsoid", "bioreactor", "evaporator")


def illustrative_objective(v):
    """Two-variable polynomial benchmark objective (vectorised over (..., 2))."""
    v = np.asarray(v, dtype=float)
    x, y = v[..., 0], v[..., 1]
    return (
        -2 * x**6 + 12.2 * x**5 - 21.2 * x**4 + 6.4 * x**3 + 4.7 * x**2 - 12.74533 * x
        - y**6 + 11 * y**5 - 43.3 * y**4 + 74.8 * y**3 - 56.9 * y**2 + 11.43686 * y
        + 4.1 * x * y + 0.1 * x**2 * y**2 - 0.4 * x * y**2 - 0.4 * x**2 * y
        + 12.66273
    )


def illustrative_gradient(v):
    v = np.asarray(v, dtype=float)
    x, y = v[..., 0], v[..., 1]
    gx = (
        -12 * x**5 + 61 * x**4 - 84.8 * x**3 + 19.2 * x**2 + 9.4 * x - 12.74533
        + 4.1 * y + 0.2 * x * y**2 - 0.4 * y**2 - 0.8 * x * y
    )
    gy = (
        -6 * y**5 + 55 * y**4 - 173.2 * y**3 + 224.4 * y**2 - 113.8 * y + 11.43686
        + 4.1 * x + 0.2 * x**2 * y - 0.8 * x * y - 0.4 * x**2
    )
    return np.stack([gx, gy], axis=-1)


def illustrative_problem(gamma=0.3, gamma_y: float | None = None) -> ProblemSpec:
    """Polynomial benchmark; pass two radii for the ellipsoidal variant."""
    if gamma_y is None:
        uset = UncertaintySet.sphere(float(gamma), 2)
    else:
        uset = UncertaintySet([float(gamma), float(gamma_y)])
    return ProblemSpec(
        dimension=2,
        objective=illustrative_objective,
        direction="maximize",
        uncertainty=uset,
        lower=[-1.0, -0.5],
        upper=[3.5, 4.5],
        gradient=illustrative_gradient,
    )


def bioreactor_dataset(n: int = 20, s_i: float = 20.0, d_max: float = 0.5):
    """Steady-state identification data: biomass vs productivity.

    Dilution rates are equally spaced in (0, d_max]; the zero-rate point is
    omitted (trivially zero productivity) and rates beyond the critical value
    contribute the wash-out sample.
    """
    rates = np.arange(1, n + 1) * (d_max / n)
    xs = np.array([plants.bioreactor_steady_state(D, s_i)[0] for D in rates])
    return xs, plants.productivity(rates, xs)


def bioreactor_problem(gp: surrogate.GpModel, gamma: float) -> ProblemSpec:
    """Maximise the surrogate productivity over the biomass set-point."""

    def objective(x):
        return surrogate.predict_mean(gp, np.asarray(x, dtype=float)[..., 0])

    def gradient(x):
        g = surrogate.predict_mean_gradient(gp, np.asarray(x, dtype=float)[..., 0])
        return np.asarray(g, dtype=float)[..., None]

    return ProblemSpec(
        dimension=1,
        objective=objective,
        direction="maximize",
        uncertainty=UncertaintySet.sphere(float(gamma), 1),
        lower=[0.5],
        upper=[10.0],
        gradient=gradient,
    )


def evaporator_setpoint_profit(v, F=100.0, x_F=0.2, params: EvaporatorParams = EvaporatorParams(),
                               costs: CostParams = CostParams(), energy_on_steam: bool = True):
    """Steady-state profit of a set-point batch (..., 3) = (x_B, h, P)."""
    v = np.asarray(v, dtype=float)
    x_B, h, P = v[..., 0], v[..., 1], v[..., 2]
    B = F * x_F / x_B
    D = F - B
    T = plants.antoine_temperature(P, params)
    T_S = T + D * params.dH_v / (params.U * params.A_S)
    temp = T_S if energy_on_steam else T
    price = costs.product_slope * x_B + costs.product_intercept
    return price * B * x_B - costs.feed * F - costs.energy * temp**1.5 - costs.tank * h**2


def _evaporator_gradient(v, F, x_F, params: EvaporatorParams, costs: CostParams):
    v = np.asarray(v, dtype=float)
    x_B, h, P = v[..., 0], v[..., 1], v[..., 2]
    T = plants.antoine_temperature(P, params)
    duty = params.dH_v / (params.U * params.A_S)
    T_S = T + (F - F * x_F / x_B) * duty
    dTs_dxB = F * x_F / x_B**2 * duty
    dTs_dP = plants.antoine_temperature_derivative(P, params)
    energy_sens = 1.5 * costs.energy * np.sqrt(T_S)
    g_xB = costs.product_slope * F * x_F - energy_sens * dTs_dxB
    g_h = -2.0 * costs.tank * h
    g_P = -energy_sens * dTs_dP
    return np.stack([g_xB, g_h, np.broadcast_to(g_P, np.shape(g_xB))], axis=-1)


@dataclass(frozen=True)
class ControllerSetting:
    """A tuned multi-loop gain set with its measured perturbation radii."""

    name: int
    pd: tuple  # pressure-vapour loop (kc, ki)
    hb: tuple  # level-product loop (kc, ki)
    xbts: tuple  # composition-steam loop (kc, ki)
    itae: float
    gamma_P: float  # Pa
    gamma_h: float  # m
    gamma_xB: float


# Tuned gain sets, their summed normalised ITAE score, and the largest
# closed-loop state deviations each sustains (used as perturbation radii).
TUNED_SETTINGS = {
    1: ControllerSetting(1, (0.10, 0.20), (100.0, 2.50), (100.0, 0.50), 3142.17, 441.0, 0.23, 0.13),
    2: ControllerSetting(2, (0.05, 0.40), (500.0, 1.25), (50.0, 0.25), 2700.24, 394.0, 0.25, 0.16),
    3: ControllerSetting(3, (0.10, 0.20), (100.0, 2.50), (1000.0, 0.50), 2488.29, 457.0, 0.17, 0.08),
    4: ControllerSetting(4, (0.20, 0.10), (50.0, 1.25), (500.0, 1.00), 2350.84, 339.0, 0.20, 0.05),
    5: ControllerSetting(5, (0.19, 0.11), (70.0, 1.10), (1370.0, 0.00), 2032.22, 322.0, 0.11, 0.06),
    6: ControllerSetting(6, (0.10, 0.10), (2500.0, 5.07), (1000.0, 0.50), 1817.36, 309.0, 0.02, 0.04),
    7: ControllerSetting(7, (0.19, 0.17), (1250.0, 6.37), (1280.0, 0.47), 1783.32, 259.0, 0.03, 0.04),
}

NOMINAL_SETPOINT = (0.9, 2.0, 0.1e6)


def evaporator_problem(F_mean: float = 100.0, x_F_mean: float = 0.2, radii=(441.0, 0.23, 0.13),
                       params: EvaporatorParams = EvaporatorParams(),
                       costs: CostParams = CostParams()) -> ProblemSpec:
    """Profit maximisation over (x_B, h, P) under an ellipsoidal error set.

    ``radii`` is ordered like the state, (x_B, h, P).  Constraints: product
    quality x_B <= 0.9, level within [2, 8] m, pressure within
    [0.1, 0.5] MPa, and steam temperature at most 450 K through the
    steady-state map.  The pressure floor sits at the atmospheric-operation
    limit that the profit optimum rests against.
    """
    radii = np.asarray(radii, dtype=float)

    def objective(v):
        return evaporator_setpoint_profit(v, F_mean, x_F_mean, params, costs)

    def gradient(v):
        return _evaporator_gradient(v, F_mean, x_F_mean, params, costs)

    def steam_limit(v):
        v = np.asarray(v, dtype=float)
        x_B, P = v[..., 0], v[..., 2]
        T = plants.antoine_temperature(P, params)
        T_S = T + (F_mean - F_mean * x_F_mean / x_B) * params.dH_v / (params.U * params.A_S)
        return T_S - 450.0

    constraints = (
        lambda v: np.asarray(v, dtype=float)[..., 0] - 0.9,  # quality upper bound
        lambda v: 2.0 - np.asarray(v, dtype=float)[..., 1],  # level floor
        lambda v: np.asarray(v, dtype=float)[..., 1] - 8.0,  # level ceiling
        lambda v: 0.1e6 - np.asarray(v, dtype=float)[..., 2],  # pressure floor
        lambda v: np.asarray(v, dtype=float)[..., 2] - 0.5e6,  # pressure ceiling
        steam_limit,
    )
    return ProblemSpec(
        dimension=3,
        objective=objective,
        direction="maximize",
        uncertainty=UncertaintySet(radii),
        lower=[0.4, 1.0, 0.07e6],
        upper=[0.98, 9.0, 0.55e6],
        constraints=constraints,
        gradient=gradient,
    )
