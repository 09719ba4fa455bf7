"""Process models: continuous bioreactor and forced-circulation evaporator.

Both plants expose their right-hand sides for closed-loop simulation and
closed-form steady-state maps used by the set-point optimisation layer.
The evaporator's algebraic core (ideal-gas pressure tied to the saturation
temperature) is reduced to an explicit function of the states, so the
differential-algebraic system integrates as a plain ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BioreactorParams",
    "EvaporatorParams",
    "CostParams",
    "monod_mu",
    "bioreactor_rhs",
    "bioreactor_steady_state",
    "critical_dilution",
    "productivity",
    "antoine_temperature",
    "antoine_temperature_derivative",
    "evaporator_algebraic",
    "evaporator_rhs",
    "evaporator_steady_state",
    "profit",
    "rk4_step",
    "rk4_integrate",
]

MMHG_PER_PA = 1.0 / 133.322


@dataclass(frozen=True)
class BioreactorParams:
    """Chemostat growth parameters."""

    mu_max: float = 0.5  # 1/hr
    Y_xs: float = 0.5  # kg biomass / kg substrate
    K_s: float = 0.2  # kg/m^3


@dataclass(frozen=True)
class EvaporatorParams:
    """Evaporator geometry, physical constants and Antoine coefficients."""

    A_T: float = 100.0  # tank cross-section, m^2
    c: float = 10.0  # solute concentration basis, mol/m^3
    M_W: float = 0.078  # solvent molecular weight, kg/mol
    R: float = 8.3145  # J/(mol K)
    U: float = 1000.0  # W/(m^2 K)
    A_S: float = 50.0  # steam heat-transfer area, m^2
    dH_v: float = 30800.0  # J/mol
    V_T: float = 1000.0  # tank volume, m^3
    antoine_a: float = 6.87987
    antoine_b: float = 1196.76
    antoine_c: float = 219.161


@dataclass(frozen=True)
class CostParams:
    """Economic coefficients of the profit objective."""

    product_slope: float = 11.875  # $/mol per unit composition
    product_intercept: float = -1.875  # $/mol
    feed: float = 0.04  # $/mol
    energy: float = 0.01  # $/K^1.5
    tank: float = 0.75  # $/m^2


def monod_mu(s, params: BioreactorParams = BioreactorParams()):
    """Specific growth rate, saturating in the substrate concentration."""
    s = np.asarray(s, dtype=float)
    return params.mu_max * s / (params.K_s + s)


def bioreactor_rhs(state, D, s_i, params: BioreactorParams = BioreactorParams()):
    """(dx/dt, ds/dt) for biomass x and substrate s under dilution D."""
    x, s = state
    mu = monod_mu(s, params)
    dx = (mu - D) * x
    ds = D * (s_i - s) - mu * x / params.Y_xs
    return np.array([dx, ds])


def critical_dilution(s_i, params: BioreactorParams = BioreactorParams()) -> float:
    """Dilution rate beyond which the only steady state is wash-out."""
    return float(monod_mu(s_i, params))


def bioreactor_steady_state(D, s_i, params: BioreactorParams = BioreactorParams()):
    """Closed-form steady state (x, s); wash-out branch above the critical rate."""
    if D >= critical_dilution(s_i, params):
        return 0.0, float(s_i)
    s_ss = params.K_s * D / (params.mu_max - D)
    x_ss = params.Y_xs * (s_i - s_ss)
    return float(x_ss), float(s_ss)


def productivity(D, x):
    """Volumetric biomass productivity D*x."""
    return np.asarray(D, dtype=float) * np.asarray(x, dtype=float)


def antoine_temperature(P, params: EvaporatorParams = EvaporatorParams()):
    """Saturation temperature (K) at pressure P (Pa)."""
    P = np.asarray(P, dtype=float)
    log_mmhg = np.log10(P * MMHG_PER_PA)
    return params.antoine_b / (params.antoine_a - log_mmhg) - params.antoine_c + 273.15


def antoine_temperature_derivative(P, params: EvaporatorParams = EvaporatorParams()):
    """dT/dP (K/Pa) of the saturation curve."""
    P = np.asarray(P, dtype=float)
    theta = params.antoine_a - np.log10(P * MMHG_PER_PA)
    return params.antoine_b / (theta**2 * P * np.log(10.0))


def _antoine_t(P: float, params: EvaporatorParams) -> float:
    # scalar fast path of antoine_temperature (hot loop of the simulator)
    return params.antoine_b / (params.antoine_a - math.log10(P * MMHG_PER_PA)) - params.antoine_c + 273.15


def evaporator_algebraic(state, params: EvaporatorParams = EvaporatorParams(), tol: float = 1e-8):
    """Algebraic variables (P, T, V_vap) for a state (h, x_B, rho).

    The vapour is saturated: the ideal-gas pressure of density rho at
    temperature T must equal the saturation pressure at T.  Substituting the
    saturation temperature into the gas law gives a strongly contracting
    fixed point in P, iterated to ``tol`` pascals.
    """
    h, x_B, rho = float(state[0]), float(state[1]), float(state[2])
    V_vap = params.V_T - params.A_T * h
    if V_vap <= 0.0:
        raise ValueError("liquid level exceeds the tank volume")
    coef = rho * params.R / params.M_W
    P = coef * 350.0  # any temperature-scale seed converges
    for _ in range(100):
        P_new = coef * _antoine_t(P, params)
        if not (1e2 <= P_new <= 1e7):
            raise ValueError(f"pressure {P_new:.3g} Pa escaped the physical bracket")
        if abs(P_new - P) < tol:
            P = P_new
            break
        P = P_new
    else:
        raise RuntimeError("pressure fixed point failed to converge")
    return P, _antoine_t(P, params), V_vap


def evaporator_rhs(state, inputs, disturbances, params: EvaporatorParams = EvaporatorParams()):
    """(dh/dt, dx_B/dt, drho/dt) for state (h, x_B, rho).

    ``inputs``: (T_S, B, D) steam temperature and outlet flows.
    ``disturbances``: (F, x_F) feed flow and composition.
    """
    h, x_B, rho = float(state[0]), float(state[1]), float(state[2])
    T_S, B, D = inputs
    F, x_F = disturbances
    if h <= 1e-9:
        raise ValueError("tank is empty")
    P, T, V_vap = evaporator_algebraic(state, params)
    E = params.U * params.A_S * (T_S - T) / params.dH_v
    dh = (F - B - D) / (params.A_T * params.c)
    dxB = (F * x_F - B * x_B) / (params.A_T * h * params.c) - (x_B / h) * dh
    dV_vap = -params.A_T * dh
    drho = params.M_W / V_vap * (E - D) - rho / V_vap * dV_vap
    return np.array((dh, dxB, drho))


@dataclass(frozen=True)
class OperatingPoint:
    B: float  # product flow, mol/s
    D: float  # vapour flow, mol/s
    T: float  # evaporator temperature, K
    T_S: float  # steam temperature, K


def evaporator_steady_state(setpoint, F, x_F, params: EvaporatorParams = EvaporatorParams()) -> OperatingPoint:
    """Invert the balances at steady state for a set-point (x_B, h, P).

    Mole balances fix the outlet split, the saturation curve fixes the
    temperature, and the evaporation duty fixes the steam temperature.
    """
    x_B, h, P = setpoint
    if not (0.0 < x_F < x_B <= 1.0):
        raise ValueError("need 0 < x_F < x_B <= 1 to concentrate the feed")
    B = F * x_F / x_B
    D = F - B
    T = float(antoine_temperature(P, params))
    T_S = T + D * params.dH_v / (params.U * params.A_S)
    return OperatingPoint(B=float(B), D=float(D), T=T, T_S=float(T_S))


def profit(setpoint, op: OperatingPoint, F, costs: CostParams = CostParams(), energy_on_steam: bool = True):
    """Instantaneous profit rate ($/s) at a steady operating point.

    The energy cost scales with the temperature that drives the heat duty.
    By default that is the steam temperature; ``energy_on_steam=False``
    charges the evaporator temperature instead.
    """
    x_B, h, _P = setpoint
    price = costs.product_slope * x_B + costs.product_intercept
    temp = op.T_S if energy_on_steam else op.T
    return (
        price * op.B * x_B
        - costs.feed * F
        - costs.energy * temp**1.5
        - costs.tank * h**2
    )


def rk4_step(rhs, t, y, dt):
    """One classic Runge-Kutta step of ``dy/dt = rhs(t, y)``."""
    k1 = rhs(t, y)
    k2 = rhs(t + dt / 2.0, y + dt / 2.0 * k1)
    k3 = rhs(t + dt / 2.0, y + dt / 2.0 * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(rhs, state0, horizon, dt, clamp=None):
    """Fixed-step integration over [0, horizon].

    ``clamp``, when given, maps each post-step state back onto its physical
    domain (non-negativity and the like).  Returns (times, states) with
    states of shape (n_steps + 1, d); aborts with the partial series if the
    state turns non-finite.
    """
    n = int(round(horizon / dt))
    y = np.asarray(state0, dtype=float).copy()
    times = np.empty(n + 1)
    states = np.empty((n + 1, y.size))
    times[0], states[0] = 0.0, y
    for k in range(n):
        t = k * dt
        y = rk4_step(rhs, t, y, dt)
        if clamp is not None:
            y = clamp(y)
        if not np.all(np.isfinite(y)):
            return times[: k + 1], states[: k + 1]
        times[k + 1] = t + dt
        states[k + 1] = y
    return times, states
