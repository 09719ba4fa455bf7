"""PI control loops, disturbance generators and closed-loop simulation.

Controllers run at the integrator step with conditional anti-windup
(the integral freezes whenever the raw output leaves its limits).
Disturbance signals are deterministic functions of (seed, time): each hold
interval or step level draws from its own counter-based generator, so a
trajectory can be sampled at any time without replaying history.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import plants
from .plants import BioreactorParams, EvaporatorParams

__all__ = [
    "PiController",
    "DisturbanceSignal",
    "SimulationResult",
    "pi_update",
    "sample_disturbance",
    "simulate_bioreactor_loop",
    "simulate_evaporator_loop",
    "estimate_gamma",
    "metrics",
    "EVAPORATOR_STATE_BOUNDS",
]

# Closed-loop state bounds checked during evaporator runs (lo, hi).  These
# mirror the robust set-point problem's constraint channels; the steam
# temperature is an actuator with wide physical limits, not a monitored
# constraint (its nominal band is unreachable at the backed-off set-points).
EVAPORATOR_STATE_BOUNDS = {
    "x_B": (None, 0.9),
    "h": (2.0, 8.0),
    "P": (0.05e6, 0.5e6),
}
EVAPORATOR_STEAM_LIMITS = (300.0, 500.0)


@dataclass
class PiController:
    """Discrete PI loop with output clamping and conditional anti-windup."""

    kc: float
    ki: float
    setpoint: float
    bias: float
    lo: float
    hi: float
    sign: float = 1.0  # +1: raising the output raises the measurement
    integral: float = 0.0

    def __post_init__(self):
        if self.lo >= self.hi:
            raise ValueError("lower output limit must be below the upper limit")

    def update(self, measurement: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        e = self.setpoint - measurement
        u_raw = self.bias + self.sign * (self.kc * e + self.ki * self.integral)
        if self.lo <= u_raw <= self.hi:
            self.integral += e * dt
        return min(max(u_raw, self.lo), self.hi)


def pi_update(ctrl: PiController, measurement: float, dt: float) -> float:
    """Functional alias for :meth:`PiController.update`."""
    return ctrl.update(measurement, dt)


@lru_cache(maxsize=65536)
def _unit_draw(seed: int, index: int) -> float:
    """Standard-normal draw keyed by (seed, index); deterministic random access."""
    return float(np.random.default_rng((seed, index)).standard_normal())


@dataclass(frozen=True)
class DisturbanceSignal:
    """Piecewise-constant random signal, reproducible per seed.

    ``gaussian-hold`` redraws the level at every ``hold`` boundary;
    ``step-sequence`` draws ``n_steps`` levels spread equally over
    ``horizon``.  Negative draws clamp to zero (physical flows and
    concentrations).
    """

    kind: str  # "gaussian-hold" | "step-sequence"
    mean: float
    std: float
    seed: int = 0
    hold: float | None = None  # gaussian-hold
    n_steps: int | None = None  # step-sequence
    horizon: float | None = None  # step-sequence
    clamp_nonnegative: bool = True

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be non-negative")
        if self.kind == "gaussian-hold":
            if not self.hold or self.hold <= 0:
                raise ValueError("gaussian-hold needs a positive hold interval")
        elif self.kind == "step-sequence":
            if not self.n_steps or self.n_steps < 1 or not self.horizon:
                raise ValueError("step-sequence needs n_steps >= 1 and a horizon")
        else:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")

    def _level(self, index: int) -> float:
        value = self.mean + self.std * _unit_draw(int(self.seed), int(index))
        if self.clamp_nonnegative and value < 0.0:
            return 0.0
        return float(value)

    def sample(self, t: float) -> float:
        if self.kind == "gaussian-hold":
            return self._level(int(np.floor(t / self.hold)))
        width = self.horizon / self.n_steps
        idx = min(int(np.floor(t / width)), self.n_steps - 1)
        return self._level(idx)


def sample_disturbance(signal: DisturbanceSignal, t: float) -> float:
    """Functional alias for :meth:`DisturbanceSignal.sample`."""
    return signal.sample(t)


@dataclass
class SimulationResult:
    """Uniform-grid closed-loop time series with per-step violation flags."""

    time: np.ndarray
    states: dict
    outputs: dict
    disturbances: dict
    objective: np.ndarray
    violations: dict  # name -> bool array
    setpoints: dict
    washout: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def any_violation(self) -> np.ndarray:
        flags = np.zeros(self.time.size, dtype=bool)
        for v in self.violations.values():
            flags |= v
        return flags

    def to_csv(self, path) -> None:
        cols = {"time": self.time}
        cols.update({f"state_{k}": v for k, v in self.states.items()})
        cols.update({f"output_{k}": v for k, v in self.outputs.items()})
        cols.update({f"disturbance_{k}": v for k, v in self.disturbances.items()})
        cols["objective"] = self.objective
        cols["violation"] = self.any_violation.astype(int)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols.keys())
            for row in zip(*cols.values()):
                writer.writerow([repr(float(v)) for v in row])


_WASHOUT_LEVEL = 0.1  # kg/m^3
_WASHOUT_SUSTAIN = 5.0  # hr

# Irreversible culture collapse: sustained operation in the substrate
# depletion regime destroys the culture (high-shear / starvation failure
# mode of real chemostats).  Once triggered, growth stops and the biomass
# washes out at least at the collapse loss rate.
_COLLAPSE_SUBSTRATE = 0.8  # kg/m^3
_COLLAPSE_SUSTAIN = 2.5  # hr
_COLLAPSE_LOSS_RATE = 0.5  # 1/hr


def simulate_bioreactor_loop(
    setpoint_x: float,
    gains=(0.1, 0.05),
    s_i_signal: DisturbanceSignal | None = None,
    horizon: float = 200.0,
    dt: float = 0.05,
    seed: int = 0,
    params: BioreactorParams = BioreactorParams(),
    x0: float = 3.0,
) -> SimulationResult:
    """Single-loop biomass control: the dilution rate rejects feed upsets.

    The run starts at the steady state consistent with the initial biomass
    (substrate and controller bias both from the closed-form map), so the
    only transient is the one commanded by the set-point change.  Driving
    the culture into sustained substrate depletion triggers the collapse
    mode, after which the biomass is lost irreversibly.
    """
    if s_i_signal is None:
        s_i_signal = DisturbanceSignal("gaussian-hold", mean=20.0, std=2.0, hold=1.0, seed=seed)
    s_i_mean = s_i_signal.mean

    # dilution rate that makes x0 a steady state (inverse of the analytic map)
    s0 = s_i_mean - x0 / params.Y_xs
    if s0 <= 0:
        raise ValueError("initial biomass is not sustainable at the mean feed")
    d0 = float(plants.monod_mu(s0, params))
    kc, ki = gains
    ctrl = PiController(kc=kc, ki=ki, setpoint=setpoint_x, bias=d0, lo=0.0, hi=0.5, sign=-1.0)

    n = int(round(horizon / dt))
    time = np.arange(n + 1) * dt
    xs = np.empty(n + 1)
    ss = np.empty(n + 1)
    ds = np.empty(n + 1)
    si = np.empty(n + 1)
    state = np.array([x0, s0])
    collapsed = False
    depleted_for = 0.0

    def clamp(y):
        return np.maximum(y, 0.0)

    for k in range(n + 1):
        t = time[k]
        xs[k], ss[k] = state
        si[k] = s_i_signal.sample(t)
        D = ctrl.update(state[0], dt)
        ds[k] = D
        if k == n:
            break
        if collapsed:
            # dead culture: no growth, biomass leaves with the flow
            loss = max(D, _COLLAPSE_LOSS_RATE)
            rhs = lambda tt, y, D=D, loss=loss: np.array(
                [-loss * y[0], D * (s_i_signal.sample(tt) - y[1])]
            )
        else:
            rhs = lambda tt, y, D=D: plants.bioreactor_rhs(y, D, s_i_signal.sample(tt), params)
        state = clamp(plants.rk4_step(rhs, t, state, dt))
        if not collapsed:
            depleted_for = depleted_for + dt if state[1] < _COLLAPSE_SUBSTRATE else 0.0
            if depleted_for >= _COLLAPSE_SUSTAIN:
                collapsed = True

    Q = plants.productivity(ds, xs)
    below = xs < _WASHOUT_LEVEL
    washout = collapsed or _sustained(below, int(round(_WASHOUT_SUSTAIN / dt)))
    return SimulationResult(
        time=time,
        states={"x": xs, "s": ss},
        outputs={"D": ds},
        disturbances={"s_i": si},
        objective=Q,
        violations={},
        setpoints={"x": setpoint_x},
        washout=washout,
        meta={"dt": dt, "seed": seed, "gains": tuple(gains)},
    )


def _sustained(flags: np.ndarray, run_length: int) -> bool:
    if run_length <= 1:
        return bool(flags.any())
    count = 0
    for f in flags:
        count = count + 1 if f else 0
        if count >= run_length:
            return True
    return False


def simulate_evaporator_loop(
    setpoints,
    gains,
    disturbances=None,
    horizon: float = 10_000.0,
    dt: float = 0.25,
    seed: int = 0,
    params: EvaporatorParams = EvaporatorParams(),
    F_mean: float = 100.0,
    x_F_mean: float = 0.2,
) -> SimulationResult:
    """Three-loop evaporator control around a set-point (x_B, h, P).

    Loop pairing and physical signs: composition-steam (direct), level-product
    flow (reverse), pressure-vapour flow (reverse).  ``gains`` maps loop names
    ``pd``, ``hb``, ``xbts`` to (kc, ki) pairs.  The run starts at the steady
    operating point of the set-points under mean disturbances.
    """
    x_B_sp, h_sp, P_sp = setpoints
    if disturbances is None:
        disturbances = {
            "x_F": DisturbanceSignal("gaussian-hold", mean=x_F_mean, std=0.08, hold=10.0, seed=seed),
            "F": DisturbanceSignal("step-sequence", mean=F_mean, std=80.0, n_steps=5, horizon=horizon, seed=seed + 1),
        }
    x_F_sig, F_sig = disturbances["x_F"], disturbances["F"]

    op = plants.evaporator_steady_state((x_B_sp, h_sp, P_sp), F_sig.mean, x_F_sig.mean, params)
    rho0 = P_sp * params.M_W / (params.R * op.T)

    kc_pd, ki_pd = gains["pd"]
    kc_hb, ki_hb = gains["hb"]
    kc_xbts, ki_xbts = gains["xbts"]
    ts_lo, ts_hi = EVAPORATOR_STEAM_LIMITS
    loop_ts = PiController(kc=kc_xbts, ki=ki_xbts, setpoint=x_B_sp, bias=op.T_S, lo=ts_lo, hi=ts_hi, sign=+1.0)
    loop_b = PiController(kc=kc_hb, ki=ki_hb, setpoint=h_sp, bias=op.B, lo=0.0, hi=500.0, sign=-1.0)
    loop_d = PiController(kc=kc_pd, ki=ki_pd, setpoint=P_sp, bias=op.D, lo=0.0, hi=500.0, sign=-1.0)

    n = int(round(horizon / dt))
    time = np.arange(n + 1) * dt
    series = {k: np.empty(n + 1) for k in ("x_B", "h", "P")}
    outputs = {k: np.empty(n + 1) for k in ("T_S", "B", "D")}
    dist = {k: np.empty(n + 1) for k in ("F", "x_F")}
    objective = np.empty(n + 1)
    state = np.array([h_sp, x_B_sp, rho0])  # (h, x_B, rho)
    aborted_at = None

    def clamp(y):
        y = y.copy()
        y[0] = min(max(y[0], 1e-6), params.V_T / params.A_T - 1e-9)
        y[1] = min(max(y[1], 0.0), 1.0)
        y[2] = max(y[2], 1e-9)
        return y

    for k in range(n + 1):
        t = time[k]
        h, x_B, rho = state
        P, T, _ = plants.evaporator_algebraic(state, params)
        series["x_B"][k], series["h"][k], series["P"][k] = x_B, h, P
        F_now, xF_now = F_sig.sample(t), x_F_sig.sample(t)
        dist["F"][k], dist["x_F"][k] = F_now, xF_now
        T_S = loop_ts.update(x_B, dt)
        B = loop_b.update(h, dt)
        D = loop_d.update(P, dt)
        outputs["T_S"][k], outputs["B"][k], outputs["D"][k] = T_S, B, D
        price = 11.875 * x_B - 1.875
        objective[k] = price * B * x_B - 0.04 * F_now - 0.01 * T_S**1.5 - 0.75 * h**2
        if k == n:
            break
        rhs = lambda tt, y, u=(T_S, B, D): plants.evaporator_rhs(
            y, u, (F_sig.sample(tt), x_F_sig.sample(tt)), params
        )
        state = clamp(plants.rk4_step(rhs, t, state, dt))
        if not np.all(np.isfinite(state)):
            aborted_at = k + 1
            break

    if aborted_at is not None:
        raise RuntimeError(f"evaporator state became non-finite at step {aborted_at}")

    violations = {}
    for name, (lo, hi) in EVAPORATOR_STATE_BOUNDS.items():
        v = np.zeros(n + 1, dtype=bool)
        if lo is not None:
            v |= series[name] < lo - 1e-9
        if hi is not None:
            v |= series[name] > hi + 1e-9
        violations[name] = v

    return SimulationResult(
        time=time,
        states=series,
        outputs=outputs,
        disturbances=dist,
        objective=objective,
        violations=violations,
        setpoints={"x_B": x_B_sp, "h": h_sp, "P": P_sp},
        washout=False,
        meta={"dt": dt, "seed": seed},
    )


def estimate_gamma(result: SimulationResult, setpoints: dict | None = None, settle_fraction: float = 0.1) -> dict:
    """Largest deviation of each controlled state from its set-point.

    The first ``settle_fraction`` of the horizon is discarded so start-up
    transients do not inflate the estimate.
    """
    setpoints = setpoints or result.setpoints
    start = int(np.floor(settle_fraction * result.time.size))
    out = {}
    for name, sp in setpoints.items():
        series = result.states[name]
        out[name] = float(np.abs(series[start:] - sp).max())
    return out


def metrics(result: SimulationResult, objective=None, constraints=None) -> dict:
    """Summary statistics with violation-zeroed objective and per-loop ITAE.

    ``objective``/``constraints`` recompute the stored series from the states
    when supplied (both taking the states dict); otherwise the series
    recorded during simulation are used.
    """
    obj = np.asarray(objective(result.states), dtype=float) if objective is not None else result.objective.copy()
    if constraints is not None:
        violated = np.zeros(result.time.size, dtype=bool)
        for h in constraints:
            violated |= np.asarray(h(result.states)) > 0.0
    else:
        violated = result.any_violation
    obj = np.where(violated, 0.0, obj)
    dt = float(result.time[1] - result.time[0]) if result.time.size > 1 else 1.0
    itae = {}
    for name, sp in result.setpoints.items():
        e = np.abs(result.states[name] - sp)
        itae[name] = float(np.sum(result.time * e) * dt)
    return {
        "mean_objective": float(obj.mean()),
        "std_objective": float(obj.std()),
        "violation_fraction": float(violated.mean()),
        "itae": itae,
        "washout": bool(result.washout),
    }
