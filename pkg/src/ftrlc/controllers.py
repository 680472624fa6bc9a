"""Online update loops: the adaptive FTRL controllers plus the GPC and
basic-FTRL baselines, and the kernel-backed episode runner."""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .costs import epsilon_signal, g_signal
from .errors import ConfigError, DimensionMismatch, UnsupportedConfiguration
from .policy import FeasibleSet, PolicyParams, project
from .schedules import ScheduleState, Variant, sigma_scale_for
from .trace import RunTrace


class ControllerKind(enum.Enum):
    FTRL = "ftrl"
    ADAFTRL = "adaftrl"
    OPTFTRL = "optftrl"
    GPC = "gpc"
    BASIC_FTRL = "basicftrl"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ConfigError(
                f"unknown controller {name!r}; expected one of "
                f"{[k.value for k in cls]}") from None


_KERNEL_CODE = {
    ControllerKind.FTRL: _kernels.KIND_FTRL,
    ControllerKind.ADAFTRL: _kernels.KIND_ADAFTRL,
    ControllerKind.OPTFTRL: _kernels.KIND_OPTFTRL,
    ControllerKind.GPC: _kernels.KIND_GPC,
    ControllerKind.BASIC_FTRL: _kernels.KIND_BASIC_FTRL,
}

_EXPECTED_VARIANT = {
    ControllerKind.FTRL: Variant.MAX_ADAPTIVE,
    ControllerKind.ADAFTRL: Variant.DECAYED_MEMORY,
    ControllerKind.OPTFTRL: Variant.OPTIMISTIC,
}


@dataclass(frozen=True)
class BoundConstants:
    """Problem constants entering the regret bounds; z = p w sqrt(d_u) kappa_B."""

    l: float
    g: float
    w: float
    kappa_M: float
    kappa_B: float
    delta: float
    p: int
    d_x: int
    d_u: int
    z: float = None

    def __post_init__(self):
        z = self.p * self.w * math.sqrt(self.d_u) * self.kappa_B
        if self.z is None:
            object.__setattr__(self, "z", z)
        elif self.z != z:
            raise ValueError(f"stored z = {self.z} does not match p w sqrt(d_u) kappa_B = {z}")


class FtrlController:
    """Proximal FTRL update M_{t+1} = proj((sum_s sigma_s M_s - G_{1:t}) / sigma_{1:t}).

    The closed form is the exact argmin of the linearized objective plus the
    isotropic proximal quadratic; while the schedule has seen only zero
    signals the iterate stays put.
    """

    def __init__(self, kind, feasible, schedule, d_u, d_x, M0=None):
        if kind not in (ControllerKind.FTRL, ControllerKind.ADAFTRL):
            raise ConfigError(f"FtrlController does not implement {kind}")
        if schedule.variant is not _EXPECTED_VARIANT[kind]:
            raise ConfigError(
                f"{kind.value} requires the {_EXPECTED_VARIANT[kind].value} schedule, "
                f"got {schedule.variant.value}")
        self.kind = kind
        self.feasible = feasible
        self.schedule = schedule
        self.M = M0 if M0 is not None else PolicyParams.zeros(feasible.p, d_u, d_x)
        self._grad_sum = np.zeros_like(self.M.blocks)
        self._anchor = np.zeros_like(self.M.blocks)

    def update(self, G):
        G = np.asarray(G, dtype=float)
        if G.shape != self.M.blocks.shape:
            raise DimensionMismatch(
                f"gradient shape {G.shape} does not match policy {self.M.blocks.shape}")
        _, sigma_t = self.schedule.push_signal(g_signal(G))
        self._grad_sum += G
        self._anchor += sigma_t * self.M.blocks
        denom = self.schedule.sigma_prefix
        if denom > 0.0:
            target = (self._anchor - self._grad_sum) / denom
            self.M = project(PolicyParams(target), self.feasible)
        return self.M


class OptimisticController:
    """Optimistic FTRL: folds the still-unrealized predicted gradients into
    every update and regularizes by prediction error only.

    Missing predictions count as zero.  While all prediction errors are zero
    the regularizer is degenerate and the update is the exact minimizer of
    the pure linear term (its limit as the regularization vanishes).
    """

    def __init__(self, feasible, schedule, predictions, d_u, d_x, M0=None):
        if schedule.variant is not Variant.OPTIMISTIC:
            raise ConfigError("OptimisticController requires the optimistic schedule")
        self.feasible = feasible
        self.schedule = schedule
        self.M = M0 if M0 is not None else PolicyParams.zeros(feasible.p, d_u, d_x)
        preds = np.asarray(predictions, dtype=float)
        if preds.ndim != 4 or preds.shape[1:] != self.M.blocks.shape:
            raise DimensionMismatch(
                f"predictions must be (T, p, d_u, d_x); got {preds.shape}")
        self._preds = preds
        self._suffix = preds.sum(axis=0)
        self._t = 0
        self._grad_sum = np.zeros_like(self.M.blocks)
        self._anchor = np.zeros_like(self.M.blocks)

    def update(self, G):
        G = np.asarray(G, dtype=float)
        if G.shape != self.M.blocks.shape:
            raise DimensionMismatch(
                f"gradient shape {G.shape} does not match policy {self.M.blocks.shape}")
        if self._t >= self._preds.shape[0]:
            raise ConfigError("prediction stream exhausted")
        G_pred = self._preds[self._t]
        _, sigma_t = self.schedule.push_signal(epsilon_signal(G, G_pred))
        self._suffix = self._suffix - G_pred
        self._t += 1
        self._grad_sum += G
        self._anchor += sigma_t * self.M.blocks
        denom = self.schedule.sigma_prefix
        if denom > 0.0:
            target = (self._anchor - self._grad_sum - self._suffix) / denom
            self.M = project(PolicyParams(target), self.feasible)
        else:
            C = np.ascontiguousarray(self._grad_sum + self._suffix)
            self.M = PolicyParams(_kernels.linear_argmin(C, self.feasible.kappa_M))
        return self.M


class GpcController:
    """Projected online gradient descent on the proxy gradients,
    eta = kappa_M / (g sqrt(T))."""

    def __init__(self, feasible, eta, d_u, d_x, M0=None):
        if eta <= 0.0:
            raise ConfigError("step size eta must be positive")
        self.feasible = feasible
        self.eta = eta
        self.M = M0 if M0 is not None else PolicyParams.zeros(feasible.p, d_u, d_x)

    @classmethod
    def from_constants(cls, feasible, constants, T, d_u, d_x):
        if T is None or T < 1:
            raise ConfigError("GPC requires the horizon T in advance")
        if constants.g is None or constants.g <= 0:
            raise ConfigError("GPC requires the gradient bound g")
        return cls(feasible, constants.kappa_M / (constants.g * math.sqrt(T)), d_u, d_x)

    def update(self, G):
        G = np.asarray(G, dtype=float)
        if G.shape != self.M.blocks.shape:
            raise DimensionMismatch(
                f"gradient shape {G.shape} does not match policy {self.M.blocks.shape}")
        return self._step(G)

    def _step(self, G):
        self.M = project(PolicyParams(self.M.blocks - self.eta * G), self.feasible)
        return self.M


class BasicFtrlController:
    """Fixed-regularizer FTRL, r_t(M) = sigma' ||M||^2 with T known:
    M_{t+1} = proj(-G_{1:t} / (2 sigma' t))."""

    def __init__(self, feasible, sigma_prime, d_u, d_x, M0=None):
        if sigma_prime <= 0.0:
            raise ConfigError("sigma' must be positive")
        self.feasible = feasible
        self.sigma_prime = sigma_prime
        self.M = M0 if M0 is not None else PolicyParams.zeros(feasible.p, d_u, d_x)
        self._grad_sum = np.zeros_like(self.M.blocks)
        self._t = 0

    @classmethod
    def from_constants(cls, feasible, constants, T, d_u, d_x):
        if T is None or T < 1:
            raise ConfigError("basic FTRL requires the horizon T in advance")
        return cls(feasible, basic_sigma_prime(constants, T), d_u, d_x)

    def update(self, G):
        G = np.asarray(G, dtype=float)
        if G.shape != self.M.blocks.shape:
            raise DimensionMismatch(
                f"gradient shape {G.shape} does not match policy {self.M.blocks.shape}")
        self._grad_sum += G
        self._t += 1
        target = -self._grad_sum / (2.0 * self.sigma_prime * self._t)
        self.M = project(PolicyParams(target), self.feasible)
        return self.M


def basic_sigma_prime(constants, T):
    """Per-step weight balancing the two terms of the fixed-regularizer bound."""
    c = constants
    return c.g * math.sqrt(T) * c.delta / (
        2.0 * c.kappa_M * math.sqrt(2.0 * c.delta ** 2 + 4.0 * c.l * c.z / c.g))


def make_controller(kind, scenario_like, T, predictions=None, sigma_override=None):
    """Object-level controller for a scenario's dimensions and constants."""
    constants = scenario_like.constants()
    feasible = FeasibleSet(kappa_M=constants.kappa_M, p=constants.p)
    d_u, d_x = constants.d_u, constants.d_x
    if kind in (ControllerKind.FTRL, ControllerKind.ADAFTRL):
        sigma = sigma_override or sigma_scale_for(kind, constants)
        sched = ScheduleState(_EXPECTED_VARIANT[kind], sigma, constants.delta)
        return FtrlController(kind, feasible, sched, d_u, d_x)
    if kind is ControllerKind.OPTFTRL:
        sigma = sigma_override or sigma_scale_for(kind, constants)
        sched = ScheduleState(Variant.OPTIMISTIC, sigma, constants.delta)
        if predictions is None:
            predictions = np.zeros((T, constants.p, d_u, d_x))
        return OptimisticController(feasible, sched, predictions, d_u, d_x)
    if kind is ControllerKind.GPC:
        return GpcController.from_constants(feasible, constants, T, d_u, d_x)
    if kind is ControllerKind.BASIC_FTRL:
        return BasicFtrlController.from_constants(feasible, constants, T, d_u, d_x)
    raise ConfigError(f"unhandled controller kind {kind}")


def run_episode(kind, scenario, seed=0, predictions=None, T=None,
                sigma_override=None):
    """Run one full observe-act-update episode and return its trace.

    Predictions for the optimistic controller come from, in order: the
    ``predictions`` argument, the scenario's prediction policy (seeded), or
    zeros.  Deterministic given (scenario, seed).
    """
    if isinstance(kind, str):
        kind = ControllerKind.parse(kind)
    model = scenario.system()
    if not model.k_is_zero:
        raise UnsupportedConfiguration(
            "episodes differentiate the K = 0 action form; configure K = 0")
    T = int(T) if T is not None else scenario.T
    if T < 1:
        raise ConfigError("horizon T must be >= 1")
    theta = scenario.theta_array(T)
    w = scenario.w_array(T)
    norms = np.linalg.norm(w, axis=1)
    bad = np.nonzero(norms > model.w_bound + 1e-12 * max(1.0, model.w_bound))[0]
    if bad.size:
        raise ConfigError(
            f"scenario disturbance at step {bad[0] + 1} exceeds w_bound")
    constants = scenario.constants()
    p = constants.p

    sigma = 0.0
    eta = 0.0
    sigma_prime = 0.0
    if kind in (ControllerKind.FTRL, ControllerKind.ADAFTRL, ControllerKind.OPTFTRL):
        sigma = float(sigma_override) if sigma_override else sigma_scale_for(kind, constants)
    elif kind is ControllerKind.GPC:
        eta = constants.kappa_M / (constants.g * math.sqrt(T))
    elif kind is ControllerKind.BASIC_FTRL:
        sigma_prime = basic_sigma_prime(constants, T)

    if kind is ControllerKind.OPTFTRL:
        if predictions is None:
            from .environments import gen_predictions  # lazy: avoids a cycle

            if scenario.prediction_policy is not None:
                true_g = _kernels.gradient_stream(model.A, model.B, theta, w, p)
                predictions = gen_predictions(scenario, true_g, seed)
            else:
                predictions = np.zeros((T, p, model.d_u, model.d_x))
        predictions = np.ascontiguousarray(np.asarray(predictions, dtype=float))
        if predictions.shape != (T, p, model.d_u, model.d_x):
            raise DimensionMismatch(
                f"predictions must be {(T, p, model.d_u, model.d_x)}, "
                f"got {predictions.shape}")
    else:
        predictions = np.zeros((T, p, model.d_u, model.d_x))

    M0 = np.zeros((p, model.d_u, model.d_x))
    out = _kernels.episode(
        model.A, model.B, theta, w, predictions, _KERNEL_CODE[kind],
        float(constants.kappa_M), float(sigma), float(constants.delta),
        float(eta), float(sigma_prime), float(constants.l), float(constants.z),
        M0)
    (o_x, o_u, o_w, o_cost, o_cum, o_gnorm, o_signal, o_h, o_sigma,
     o_prederr, o_nu, o_nuhat, M_hist) = out

    return RunTrace(
        scenario_name=scenario.name,
        controller=kind.value,
        seed=seed,
        scenario_dict=scenario.to_dict(),
        constants_dict=constants.__dict__.copy(),
        x=o_x, u=o_u, w=o_w, cost=o_cost, cum_cost=o_cum,
        grad_norm=o_gnorm, signal=o_signal, h=o_h, sigma_t=o_sigma,
        pred_err=o_prederr, nu=o_nu, nu_hat=o_nuhat, M_hist=M_hist,
        sigma_scale=float(sigma) if sigma else None,
    )
