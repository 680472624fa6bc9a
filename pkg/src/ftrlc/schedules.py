"""Regularization schedules: max-adaptive, decayed-memory, prediction-error.

All three emit strong-convexity increments sigma_t = sigma (sqrt(h_{1:t}) -
sqrt(h_{1:t-1})), differing in how the per-step value h_t is built from the
nonnegative signal stream a_t:

  max-adaptive     h_t = max_{s<=t} a_s
  decayed-memory   h_t = sum_{i=0}^{t-1} (1-delta)^i a_{t-i:t}
  prediction-error same as decayed-memory with a_t the prediction-error
                   signal, plus a clamp of the first nonzero a to at most 1

A leading all-zero-signal stretch produces sigma_t = 0 and the schedule's
effective "step 1" (the h_1 entering bound constants) is the first step with
a nonzero value.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import _kernels


class Variant(enum.Enum):
    MAX_ADAPTIVE = "max_adaptive"
    DECAYED_MEMORY = "decayed_memory"
    OPTIMISTIC = "optimistic"


class DecayedWindowSum:
    """Incremental h_t = sum_{i=0}^{t-1} (1-delta)^i a_{t-i:t}.

    Maintains P_t = (1-delta) P_{t-1} + a_t and the plain prefix a_{1:t};
    then h_t = (P_t - (1-delta)^t a_{1:t}) / delta, collapsing to h_t = a_t
    at delta = 1.  Validated against the literal double sum in tests and the
    verification suite.
    """

    def __init__(self, delta):
        if not (0.0 < delta <= 1.0):
            raise ValueError("delta must lie in (0, 1]")
        self.delta = delta
        self.beta = 1.0 - delta
        self.P = 0.0
        self.prefix = 0.0
        self.decay_pow = 1.0

    def push(self, a):
        self.P = self.beta * self.P + a
        self.prefix += a
        self.decay_pow *= self.beta
        if self.delta >= 1.0:
            return a
        h = (self.P - self.decay_pow * self.prefix) / self.delta
        return h if h > 0.0 else 0.0


class ScheduleState:
    """Running schedule quantities for one episode."""

    def __init__(self, variant, sigma_scale, delta):
        if sigma_scale <= 0.0:
            raise ValueError("sigma_scale must be positive")
        self.variant = variant
        self.sigma_scale = sigma_scale
        self.delta = delta
        self.t = 0
        self.started = False
        self.h1 = 0.0
        self.last_h = 0.0
        self.h_prefix = 0.0
        self.sigma_prefix = 0.0
        self.signal_prefix = 0.0
        self._acc = DecayedWindowSum(delta) if variant is not Variant.MAX_ADAPTIVE else None

    def push_signal(self, a_t):
        """Consume one signal value; returns (h_t, sigma_t)."""
        a_t = float(a_t)
        if a_t < 0.0:
            raise ValueError("schedule signals must be nonnegative")
        if math.isnan(a_t):
            raise ValueError("schedule signal is NaN")
        self.t += 1
        if self.variant is Variant.OPTIMISTIC and not self.started and a_t > 1.0:
            a_t = 1.0  # first nonzero prediction error is clamped to <= 1
        if not self.started and a_t > 0.0:
            self.started = True
        self.signal_prefix += a_t
        if self.variant is Variant.MAX_ADAPTIVE:
            self.last_h = max(self.last_h, a_t)
            h_t = self.last_h
        else:
            h_t = self._acc.push(a_t)
        if self.h1 == 0.0 and h_t > 0.0:
            self.h1 = h_t
        self.h_prefix += h_t
        prev = self.sigma_prefix
        self.sigma_prefix = self.sigma_scale * np.sqrt(self.h_prefix)
        sigma_t = self.sigma_prefix - prev
        return h_t, sigma_t


def sigma_scale_for(kind, constants):
    """Theorem-prescribed sigma for a controller kind.

    Max-adaptive: sqrt(delta^2 + 2 l z) / (sqrt(2) kappa_M delta).
    Decayed-memory and optimistic: sqrt((1 + 2 l z) / (2 kappa_M^2)).
    """
    from .controllers import ControllerKind  # local import to avoid a cycle

    d = constants.delta
    if d <= 0.0:
        raise ValueError("delta = 0 is outside the stability assumption")
    lz = constants.l * constants.z
    if kind == ControllerKind.FTRL:
        return math.sqrt(d * d + 2.0 * lz) / (math.sqrt(2.0) * constants.kappa_M * d)
    if kind in (ControllerKind.ADAFTRL, ControllerKind.OPTFTRL):
        return math.sqrt((1.0 + 2.0 * lz) / (2.0 * constants.kappa_M ** 2))
    raise ValueError(f"no adaptive sigma is defined for {kind}")


def decayed_double_sum(a, delta):
    """Literal h_t = sum_{i=0}^{t-1} (1-delta)^i a_{t-i:t} for a whole stream."""
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    return _kernels.decayed_double_sum(a, float(delta))


@dataclass(frozen=True)
class Lemma4Result:
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + 1e-9 * max(1.0, abs(self.rhs))


def check_lemma4(a, delta, f=None, a0=0.0):
    """Arithmo-geometric sum bound: returns (lhs, rhs) with

        lhs = sum_t sum_{i=0}^{t-1} (1-delta)^i a_{t-i:t} f(a_{0:t})
        rhs = (1/delta^2) * integral_{a0}^{a0 + a_{1:T}} f(x) dx

    for a nonincreasing f >= 0.  f = None means f(x) = x^{-1/2} with the
    closed-form integral; any other f uses adaptive quadrature.  Terms whose
    inner sum a_{t-i:t} is zero contribute zero even where f blows up.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0.0):
        raise ValueError("signal values must be nonnegative")
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    if a0 < 0.0:
        raise ValueError("a0 must be nonnegative")
    T = a.size
    pref = np.concatenate(([0.0], np.cumsum(a)))
    beta = 1.0 - delta

    if f is None:
        fval = lambda x: x ** -0.5
    else:
        fval = f

    lhs = 0.0
    for t in range(1, T + 1):
        s_t = a0 + pref[t]
        weights = beta ** np.arange(t)
        inner = pref[t] - pref[t - 1 - np.arange(t)]
        mask = inner > 0.0
        if not np.any(mask):
            continue
        lhs += float(np.sum(weights[mask] * inner[mask])) * fval(s_t)

    lo = a0
    hi = a0 + pref[T]
    if hi <= lo:
        rhs = 0.0
    elif f is None:
        rhs = (2.0 * (math.sqrt(hi) - math.sqrt(lo))) / (delta * delta)
    else:
        val, _ = quad(f, lo, hi, limit=200)
        rhs = val / (delta * delta)
    return Lemma4Result(lhs=float(lhs), rhs=float(rhs))
