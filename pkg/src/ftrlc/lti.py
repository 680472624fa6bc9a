"""Linear time-invariant plant: simulation, disturbance recovery, and the
closed-form state expression for stationary disturbance-action policies."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DisturbanceBoundError, UnsupportedConfiguration

SPECTRAL_TOL = 1e-6


def spectral_radius(A, tol=1e-8, max_iter=10_000):
    """Spectral radius estimate by power iteration.

    Uses a deterministic start vector and a geometric mean of recent growth
    ratios so complex-conjugate dominant pairs (oscillating ratios) still
    settle; returns early once the ratio window is flat to ``tol``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    v = np.cos(np.arange(1, n + 1))  # deterministic, unlikely to be orthogonal
    v /= np.linalg.norm(v)
    window = []
    wlen = 32
    est = 0.0
    for _ in range(max_iter):
        Av = A @ v
        r = np.linalg.norm(Av)
        if r == 0.0:
            return 0.0
        v = Av / r
        window.append(np.log(r))
        if len(window) > wlen:
            window.pop(0)
        est = float(np.exp(np.mean(window)))
        if len(window) == wlen:
            spread = float(np.exp(max(window)) - np.exp(min(window)))
            if spread <= tol * max(1.0, est):
                return est
    return est


@dataclass
class SystemModel:
    """The plant x_{t+1} = A x_t + B u_t + w_t with its bound constants.

    K is a fixed stabilizing controller applied as u = K x + (policy term);
    it defaults to zero and every bundled scenario keeps it zero.
    """

    A: np.ndarray
    B: np.ndarray
    delta: float
    w_bound: float
    K: np.ndarray = None
    kappa_B: float = None
    d_x: int = field(init=False)
    d_u: int = field(init=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if self.B.ndim != 2 or self.B.shape[0] != self.A.shape[0]:
            raise DimensionMismatch(
                f"B rows must match A ({self.A.shape[0]}), got {self.B.shape}")
        self.d_x = self.A.shape[0]
        self.d_u = self.B.shape[1]
        if self.d_x < 1 or self.d_u < 1:
            raise DimensionMismatch("state and action dimensions must be >= 1")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.w_bound < 0.0:
            raise ValueError("w_bound must be nonnegative")
        if self.K is None:
            self.K = np.zeros((self.d_u, self.d_x))
        else:
            self.K = np.asarray(self.K, dtype=float)
            if self.K.shape != (self.d_u, self.d_x):
                raise DimensionMismatch(
                    f"K must be {(self.d_u, self.d_x)}, got {self.K.shape}")
        normB = float(np.linalg.norm(self.B))
        if self.kappa_B is None:
            self.kappa_B = normB
        elif normB > self.kappa_B + 1e-12 * max(1.0, self.kappa_B):
            raise ValueError(f"||B|| = {normB} exceeds kappa_B = {self.kappa_B}")
        rho = spectral_radius(self.A)
        if rho > 1.0 - self.delta + SPECTRAL_TOL:
            raise ValueError(
                f"spectral radius {rho:.8f} exceeds 1 - delta = {1.0 - self.delta}")

    @property
    def k_is_zero(self):
        return not np.any(self.K)


@dataclass
class StepRecord:
    """One simulated step: index, state, action, disturbance, and cost."""

    t: int
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    cost: float


class DisturbanceWindow:
    """Ring buffer of the last p disturbances; indices at or before 0 read
    as exact zeros (matching the zero-padded policy convention)."""

    def __init__(self, p, d_x):
        if p < 1:
            raise ValueError("window capacity p must be >= 1")
        self.p = p
        self.d_x = d_x
        self._buf = np.zeros((p, d_x))

    def push(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.d_x,):
            raise DimensionMismatch(f"disturbance must be ({self.d_x},), got {w.shape}")
        self._buf[1:] = self._buf[:-1]
        self._buf[0] = w

    def as_array(self):
        """Rows ordered (w_{t-1}, ..., w_{t-p})."""
        return self._buf.copy()

    def view(self):
        return self._buf


def _check_vec(v, n, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} must have shape ({n},), got {v.shape}")
    return v


def step(model, x, u, w):
    """x_{t+1} = A x_t + B u_t + w_t; rejects disturbances above w_bound."""
    x = _check_vec(x, model.d_x, "x")
    u = _check_vec(u, model.d_u, "u")
    w = _check_vec(w, model.d_x, "w")
    wn = float(np.linalg.norm(w))
    if wn > model.w_bound + 1e-12 * max(1.0, model.w_bound):
        raise DisturbanceBoundError(
            f"||w|| = {wn} exceeds the adversary bound {model.w_bound}")
    return model.A @ x + model.B @ u + w


def recover_disturbance(model, x_next, x, u):
    """w_t = x_{t+1} - A x_t - B u_t."""
    x_next = _check_vec(x_next, model.d_x, "x_next")
    x = _check_vec(x, model.d_x, "x")
    u = _check_vec(u, model.d_u, "u")
    return x_next - model.A @ x - model.B @ u


def rollout_stationary(model, M, disturbances, t):
    """State x_{t+1} after replaying a fixed policy M from step 1.

    Literal evaluation of
        x_{t+1} = sum_{i=0}^{t} A^i (B sum_j M^[j] w_{t-i-j} + w_{t-i})
    with w_s = 0 for s <= 0.  Requires K = 0; ``disturbances`` rows are
    (w_1, w_2, ...), so w_s = disturbances[s-1].
    """
    if not model.k_is_zero:
        raise UnsupportedConfiguration(
            "the stationary closed form is only available for K = 0")
    if t < 1:
        raise ValueError("t must be >= 1")
    blocks = M.blocks if hasattr(M, "blocks") else np.asarray(M, dtype=float)
    p = blocks.shape[0]
    w = np.asarray(disturbances, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape[1] != model.d_x:
        raise DimensionMismatch(
            f"disturbances must have {model.d_x} columns, got {w.shape[1]}")

    def w_at(s):
        if s < 1 or s > w.shape[0]:
            return np.zeros(model.d_x)
        return w[s - 1]

    x = np.zeros(model.d_x)
    Apow = np.eye(model.d_x)
    for i in range(t + 1):
        inner = np.zeros(model.d_u)
        for j in range(1, p + 1):
            inner += blocks[j - 1] @ w_at(t - i - j)
        x += Apow @ (model.B @ inner + w_at(t - i))
        Apow = Apow @ model.A
    return x
