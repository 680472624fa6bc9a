"""Linear costs and exact gradients of the stationary-policy proxy cost.

For a linear cost <theta, (x, u)> the proxy cost c_t(x_t(M), u_t(M)) is
linear in the policy M, so its gradient is policy-independent.  The state
part is carried by an incremental sensitivity recursion instead of a
truncated history, which keeps it exact at O(p d_x^2 d_u) per step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnsupportedConfiguration


@dataclass(frozen=True)
class CostSpec:
    """Linear cost coefficients plus the scenario's declared constants.

    theta's first d_x entries weight the state, the rest weight the action.
    lipschitz_l bounds ||theta||; grad_bound_g bounds the realized policy
    gradients and feeds the non-adaptive baselines.
    """

    theta: np.ndarray
    lipschitz_l: float
    grad_bound_g: float

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        if self.lipschitz_l <= 0 or self.grad_bound_g <= 0:
            raise ValueError("lipschitz_l and grad_bound_g must be positive")
        tn = float(np.linalg.norm(self.theta))
        if tn > self.lipschitz_l + 1e-9 * max(1.0, self.lipschitz_l):
            raise ValueError(
                f"||theta|| = {tn} exceeds the declared Lipschitz constant "
                f"{self.lipschitz_l}")


def cost(spec, x, u):
    """<theta, (x, u)>."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim != 1 or u.ndim != 1 or x.size + u.size != spec.theta.size:
        raise DimensionMismatch(
            f"theta has {spec.theta.size} entries, got d_x={x.size} d_u={u.size}")
    return float(spec.theta[: x.size] @ x + spec.theta[x.size:] @ u)


class SensitivityState:
    """Derivatives of the stationary-rollout state with respect to each
    policy entry, advanced in lockstep with the plant.

    ``S[j, :, a, b]`` is the d_x-vector dx_t / dM^[j+1]_{(a,b)}; ``base`` is
    the policy-independent part of the rollout state, and ``window`` holds
    (w_{t-1}, ..., w_{t-p}).  At t = 1 everything is zero (x_1 = 0 does not
    depend on the policy).
    """

    def __init__(self, p, d_x, d_u):
        self.p = p
        self.d_x = d_x
        self.d_u = d_u
        self.S = np.zeros((p, d_x, d_u, d_x))
        self.base = np.zeros(d_x)
        self.window = np.zeros((p, d_x))

    @classmethod
    def for_model(cls, model, p):
        return cls(p, model.d_x, model.d_u)

    def copy(self):
        out = SensitivityState(self.p, self.d_x, self.d_u)
        out.S = self.S.copy()
        out.base = self.base.copy()
        out.window = self.window.copy()
        return out

    def proxy_state(self, M):
        """The state a stationary replay of M would occupy right now."""
        blocks = M.blocks if hasattr(M, "blocks") else np.asarray(M, dtype=float)
        return self.base + np.einsum("jiab,jab->i", self.S, blocks)


def advance_sensitivity(state, model, w_new):
    """Advance one plant step using disturbance w_new; returns a new state.

    S^[j] <- A S^[j] + B (unit-entry response scaled by w_{t-j}); requires
    the zero stabilizer since the recursion differentiates the K = 0 form.
    """
    if not model.k_is_zero:
        raise UnsupportedConfiguration("sensitivity recursion requires K = 0")
    w_new = np.asarray(w_new, dtype=float)
    if w_new.shape != (model.d_x,):
        raise DimensionMismatch(f"w must be ({model.d_x},), got {w_new.shape}")
    out = SensitivityState(state.p, state.d_x, state.d_u)
    # S_next[j,:,a,b] = A @ S[j,:,a,b] + B[:,a] * window[j, b]
    out.S = np.einsum("ik,jkab->jiab", model.A, state.S) \
        + np.einsum("ia,jb->jiab", model.B, state.window)
    out.base = model.A @ state.base + w_new
    out.window[1:] = state.window[:-1]
    out.window[0] = w_new
    return out


def gradient(spec, state, window=None, M=None):
    """Gradient matrix of the proxy cost, stacked like the policy blocks.

    Combines the state part (theta's first d_x entries against dx_t/dM) with
    the action part (theta's action entries against dw-window outer products);
    independent of M for linear costs, the argument is accepted only to
    mirror the call sites that carry one.
    """
    win = state.window if window is None else (
        window.as_array() if hasattr(window, "as_array") else np.asarray(window, dtype=float))
    if win.shape != (state.p, state.d_x):
        raise DimensionMismatch(
            f"window must be {(state.p, state.d_x)}, got {win.shape}")
    if spec.theta.size != state.d_x + state.d_u:
        raise DimensionMismatch(
            f"theta has {spec.theta.size} entries, model needs {state.d_x + state.d_u}")
    th_x = spec.theta[: state.d_x]
    th_u = spec.theta[state.d_x:]
    G = np.einsum("i,jiab->jab", th_x, state.S) + np.einsum("a,jb->jab", th_u, win)
    return G


def g_signal(G):
    """max(||G||, ||G||^2)."""
    n = float(np.linalg.norm(np.asarray(G, dtype=float)))
    return max(n, n * n)


def epsilon_signal(G, G_pred):
    """max(||G - Gtilde||, ||G - Gtilde||^2)."""
    G = np.asarray(G, dtype=float)
    G_pred = np.asarray(G_pred, dtype=float)
    if G.shape != G_pred.shape:
        raise DimensionMismatch(
            f"gradient and prediction shapes differ: {G.shape} vs {G_pred.shape}")
    n = float(np.linalg.norm(G - G_pred))
    return max(n, n * n)
