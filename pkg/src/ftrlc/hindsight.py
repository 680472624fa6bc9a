"""Best-in-hindsight stationary policy, policy regret, regret-bound
right-hand sides, and the stationary-policy approximation of linear
controllers."""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .controllers import ControllerKind
from .errors import ConfigError, SolverError, UnsupportedConfiguration
from .lti import spectral_radius
from .policy import FeasibleSet, PolicyParams, block_norm_sum, project


@dataclass
class HindsightResult:
    M_star: PolicyParams
    benchmark_cost: float
    learner_cost: float
    regret: float
    solver_used: str


@dataclass(frozen=True)
class BoundReport:
    theorem: str
    rhs_value: float
    constant_term: float
    radicand: float
    regret: float
    satisfied: bool


def linear_argmin(C, feasible):
    """Exact argmin of <C, M> over the block-norm ball (lowest-index tie
    break; zero C maps to the zero policy)."""
    blocks = C.blocks if isinstance(C, PolicyParams) else np.asarray(C, dtype=float)
    out = _kernels.linear_argmin(np.ascontiguousarray(blocks), feasible.kappa_M)
    return PolicyParams(out)


def _pgd_linear_argmin(C, feasible, tol=1e-7, max_iter=50_000):
    """Projected gradient on <C, M> with backtracking from step 1.0; the
    iterative cross-check route for the closed form."""
    blocks = np.asarray(C, dtype=float)
    M = np.zeros_like(blocks)
    fval = 0.0
    step = 1.0
    for _ in range(max_iter):
        cand = _kernels.project_blocks(np.ascontiguousarray(M - step * blocks),
                                       feasible.kappa_M)
        fcand = float(np.sum(blocks * cand))
        if fcand < fval - tol:
            M = cand
            fval = fcand
            continue
        step *= 0.5
        if step < 1e-12:
            return PolicyParams(M), fval
    raise SolverError(f"projected gradient did not converge; last value {fval}")


def solve_p1(model, scenario, feasible=None, learner_cost=None,
             method="closed_form", T=None):
    """Hindsight-optimal stationary policy for a scripted linear-cost run.

    The total proxy cost is <sum_t G_t, M> plus a policy-independent term, so
    the minimizer is the closed-form linear argmin; ``method="projected_gradient"``
    runs the iterative solver instead (cross-check route).  The benchmark
    cost comes from a fresh stationary replay of the returned policy.
    """
    if not model.k_is_zero:
        raise UnsupportedConfiguration("P1 evaluation requires K = 0")
    if feasible is None:
        feasible = FeasibleSet(kappa_M=scenario.kappa_M, p=scenario.p)
    T = scenario.T if T is None else int(T)
    theta = scenario.theta_array(T)
    w = scenario.w_array(T)
    G = _kernels.gradient_stream(model.A, model.B, theta, w, scenario.p)
    C_total = np.ascontiguousarray(G.sum(axis=0))
    if method == "closed_form":
        M_star = linear_argmin(C_total, feasible)
        solver = "closed_form_linear"
    elif method == "projected_gradient":
        M_star, _ = _pgd_linear_argmin(C_total, feasible)
        solver = "projected_gradient"
    else:
        raise ConfigError(f"unknown solve_p1 method {method!r}")
    costs = _kernels.stationary_costs(model.A, model.B, theta, w, M_star.blocks)
    benchmark = float(costs.sum())
    regret = None if learner_cost is None else float(learner_cost) - benchmark
    return HindsightResult(
        M_star=M_star, benchmark_cost=benchmark,
        learner_cost=learner_cost, regret=regret, solver_used=solver)


def stationary_cost(model, scenario, M, T=None):
    """Total cost of replaying a fixed policy over the scenario's streams."""
    T = scenario.T if T is None else int(T)
    theta = scenario.theta_array(T)
    w = scenario.w_array(T)
    blocks = M.blocks if isinstance(M, PolicyParams) else np.asarray(M, dtype=float)
    return float(_kernels.stationary_costs(model.A, model.B, theta, w,
                                           np.ascontiguousarray(blocks)).sum())


def evaluate_regret(trace, scenario, feasible=None):
    """Policy regret of a finished run against the P1 benchmark."""
    model = scenario.system()
    res = solve_p1(model, scenario, feasible=feasible,
                   learner_cost=trace.learner_cost, T=trace.T)
    return res


THEOREM_FOR = {
    ControllerKind.FTRL: "T1",
    ControllerKind.ADAFTRL: "T2",
    ControllerKind.OPTFTRL: "T3",
}


def theorem_bound(which, trace, constants, regret):
    """Literal regret-bound right-hand side evaluated from a run trace.

    T1: (2 kappa_M / delta) (sqrt(2 (delta^2 + 2 l z)) + l z / (delta sqrt(h_1)))
    T2, T3: 2 sqrt(2 kappa_M^2 (1 + l z)) + 2 l z kappa_M / (sqrt(h_1) delta^2)
    times sqrt(sum_t h_t) with the matching schedule's h column; a run whose
    signals never left zero has rhs = 0.
    """
    if which not in ("T1", "T2", "T3"):
        raise ConfigError(f"unknown theorem {which!r}")
    h = np.asarray(trace.h, dtype=float)
    if np.all(np.isnan(h)):
        raise ConfigError(
            f"trace of controller {trace.controller!r} carries no schedule column")
    h = np.where(np.isnan(h), 0.0, h)
    radicand = float(h.sum())
    h1 = trace.h1_first()
    c = constants
    lz = c.l * c.z
    if radicand <= 0.0:
        const = 0.0
        rhs = 0.0
    else:
        if which == "T1":
            const = (2.0 * c.kappa_M / c.delta) * (
                math.sqrt(2.0 * (c.delta ** 2 + 2.0 * lz)) + lz / (c.delta * math.sqrt(h1)))
        else:
            const = 2.0 * math.sqrt(2.0 * c.kappa_M ** 2 * (1.0 + lz)) \
                + 2.0 * lz * c.kappa_M / (math.sqrt(h1) * c.delta ** 2)
        rhs = const * math.sqrt(radicand)
    return BoundReport(
        theorem=which, rhs_value=rhs, constant_term=const, radicand=radicand,
        regret=float(regret), satisfied=bool(regret <= rhs))


def regret_report(trace, scenario, feasible=None):
    """The run's regret-report payload (written as JSON by the CLI)."""
    res = evaluate_regret(trace, scenario, feasible=feasible)
    kind = ControllerKind.parse(trace.controller)
    which = THEOREM_FOR.get(kind)
    payload = {
        "scenario": scenario.name,
        "controller": trace.controller,
        "seed": trace.seed,
        "learner_cost": trace.learner_cost,
        "benchmark_cost": res.benchmark_cost,
        "regret": res.regret,
        "bound_rhs": None,
        "theorem": which,
        "satisfied": None,
    }
    if which is not None:
        report = theorem_bound(which, trace, scenario.constants(), res.regret)
        payload["bound_rhs"] = report.rhs_value
        payload["satisfied"] = report.satisfied
    return payload


@dataclass(frozen=True)
class ApproxGapReport:
    p_required: int
    max_action_gap: float
    max_state_gap: float
    max_cost_gap: float
    zeta: float

    @property
    def ratio(self):
        return self.max_cost_gap / self.zeta if self.zeta > 0 else math.inf


def dac_approx_gap(model, K_lin, zeta, disturbances):
    """Gap between a linear policy u = K x and its truncated stationary
    approximation M^[j+1] = K (A + B K)^j at the memory the approximation
    bound prescribes, measured on a concrete disturbance sequence.

    The cost gap is reported for a 1-Lipschitz cost (||(dx, du)||); scale by
    l for a specific cost family.
    """
    K_lin = np.asarray(K_lin, dtype=float)
    if K_lin.shape != (model.d_u, model.d_x):
        raise ConfigError(f"K must be {(model.d_u, model.d_x)}, got {K_lin.shape}")
    closed = model.A + model.B @ K_lin
    if spectral_radius(closed) >= 1.0:
        raise ConfigError("closed loop A + B K is not stable")
    if zeta <= 0.0:
        raise ConfigError("zeta must be positive")
    kappa_L = float(np.linalg.norm(K_lin))
    w_bound = model.w_bound
    arg = math.sqrt(model.d_x) * kappa_L * w_bound / (model.delta * zeta)
    p_req = max(1, math.ceil(math.log(max(arg, 1.0)) / model.delta))

    blocks = np.zeros((p_req, model.d_u, model.d_x))
    pw = np.eye(model.d_x)
    for j in range(p_req):
        blocks[j] = K_lin @ pw
        pw = closed @ pw

    w = np.asarray(disturbances, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    T = w.shape[0]
    x_lin = np.zeros(model.d_x)
    x_dac = np.zeros(model.d_x)
    win = np.zeros((p_req, model.d_x))
    max_u = 0.0
    max_x = 0.0
    max_c = 0.0
    for t in range(T):
        u_lin = K_lin @ x_lin
        u_dac = np.einsum("jab,jb->a", blocks, win)
        gu = float(np.linalg.norm(u_dac - u_lin))
        gx = float(np.linalg.norm(x_dac - x_lin))
        gc = math.hypot(gx, gu)
        max_u = max(max_u, gu)
        max_x = max(max_x, gx)
        max_c = max(max_c, gc)
        x_lin = model.A @ x_lin + model.B @ u_lin + w[t]
        x_dac = model.A @ x_dac + model.B @ u_dac + w[t]
        win[1:] = win[:-1]
        win[0] = w[t]
    return ApproxGapReport(p_required=p_req, max_action_gap=max_u,
                           max_state_gap=max_x, max_cost_gap=max_c, zeta=zeta)
