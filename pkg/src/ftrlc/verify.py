"""Executable verification suites: simulation identities, projection
geometry, gradient checks, schedule recurrences, and the deviation /
regret-bound inequalities, evaluated on randomized instances and on the
bundled scenarios."""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .controllers import (BoundConstants, ControllerKind, FtrlController,
                          OptimisticController, run_episode)
from .costs import CostSpec, SensitivityState, advance_sensitivity, cost, gradient
from .environments import builtin_names, builtin_scenario, gen_predictions
from .hindsight import THEOREM_FOR, evaluate_regret, theorem_bound
from .lti import SystemModel, rollout_stationary, step
from .policy import FeasibleSet, PolicyParams, block_norm_sum, project
from .schedules import (DecayedWindowSum, ScheduleState, Variant, check_lemma4,
                        decayed_double_sum)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _stable_system(rng, d_x, d_u, delta, w_bound):
    # 2-norm scaled below 1 - delta: satisfies both the spectral-radius
    # constructor check and the Frobenius chains the lemmas lean on.
    A = rng.normal(size=(d_x, d_x))
    s = np.linalg.svd(A, compute_uv=False)[0]
    A = A * (0.95 * (1.0 - delta) / s if s > 0 else 0.0)
    if delta >= 1.0:
        A = np.zeros((d_x, d_x))
    B = rng.normal(size=(d_x, d_u))
    sB = np.linalg.svd(B, compute_uv=False)[0]
    if sB > 0:
        B = B / sB
    return SystemModel(A=A, B=B, delta=delta, w_bound=w_bound)


def _feasible_policy(rng, p, d_u, d_x, kappa_M, scale=1.0):
    raw = rng.normal(size=(p, d_u, d_x))
    total = sum(np.linalg.norm(b) for b in raw)
    if total > 0:
        raw *= scale * kappa_M / total
    return raw


def _simulate_stationary(model, blocks, w):
    """Straight-line oracle: iterate step() under the fixed policy."""
    T = w.shape[0]
    p = blocks.shape[0]
    xs = np.zeros((T + 1, model.d_x))
    win = np.zeros((p, model.d_x))
    for t in range(T):
        u = np.zeros(model.d_u)
        for j in range(p):
            u += blocks[j] @ win[j]
        xs[t + 1] = step(model, xs[t], u, w[t])
        win[1:] = win[:-1]
        win[0] = w[t]
    return xs


def suite_rollout_equivalence(n_trials=500, seed=11):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_trials):
        d_x = int(rng.integers(1, 4))
        d_u = int(rng.integers(1, 4))
        p = int(rng.integers(1, 5))
        delta = float(rng.uniform(0.1, 0.9))
        T = 200 if k % 50 == 0 else int(rng.integers(2, 61))
        model = _stable_system(rng, d_x, d_u, delta, w_bound=1.0)
        blocks = _feasible_policy(rng, p, d_u, d_x, kappa_M=2.0)
        w = rng.uniform(-0.25, 0.25, size=(T, d_x))
        w /= np.maximum(1.0, np.linalg.norm(w, axis=1, keepdims=True))
        xs = _simulate_stationary(model, blocks, w)  # xs[t] = x_{t+1}
        ts = sorted(set([1, T] + list(rng.integers(1, T + 1, size=5))))
        for t in ts:
            closed = rollout_stationary(model, blocks, w, t)
            worst = max(worst, float(np.abs(closed - xs[t]).max()))
    return worst <= 1e-9, f"max |closed-form - iterative| = {worst:.3e} (tol 1e-9)"


def suite_projection(seed=12):
    rng = np.random.default_rng(seed)
    kappa = 2.0
    details = []
    ok = True
    # optimality against random feasible points
    worst_viol = -np.inf
    for _ in range(500):
        p = int(rng.integers(1, 6))
        d_u = int(rng.integers(1, 3))
        d_x = int(rng.integers(1, 3))
        fs = FeasibleSet(kappa_M=kappa, p=p)
        M = rng.normal(size=(p, d_u, d_x)) * rng.uniform(1.0, 4.0)
        if block_norm_sum(M) <= kappa:
            M *= (kappa * 2.0) / max(block_norm_sum(M), 1e-12)
        PM = project(M, fs)
        dPM = float(np.linalg.norm(PM - M))
        Z = rng.normal(size=(1000, p, d_u, d_x))
        norms = np.linalg.norm(Z.reshape(1000, p, -1), axis=2)
        scale = rng.uniform(0.0, kappa, size=1000) / np.maximum(norms.sum(axis=1), 1e-12)
        Z *= scale[:, None, None, None]
        dZ = np.linalg.norm((Z - M[None]).reshape(1000, -1), axis=1)
        worst_viol = max(worst_viol, dPM - float(dZ.min()))
        if dPM > dZ.min() + 1e-7:
            ok = False
    details.append(f"optimality margin {worst_viol:.3e} (tol 1e-7)")
    # idempotence, membership, non-expansiveness, diameter
    worst_idem = 0.0
    worst_nonexp = 0.0
    worst_diam = 0.0
    for _ in range(500):
        p = int(rng.integers(1, 6))
        fs = FeasibleSet(kappa_M=kappa, p=p)
        M1 = rng.normal(size=(p, 2, 2)) * rng.uniform(0.2, 4.0)
        M2 = rng.normal(size=(p, 2, 2)) * rng.uniform(0.2, 4.0)
        P1, P2 = project(M1, fs), project(M2, fs)
        if not (fs.contains(P1) and fs.contains(P2)):
            ok = False
        worst_idem = max(worst_idem, float(np.linalg.norm(project(P1, fs) - P1)))
        worst_nonexp = max(worst_nonexp, float(
            np.linalg.norm(P1 - P2) - np.linalg.norm(M1 - M2)))
        worst_diam = max(worst_diam, float(np.linalg.norm(P1 - P2)) - 2.0 * kappa)
    if worst_idem > 1e-12 or worst_nonexp > 1e-12 or worst_diam > 1e-9:
        ok = False
    details.append(f"idempotence {worst_idem:.2e}, non-expansiveness slack "
                   f"{worst_nonexp:.2e}, diameter slack {worst_diam:.2e}")
    return ok, "; ".join(details)


def suite_gradient_fd(n_trials=200, seed=13):
    rng = np.random.default_rng(seed)
    h = 1e-6
    worst = 0.0
    for k in range(n_trials):
        d_x = 1 if k % 2 == 0 else 2
        d_u = 1 if k % 3 else 2
        p = int(rng.integers(1, 4))
        delta = float(rng.uniform(0.2, 0.8))
        model = _stable_system(rng, d_x, d_u, delta, w_bound=1.0)
        t = int(rng.integers(2, 51))
        w = rng.uniform(-0.3, 0.3, size=(t, d_x))
        w /= np.maximum(1.0, np.linalg.norm(w, axis=1, keepdims=True))
        theta = rng.normal(size=d_x + d_u)
        spec = CostSpec(theta=theta, lipschitz_l=float(np.linalg.norm(theta)) + 1e-9,
                        grad_bound_g=1e3)
        state = SensitivityState.for_model(model, p)
        for s in range(t - 1):
            state = advance_sensitivity(state, model, w[s])
        blocks = _feasible_policy(rng, p, d_u, d_x, kappa_M=2.0)
        G = gradient(spec, state)

        def proxy_cost(Mb):
            if t == 1:
                x = np.zeros(d_x)
            else:
                x = rollout_stationary(model, Mb, w, t - 1)
            win = np.zeros((p, d_x))
            for j in range(p):
                s = t - 1 - j  # w_{t-1-j} is w index s (1-based)
                if 1 <= s <= w.shape[0]:
                    win[j] = w[s - 1]
            u = np.zeros(d_u)
            for j in range(p):
                u += Mb[j] @ win[j]
            return cost(spec, x, u)

        for j in range(p):
            for a in range(d_u):
                for b in range(d_x):
                    Mp = blocks.copy()
                    Mp[j, a, b] += h
                    Mm = blocks.copy()
                    Mm[j, a, b] -= h
                    fd = (proxy_cost(Mp) - proxy_cost(Mm)) / (2 * h)
                    err = abs(G[j, a, b] - fd) / max(1.0, abs(G[j, a, b]))
                    worst = max(worst, err)
    return worst <= 1e-5, f"max relative gradient error {worst:.3e} (tol 1e-5)"


def suite_schedule_double_sum(seed=14):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for T in (50, 500, 2000):
        for delta in (0.1, 0.25, 0.5, 1.0):
            a = rng.uniform(0.0, 5.0, size=T)
            a[rng.random(T) < 0.1] = 0.0
            brute = decayed_double_sum(a, delta)
            acc = DecayedWindowSum(delta)
            inc = np.array([acc.push(v) for v in a])
            denom = np.maximum(np.abs(brute), 1e-300)
            rel = np.abs(inc - brute) / np.maximum(1.0, denom)
            worst = max(worst, float(rel.max()))
    return worst <= 1e-10, f"max relative recurrence error {worst:.3e} (tol 1e-10)"


def suite_lemma4(n_trials=500, seed=15):
    rng = np.random.default_rng(seed)
    violations = 0
    worst_margin = np.inf
    for k in range(n_trials):
        T = int(rng.integers(1, 101))
        delta = (0.1, 0.5, 1.0)[k % 3]
        a = rng.uniform(0.0, 3.0, size=T)
        if k % 4 == 0:
            a[: int(rng.integers(0, T))] = 0.0
        a0 = 0.0 if k % 2 == 0 else float(rng.uniform(0.01, 2.0))
        res = check_lemma4(a, delta, a0=a0)
        if not res.holds:
            violations += 1
        if res.rhs > 0:
            worst_margin = min(worst_margin, res.rhs - res.lhs)
    return violations == 0, (f"{violations} violations / {n_trials} trials; "
                             f"smallest rhs - lhs = {worst_margin:.3e}")


def _bundled_runs():
    runs = []
    for name in builtin_names():
        for kind in (ControllerKind.FTRL, ControllerKind.ADAFTRL):
            runs.append((name, kind, None))
        if name in ("C", "D"):
            runs.append((name, ControllerKind.OPTFTRL, 1))
    return runs


def suite_nu_deviation():
    worst = -np.inf
    checked = 0
    for name, kind, seed in _bundled_runs():
        sc = builtin_scenario(name)
        trace = run_episode(kind, sc, seed=seed or 0)
        mask = ~np.isnan(trace.nu) & ~np.isnan(trace.nu_hat)
        slack = trace.nu_hat[mask] - trace.nu[mask]
        checked += int(mask.sum())
        worst = max(worst, float((-slack).max()) if slack.size else -np.inf)
        if np.any(slack < -1e-9):
            return False, (f"nu exceeded nu-hat on {name}/{kind.value} by "
                           f"{float((-slack).max()):.3e}")
    return True, f"{checked} steps checked; worst nu-hat - nu margin {-worst:.3e}"


def suite_lemma9(n_trials=500, seed=16):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_trials):
        d_x = int(rng.integers(1, 4))
        d_u = int(rng.integers(1, 4))
        delta = float(rng.uniform(0.1, 1.0))
        model = _stable_system(rng, d_x, d_u, delta, w_bound=1.0)
        T = int(rng.integers(2, 41))
        w = rng.uniform(-0.2, 0.2, size=(T, d_x))
        u1 = rng.normal(size=(T, d_u))
        u2 = rng.normal(size=(T, d_u))
        x1 = np.zeros(d_x)
        x2 = np.zeros(d_x)
        max_du = 0.0
        for t in range(T):
            max_du = max(max_du, float(np.linalg.norm(u1[t] - u2[t])))
            x1 = model.A @ x1 + model.B @ u1[t] + w[t]
            x2 = model.A @ x2 + model.B @ u2[t] + w[t]
            lhs = float(np.linalg.norm(x1 - x2))
            rhs = math.sqrt(d_x) / delta * max_du
            worst = max(worst, lhs - rhs)
            if lhs > rhs + 1e-9:
                return False, f"state deviation {lhs:.3e} above bound {rhs:.3e}"
    return True, f"max lhs - rhs = {worst:.3e} over {n_trials} trials"


def _pgd_objective_argmin(G_cum, sigmas, anchors, pred_tail, kappa_M, tol=1e-8):
    """Numerical argmin of <G_{1:t} + pred_tail, M> + sum_s sigma_s/2 ||M - M_s||^2
    over the feasible set, by projected gradient with step 1/sigma_{1:t}."""
    sig_sum = float(np.sum(sigmas))
    if sig_sum <= 0:
        raise ValueError("degenerate objective")
    lin = G_cum + pred_tail - np.tensordot(sigmas, anchors, axes=1)
    M = np.zeros_like(G_cum)
    # deliberately not the 1/L Newton step: keeps the oracle's iteration path
    # distinct from the closed-form update it cross-checks
    stepsize = 0.37 / sig_sum
    for _ in range(50_000):
        grad = lin + sig_sum * M
        cand = _kernels.project_blocks(
            np.ascontiguousarray(M - stepsize * grad), kappa_M)
        if np.linalg.norm(cand - M) < tol * 0.001:
            return cand
        M = cand
    return M


def suite_ftrl_closed_form(n_episodes=100, seed=17):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_episodes):
        p = int(rng.integers(1, 4))
        d_u = 1
        d_x = 1 if k % 2 else 2
        kappa = float(rng.uniform(0.5, 3.0))
        delta = float(rng.uniform(0.2, 1.0))
        Tsteps = int(rng.integers(2, 7))
        fs = FeasibleSet(kappa_M=kappa, p=p)
        kind = (ControllerKind.FTRL, ControllerKind.ADAFTRL)[k % 2]
        variant = Variant.MAX_ADAPTIVE if kind is ControllerKind.FTRL else Variant.DECAYED_MEMORY
        use_opt = k % 5 == 0
        Gs = rng.normal(size=(Tsteps, p, d_u, d_x))
        preds = rng.normal(size=(Tsteps, p, d_u, d_x))
        sigma_scale = float(rng.uniform(0.3, 3.0))
        if use_opt:
            sched = ScheduleState(Variant.OPTIMISTIC, sigma_scale, delta)
            ctl = OptimisticController(fs, sched, preds, d_u, d_x)
        else:
            sched = ScheduleState(variant, sigma_scale, delta)
            ctl = FtrlController(kind, fs, sched, d_u, d_x)
        anchors = [ctl.M.blocks.copy()]
        sigmas = []
        G_cum = np.zeros((p, d_u, d_x))
        for t in range(Tsteps):
            before = sched.sigma_prefix
            M_next = ctl.update(Gs[t])
            sigmas.append(sched.sigma_prefix - before)
            G_cum += Gs[t]
            if sched.sigma_prefix > 0:
                tail = preds[t + 1:].sum(axis=0) if use_opt else np.zeros_like(G_cum)
                oracle = _pgd_objective_argmin(
                    G_cum, np.array(sigmas), np.array(anchors), tail, kappa)
                worst = max(worst, float(np.linalg.norm(M_next.blocks - oracle)))
            anchors.append(M_next.blocks.copy())
    return worst <= 1e-6, f"max |closed form - numerical argmin| = {worst:.3e} (tol 1e-6)"


def suite_delta_one_reduction(seed=18):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 4.0, size=300)
    a[rng.random(300) < 0.1] = 0.0
    sched = ScheduleState(Variant.DECAYED_MEMORY, 1.3, 1.0)
    hpref = 0.0
    spref = 0.0
    exact = True
    for v in a:
        h_t, sig_t = sched.push_signal(v)
        # AdaGrad-style reference: h_t is the raw signal itself
        hpref += v
        ref_pref = 1.3 * np.sqrt(hpref)
        if h_t != v or sig_t != ref_pref - spref:
            exact = False
        spref = ref_pref
    return exact, "delta = 1 decayed schedule equals the per-step-signal schedule exactly"


def suite_realized_bounds():
    msgs = []
    ok = True
    for name in builtin_names():
        sc = builtin_scenario(name)
        model = sc.system()
        theta = sc.theta_array()
        w = sc.w_array()
        G = _kernels.gradient_stream(model.A, model.B, theta, w, sc.p)
        gmax = float(np.linalg.norm(G.reshape(G.shape[0], -1), axis=1).max())
        if gmax > sc.g:
            ok = False
        wmax = float(np.linalg.norm(w, axis=1).max())
        if wmax > sc.w_bound + 1e-12:
            ok = False
        msgs.append(f"{name}: max||G||={gmax:.2f} <= g={sc.g:g}, max||w||={wmax:g}")
    return ok, "; ".join(msgs)


def suite_prediction_stream(seed=19):
    import dataclasses

    sc = builtin_scenario("C")
    model = sc.system()
    T = 10_000
    theta = np.tile(sc.theta_array(sc.T)[:1], (T, 1))
    w = np.tile(sc.w_array(sc.T)[:1], (T, 1))
    G = _kernels.gradient_stream(model.A, model.B, theta, w, sc.p)
    spec_half = dataclasses.replace(sc, prediction_policy={"mode": "sign_flip", "phi": 0.5})
    preds = gen_predictions(spec_half, G, seed=seed)
    again = gen_predictions(spec_half, G, seed=seed)
    if not np.array_equal(preds, again):
        return False, "prediction stream is not deterministic per seed"
    matches = np.all(preds == G, axis=(1, 2, 3))
    nz = np.linalg.norm(G.reshape(T, -1), axis=1) > 0
    rate = float(matches[nz].mean())
    return abs(rate - 0.5) <= 0.02, f"empirical match rate {rate:.4f} (phi = 0.5 +- 0.02)"


def suite_iterate_distance(seed=20):
    """Measured ||M_{t-i-1} - M_t|| against the per-lemma bound chains."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for name, kind, pseed in [("A", ControllerKind.FTRL, None),
                              ("B", ControllerKind.ADAFTRL, None),
                              ("C", ControllerKind.ADAFTRL, None),
                              ("D", ControllerKind.OPTFTRL, 1)]:
        sc = builtin_scenario(name)
        trace = run_episode(kind, sc, seed=pseed or 0)
        consts = sc.constants()
        sigma = trace.sigma_scale
        h = np.where(np.isnan(trace.h), 0.0, trace.h)
        hpref = np.cumsum(h)
        h1 = trace.h1_first()
        if h1 <= 0:
            continue
        err_norm = trace.pred_err if kind is ControllerKind.OPTFTRL else trace.grad_norm
        t0 = int(np.argmax(h > 0)) + 1  # first started step, 1-based
        for _ in range(400):
            t = int(rng.integers(t0 + 2, trace.T + 1))
            i = int(rng.integers(0, min(t - t0 - 1, 60)))
            # both iterates must be post-start argmins: t - i - 1 >= t0 + 1
            if t - i - 1 < t0 + 1:
                continue
            # policy index m lives at M_hist[m - 1]
            lhs = float(np.linalg.norm(trace.M_hist[t - 1] - trace.M_hist[t - i - 2]))
            spref = sigma * math.sqrt(hpref[t - 1])
            if kind is ControllerKind.FTRL:
                rhs = (i + 1) * h[t - 1] / spref * (1.0 + consts.kappa_M * sigma / math.sqrt(h1))
            else:
                num = float(np.sum(err_norm[t - i - 2: t - 1]))
                h_span = float(np.sum(h[t - i - 1: t]))
                rhs = num / spref + consts.kappa_M * sigma * h_span / (math.sqrt(h1) * spref)
            worst = max(worst, lhs - rhs)
            if lhs > rhs + 1e-9:
                return False, (f"iterate distance {lhs:.3e} above bound {rhs:.3e} "
                               f"on {name}/{kind.value} (t={t}, i={i})")
    return True, f"max lhs - rhs = {worst:.3e}"


def suite_theorem_bounds():
    msgs = []
    ok = True
    for name in builtin_names():
        sc = builtin_scenario(name)
        kinds = [ControllerKind.FTRL, ControllerKind.ADAFTRL]
        if name in ("C", "D"):
            kinds.append(ControllerKind.OPTFTRL)
        for kind in kinds:
            trace = run_episode(kind, sc, seed=1)
            res = evaluate_regret(trace, sc)
            rep = theorem_bound(THEOREM_FOR[kind], trace, sc.constants(), res.regret)
            ok = ok and rep.satisfied
            msgs.append(f"{name}/{kind.value}: regret={res.regret:.1f} "
                        f"rhs={rep.rhs_value:.1f} {'ok' if rep.satisfied else 'VIOLATED'}")
    return ok, "; ".join(msgs)


FAST_SUITES = [
    ("rollout_equivalence", suite_rollout_equivalence),
    ("projection", suite_projection),
    ("gradient_finite_difference", suite_gradient_fd),
    ("schedule_double_sum", suite_schedule_double_sum),
    ("lemma4_arithmo_geometric", suite_lemma4),
    ("nu_deviation_bounds", suite_nu_deviation),
    ("lemma9_state_deviation", suite_lemma9),
    ("ftrl_closed_form_vs_argmin", suite_ftrl_closed_form),
    ("delta_one_reduction", suite_delta_one_reduction),
    ("realized_signal_bounds", suite_realized_bounds),
    ("prediction_stream", suite_prediction_stream),
]

FULL_SUITES = FAST_SUITES + [
    ("iterate_distance_bounds", suite_iterate_distance),
    ("theorem_bounds_builtins", suite_theorem_bounds),
]


def run_suites(level="fast"):
    suites = FAST_SUITES if level == "fast" else FULL_SUITES
    results = []
    for name, fn in suites:
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashed suite is a failed suite
            passed, detail = False, f"exception: {exc!r}"
        results.append(SuiteResult(name=name, passed=passed, detail=detail,
                                   seconds=time.perf_counter() - t0))
    return results
