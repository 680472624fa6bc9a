"""Hot numeric kernels: episode loop, projection, schedule recurrences.

Each kernel is a plain-Python function over contiguous float64 arrays with
explicit loops, so the identical source compiles under numba's nopython mode
and also runs unmodified when numba is unavailable or disabled.

Backend selection happens at import time: set ``FTRLC_DISABLE_NUMBA=1`` to
force the pure-Python/NumPy fallback.  ``ftrlc bench`` compares the two
backends by re-running the episode kernel in a subprocess with the flag
toggled.
"""

import os

import numpy as np

_DISABLED = os.environ.get("FTRLC_DISABLE_NUMBA", "0") not in ("", "0")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - CI image always has numba
    njit = None
    HAVE_NUMBA = False

NUMBA_ACTIVE = HAVE_NUMBA and not _DISABLED


def _jit(fn):
    if NUMBA_ACTIVE:
        return njit(cache=True)(fn)
    return fn


def backend_name():
    return "numba" if NUMBA_ACTIVE else "python"


# Controller kind codes shared with controllers.py.
KIND_FTRL = 0
KIND_ADAFTRL = 1
KIND_OPTFTRL = 2
KIND_GPC = 3
KIND_BASIC_FTRL = 4


@_jit
def _frob3(M):
    s = 0.0
    for j in range(M.shape[0]):
        for a in range(M.shape[1]):
            for b in range(M.shape[2]):
                s += M[j, a, b] * M[j, a, b]
    return np.sqrt(s)


@_jit
def _block_norms(M, out):
    for j in range(M.shape[0]):
        s = 0.0
        for a in range(M.shape[1]):
            for b in range(M.shape[2]):
                s += M[j, a, b] * M[j, a, b]
        out[j] = np.sqrt(s)


@_jit
def project_blocks(M, kappa_M):
    """Euclidean projection onto { sum_j ||M^[j]||_F <= kappa_M }.

    Water-filling (soft threshold) on the vector of block norms, then a
    per-block rescale; blocks with zero norm stay zero.
    """
    p = M.shape[0]
    norms = np.empty(p)
    _block_norms(M, norms)
    total = 0.0
    for j in range(p):
        total += norms[j]
    out = M.copy()
    if total <= kappa_M:
        return out
    srt = np.sort(norms)  # ascending; walk from the top
    cum = 0.0
    lam = 0.0
    for i in range(p):
        v = srt[p - 1 - i]
        cum += v
        cand = (cum - kappa_M) / (i + 1.0)
        if v > cand:
            lam = cand
    for j in range(p):
        nj = norms[j]
        if nj <= lam or nj == 0.0:
            for a in range(M.shape[1]):
                for b in range(M.shape[2]):
                    out[j, a, b] = 0.0
        else:
            scale = (nj - lam) / nj
            for a in range(M.shape[1]):
                for b in range(M.shape[2]):
                    out[j, a, b] = M[j, a, b] * scale
    return out


@_jit
def linear_argmin(C, kappa_M):
    """argmin_{M in set} <C, M>: full mass kappa_M on the block of largest
    norm, pointed against it; lowest index wins ties; zero C gives zero M."""
    p = C.shape[0]
    norms = np.empty(p)
    _block_norms(C, norms)
    best = 0
    for j in range(1, p):
        if norms[j] > norms[best]:
            best = j
    out = np.zeros_like(C)
    if norms[best] > 0.0:
        scale = -kappa_M / norms[best]
        for a in range(C.shape[1]):
            for b in range(C.shape[2]):
                out[best, a, b] = C[best, a, b] * scale
    return out


@_jit
def _advance_state(S, S_buf, base, win, A, B, w_t):
    # One step of the stationary-proxy sensitivity recursion.  ``win`` holds
    # (w_{t-1}, ..., w_{t-p}) and is consumed before being shifted by w_t.
    p = S.shape[0]
    dx = S.shape[1]
    du = S.shape[2]
    for j in range(p):
        for i in range(dx):
            for a in range(du):
                for b in range(dx):
                    acc = B[i, a] * win[j, b]
                    for k in range(dx):
                        acc += A[i, k] * S[j, k, a, b]
                    S_buf[j, i, a, b] = acc
    for j in range(p):
        for i in range(dx):
            for a in range(du):
                for b in range(dx):
                    S[j, i, a, b] = S_buf[j, i, a, b]
    for i in range(dx):
        acc = w_t[i]
        for k in range(dx):
            acc += A[i, k] * base[k]
        S_buf[0, i, 0, 0] = acc  # scratch before overwriting base
    for i in range(dx):
        base[i] = S_buf[0, i, 0, 0]
    for j in range(p - 1, 0, -1):
        for b in range(dx):
            win[j, b] = win[j - 1, b]
    for b in range(dx):
        win[0, b] = w_t[b]


@_jit
def _gradient_into(G, theta_t, S, win):
    # G[j,a,b] = sum_i theta_x[i] * dx_t/dM[j,a,b] + theta_u[a] * w_{t-j-1}[b]
    p = S.shape[0]
    dx = S.shape[1]
    du = S.shape[2]
    for j in range(p):
        for a in range(du):
            for b in range(dx):
                acc = theta_t[dx + a] * win[j, b]
                for i in range(dx):
                    acc += theta_t[i] * S[j, i, a, b]
                G[j, a, b] = acc


@_jit
def _proxy_state_into(xp, base, S, M):
    # State the current M would have produced if replayed from t = 1.
    p = S.shape[0]
    dx = S.shape[1]
    du = S.shape[2]
    for i in range(dx):
        acc = base[i]
        for j in range(p):
            for a in range(du):
                for b in range(dx):
                    acc += S[j, i, a, b] * M[j, a, b]
        xp[i] = acc


@_jit
def gradient_stream(A, B, theta, w, p):
    """Per-step gradients of the stationary-proxy cost over a scripted run.

    Policy-independent for linear costs, so the whole stream is computable
    upfront; the episode kernel reproduces these values bit for bit because
    both share the same helpers.
    """
    T = theta.shape[0]
    dx = A.shape[0]
    du = B.shape[1]
    G = np.zeros((T, p, du, dx))
    S = np.zeros((p, dx, du, dx))
    S_buf = np.zeros((p, dx, du, dx))
    base = np.zeros(dx)
    win = np.zeros((p, dx))
    for t in range(T):
        _gradient_into(G[t], theta[t], S, win)
        _advance_state(S, S_buf, base, win, A, B, w[t])
    return G


@_jit
def stationary_costs(A, B, theta, w, M):
    """Per-step costs of replaying a fixed policy from t = 1 (x_1 = 0, K = 0)."""
    T = theta.shape[0]
    dx = A.shape[0]
    du = B.shape[1]
    p = M.shape[0]
    out = np.zeros(T)
    x = np.zeros(dx)
    xn = np.zeros(dx)
    u = np.zeros(du)
    win = np.zeros((p, dx))
    for t in range(T):
        for a in range(du):
            acc = 0.0
            for j in range(p):
                for b in range(dx):
                    acc += M[j, a, b] * win[j, b]
            u[a] = acc
        c = 0.0
        for i in range(dx):
            c += theta[t, i] * x[i]
        for a in range(du):
            c += theta[t, dx + a] * u[a]
        out[t] = c
        for i in range(dx):
            acc = w[t, i]
            for k in range(dx):
                acc += A[i, k] * x[k]
            for a in range(du):
                acc += B[i, a] * u[a]
            xn[i] = acc
        for i in range(dx):
            x[i] = xn[i]
        for j in range(p - 1, 0, -1):
            for b in range(dx):
                win[j, b] = win[j - 1, b]
        for b in range(dx):
            win[0, b] = w[t, b]
    return out


@_jit
def episode(A, B, theta, w, preds, kind, kappa_M, sigma, delta, eta,
            sigma_prime, lip_l, z, M0):
    """Full observe-act-update loop for one controller on a scripted stream.

    The decayed-memory value h_t = sum_{i<t} (1-d)^i a_{t-i:t} comes from the
    exact recurrence P_t = (1-d) P_{t-1} + a_t, h_t = (P_t - (1-d)^t a_{1:t})/d
    (h_t = a_t when d = 1); the verification suite pins it to the literal
    double sum.  Returns per-step trace arrays plus the policy iterate
    history; h/sigma/nu columns are NaN for controllers without a schedule.
    """
    T = theta.shape[0]
    dx = A.shape[0]
    du = B.shape[1]
    p = M0.shape[0]

    x = np.zeros(dx)
    xn = np.zeros(dx)
    xp = np.zeros(dx)
    u = np.zeros(du)
    M = M0.copy()
    win = np.zeros((p, dx))
    S = np.zeros((p, dx, du, dx))
    S_buf = np.zeros((p, dx, du, dx))
    base = np.zeros(dx)
    G = np.zeros((p, du, dx))
    E = np.zeros((p, du, dx))
    grad_sum = np.zeros((p, du, dx))
    anchor = np.zeros((p, du, dx))
    target = np.zeros((p, du, dx))
    pred_suffix = np.zeros((p, du, dx))
    if kind == KIND_OPTFTRL:
        for t in range(T):
            for j in range(p):
                for a in range(du):
                    for b in range(dx):
                        pred_suffix[j, a, b] += preds[t, j, a, b]

    beta = 1.0 - delta
    started = False
    h1 = 0.0
    h_pref = 0.0
    sig_pref = 0.0
    last_h = 0.0
    P = 0.0
    signal_prefix = 0.0
    dpow = 1.0
    PD = 0.0
    h_signal_prefix = 0.0
    dpowD = 1.0

    o_x = np.zeros((T, dx))
    o_u = np.zeros((T, du))
    o_w = np.zeros((T, dx))
    o_cost = np.zeros(T)
    o_cum = np.zeros(T)
    o_gnorm = np.zeros(T)
    o_signal = np.zeros(T)
    o_h = np.full(T, np.nan)
    o_sigma = np.full(T, np.nan)
    o_prederr = np.full(T, np.nan)
    o_nu = np.full(T, np.nan)
    o_nuhat = np.full(T, np.nan)
    M_hist = np.zeros((T + 1, p, du, dx))
    for j in range(p):
        for a in range(du):
            for b in range(dx):
                M_hist[0, j, a, b] = M[j, a, b]

    cum = 0.0
    adaptive = kind == KIND_FTRL or kind == KIND_ADAFTRL or kind == KIND_OPTFTRL

    for t in range(T):
        sigma_t = 0.0
        h_t = 0.0
        # act with the current window (w_{t-1}, ..., w_{t-p})
        for a in range(du):
            acc = 0.0
            for j in range(p):
                for b in range(dx):
                    acc += M[j, a, b] * win[j, b]
            u[a] = acc
        # cost and gradient revealed
        c = 0.0
        for i in range(dx):
            c += theta[t, i] * x[i]
        for a in range(du):
            c += theta[t, dx + a] * u[a]
        cum += c
        _gradient_into(G, theta[t], S, win)
        gn = _frob3(G)

        if adaptive:
            _proxy_state_into(xp, base, S, M)
            nu = 0.0
            for i in range(dx):
                nu += theta[t, i] * (x[i] - xp[i])
            if nu < 0.0:
                nu = -nu
            o_nu[t] = nu

        # regularization signal
        if kind == KIND_OPTFTRL:
            for j in range(p):
                for a in range(du):
                    for b in range(dx):
                        E[j, a, b] = G[j, a, b] - preds[t, j, a, b]
            en = _frob3(E)
            o_prederr[t] = en
            a_t = en if en > en * en else en * en
            if (not started) and a_t > 1.0:
                # the first nonzero prediction error is clamped to at most 1
                a_t = 1.0
        else:
            a_t = gn if gn > gn * gn else gn * gn

        if adaptive:
            if (not started) and a_t > 0.0:
                started = True
            if kind == KIND_FTRL:
                if a_t > last_h:
                    last_h = a_t
                h_t = last_h
            else:
                P = beta * P + a_t
                signal_prefix += a_t
                dpow *= beta
                if delta >= 1.0:
                    h_t = a_t
                else:
                    h_t = (P - dpow * signal_prefix) / delta
                    if h_t < 0.0:
                        h_t = 0.0
            if h1 == 0.0 and h_t > 0.0:
                h1 = h_t
            h_pref += h_t
            sig_prev = sig_pref
            sig_pref = sigma * np.sqrt(h_pref)
            sigma_t = sig_pref - sig_prev
            o_h[t] = h_t
            o_sigma[t] = sigma_t
            # decayed double sum over h_t itself (nu-hat for Ada/Opt)
            PD = beta * PD + h_t
            h_signal_prefix += h_t
            dpowD *= beta
            if delta >= 1.0:
                D_t = h_t
            else:
                D_t = (PD - dpowD * h_signal_prefix) / delta
                if D_t < 0.0:
                    D_t = 0.0
            if h_pref > 0.0 and h1 > 0.0:
                if kind == KIND_FTRL:
                    nu_hat = (lip_l * z * h_t) / (delta * delta * sigma * np.sqrt(h_pref)) \
                        * (1.0 + kappa_M * sigma / np.sqrt(h1))
                else:
                    nu_hat = lip_l * z * (h_t / (sigma * np.sqrt(h_pref))
                                          + kappa_M * D_t / (np.sqrt(h1) * np.sqrt(h_pref)))
            else:
                nu_hat = 0.0
            o_nuhat[t] = nu_hat

        o_gnorm[t] = gn
        o_signal[t] = a_t
        o_cost[t] = c
        o_cum[t] = cum
        for i in range(dx):
            o_x[t, i] = x[i]
        for a in range(du):
            o_u[t, a] = u[a]

        # policy update
        for j in range(p):
            for a in range(du):
                for b in range(dx):
                    grad_sum[j, a, b] += G[j, a, b]
        if kind == KIND_FTRL or kind == KIND_ADAFTRL:
            for j in range(p):
                for a in range(du):
                    for b in range(dx):
                        anchor[j, a, b] += sigma_t * M[j, a, b]
            if sig_pref > 0.0:
                for j in range(p):
                    for a in range(du):
                        for b in range(dx):
                            target[j, a, b] = (anchor[j, a, b] - grad_sum[j, a, b]) / sig_pref
                M = project_blocks(target, kappa_M)
        elif kind == KIND_OPTFTRL:
            for j in range(p):
                for a in range(du):
                    for b in range(dx):
                        pred_suffix[j, a, b] -= preds[t, j, a, b]
                        anchor[j, a, b] += sigma_t * M[j, a, b]
            if sig_pref > 0.0:
                for j in range(p):
                    for a in range(du):
                        for b in range(dx):
                            target[j, a, b] = (anchor[j, a, b] - grad_sum[j, a, b]
                                               - pred_suffix[j, a, b]) / sig_pref
                M = project_blocks(target, kappa_M)
            else:
                # no regularization yet (all errors zero): minimize the pure
                # linear term over the feasible set
                for j in range(p):
                    for a in range(du):
                        for b in range(dx):
                            target[j, a, b] = grad_sum[j, a, b] + pred_suffix[j, a, b]
                M = linear_argmin(target, kappa_M)
        elif kind == KIND_GPC:
            for j in range(p):
                for a in range(du):
                    for b in range(dx):
                        target[j, a, b] = M[j, a, b] - eta * G[j, a, b]
            M = project_blocks(target, kappa_M)
        else:
            denom = 2.0 * sigma_prime * (t + 1.0)
            for j in range(p):
                for a in range(du):
                    for b in range(dx):
                        target[j, a, b] = -grad_sum[j, a, b] / denom
            M = project_blocks(target, kappa_M)
        for j in range(p):
            for a in range(du):
                for b in range(dx):
                    M_hist[t + 1, j, a, b] = M[j, a, b]

        # transition; the trace records the disturbance recovered from the
        # observed states, the learner consumes the scripted one
        for i in range(dx):
            acc = 0.0
            for k in range(dx):
                acc += A[i, k] * x[k]
            for a in range(du):
                acc += B[i, a] * u[a]
            xn[i] = acc
        for i in range(dx):
            o_w[t, i] = (xn[i] + w[t, i]) - xn[i]
            xn[i] = xn[i] + w[t, i]
        _advance_state(S, S_buf, base, win, A, B, w[t])
        for i in range(dx):
            x[i] = xn[i]

    return (o_x, o_u, o_w, o_cost, o_cum, o_gnorm, o_signal, o_h, o_sigma,
            o_prederr, o_nu, o_nuhat, M_hist)


@_jit
def decayed_double_sum(a, delta):
    """h_t = sum_{i=0}^{t-1} (1-delta)^i a_{t-i:t}, evaluated literally.

    O(T^2) brute-force reference for the incremental recurrence.
    """
    T = a.shape[0]
    out = np.zeros(T)
    pref = np.zeros(T + 1)
    for t in range(T):
        pref[t + 1] = pref[t] + a[t]
    for t in range(1, T + 1):
        beta_i = 1.0
        acc = 0.0
        for i in range(t):
            acc += beta_i * (pref[t] - pref[t - i - 1])
            beta_i *= 1.0 - delta
        out[t - 1] = acc
    return out
