"""Compiled inner loops: system evaluation, LU solves, predictor-corrector tracking.

Systems are passed as flat arrays (see ``compile_system``):

    coef      complex128[T]   term coefficients, polynomial after polynomial
    poly_ptr  int64[s+1]      terms of polynomial i are poly_ptr[i]:poly_ptr[i+1]
    fac_ptr   int64[T+1]      factors of term t are fac_ptr[t]:fac_ptr[t+1]
    fac_var   int64[K]        variable index of each factor
    fac_exp   int64[K]        exponent (>= 1) of each factor
    maxexp    int64[n]        largest exponent of each variable

Only nonzero exponents are stored, so sparse systems in many variables
stay cheap.
"""

import numpy as np
from numba import njit

SUCCESS = 0
DIVERGED = 1
STEPS_EXCEEDED = 2
SINGULAR = 3
FAILED = 4

# layout of the float options vector handed to ``track_many``
OPT_STEP_INIT = 0
OPT_STEP_MIN = 1
OPT_STEP_MAX = 2
OPT_NEWTON_TOL = 3
OPT_NEWTON_MAX_ITER = 4
OPT_MAX_STEPS = 5
OPT_DIVERGENCE = 6
OPT_FINAL_TOL = 7
OPT_SINGULAR_COND = 8
N_OPTS = 9

# Newton iterations allowed per corrector call; more invites path jumping
CORRECTOR_MAX_ITER = 3
# no reassociation or contraction: results must not depend on inlining
_FAST = {"nnan", "ninf", "nsz"}
# |H_i| below this multiple of sum |term_i| counts as converged
NOISE_FLOOR = 1e-13
# 1 - t below which a stalled path is pushed to t = 1 and refined there
ENDGAME_ZONE = 1e-3
# inside the endgame zone, a step this small relative to 1 - t means the path has stalled
STALL_RATIO = 1e-3
# a path whose norm grows by GROWTH_FACTOR once 1 - t < GROWTH_WINDOW and that
# stalls away from any solution of F is heading to infinity
GROWTH_WINDOW = 1e-2
GROW_AFTER = 5
GROWTH_FACTOR = 2.0
# declared diverged early once the norm has grown by EARLY_GROWTH per decade of
# 1 - t for EARLY_DECADES consecutive decades (a power law escaping to infinity)
EARLY_GROWTH = 1.5
EARLY_DECADES = 3
# relative residual under which an unresolved endpoint counts as a (singular) solution
SINGULAR_RES_TOL = 1e-8
# largest relative move allowed when polishing the last iterate at t = 1
MAX_REFINE_MOVE = 0.1


def compile_system(polys, nvars):
    """Flatten a sequence of ``Polynomial`` into the kernel array layout."""
    coef, poly_ptr, fac_ptr, fac_var, fac_exp = [], [0], [0], [], []
    maxexp = np.zeros(nvars, dtype=np.int64)
    for p in polys:
        for e, c in p.terms:
            coef.append(c)
            for v, k in enumerate(e):
                if k:
                    fac_var.append(v)
                    fac_exp.append(k)
                    maxexp[v] = max(maxexp[v], k)
            fac_ptr.append(len(fac_var))
        poly_ptr.append(len(coef))
    return (
        np.array(coef, dtype=np.complex128),
        np.array(poly_ptr, dtype=np.int64),
        np.array(fac_ptr, dtype=np.int64),
        np.array(fac_var, dtype=np.int64),
        np.array(fac_exp, dtype=np.int64),
        maxexp,
    )


@njit(cache=True)
def _max_factors(fac_ptr):
    m = 1
    for t in range(fac_ptr.shape[0] - 1):
        k = fac_ptr[t + 1] - fac_ptr[t]
        if k > m:
            m = k
    return m


@njit(cache=True)
def eval_system(sysarr, x, f, J, want_jac):
    """Fill f (and J if want_jac) with the system value / Jacobian at x.

    Returns the max over polynomials of sum |term| (1-norm of the complex
    parts), the rounding scale of f.
    """
    n = x.shape[0]
    pw = np.empty((n, _max_exp(sysarr[5]) + 1), dtype=np.complex128)
    pre = np.empty(_max_factors(sysarr[2]) + 1, dtype=np.complex128)
    rs = np.empty(sysarr[1].shape[0] - 1)
    return eval_system_ws(sysarr, x, f, J, want_jac, pw, pre, rs)


@njit(cache=True)
def _max_exp(maxexp):
    me = 0
    for k in range(maxexp.shape[0]):
        if maxexp[k] > me:
            me = maxexp[k]
    return me


def workspace(sysarr, n):
    return (
        np.empty((n, int(sysarr[5].max(initial=0)) + 1), dtype=np.complex128),
        np.empty(int(np.diff(sysarr[2]).max(initial=1)) + 1, dtype=np.complex128),
    )


@njit(cache=True, fastmath=_FAST)
def eval_system_ws(sysarr, x, f, J, want_jac, pw, pre, rs):
    """Workspace form of ``eval_system``; rs receives each row's sum |term|."""
    coef, poly_ptr, fac_ptr, fac_var, fac_exp, maxexp = sysarr
    n = x.shape[0]
    for k in range(n):
        pw[k, 0] = 1.0
        for e in range(1, maxexp[k] + 1):
            pw[k, e] = pw[k, e - 1] * x[k]
    s = poly_ptr.shape[0] - 1
    scale = 0.0
    for i in range(s):
        acc = 0j
        absacc = 0.0
        if want_jac:
            for j in range(n):
                J[i, j] = 0j
        for t in range(poly_ptr[i], poly_ptr[i + 1]):
            a = fac_ptr[t]
            m = fac_ptr[t + 1] - a
            p = 1.0 + 0j
            for l in range(m):
                pre[l] = p
                p *= pw[fac_var[a + l], fac_exp[a + l]]
            term = coef[t] * p
            acc += term
            absacc += abs(term.real) + abs(term.imag)
            if want_jac:
                suf = coef[t]
                for l in range(m - 1, -1, -1):
                    v = fac_var[a + l]
                    e = fac_exp[a + l]
                    J[i, v] += suf * pre[l] * e * pw[v, e - 1]
                    suf *= pw[v, e]
        f[i] = acc
        rs[i] = absacc
        if absacc > scale:
            scale = absacc
    return scale


@njit(cache=True)
def lu_factor(A, M, piv):
    """Row-equilibrated partial-pivot LU of A into (M, piv).

    piv[:n] holds the row permutation, and the row scales are folded into
    M so ``lu_apply`` needs the original right-hand side only.  Returns an
    inverse condition estimate min|pivot| / max|pivot| of the equilibrated
    factorization (0 when singular or non-finite).  Magnitudes are 1-norms
    of (re, im).
    """
    n = A.shape[0]
    for i in range(n):
        rmax = 0.0
        for j in range(n):
            a = abs(A[i, j].real) + abs(A[i, j].imag)
            if a > rmax:
                rmax = a
        if rmax == 0.0 or not np.isfinite(rmax):
            return 0.0
        inv = 1.0 / rmax
        for j in range(n):
            M[i, j] = complex(A[i, j].real * inv, A[i, j].imag * inv)
        # last column of M is the row scale for the right-hand side
        M[i, n] = inv
    return _lu_core(M, piv)


@njit(cache=True, fastmath=_FAST)
def _lu_core(M, piv):
    # inputs are finite and row-equilibrated; callers check results for overflow
    n = M.shape[0]
    pmax = 0.0
    pmin = 1e300
    for i in range(n):
        piv[i] = i
    for k in range(n):
        p = k
        best = abs(M[k, k].real) + abs(M[k, k].imag)
        for i in range(k + 1, n):
            a = abs(M[i, k].real) + abs(M[i, k].imag)
            if a > best:
                best = a
                p = i
        if best == 0.0:
            return 0.0
        if p != k:
            for j in range(n + 1):
                tmp = M[k, j]
                M[k, j] = M[p, j]
                M[p, j] = tmp
            tp = piv[k]
            piv[k] = piv[p]
            piv[p] = tp
        if best > pmax:
            pmax = best
        if best < pmin:
            pmin = best
        inv = 1.0 / M[k, k]
        for i in range(k + 1, n):
            fct = M[i, k] * inv
            M[i, k] = fct
            for j in range(k + 1, n):
                M[i, j] -= fct * M[k, j]
    return pmin / pmax


@njit(cache=True, fastmath=_FAST)
def lu_apply(M, piv, b, out):
    """Solve with a factorization from ``lu_factor``."""
    n = M.shape[0]
    for i in range(n):
        out[i] = b[piv[i]] * M[i, n].real
    for i in range(n):
        acc = out[i]
        for j in range(i):
            acc -= M[i, j] * out[j]
        out[i] = acc
    for i in range(n - 1, -1, -1):
        acc = out[i]
        for j in range(i + 1, n):
            acc -= M[i, j] * out[j]
        out[i] = acc / M[i, i]


@njit(cache=True)
def lu_solve(A, b, out):
    """Solve A out = b; returns the inverse condition estimate (0 if singular)."""
    n = A.shape[0]
    M = np.empty((n, n + 1), dtype=np.complex128)
    piv = np.empty(n, dtype=np.int64)
    rc = lu_factor(A, M, piv)
    if rc > 0.0:
        lu_apply(M, piv, b, out)
    return rc


@njit(cache=True)
def _norm_inf(x):
    m = 0.0
    for i in range(x.shape[0]):
        a = abs(x[i])
        if not np.isfinite(a):
            return np.inf
        if a > m:
            m = a
    return m


@njit(cache=True)
def _relative_residual(f, rs):
    m = 0.0
    for i in range(f.shape[0]):
        r = abs(f[i]) / (1.0 + rs[i])
        if not np.isfinite(r):
            return np.inf
        if r > m:
            m = r
    return m


@njit(cache=True)
def newton_system(Fs, x, tol, max_iter, out):
    """Newton on F = 0 from x.  Writes the iterate into out.

    Returns (converged, residual, rcond, relative_residual, iterations).
    The relative residual is max_i |F_i| / (1 + sum |terms of F_i|), the
    residual measured against the rounding error of evaluating F_i.
    Reaching the rounding floor counts as converged.
    """
    n = x.shape[0]
    s = Fs[1].shape[0] - 1
    f = np.empty(s, dtype=np.complex128)
    J = np.empty((s, n), dtype=np.complex128)
    d = np.empty(n, dtype=np.complex128)
    rhs = np.empty(n, dtype=np.complex128)
    pw, pre = workspace_nb(Fs, n)
    rs = np.empty(s)
    for i in range(n):
        out[i] = x[i]
    converged = False
    it = 0
    prev = np.inf
    while it < max_iter:
        eval_system_ws(Fs, out, f, J, True, pw, pre, rs)
        if it > 0 and _relative_residual(f, rs) <= NOISE_FLOOR:
            converged = True
            break
        for i in range(n):
            rhs[i] = -f[i]
        if lu_solve(J, rhs, d) == 0.0:
            break
        nd = _norm_inf(d)
        if not np.isfinite(nd):
            break
        for i in range(n):
            out[i] += d[i]
        it += 1
        if nd <= tol * (1.0 + _norm_inf(out)):
            converged = True
            break
        # stop once corrections no longer shrink: rounding floor reached
        if it > 2 and nd > 0.5 * prev:
            break
        prev = nd
    eval_system_ws(Fs, out, f, J, True, pw, pre, rs)
    res = _norm_inf(f)
    rel = _relative_residual(f, rs)
    rc = lu_solve(J, f, d)
    return converged, res, rc, rel, it


@njit(cache=True)
def workspace_nb(sysarr, n):
    pw = np.empty((n, _max_exp(sysarr[5]) + 1), dtype=np.complex128)
    pre = np.empty(_max_factors(sysarr[2]) + 1, dtype=np.complex128)
    return pw, pre


def make_work(Fs, Gs, n):
    """Per-path scratch: Hx, JF, JG, LU matrix, pivots, Ht, h, f, g, rhs, d,
    eval buffers for F and G, then row scales of F, G and H."""
    pwF, preF = workspace(Fs, n)
    pwG, preG = workspace(Gs, n)
    c = np.complex128
    return (
        np.empty((n, n), c), np.empty((n, n), c), np.empty((n, n), c),
        np.empty((n, n + 1), c), np.empty(n, np.int64),
        np.empty(n, c), np.empty(n, c), np.empty(n, c), np.empty(n, c),
        np.empty(n, c), np.empty(n, c),
        pwF, preF, pwG, preG,
        np.empty(n), np.empty(n), np.empty(n),
    )


@njit(cache=True)
def _homotopy(Fs, Gs, gamma, x, t, W):
    """Fill H, dH/dx, dH/dt at (x, t) for H = gamma (1-t) G + t F and factor dH/dx."""
    Hx, JF, JG, M, piv, Ht, h, f, g = W[0], W[1], W[2], W[3], W[4], W[5], W[6], W[7], W[8]
    fs, gs, hs = W[15], W[16], W[17]
    eval_system_ws(Fs, x, f, JF, True, W[11], W[12], fs)
    eval_system_ws(Gs, x, g, JG, True, W[13], W[14], gs)
    n = x.shape[0]
    cg = gamma * (1.0 - t)
    for i in range(n):
        h[i] = cg * g[i] + t * f[i]
        hs[i] = (1.0 - t) * gs[i] + t * fs[i]
        Ht[i] = f[i] - gamma * g[i]
        for j in range(n):
            Hx[i, j] = cg * JG[i, j] + t * JF[i, j]
    return lu_factor(Hx, M, piv)


@njit(cache=True)
def _velocity_from_factor(W, v):
    Ht, rhs = W[5], W[9]
    for i in range(v.shape[0]):
        rhs[i] = -Ht[i]
    lu_apply(W[3], W[4], rhs, v)
    return np.isfinite(_norm_inf(v))


@njit(cache=True)
def _velocity(Fs, Gs, gamma, x, t, v, W):
    if _homotopy(Fs, Gs, gamma, x, t, W) == 0.0:
        return False
    return _velocity_from_factor(W, v)


@njit(cache=True)
def _at_noise_floor(h, hs):
    # H is as small as rounding in its evaluation allows: further Newton
    # steps only chase noise
    for i in range(h.shape[0]):
        if abs(h[i]) > NOISE_FLOOR * hs[i]:
            return False
    return True


@njit(cache=True)
def _correct(Fs, Gs, gamma, x, t, tol, max_iter, W, v_next):
    """Newton corrector on H(., t) = 0 in place.

    Requires contraction.  On success, v_next receives the path velocity at
    the converged point, taken from the last factorization.
    """
    n = x.shape[0]
    h, rhs, d = W[6], W[9], W[10]
    prev = np.inf
    for k in range(max_iter):
        if _homotopy(Fs, Gs, gamma, x, t, W) == 0.0:
            return False
        if k > 0 and _at_noise_floor(h, W[17]):
            return _velocity_from_factor(W, v_next)
        for i in range(n):
            rhs[i] = -h[i]
        lu_apply(W[3], W[4], rhs, d)
        nd = _norm_inf(d)
        if not np.isfinite(nd):
            return False
        if k > 0 and nd > 0.5 * prev:
            return False
        for i in range(n):
            x[i] += d[i]
        if nd <= tol * (1.0 + _norm_inf(x)):
            return _velocity_from_factor(W, v_next)
        prev = nd
    return False


@njit(cache=True)
def track_path(Fs, Gs, gamma, x0, opts, out, W):
    """Track one path from t=0 to t=1.

    Returns (status, residual, steps, norm).  out receives the last iterate.
    """
    n = x0.shape[0]
    step_min = opts[OPT_STEP_MIN]
    step_max = opts[OPT_STEP_MAX]
    tol = opts[OPT_NEWTON_TOL]
    max_iter = int(opts[OPT_NEWTON_MAX_ITER])
    max_steps = int(opts[OPT_MAX_STEPS])
    div_norm = opts[OPT_DIVERGENCE]
    final_tol = opts[OPT_FINAL_TOL]
    sing_cond = opts[OPT_SINGULAR_COND]
    corrector_iter = min(max_iter, CORRECTOR_MAX_ITER)

    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    v1 = np.empty(n, dtype=np.complex128)
    xt = np.empty(n, dtype=np.complex128)
    xn = np.empty(n, dtype=np.complex128)
    x = x0.copy()

    t = 0.0
    dt = opts[OPT_STEP_INIT]
    streak = 0
    steps = 0
    status = -1
    entry_norm = -1.0
    decade_norms = np.zeros(20)
    n_decades = 0
    have_k1 = _velocity(Fs, Gs, gamma, x, t, k1, W)
    while t < 1.0:
        if steps >= max_steps:
            status = STEPS_EXCEEDED
            break
        steps += 1
        hstep = min(dt, 1.0 - t)
        t1 = t + hstep
        if t1 > 1.0 or 1.0 - t1 < 1e-15:
            t1 = 1.0
            hstep = 1.0 - t
        ok = have_k1
        if ok:
            for i in range(n):
                xt[i] = x[i] + 0.5 * hstep * k1[i]
            ok = _velocity(Fs, Gs, gamma, xt, t + 0.5 * hstep, k2, W)
        if ok:
            for i in range(n):
                xt[i] = x[i] + 0.5 * hstep * k2[i]
            ok = _velocity(Fs, Gs, gamma, xt, t + 0.5 * hstep, k3, W)
        if ok:
            for i in range(n):
                xt[i] = x[i] + hstep * k3[i]
            ok = _velocity(Fs, Gs, gamma, xt, t1, k4, W)
        if ok:
            for i in range(n):
                xn[i] = x[i] + hstep / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            ok = np.isfinite(_norm_inf(xn))
        if ok:
            ok = _correct(Fs, Gs, gamma, xn, t1, tol, corrector_iter, W, v1)
        if ok:
            for i in range(n):
                x[i] = xn[i]
                k1[i] = v1[i]
            t = t1
            streak += 1
            if streak >= GROW_AFTER:
                dt = min(2.0 * dt, step_max)
                streak = 0
            nx = _norm_inf(x)
            if nx > div_norm:
                status = DIVERGED
                break
            if entry_norm < 0.0 and 1.0 - t <= GROWTH_WINDOW:
                entry_norm = nx
            # sample the norm once per decade of 1 - t inside the window
            while n_decades < decade_norms.shape[0] and 1.0 - t <= GROWTH_WINDOW * 0.1 ** n_decades:
                decade_norms[n_decades] = nx
                n_decades += 1
            if n_decades > EARLY_DECADES and nx > 1.0:
                grow = True
                for k in range(n_decades - EARLY_DECADES, n_decades):
                    if decade_norms[k] < EARLY_GROWTH * decade_norms[k - 1]:
                        grow = False
                if grow:
                    status = DIVERGED
                    break
        else:
            streak = 0
            dt *= 0.5
            if not have_k1:
                status = FAILED
                break
            if 1.0 - t < ENDGAME_ZONE and dt < STALL_RATIO * (1.0 - t):
                break
            if dt < step_min:
                if 1.0 - t < ENDGAME_ZONE:
                    break
                status = FAILED
                break

    norm = _norm_inf(x)
    for i in range(n):
        out[i] = x[i]
    if status >= 0:
        return status, np.inf, steps, norm
    if norm > div_norm:
        return DIVERGED, np.inf, steps, norm

    conv, res, rc, rel, _ = newton_system(Fs, x, final_tol, max(max_iter, 10), xn)
    nn = _norm_inf(xn)
    if not np.isfinite(nn) or nn > div_norm:
        return DIVERGED, np.inf, steps, max(norm, nn)
    moved = 0.0
    for i in range(n):
        moved = max(moved, abs(xn[i] - x[i]))
    # refinement that lands far away found some other solution, not this path's end
    if moved <= MAX_REFINE_MOVE * (1.0 + norm):
        for i in range(n):
            out[i] = xn[i]
        if conv and rc * sing_cond >= 1.0 and rel <= final_tol:
            return SUCCESS, res, steps, nn
        if rel <= SINGULAR_RES_TOL:
            return SINGULAR, res, steps, nn
        for i in range(n):
            out[i] = x[i]
    # not near a solution of F: either escaping to infinity slower than the
    # divergence norm can catch, or lost
    if entry_norm >= 0.0 and norm > GROWTH_FACTOR * entry_norm + 1.0:
        return DIVERGED, res, steps, norm
    return FAILED, res, steps, norm


@njit(cache=True)
def track_many(Fs, Gs, gamma, starts, opts, status, endpoints, residuals, steps, norms, W):
    for p in range(starts.shape[0]):
        st, res, nst, nrm = track_path(Fs, Gs, gamma, starts[p], opts, endpoints[p], W)
        status[p] = st
        residuals[p] = res
        steps[p] = nst
        norms[p] = nrm
