"""Compiled inner loops of the engine.

Everything here works on flat arrays so numba can compile it. The objective
is passed as its column-compressed forms (colptr, colform, colval) together
with per-form constants spk = s*p and pm1 = p - 1, and F holds the current
form values B.x.
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

DONE = 0
TRACE_FULL = 1
GUARD = 2
STALLED = 3

MODE_DECREASE = 0
MODE_MONOTONE = 1
MODE_CERTIFY = 2

# trace columns
TRACE_FIELDS = (
    "row", "dt", "tau", "primal", "dual", "row_value",
    "dual_violation", "min_dx", "min_dmu", "min_dy",
)
N_TRACE = len(TRACE_FIELDS)

# slots of the per-arrival audit accumulator
ST_WEAK = 0      # max (dual - primal) / (1 + |primal|), x may be infeasible
ST_VIOL = 1      # max lhs_j - mu_j over the row's columns
ST_DX = 2        # min change of x
ST_DMU = 3       # min change of mu on the row's columns
ST_DY = 4        # min change of any y
ST_JUMPS = 5     # zero-gradient bootstrap jumps
ST_WEAK_CERT = 6  # max (dual - y_t (1 - a_t.x)^+ - primal) / (1 + |primal|)
N_STATS = 7

# slots of the scalar io block
IO_TAU = 0
IO_YSUM = 1
IO_DT = 2
IO_RATIO = 3
N_IO = 4

BOOT_LEVEL = 1e-9


def new_stats():
    st = np.empty(N_STATS)
    st[ST_WEAK] = -np.inf
    st[ST_VIOL] = -np.inf
    st[ST_DX] = np.inf
    st[ST_DMU] = np.inf
    st[ST_DY] = np.inf
    st[ST_JUMPS] = 0.0
    st[ST_WEAK_CERT] = -np.inf
    return st


@njit(cache=True, nogil=True)
def grad_coord(j, F, scale, colptr, colform, colval, spk, pm1):
    g = 0.0
    for e in range(colptr[j], colptr[j + 1]):
        k = colform[e]
        if spk[k] == 0.0:
            continue
        q = pm1[k]
        if q == 0.0:
            g += spk[k] * colval[e]
        else:
            v = scale * F[k]
            if v > 0.0:
                g += spk[k] * colval[e] * v ** q
    return g


@njit(cache=True, nogil=True)
def fvalue(F, s, p):
    tot = 0.0
    for k in range(F.shape[0]):
        if s[k] != 0.0 and F[k] > 0.0:
            tot += s[k] * F[k] ** p[k]
    return tot


@njit(cache=True, nogil=True)
def fconj(F, scale, s, p):
    # f*(grad f(scale*x)) expressed through the form values of x
    tot = 0.0
    for k in range(F.shape[0]):
        if s[k] != 0.0 and p[k] > 1.0 and F[k] > 0.0:
            tot += s[k] * (p[k] - 1.0) * (scale * F[k]) ** p[k]
    return tot


@njit(cache=True, nogil=True)
def ratio_numeric(F, delta, active, nact, colptr, colform, colval, spk, pm1, pmin, free, ck, ckd):
    for k in range(F.shape[0]):
        q = pm1[k]
        if q == 0.0:
            ck[k] = spk[k]
            ckd[k] = spk[k]
        elif F[k] > 0.0:
            ck[k] = spk[k] * F[k] ** q
            ckd[k] = spk[k] * (delta * F[k]) ** q
        else:
            ck[k] = 0.0
            ckd[k] = 0.0
    best = np.inf
    for a in range(nact):
        l = active[a]
        if free[l]:
            r = 1.0
        else:
            gx = 0.0
            gd = 0.0
            for e in range(colptr[l], colptr[l + 1]):
                k = colform[e]
                gx += colval[e] * ck[k]
                gd += colval[e] * ckd[k]
            if gx > 0.0:
                r = gd / gx
            else:
                r = delta ** (pmin[l] - 1.0)
        if r < best:
            best = r
    if best == np.inf:
        best = 1.0
    return best


@njit(cache=True, nogil=True)
def move_x(j, xnew, x, F, colptr, colform, colval):
    dx = xnew - x[j]
    x[j] = xnew
    for e in range(colptr[j], colptr[j + 1]):
        F[colform[e]] += colval[e] * dx


@njit(cache=True, nogil=True)
def exit_time(w, a, h, k, rhs):
    """Smallest tau with sum_i a_i w_i exp(a_i tau / h_i) = rhs.

    The left side is convex and increasing in tau, so Newton started from
    the single-coordinate upper bound decreases monotonically to the root.
    """
    tau = np.inf
    for i in range(k):
        v = math.log(rhs / (a[i] * w[i])) * h[i] / a[i]
        if v < tau:
            tau = v
    if tau <= 0.0:
        return 0.0
    for _ in range(200):
        phi = -rhs
        dphi = 0.0
        for i in range(k):
            e = a[i] * w[i] * math.exp(a[i] * tau / h[i])
            phi += e
            dphi += e * a[i] / h[i]
        if phi <= 0.0 or dphi <= 0.0:
            break
        step = phi / dphi
        tau -= step
        if step <= 1e-16 * tau:
            break
    return max(tau, 0.0)


@njit(cache=True, nogil=True)
def integrate_row(
    x, F, y, lhs, tau_spent, io, stats, trace, ntr,
    J, aJ, t,
    colptr, colform, colval, s, p, spk, pm1, pmin, free,
    active, nact, uniform_ratio,
    rptr, ridx, rval, chead, enext, erow,
    d, delta, rate_log, eps, tol, mode, max_steps, record, steps,
    ck, ckd, Ftmp, scr,
):
    """Grow x (and the duals) until row t is satisfied.

    Returns (status, steps, ntr). The loop can stop early when the trace
    buffer fills; the caller grows the buffer and calls again, all state
    being held in the arrays.
    """
    k = J.shape[0]
    w = scr[0]
    cc = scr[1]
    g0 = scr[2]
    g1 = scr[3]
    H = scr[4]
    xn = scr[5]
    mu = scr[6]
    target = 1.0 + 0.5 * tol
    for i in range(k):
        cc[i] = 1.0 / (aJ[i] * d)
    rhs = target + k / d

    rowval = 0.0
    for i in range(k):
        rowval += aJ[i] * x[J[i]]
    if rowval >= 1.0:
        return DONE, steps, ntr

    # a coordinate f ignores satisfies the row at no cost
    for i in range(k):
        j = J[i]
        if free[j]:
            move_x(j, x[j] + (target - rowval) / aJ[i], x, F, colptr, colform, colval)
            return DONE, steps, ntr

    # zero gradient means an infinite rate: jump to a tiny positive level
    for i in range(k):
        j = J[i]
        if grad_coord(j, F, 1.0, colptr, colform, colval, spk, pm1) <= 0.0:
            lvl = cc[i] * BOOT_LEVEL ** (1.0 / pmin[j])
            cap = 0.5 * (1.0 - rowval) / (aJ[i] * k)
            lvl = min(lvl, cap)
            move_x(j, x[j] + lvl, x, F, colptr, colform, colval)
            rowval += aJ[i] * lvl
            stats[ST_JUMPS] += 1.0

    dt = io[IO_DT]
    ratio0 = io[IO_RATIO]
    if ratio0 < 0.0:
        if uniform_ratio >= 0.0:
            ratio0 = uniform_ratio
        else:
            ratio0 = ratio_numeric(F, delta, active, nact, colptr, colform, colval, spk, pm1, pmin, free, ck, ckd)
    ysum = io[IO_YSUM]
    tau = io[IO_TAU]

    while True:
        if steps >= max_steps:
            io[IO_DT] = dt
            io[IO_RATIO] = ratio0
            return GUARD, steps, ntr
        if record and ntr >= trace.shape[0]:
            io[IO_DT] = dt
            io[IO_RATIO] = ratio0
            return TRACE_FULL, steps, ntr

        for i in range(k):
            j = J[i]
            w[i] = x[j] + cc[i]
            g0[i] = grad_coord(j, F, 1.0, colptr, colform, colval, spk, pm1)
            mu[i] = grad_coord(j, F, delta, colptr, colform, colval, spk, pm1)
        tf = exit_time(w, aJ, g0, k, rhs)
        if dt <= 0.0 or dt > 2.0 * tf:
            dt = 2.0 * tf

        # predictor under frozen gradient; shrink until the gradient is fresh
        change = 0.0
        while True:
            for kk in range(F.shape[0]):
                Ftmp[kk] = F[kk]
            for i in range(k):
                j = J[i]
                xp = w[i] * math.exp(aJ[i] * dt / g0[i]) - cc[i]
                dx = xp - x[j]
                for e in range(colptr[j], colptr[j + 1]):
                    Ftmp[colform[e]] += colval[e] * dx
            change = 0.0
            for i in range(k):
                g1[i] = grad_coord(J[i], Ftmp, 1.0, colptr, colform, colval, spk, pm1)
                ch = (g1[i] - g0[i]) / g0[i]
                if ch > change:
                    change = ch
            if change <= eps:
                break
            dt *= max(0.1, 0.8 * eps / change)
            if dt <= 1e-300:
                io[IO_DT] = dt
                return STALLED, steps, ntr

        # corrector: harmonic mean of the end-point gradients
        rv = 0.0
        for i in range(k):
            H[i] = 2.0 * g0[i] * g1[i] / (g0[i] + g1[i])
            xn[i] = w[i] * math.exp(aJ[i] * dt / H[i]) - cc[i]
            rv += aJ[i] * xn[i]
        landed = False
        if rv >= 1.0:
            dt = exit_time(w, aJ, H, k, rhs)
            for kk in range(F.shape[0]):
                Ftmp[kk] = F[kk]
            for i in range(k):
                j = J[i]
                xp = w[i] * math.exp(aJ[i] * dt / g0[i]) - cc[i]
                dx = xp - x[j]
                for e in range(colptr[j], colptr[j + 1]):
                    Ftmp[colform[e]] += colval[e] * dx
            for i in range(k):
                g1[i] = grad_coord(J[i], Ftmp, 1.0, colptr, colform, colval, spk, pm1)
                H[i] = 2.0 * g0[i] * g1[i] / (g0[i] + g1[i])
            dt = exit_time(w, aJ, H, k, rhs)
            for i in range(k):
                xn[i] = w[i] * math.exp(aJ[i] * dt / H[i]) - cc[i]
            landed = True

        min_dx = np.inf
        for i in range(k):
            j = J[i]
            dx = xn[i] - x[j]
            if dx > 0.0:
                move_x(j, xn[i], x, F, colptr, colform, colval)
            else:
                dx = 0.0
            if dx < min_dx:
                min_dx = dx
        rv = 0.0
        for i in range(k):
            rv += aJ[i] * x[J[i]]

        if uniform_ratio >= 0.0:
            ratio1 = uniform_ratio
        else:
            ratio1 = ratio_numeric(F, delta, active, nact, colptr, colform, colval, spk, pm1, pmin, free, ck, ckd)

        min_dmu = np.inf
        rr = 0.5 * (ratio0 + ratio1)
        for i in range(k):
            mun = grad_coord(J[i], F, delta, colptr, colform, colval, spk, pm1)
            if mun - mu[i] < min_dmu:
                min_dmu = mun - mu[i]
            mu[i] = mun
            # cap keeping the per-step exponential bound on x exact
            lim = mun / H[i]
            if lim < rr:
                rr = lim

        min_dy = np.inf
        viol = -np.inf
        if mode != MODE_CERTIFY:
            dy = dt * rr / rate_log
            y[t] += dy
            ysum += dy
            min_dy = dy
            for i in range(k):
                lhs[J[i]] += aJ[i] * dy
            if mode == MODE_DECREASE:
                for i in range(k):
                    j = J[i]
                    while lhs[j] > mu[i]:
                        best = -1
                        bestval = -1.0
                        e = chead[j]
                        while e >= 0:
                            r = erow[e]
                            if y[r] > 0.0:
                                v = rval[e]
                                if v > bestval or (v == bestval and r < best):
                                    best = r
                                    bestval = v
                            e = enext[e]
                        if best < 0:
                            break
                        dec = (lhs[j] - mu[i]) / bestval
                        partial = dec < y[best]
                        if partial:
                            y[best] -= dec
                        else:
                            dec = y[best]
                            y[best] = 0.0
                        ysum -= dec
                        if -dec < min_dy:
                            min_dy = -dec
                        for e2 in range(rptr[best], rptr[best + 1]):
                            lhs[ridx[e2]] -= rval[e2] * dec
                        if partial:
                            break
            for i in range(k):
                v = lhs[J[i]] - mu[i]
                if v > viol:
                    viol = v

        tau += dt
        tau_spent[t] += dt
        steps += 1
        primal = fvalue(F, s, p)
        if mode != MODE_CERTIFY:
            dual = ysum - fconj(F, delta, s, p)
            wd = (dual - primal) / (1.0 + abs(primal))
            if wd > stats[ST_WEAK]:
                stats[ST_WEAK] = wd
            # while row t is unsatisfied only y_t (a_t.x) of y_t is certified
            short = 1.0 - rv
            if short < 0.0:
                short = 0.0
            wc = (dual - y[t] * short - primal) / (1.0 + abs(primal))
            if wc > stats[ST_WEAK_CERT]:
                stats[ST_WEAK_CERT] = wc
        else:
            dual = np.nan
        if viol > stats[ST_VIOL]:
            stats[ST_VIOL] = viol
        if min_dx < stats[ST_DX]:
            stats[ST_DX] = min_dx
        if min_dmu < stats[ST_DMU]:
            stats[ST_DMU] = min_dmu
        if min_dy < stats[ST_DY]:
            stats[ST_DY] = min_dy
        if record:
            trace[ntr, 0] = t
            trace[ntr, 1] = dt
            trace[ntr, 2] = tau
            trace[ntr, 3] = primal
            trace[ntr, 4] = dual
            trace[ntr, 5] = rv
            trace[ntr, 6] = viol
            trace[ntr, 7] = min_dx
            trace[ntr, 8] = min_dmu
            trace[ntr, 9] = min_dy
            ntr += 1
        ratio0 = ratio1
        io[IO_TAU] = tau
        io[IO_YSUM] = ysum
        io[IO_RATIO] = ratio0
        if landed:
            io[IO_DT] = 0.0
            return DONE, steps, ntr
        if change > 0.0:
            dt *= min(4.0, 0.9 * eps / change)
        else:
            dt *= 4.0
        io[IO_DT] = dt


@njit(cache=True, nogil=True)
def recompute_lhs(y, nrows, rptr, ridx, rval, lhs):
    for j in range(lhs.shape[0]):
        lhs[j] = 0.0
    for r in range(nrows):
        yr = y[r]
        if yr != 0.0:
            for e in range(rptr[r], rptr[r + 1]):
                lhs[ridx[e]] += rval[e] * yr


@njit(cache=True, nogil=True)
def max_violation(lhs, F, active, nact, delta, colptr, colform, colval, spk, pm1):
    worst = -np.inf
    for a in range(nact):
        j = active[a]
        v = lhs[j] - grad_coord(j, F, delta, colptr, colform, colval, spk, pm1)
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def growth_slack(x, F, y, active, nact, colptr, colform, colval, spk, pm1,
                 chead, enext, erow, rval, d, delta, rate_log):
    """min_j x_j - (exp(rate_log * sum_i a_ij y_i / mu_j) - 1) / (max a_ij * d)."""
    worst = np.inf
    for a in range(nact):
        j = active[a]
        muj = grad_coord(j, F, delta, colptr, colform, colval, spk, pm1)
        if muj <= 0.0:
            continue
        amax = 0.0
        tot = 0.0
        e = chead[j]
        while e >= 0:
            r = erow[e]
            if y[r] > 0.0:
                v = rval[e]
                tot += v * y[r]
                if v > amax:
                    amax = v
            e = enext[e]
        if amax == 0.0:
            continue
        arg = rate_log * tot / muj
        if arg > 700.0:
            return -np.inf
        slack = x[j] - math.expm1(arg) / (amax * d)
        if slack < worst:
            worst = slack
    return worst
