# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch trial kernels.

Mirrors :mod:`dfrelay._pykernels` trial for trial. Inputs are
noise-normalized gains and variances, one row per trial.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, expm1, fabs, INFINITY, NAN, isinf
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double EULER = 0.57721566490153286061
cdef double FPMIN = 1e-300
cdef double EPS = 1e-16
cdef double SNR_RTOL = 1e-9
cdef double THRESH_RTOL = 1e-13

cdef enum:
    C_OCPA = 0
    C_ODPA = 1
    C_PSM = 2
    C_SRM = 3
    C_RRS = 4
    C_DIRECT = 5

cdef enum:
    C_RELAYED = 0
    C_FALLBACK = 1
    C_INFEASIBLE = 2

OCPA, ODPA, PSM, SRM, RRS, DIRECT = range(6)
RELAYED, FALLBACK, INFEASIBLE = 0, 1, 2

BACKEND = "cython"


cdef double c_e1(double x) noexcept nogil:
    cdef double total, term, contrib, b, c, d, h, an, delta
    cdef int k, i
    if x <= 0:
        return NAN
    if x < 1.0:
        total = 0.0
        term = 1.0
        k = 1
        while True:
            term *= -x / k
            contrib = term / k
            total += contrib
            if fabs(contrib) < EPS * fabs(total) or k > 200:
                break
            k += 1
        return -EULER - log(x) - total
    if x > 745.0:
        return 0.0
    b = x + 1.0
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -<double>(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if fabs(delta - 1.0) < EPS:
            break
    return h * exp(-x)


cdef double no_forward(double gamma, double* var, int* idx, int m) noexcept nogil:
    cdef double p = 1.0
    cdef int j
    for j in range(m):
        p *= -expm1(-gamma / (2.0 * var[idx[j]]))
    return p


cdef double c_solve_threshold(double* var, int* idx, int m, double rho) noexcept nogil:
    cdef double vmin = var[idx[0]], vmax = var[idx[0]], scale, lo, hi
    cdef double x, fx, dfx, u, em, step
    cdef int j, it
    for j in range(1, m):
        if var[idx[j]] < vmin:
            vmin = var[idx[j]]
        if var[idx[j]] > vmax:
            vmax = var[idx[j]]
    scale = -log1p(-rho ** (1.0 / m))
    lo = 2.0 * vmin * scale
    hi = 2.0 * vmax * scale
    if lo == hi:
        return lo
    if no_forward(lo, var, idx, m) - rho >= 0:
        return lo
    if no_forward(hi, var, idx, m) - rho <= 0:
        return hi
    # sum_j log(1 - exp(-gamma / 2v_j)) is increasing and concave in gamma,
    # so Newton from the left end approaches the root from below
    x = lo
    for it in range(100):
        fx = -log(rho)
        dfx = 0.0
        for j in range(m):
            u = x / (2.0 * var[idx[j]])
            em = -expm1(-u)
            fx += log(em)
            dfx += exp(-u) / em / (2.0 * var[idx[j]])
        if fx >= 0 or dfx <= 0:
            break
        step = -fx / dfx
        if x + step > hi:
            step = 0.5 * (hi - x)
        x += step
        if step <= THRESH_RTOL * x:
            break
    return x


cdef double inv_gain_sum(double gamma, double* var, int* idx, int m) noexcept nogil:
    cdef double s = 0.0
    cdef int j
    for j in range(m):
        s += c_e1(gamma / (2.0 * var[idx[j]])) / (2.0 * var[idx[j]])
    return s


cdef inline void forward(double ps, double h, double* g, int* idx, int m,
                         double gamma, double remainder,
                         double* relay, long* count, double* snr_d,
                         double* waste) noexcept nogil:
    cdef double r = 0.0, rec = 0.0, best_g = -1.0, best_p = 0.0, p
    cdef long c = 0
    cdef int j, k
    if remainder > 0:
        for j in range(m):
            k = idx[j]
            if g[k] >= gamma and g[k] > 0:
                p = remainder / g[k]
                r += p
                rec += p * g[k]
                c += 1
                if g[k] > best_g:
                    best_g = g[k]
                    best_p = p
    relay[0] = r
    count[0] = c
    snr_d[0] = ps * h + rec
    waste[0] = r - best_p if c > 1 else 0.0


def simulate(int code, double[:, ::1] F, double[:, ::1] G, double[::1] H,
             double[:, ::1] VG, double[::1] U, double snr, double rho,
             double ps_fixed=0.0, double gamma_fixed=0.0):
    """Run one strategy over a batch of noise-normalized realizations.

    Returns ``(source, relay, count, snr_d, status, expected, waste)`` arrays.
    """
    cdef Py_ssize_t n = H.shape[0], i
    cdef int nr = F.shape[1], j, k, m, a, best
    cdef double h, ps, rem, gamma, inv, tot, best_tot, best_ps, best_gamma
    cdef double best_rem, score, best_score, direct, tau = 0.0, kt = 0.0, floor
    cdef double* f
    cdef double* g
    cdef double* vg
    cdef int best_m

    source_a = np.zeros(n)
    relay_a = np.zeros(n)
    count_a = np.zeros(n, dtype=np.int64)
    snr_a = np.zeros(n)
    status_a = np.zeros(n, dtype=np.int8)
    expected_a = np.full(n, np.nan)
    waste_a = np.zeros(n)
    cdef double[::1] source = source_a
    cdef double[::1] relay = relay_a
    cdef long[::1] count = count_a
    cdef double[::1] snr_d = snr_a
    cdef signed char[::1] status = status_a
    cdef double[::1] expected = expected_a
    cdef double[::1] waste = waste_a

    if code < 0 or code > 5:
        raise ValueError(f"unknown strategy code {code}")
    if code == C_SRM or code == C_RRS:
        tau = -2.0 * log1p(-rho)
        kt = c_e1(tau / 2.0)
    floor = snr * (1.0 - SNR_RTOL)

    cdef int* order = <int*> malloc((nr + 1) * sizeof(int))
    if order == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                f = &F[i, 0] if nr > 0 else NULL
                g = &G[i, 0] if nr > 0 else NULL
                vg = &VG[i, 0] if nr > 0 else NULL
                h = H[i]

                if code == C_DIRECT:
                    if h > 0:
                        ps = snr / h
                        source[i] = ps
                        snr_d[i] = ps * h
                        expected[i] = ps
                    else:
                        status[i] = C_INFEASIBLE

                elif code == C_OCPA:
                    best = -1
                    best_score = INFINITY
                    for k in range(nr):
                        if f[k] >= h and g[k] >= h and f[k] > 0 and g[k] > 0:
                            score = 1.0 / f[k] + 1.0 / g[k] - h / (f[k] * g[k])
                            if score < best_score:
                                best = k
                                best_score = score
                    if best < 0:
                        if h > 0:
                            ps = snr / h
                            source[i] = ps
                            snr_d[i] = ps * h
                            expected[i] = ps
                            status[i] = C_FALLBACK
                        else:
                            status[i] = C_INFEASIBLE
                    else:
                        ps = snr / f[best]
                        rem = snr - ps * h
                        if rem < 0:
                            rem = 0.0
                        source[i] = ps
                        relay[i] = rem / g[best]
                        count[i] = 1 if relay[i] > 0 else 0
                        snr_d[i] = ps * h + relay[i] * g[best]
                        expected[i] = ps + relay[i]

                elif code == C_PSM:
                    rem = snr - ps_fixed * h
                    if rem < 0:
                        rem = 0.0
                    m = 0
                    for k in range(nr):
                        if ps_fixed * f[k] >= floor:
                            order[m] = k
                            m += 1
                    source[i] = ps_fixed
                    forward(ps_fixed, h, g, order, m, gamma_fixed, rem,
                            &relay[i], &count[i], &snr_d[i], &waste[i])

                elif code == C_SRM or code == C_RRS:
                    if code == C_SRM:
                        best = -1
                        best_score = INFINITY
                        for k in range(nr):
                            if f[k] > 0 and h < 2.0 * vg[k] / kt:
                                rem = 1.0 - h / f[k]
                                if rem < 0:
                                    rem = 0.0
                                score = 1.0 / f[k] + kt / (2.0 * vg[k]) * rem
                                if score < best_score:
                                    best = k
                                    best_score = score
                        direct = snr / h if h > 0 else INFINITY
                        if best < 0 or direct < snr * best_score:
                            if isinf(direct):
                                status[i] = C_INFEASIBLE
                            else:
                                source[i] = direct
                                snr_d[i] = direct * h
                                expected[i] = direct
                                status[i] = C_FALLBACK
                            continue
                    else:
                        best = <int>(U[i] * nr)
                        if best > nr - 1:
                            best = nr - 1
                        if not f[best] > 0:
                            status[i] = C_INFEASIBLE
                            continue
                    ps = snr / f[best]
                    rem = snr - ps * h
                    if rem < 0:
                        rem = 0.0
                    source[i] = ps
                    expected[i] = ps + rem * kt / (2.0 * vg[best])
                    order[0] = best
                    forward(ps, h, g, order, 1, vg[best] * tau, rem,
                            &relay[i], &count[i], &snr_d[i], &waste[i])
                    waste[i] = 0.0

                else:  # C_ODPA
                    # relays with f > h, sorted by f descending, index ascending
                    m = 0
                    for k in range(nr):
                        if f[k] > h:
                            j = m
                            while j > 0 and (f[order[j - 1]] < f[k]):
                                order[j] = order[j - 1]
                                j -= 1
                            order[j] = k
                            m += 1
                    if m == 0 and not h > 0:
                        status[i] = C_INFEASIBLE
                        continue
                    best_m = -1
                    best_tot = INFINITY
                    best_ps = 0.0
                    best_gamma = INFINITY
                    best_rem = 0.0
                    for a in range(1, m + 1):
                        ps = snr / f[order[a - 1]]
                        rem = snr * (1.0 - h / f[order[a - 1]])
                        gamma = c_solve_threshold(vg, order, a, rho)
                        inv = inv_gain_sum(gamma, vg, order, a)
                        tot = ps + rem * inv
                        # increasing source power; earlier candidate wins ties
                        if best_m < 0 or tot < best_tot:
                            best_m = a
                            best_tot = tot
                            best_ps = ps
                            best_gamma = gamma
                            best_rem = rem
                    direct = snr / h if h > 0 else INFINITY
                    if best_m < 0 or direct < best_tot:
                        best_m = 0
                        best_tot = direct
                        best_ps = direct
                    source[i] = best_ps
                    expected[i] = best_tot
                    if best_m == 0:
                        snr_d[i] = best_ps * h
                        status[i] = C_FALLBACK
                    else:
                        forward(best_ps, h, g, order, best_m, best_gamma,
                                best_rem, &relay[i], &count[i], &snr_d[i],
                                &waste[i])
    finally:
        free(order)
    return source_a, relay_a, count_a, snr_a, status_a, expected_a, waste_a


def solve_threshold(var_g, double rho):
    cdef double[::1] v = np.ascontiguousarray(var_g, dtype=float)
    cdef int m = v.shape[0], j
    if m == 0:
        raise ValueError("threshold needs a nonempty reliable set")
    cdef int* idx = <int*> malloc(m * sizeof(int))
    for j in range(m):
        idx[j] = j
    try:
        return c_solve_threshold(&v[0], idx, m, rho)
    finally:
        free(idx)


def e1(double x):
    if not x > 0:
        raise ValueError(f"E1 needs x > 0, got {x}")
    return c_e1(x)
