# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel: same contract and branch structure as _kernel_py."""

from libc.math cimport (asin, atan2, ceil, cos, fabs, floor, fmod, sin,
                        sqrt, tan, INFINITY, pow)

import numpy as np

from .errors import CapExceeded, GeometryDegenerate

BACKEND = "compiled"

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586
cdef double HALF_PI = 1.5707963267948966
cdef double GRAZE_TOL = 1e-12

KIND_SINGLE = 0
KIND_SEG_RUN = 1
KIND_ARC_RUN = 2

OBS_ZERO = 0
OBS_CONST = 1
OBS_TAU = 2
OBS_BUMP = 3
OBS_TABLE = 4
OBS_PYCALL = 5

FLOW_ZERO = 0
FLOW_CONST = 1
FLOW_PULLBACK = 2
FLOW_PYCALL = 5


cdef inline double c_mod(double x, double m):
    cdef double y = fmod(x, m)
    if y < 0.0:
        y += m
    return y


cdef inline double wrap_pi(double x):
    return c_mod(x + PI, TWO_PI) - PI


cdef inline int c_classify(double ell, double r):
    cdef double L = TWO_PI + 2.0 * ell
    r = c_mod(r, L)
    if r <= PI:
        return 0
    if r < PI + ell:
        return 1
    if r <= TWO_PI + ell:
        return 2
    return 3


def classify_code(double ell, double r):
    """Component code for arclength r (arcs closed, segments open)."""
    return c_classify(ell, r)


cdef inline bint c_in_X(double ell, double r, double th):
    cdef double L = TWO_PI + 2.0 * ell
    cdef double alpha
    r = c_mod(r, L)
    if r <= PI:
        alpha = r - HALF_PI
    elif PI + ell <= r <= TWO_PI + ell:
        alpha = r - (PI + ell) - HALF_PI
    else:
        return False
    return fabs(alpha - 2.0 * th) < HALF_PI


def in_X(double ell, double r, double th):
    """Membership in the induced set: on an arc with |alpha - 2 theta| < pi/2."""
    return c_in_X(ell, r, th)


cdef int c_step(double ell, double r, double th,
                double* r1, double* th1, double* tau) except -1:
    cdef double L = TWO_PI + 2.0 * ell
    cdef double half = 0.5 * ell
    cdef double alpha, beta, ca, sa, px, py, nx, ny, cth, sth, dx, dy
    cdef double tbest, cx, ox, b, cc, disc, sq, t1c, t2c, t, qx, qy
    cdef double a1, alpha1, nx1, ny1, dd, rx, ry, cth1
    cdef int self_circ, hit, circ, j
    r = c_mod(r, L)

    if r <= PI:
        alpha = r - HALF_PI
        beta = wrap_pi(alpha + PI + 2.0 * th)
        cth = cos(th)
        if fabs(beta) <= HALF_PI:
            if cth < GRAZE_TOL:
                raise GeometryDegenerate(f"grazing slide at r={r!r} theta={th!r}")
            r1[0] = beta + HALF_PI
            th1[0] = th
            tau[0] = 2.0 * cth
            return 0
        ca = cos(alpha)
        sa = sin(alpha)
        px = half + ca
        py = sa
        nx = -ca
        ny = -sa
        self_circ = 0
    elif r < PI + ell:
        px = half - (r - PI)
        py = 1.0
        nx = 0.0
        ny = -1.0
        cth = cos(th)
        self_circ = -1
    elif r <= TWO_PI + ell:
        alpha = r - (PI + ell) - HALF_PI
        beta = wrap_pi(alpha + PI + 2.0 * th)
        cth = cos(th)
        if fabs(beta) <= HALF_PI:
            if cth < GRAZE_TOL:
                raise GeometryDegenerate(f"grazing slide at r={r!r} theta={th!r}")
            r1[0] = 3.0 * HALF_PI + ell + beta
            th1[0] = th
            tau[0] = 2.0 * cth
            return 0
        ca = cos(alpha)
        sa = sin(alpha)
        px = -half - ca
        py = -sa
        nx = ca
        ny = sa
        self_circ = 1
    else:
        px = (r - (TWO_PI + ell)) - half
        py = -1.0
        nx = 0.0
        ny = 1.0
        cth = cos(th)
        self_circ = -1

    sth = sin(th)
    dx = cth * nx - sth * ny
    dy = sth * nx + cth * ny

    tbest = INFINITY
    hit = -1
    for circ in range(2):
        if circ == self_circ:
            continue
        cx = half if circ == 0 else -half
        ox = px - cx
        b = ox * dx + py * dy
        cc = ox * ox + py * py - 1.0
        disc = b * b - cc
        if disc <= 0.0:
            continue
        sq = sqrt(disc)
        t1c = (-b + sq) if b <= 0.0 else -(b + sq)
        t2c = cc / t1c
        for j in range(2):
            t = t1c if j == 0 else t2c
            if 0.0 < t < tbest:
                qx = px + t * dx
                if (qx >= cx) if circ == 0 else (qx <= cx):
                    tbest = t
                    hit = 0 if circ == 0 else 2
    if dy > 0.0:
        t = (1.0 - py) / dy
        if 0.0 < t < tbest:
            qx = px + t * dx
            if -half <= qx <= half:
                tbest = t
                hit = 1
    elif dy < 0.0:
        t = (-1.0 - py) / dy
        if 0.0 < t < tbest:
            qx = px + t * dx
            if -half <= qx <= half:
                tbest = t
                hit = 3
    if hit < 0:
        raise GeometryDegenerate(f"no intersection from r={r!r} theta={th!r}")

    qx = px + tbest * dx
    if hit == 0:
        qy = py + tbest * dy
        a1 = atan2(qy, qx - half)
        r1[0] = a1 + HALF_PI
        nx1 = -cos(a1)
        ny1 = -sin(a1)
    elif hit == 2:
        qy = py + tbest * dy
        a1 = atan2(qy, qx + half)
        alpha1 = a1 - PI if a1 >= 0.0 else a1 + PI
        r1[0] = 3.0 * HALF_PI + ell + alpha1
        nx1 = cos(alpha1)
        ny1 = sin(alpha1)
    elif hit == 1:
        r1[0] = PI + (half - qx)
        nx1 = 0.0
        ny1 = -1.0
    else:
        r1[0] = TWO_PI + ell + (qx + half)
        nx1 = 0.0
        ny1 = 1.0

    dd = dx * nx1 + dy * ny1
    rx = dx - 2.0 * dd * nx1
    ry = dy - 2.0 * dd * ny1
    cth1 = nx1 * rx + ny1 * ry
    if cth1 < GRAZE_TOL:
        raise GeometryDegenerate(f"grazing landing from r={r!r} theta={th!r}")
    th1[0] = atan2(nx1 * ry - ny1 * rx, cth1)
    tau[0] = tbest
    return 0


def step(double ell, double r, double th):
    """One collision of the billiard map.  Returns (r1, th1, tau)."""
    cdef double r1, th1, tau
    c_step(ell, r, th, &r1, &th1, &tau)
    return r1, th1, tau


cdef inline int c_back_step(double ell, double r, double th,
                            double* r1, double* th1, double* tau) except -1:
    c_step(ell, r, -th, r1, th1, tau)
    th1[0] = -th1[0]
    return 0


def back_step(double ell, double r, double th):
    """One collision of the inverse map (time reversal R step R)."""
    cdef double r1, th1, tau
    c_back_step(ell, r, th, &r1, &th1, &tau)
    return r1, th1, tau


cdef int c_macro_step(double ell, double r, double th, long long cap,
                      double* r1, double* th1, double* tau_total,
                      long long* skipped, int* kind) except -1:
    cdef double L = TWO_PI + 2.0 * ell
    cdef double half = 0.5 * ell
    cdef double x0, tth, u, x1, bound, q, x_end, r_end, th_end, tau_run
    cdef double alpha, beta, nu, alpha_end, tau
    cdef long long k
    cdef int comp, comp_end
    r = c_mod(r, L)
    comp = c_classify(ell, r)

    if comp == 1 or comp == 3:
        x0 = (half - (r - PI)) if comp == 1 else ((r - (TWO_PI + ell)) - half)
        tth = tan(th)
        u = 2.0 * tth if comp == 1 else -2.0 * tth
        x1 = x0 + u
        if -half < x1 < half:
            if u == 0.0:
                raise CapExceeded("vertical period-2 segment orbit")
            bound = half if u > 0.0 else -half
            q = (bound - x0) / u
            k = <long long> ceil(q) - 1
            if k < 1:
                k = 1
            if k > cap:
                raise CapExceeded(f"segment run exceeds cap={cap}")
            x_end = x0 + k * u
            if k % 2 == 0:
                comp_end = comp
                th_end = th
            else:
                comp_end = 4 - comp
                th_end = -th
            r_end = (PI + (half - x_end)) if comp_end == 1 else (TWO_PI + ell + (x_end + half))
            tau_run = k * 2.0 / cos(th)
            c_step(ell, r_end, th_end, r1, th1, &tau)
            tau_total[0] = tau_run + tau
            skipped[0] = k
            kind[0] = 1
            return 0
        c_step(ell, r, th, r1, th1, &tau)
        tau_total[0] = tau
        skipped[0] = 0
        kind[0] = 0
        return 0

    alpha = (r - HALF_PI) if comp == 0 else (r - (PI + ell) - HALF_PI)
    beta = wrap_pi(alpha + PI + 2.0 * th)
    if fabs(beta) <= HALF_PI:
        nu = (PI + 2.0 * th) if th < 0.0 else (2.0 * th - PI)
        if nu > 0.0:
            k = <long long> floor((HALF_PI - alpha) / nu)
        else:
            k = <long long> floor((alpha + HALF_PI) / (-nu))
        if k < 1:
            k = 1
        if k > cap:
            raise CapExceeded(f"arc slide run exceeds cap={cap}")
        alpha_end = alpha + k * nu
        r_end = (alpha_end + HALF_PI) if comp == 0 else (3.0 * HALF_PI + ell + alpha_end)
        tau_run = k * 2.0 * cos(th)
        c_step(ell, r_end, th, r1, th1, &tau)
        tau_total[0] = tau_run + tau
        skipped[0] = k
        kind[0] = 2
        return 0
    c_step(ell, r, th, r1, th1, &tau)
    tau_total[0] = tau
    skipped[0] = 0
    kind[0] = 0
    return 0


def macro_step(double ell, double r, double th, long long cap):
    """Advance to the next collision on a different boundary piece."""
    cdef double r1, th1, tau_total
    cdef long long skipped
    cdef int kind
    c_macro_step(ell, r, th, cap, &r1, &th1, &tau_total, &skipped, &kind)
    return r1, th1, tau_total, skipped, kind


# ---------------------------------------------------------------------------
# observables

cdef double c_obs(double ell, double r, double th, double tau, int kind,
                  double[::1] pars, double[::1] tr, double[::1] tth,
                  double[:, ::1] tv, object pyfunc) except? -1e308:
    cdef double L, rr, w, u, v
    if kind == 0:
        return 0.0
    if kind == 1:
        return pars[0] + pars[7]
    if kind == 2:
        return tau + pars[7]
    if kind == 3:
        L = TWO_PI + 2.0 * ell
        rr = c_mod(r, L)
        w = pars[1]
        if PI < rr < PI + ell:
            u = (rr - (PI + 0.5 * ell)) / w
        elif TWO_PI + ell < rr < L:
            u = (rr - (TWO_PI + 1.5 * ell)) / w
        else:
            return pars[7]
        if u <= -1.0 or u >= 1.0:
            return pars[7]
        v = 1.0 - u * u
        return pars[0] * v * v * v + pars[7]
    if kind == 4:
        return c_bilinear(c_mod(r, TWO_PI + 2.0 * ell), th, tr, tth, tv) + pars[7]
    return <double> pyfunc(r, th) + pars[7]


cdef double c_bilinear(double r, double th, double[::1] tr, double[::1] tth,
                       double[:, ::1] tv):
    cdef Py_ssize_t nr = tr.shape[0]
    cdef Py_ssize_t nt = tth.shape[0]
    cdef Py_ssize_t i = c_bracket(tr, r, nr)
    cdef Py_ssize_t j = c_bracket(tth, th, nt)
    cdef double fr = (r - tr[i]) / (tr[i + 1] - tr[i])
    cdef double ft = (th - tth[j]) / (tth[j + 1] - tth[j])
    if fr < 0.0:
        fr = 0.0
    elif fr > 1.0:
        fr = 1.0
    if ft < 0.0:
        ft = 0.0
    elif ft > 1.0:
        ft = 1.0
    return (tv[i, j] * (1 - fr) * (1 - ft) + tv[i + 1, j] * fr * (1 - ft)
            + tv[i, j + 1] * (1 - fr) * ft + tv[i + 1, j + 1] * fr * ft)


cdef Py_ssize_t c_bracket(double[::1] grid, double x, Py_ssize_t n):
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = n - 1
    cdef Py_ssize_t mid
    if x <= grid[0]:
        return 0
    if x >= grid[n - 1]:
        return n - 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if grid[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


def obs_eval(double ell, double r, double th, int kind, double[::1] pars,
             double[::1] tr, double[::1] tth, double[:, ::1] tv, pyfunc):
    """Standalone observable evaluation (computes the flight if needed)."""
    cdef double r1, th1, tau = 0.0
    if kind == 2:
        c_step(ell, r, th, &r1, &th1, &tau)
    return c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)


# ---------------------------------------------------------------------------
# excursions

def excursion_fast(double ell, double r, double th, int direction,
                   long long cap):
    """Apply the first-return map once, macro-stepping wherever possible."""
    cdef long long phi = 0, nseg = 0, narc = 0, k
    cdef bint arc_pure = True
    cdef double tau_tot, mr, mth
    cdef int kind, c
    if direction > 0:
        while True:
            c_macro_step(ell, r, th, cap - phi, &r, &th, &tau_tot, &k, &kind)
            phi += k + 1
            if kind == 1:
                nseg += k
                arc_pure = False
            elif kind == 2:
                narc += k
            if c_in_X(ell, r, th):
                return r, th, phi, nseg, narc, arc_pure
            if phi >= cap:
                raise CapExceeded(f"return time exceeds cap={cap}")
            c = c_classify(ell, r)
            if c == 1 or c == 3:
                nseg += 1
                arc_pure = False
            else:
                narc += 1
    cdef double tau
    while True:
        c = c_classify(ell, r)
        if c == 1 or c == 3:
            c_macro_step(ell, r, -th, cap - phi, &mr, &mth, &tau_tot, &k, &kind)
            r = mr
            th = -mth
            phi += k + 1
            if kind == 1:
                nseg += k
                arc_pure = False
        else:
            c_back_step(ell, r, th, &r, &th, &tau)
            phi += 1
        if c_in_X(ell, r, th):
            return r, th, phi, nseg, narc, arc_pure
        if phi >= cap:
            raise CapExceeded(f"return time exceeds cap={cap}")
        c = c_classify(ell, r)
        if c == 1 or c == 3:
            nseg += 1
            arc_pure = False
        else:
            narc += 1


def excursion_obs(double ell, double r, double th, int direction,
                  long long cap, int kind, double[::1] pars, double[::1] tr,
                  double[::1] tth, double[:, ::1] tv, pyfunc):
    """First-return step with per-collision observable accumulation."""
    cdef long long phi = 0, nseg = 0, narc = 0
    cdef double fsum = 0.0, tausum = 0.0
    cdef bint arc_pure = True
    cdef double r1, th1, tau
    cdef int c
    if direction > 0:
        while True:
            c_step(ell, r, th, &r1, &th1, &tau)
            fsum += c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
            tausum += tau
            r = r1
            th = th1
            phi += 1
            if c_in_X(ell, r, th):
                return r, th, phi, fsum, tausum, nseg, narc, arc_pure
            if phi >= cap:
                raise CapExceeded(f"return time exceeds cap={cap}")
            c = c_classify(ell, r)
            if c == 1 or c == 3:
                nseg += 1
                arc_pure = False
            else:
                narc += 1
    while True:
        c_back_step(ell, r, th, &r, &th, &tau)
        fsum += c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
        tausum += tau
        phi += 1
        if c_in_X(ell, r, th):
            return r, th, phi, fsum, tausum, nseg, narc, arc_pure
        if phi >= cap:
            raise CapExceeded(f"return time exceeds cap={cap}")
        c = c_classify(ell, r)
        if c == 1 or c == 3:
            nseg += 1
            arc_pure = False
        else:
            narc += 1


def excursion_batch(double ell, double[::1] rs, double[::1] ths,
                    int direction, long long cap, int kind, double[::1] pars,
                    double[::1] tr, double[::1] tth, double[:, ::1] tv,
                    pyfunc, long long[::1] out_phi, double[::1] out_fsum,
                    long long[::1] out_nseg, long long[::1] out_narc):
    """Vector driver for excursion_obs over sample arrays."""
    cdef Py_ssize_t i
    for i in range(rs.shape[0]):
        _, _, phi, fsum, _, nseg, narc, _ = excursion_obs(
            ell, rs[i], ths[i], direction, cap, kind, pars, tr, tth, tv,
            pyfunc)
        out_phi[i] = phi
        out_fsum[i] = fsum
        out_nseg[i] = nseg
        out_narc[i] = narc


# ---------------------------------------------------------------------------
# tangent map

cdef inline double c_curvature(double ell, double r):
    cdef int c = c_classify(ell, r)
    return -1.0 if (c == 0 or c == 2) else 0.0


def deriv_step(double ell, double r, double th):
    """One collision with its derivative in (dr, dtheta) coordinates."""
    cdef double r1, th1, tau, K, K1, c0, c1, a
    c_step(ell, r, th, &r1, &th1, &tau)
    K = c_curvature(ell, r)
    K1 = c_curvature(ell, r1)
    c0 = cos(th)
    c1 = cos(th1)
    a = tau * K + c0
    return r1, th1, tau, -a / c1, tau / c1, (K1 * a + K * c1) / c1, \
        -(tau * K1 + c1) / c1


def excursion_deriv(double ell, double r, double th, int direction,
                    long long cap):
    """Compose deriv_step across one application of T (or T^{-1})."""
    cdef double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0
    cdef double a, b, c, d, r1, th1, tau, K, K1, c0, c1, aa, t00, t01, t10, t11
    cdef long long phi = 0
    while True:
        if direction > 0:
            c_step(ell, r, th, &r1, &th1, &tau)
            K = c_curvature(ell, r)
        else:
            c_step(ell, r, -th, &r1, &th1, &tau)
            K = c_curvature(ell, r)
        K1 = c_curvature(ell, r1)
        c0 = cos(th)
        c1 = cos(th1)
        aa = tau * K + c0
        a = -aa / c1
        b = tau / c1
        c = (K1 * aa + K * c1) / c1
        d = -(tau * K1 + c1) / c1
        if direction > 0:
            r = r1
            th = th1
        else:
            b = -b
            c = -c
            r = r1
            th = -th1
        t00 = a * m00 + b * m10
        t01 = a * m01 + b * m11
        t10 = c * m00 + d * m10
        t11 = c * m01 + d * m11
        m00 = t00
        m01 = t01
        m10 = t10
        m11 = t11
        phi += 1
        if c_in_X(ell, r, th):
            return r, th, phi, m00, m01, m10, m11
        if phi >= cap:
            raise CapExceeded(f"return time exceeds cap={cap}")


# ---------------------------------------------------------------------------
# Birkhoff sums and correlations

def birkhoff_sum(double ell, double r, double th, long long n, int kind,
                 double[::1] pars, double[::1] tr, double[::1] tth,
                 double[:, ::1] tv, pyfunc):
    """Sum of f0 over n collisions starting at (r, th)."""
    cdef double s = 0.0, r1, th1, tau
    cdef long long k
    for k in range(n):
        c_step(ell, r, th, &r1, &th1, &tau)
        s += c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
        r = r1
        th = th1
    return s, r, th


def birkhoff_batch(double ell, double[::1] rs, double[::1] ths, long long n,
                   int kind, double[::1] pars, double[::1] tr,
                   double[::1] tth, double[:, ::1] tv, pyfunc,
                   double[::1] out):
    cdef Py_ssize_t i
    cdef double s, r, th, r1, th1, tau
    cdef long long k
    for i in range(rs.shape[0]):
        r = rs[i]
        th = ths[i]
        s = 0.0
        for k in range(n):
            c_step(ell, r, th, &r1, &th1, &tau)
            s += c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
            r = r1
            th = th1
        out[i] = s


def birkhoff_checkpoints(double ell, double[::1] rs, double[::1] ths,
                         long long[::1] ns, int kind, double[::1] pars,
                         double[::1] tr, double[::1] tth, double[:, ::1] tv,
                         pyfunc, double[:, ::1] out):
    """Prefix Birkhoff sums: out[i, j] = S_{ns[j]} f0 from start i."""
    cdef Py_ssize_t i, j, ncheck = ns.shape[0]
    cdef double s, r, th, r1, th1, tau
    cdef long long k, last = ns[ncheck - 1]
    for i in range(rs.shape[0]):
        r = rs[i]
        th = ths[i]
        s = 0.0
        j = 0
        for k in range(last):
            c_step(ell, r, th, &r1, &th1, &tau)
            s += c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
            r = r1
            th = th1
            if k + 1 == ns[j]:
                out[i, j] = s
                j += 1
    return None


def tau_sum_batch(double ell, double[::1] rs, double[::1] ths, long long n):
    """Total flight length over n collisions from each start."""
    cdef double total = 0.0, r, th, tau
    cdef Py_ssize_t i
    cdef long long k
    for i in range(rs.shape[0]):
        r = rs[i]
        th = ths[i]
        for k in range(n):
            c_step(ell, r, th, &r, &th, &tau)
            total += tau
    return total


def corr_orbit(double ell, double r, double th, long long n,
               long long[::1] lags, int kind, double[::1] pars,
               double[::1] tr, double[::1] tth, double[:, ::1] tv, pyfunc,
               double[::1] out_sums):
    """Accumulate sum f(x_k) f(x_{k+lag}) along one orbit of length n."""
    cdef long long maxlag = lags[lags.shape[0] - 1]
    cdef Py_ssize_t nlags = lags.shape[0]
    cdef double[::1] bufv = np.zeros(maxlag + 1)
    cdef double r1, th1, tau, v
    cdef long long k, lag
    cdef Py_ssize_t j
    for k in range(n):
        c_step(ell, r, th, &r1, &th1, &tau)
        v = c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
        bufv[k % (maxlag + 1)] = v
        for j in range(nlags):
            lag = lags[j]
            if k >= lag:
                out_sums[j] += bufv[(k - lag) % (maxlag + 1)] * v
        r = r1
        th = th1
    return r, th


# ---------------------------------------------------------------------------
# stripe sampler

def stripe_sample(double ell, long long n, double[::1] u, long long iu):
    """One sample of mu conditioned on {phi_- = n, bouncing}; see pure twin."""
    cdef double half = 0.5 * ell
    cdef long long nu = u.shape[0]
    cdef long long cfg, j
    cdef double D, ustage, uband, tlo, slo, thi, shi, W
    cdef double tlo_max, slo_max, thi_max, shi_max, Wmax, psi, r, th
    cdef double rp, thp, tau, rr, tt
    cdef int cp, c
    cdef bint ok
    while iu + 4 <= nu:
        cfg = <long long> (u[iu] * 4.0)
        D = u[iu + 1] * ell
        ustage = u[iu + 2]
        uband = u[iu + 3]
        iu += 4
        if cfg > 3:
            cfg = 3
        tlo = D / (2.0 * (n - 1))
        slo = tlo / sqrt(1.0 + tlo * tlo)
        if n > 2:
            thi = D / (2.0 * (n - 2))
            shi = thi / sqrt(1.0 + thi * thi)
        else:
            shi = 1.0
        W = shi - slo
        tlo_max = ell / (2.0 * (n - 1))
        slo_max = tlo_max / sqrt(1.0 + tlo_max * tlo_max)
        if n > 2:
            thi_max = ell / (2.0 * (n - 2))
            shi_max = thi_max / sqrt(1.0 + thi_max * thi_max)
        else:
            shi_max = 1.0
        Wmax = shi_max - slo_max
        if ustage * Wmax > W:
            continue
        psi = asin(slo + uband * W)
        if cfg == 0:
            r = PI + ell - D
            th = -psi
        elif cfg == 1:
            r = PI + D
            th = psi
        elif cfg == 2:
            r = TWO_PI + ell + D
            th = psi
        else:
            r = TWO_PI + 2.0 * ell - D
            th = -psi
        try:
            c_back_step(ell, r, th, &rp, &thp, &tau)
        except GeometryDegenerate:
            continue
        cp = c_classify(ell, rp)
        if cp == 1 or cp == 3:
            continue
        if not c_in_X(ell, rp, thp):
            continue
        rr = r
        tt = th
        ok = True
        try:
            for j in range(n - 1):
                c_step(ell, rr, tt, &rr, &tt, &tau)
                c = c_classify(ell, rr)
                if j < n - 2:
                    if c == 0 or c == 2:
                        ok = False
                        break
                else:
                    if c == 1 or c == 3 or not c_in_X(ell, rr, tt):
                        ok = False
                        break
        except GeometryDegenerate:
            ok = False
        if not ok:
            continue
        return rr, tt, iu, 1
    return 0.0, 0.0, iu, 0


# ---------------------------------------------------------------------------
# backward cascades

cdef inline long long c_kind_code(long long phi, long long nseg,
                                  long long narc, bint arc_pure):
    # 0 bouncing, 1 sliding, 2 short; majority rule, ties to bouncing
    if phi <= 8:
        return 2
    if narc == 0:
        return 0
    if nseg == 0 and arc_pure:
        return 1
    return 0 if nseg >= narc else 1


def cascade(double ell, double r, double th, long long lo, long long hi,
            long long max_steps, long long step_cap, int kind,
            double[::1] pars, double[::1] tr, double[::1] tth,
            double[:, ::1] tv, pyfunc, long long[::1] out_seq,
            long long[::1] out_kinds):
    """Backward cascade; see the pure twin for the contract."""
    cdef double H = 0.0
    cdef long long k, n0, nk, nseg, narc
    cdef bint pure
    cdef double fs
    r, th, n0, fs, _, nseg, narc, pure = excursion_obs(
        ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
    out_seq[0] = n0
    out_kinds[0] = c_kind_code(n0, nseg, narc, pure)
    k = 1
    while True:
        r, th, nk, fs, _, nseg, narc, pure = excursion_obs(
            ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
        if k < out_seq.shape[0]:
            out_seq[k] = nk
            out_kinds[k] = c_kind_code(nk, nseg, narc, pure)
        if lo <= nk <= hi:
            return H, k, 0, min(k + 1, out_seq.shape[0])
        H += fs
        k += 1
        if k > max_steps:
            return H, k - 1, 1, min(k, out_seq.shape[0])


def cascade_moment(double ell, double r, double th, long long lo,
                   long long hi, long long max_steps, long long step_cap,
                   double s, int kind, double[::1] pars, double[::1] tr,
                   double[::1] tth, double[:, ::1] tv, pyfunc):
    """Accumulate sum_k |h(T^{-k}x)|^s for k = 0..tau-1."""
    cdef double m = 0.0
    cdef long long k, n0, nk
    cdef double fs
    r, th, n0, fs, _, _, _, _ = excursion_obs(
        ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
    m += pow(fabs(fs), s)
    k = 1
    while True:
        r, th, nk, fs, _, _, _, _ = excursion_obs(
            ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
        if lo <= nk <= hi:
            return m, k, 0
        m += pow(fabs(fs), s)
        k += 1
        if k > max_steps:
            return m, k - 1, 1


# ---------------------------------------------------------------------------
# flow integration

cdef double c_flow(double ell, double r, double th, double tau, double t,
                   int fkind, int kind, double[::1] pars, double[::1] tr,
                   double[::1] tth, double[:, ::1] tv,
                   object pyfunc) except? -1e308:
    if fkind == 0:
        return 0.0
    if fkind == 1:
        return pars[0] + pars[7]
    if fkind == 2:
        return c_obs(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc) / tau
    return <double> pyfunc(r, th, t) + pars[7]


def flow_integral(double ell, double r, double th, double u0, double T,
                  double[::1] glx, double[::1] glw, int fkind, int kind,
                  double[::1] pars, double[::1] tr, double[::1] tth,
                  double[:, ::1] tv, pyfunc):
    """Integrate a flow observable along the trajectory for time T."""
    cdef double total = 0.0, remaining = T
    cdef Py_ssize_t ng = glx.shape[0], g
    cdef bint first = True
    cdef double r1, th1, tau, a, b, halfw, mid, acc, t
    while remaining > 0.0:
        c_step(ell, r, th, &r1, &th1, &tau)
        a = u0 if first else 0.0
        first = False
        b = tau
        if b - a > remaining:
            b = a + remaining
        halfw = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        acc = 0.0
        for g in range(ng):
            t = mid + halfw * glx[g]
            acc += glw[g] * c_flow(ell, r, th, tau, t, fkind, kind, pars,
                                   tr, tth, tv, pyfunc)
        total += acc * halfw
        remaining -= b - a
        r = r1
        th = th1
    return total


def flow_batch(double ell, double[::1] rs, double[::1] ths, double[::1] u0s,
               double T, double[::1] glx, double[::1] glw, int fkind,
               int kind, double[::1] pars, double[::1] tr, double[::1] tth,
               double[:, ::1] tv, pyfunc, double[::1] out):
    cdef Py_ssize_t i
    for i in range(rs.shape[0]):
        out[i] = flow_integral(ell, rs[i], ths[i], u0s[i], T, glx, glw,
                               fkind, kind, pars, tr, tth, tv, pyfunc)
