"""Pure-Python kernel: collision map, macro steps, excursions, batch drivers.

This module is the reference implementation of the hot loops.  The compiled
twin (``_kernel_cy``) implements the same functions with the same branch
structure; ``kernel.py`` selects one at import time.  Everything here works
on raw floats -- the object layer lives in the public modules.

Component codes: 0 right arc, 1 top segment, 2 left arc, 3 bottom segment.
Macro kinds:     0 single step, 1 segment bounce run, 2 arc slide run.
Observable kinds: 0 zero, 1 const, 2 free path, 3 segment bump, 4 table,
                  5 python callable.  ``pars[7]`` is an additive offset
                  (used for centering).
"""

from __future__ import annotations

import math

from .errors import CapExceeded, GeometryDegenerate

BACKEND = "pure"

PI = math.pi
TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
GRAZE_TOL = 1e-12

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


def classify_code(ell, r):
    """Component code for arclength r (arcs closed, segments open)."""
    L = TWO_PI + 2.0 * ell
    r = r % L
    if r <= PI:
        return 0
    if r < PI + ell:
        return 1
    if r <= TWO_PI + ell:
        return 2
    return 3


def _wrap_pi(x):
    """Reduce to [-pi, pi)."""
    return (x + PI) % TWO_PI - PI


def in_X(ell, r, th):
    """Membership in the induced set: on an arc with |alpha - 2 theta| < pi/2.

    alpha is the position angle about the arc's center, zero at the apex.
    Equivalent to "previous collision not on the same arc" (the same-circle
    chord advances the position angle by exactly pi + 2 theta).
    """
    L = TWO_PI + 2.0 * ell
    r = r % L
    if r <= PI:
        alpha = r - HALF_PI
    elif PI + ell <= r <= TWO_PI + ell:
        alpha = r - (PI + ell) - HALF_PI
    else:
        return False
    return abs(alpha - 2.0 * th) < HALF_PI


def step(ell, r, th):
    """One collision of the billiard map.  Returns (r1, th1, tau)."""
    L = TWO_PI + 2.0 * ell
    r = r % L
    half = 0.5 * ell

    # Locate the start point; same-circle chords take the exact fast path
    # (the chord advances the position angle by pi + 2 theta and keeps theta).
    if r <= PI:
        alpha = r - HALF_PI
        beta = _wrap_pi(alpha + PI + 2.0 * th)
        cth = math.cos(th)
        if abs(beta) <= HALF_PI:
            if cth < GRAZE_TOL:
                raise GeometryDegenerate(f"grazing slide at r={r!r} theta={th!r}")
            return beta + HALF_PI, th, 2.0 * cth
        ca = math.cos(alpha)
        sa = math.sin(alpha)
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
        cth = math.cos(th)
        self_circ = -1
    elif r <= TWO_PI + ell:
        alpha = r - (PI + ell) - HALF_PI
        beta = _wrap_pi(alpha + PI + 2.0 * th)
        cth = math.cos(th)
        if abs(beta) <= HALF_PI:
            if cth < GRAZE_TOL:
                raise GeometryDegenerate(f"grazing slide at r={r!r} theta={th!r}")
            return 3.0 * HALF_PI + ell + beta, th, 2.0 * cth
        ca = math.cos(alpha)
        sa = math.sin(alpha)
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
        cth = math.cos(th)
        self_circ = -1

    sth = math.sin(th)
    dx = cth * nx - sth * ny
    dy = sth * nx + cth * ny

    tbest = math.inf
    hit = -1
    for circ in (0, 1):
        if circ == self_circ:
            continue
        cx = half if circ == 0 else -half
        ox = px - cx
        b = ox * dx + py * dy
        cc = ox * ox + py * py - 1.0
        disc = b * b - cc
        if disc <= 0.0:
            continue
        sq = math.sqrt(disc)
        t1 = (-b + sq) if b <= 0.0 else -(b + sq)
        t2 = cc / t1
        for t in (t1, t2):
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
        a1 = math.atan2(qy, qx - half)
        r1 = a1 + HALF_PI
        nx1 = -math.cos(a1)
        ny1 = -math.sin(a1)
    elif hit == 2:
        qy = py + tbest * dy
        a1 = math.atan2(qy, qx + half)
        alpha1 = a1 - PI if a1 >= 0.0 else a1 + PI
        r1 = 3.0 * HALF_PI + ell + alpha1
        nx1 = math.cos(alpha1)
        ny1 = math.sin(alpha1)
    elif hit == 1:
        r1 = PI + (half - qx)
        nx1 = 0.0
        ny1 = -1.0
    else:
        r1 = TWO_PI + ell + (qx + half)
        nx1 = 0.0
        ny1 = 1.0

    dd = dx * nx1 + dy * ny1
    rx = dx - 2.0 * dd * nx1
    ry = dy - 2.0 * dd * ny1
    cth1 = nx1 * rx + ny1 * ry
    if cth1 < GRAZE_TOL:
        raise GeometryDegenerate(f"grazing landing from r={r!r} theta={th!r}")
    th1 = math.atan2(nx1 * ry - ny1 * rx, cth1)
    return r1, th1, tbest


def back_step(ell, r, th):
    """One collision of the inverse map (time reversal R step R)."""
    r1, th1, tau = step(ell, r, -th)
    return r1, -th1, tau


def macro_step(ell, r, th, cap):
    """Advance to the next collision on a different boundary piece.

    Segment bounce runs and same-arc slide runs are collapsed in closed
    form (one multiply-add; no per-bounce error accumulation).  Returns
    (r1, th1, total_tau, skipped, kind) where skipped counts the collisions
    jumped over and r1/th1 is the first collision beyond the run.
    """
    L = TWO_PI + 2.0 * ell
    r = r % L
    half = 0.5 * ell
    comp = classify_code(ell, r)

    if comp == 1 or comp == 3:
        x0 = (half - (r - PI)) if comp == 1 else ((r - (TWO_PI + ell)) - half)
        tth = math.tan(th)
        u = 2.0 * tth if comp == 1 else -2.0 * tth
        x1 = x0 + u
        if -half < x1 < half:
            if u == 0.0:
                raise CapExceeded("vertical period-2 segment orbit")
            bound = half if u > 0.0 else -half
            q = (bound - x0) / u
            k = math.ceil(q) - 1
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
            tau_run = k * 2.0 / math.cos(th)
            r1, th1, tau = step(ell, r_end, th_end)
            return r1, th1, tau_run + tau, k, KIND_SEG_RUN
        r1, th1, tau = step(ell, r, th)
        return r1, th1, tau, 0, KIND_SINGLE

    alpha = (r - HALF_PI) if comp == 0 else (r - (PI + ell) - HALF_PI)
    beta = _wrap_pi(alpha + PI + 2.0 * th)
    if abs(beta) <= HALF_PI:
        nu = (PI + 2.0 * th) if th < 0.0 else (2.0 * th - PI)
        if nu > 0.0:
            k = math.floor((HALF_PI - alpha) / nu)
        else:
            k = math.floor((alpha + HALF_PI) / (-nu))
        if k < 1:
            k = 1
        if k > cap:
            raise CapExceeded(f"arc slide run exceeds cap={cap}")
        alpha_end = alpha + k * nu
        r_end = (alpha_end + HALF_PI) if comp == 0 else (3.0 * HALF_PI + ell + alpha_end)
        tau_run = k * 2.0 * math.cos(th)
        r1, th1, tau = step(ell, r_end, th)
        return r1, th1, tau_run + tau, k, KIND_ARC_RUN
    r1, th1, tau = step(ell, r, th)
    return r1, th1, tau, 0, KIND_SINGLE


# ---------------------------------------------------------------------------
# observables


def _obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc):
    """Evaluate an observable at a phase point; tau is the outgoing flight."""
    if kind == OBS_ZERO:
        return 0.0
    if kind == OBS_CONST:
        return pars[0] + pars[7]
    if kind == OBS_TAU:
        return tau + pars[7]
    if kind == OBS_BUMP:
        L = TWO_PI + 2.0 * ell
        rr = r % L
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
    if kind == OBS_TABLE:
        return _bilinear(r % (TWO_PI + 2.0 * ell), th, tr, tth, tv) + pars[7]
    return pyfunc(r, th) + pars[7]


def _bilinear(r, th, tr, tth, tv):
    nr = len(tr)
    nt = len(tth)
    i = _bracket(tr, r, nr)
    j = _bracket(tth, th, nt)
    fr = (r - tr[i]) / (tr[i + 1] - tr[i])
    ft = (th - tth[j]) / (tth[j + 1] - tth[j])
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


def _bracket(grid, x, n):
    """Largest i with grid[i] <= x, clamped to [0, n-2]."""
    lo = 0
    hi = n - 1
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


def obs_eval(ell, r, th, kind, pars, tr, tth, tv, pyfunc):
    """Standalone observable evaluation (computes the flight if needed)."""
    tau = step(ell, r, th)[2] if kind == OBS_TAU else 0.0
    return _obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)


# ---------------------------------------------------------------------------
# excursions of the induced map


def excursion_fast(ell, r, th, direction, cap):
    """Apply the first-return map once, macro-stepping wherever possible.

    direction +1: x in X -> T x.  direction -1: x in X -> T^{-1} x.
    Returns (r1, th1, phi, nseg, narc, arc_pure) where nseg/narc count the
    intermediate collisions on segments/arcs and arc_pure says whether all
    intermediates sat on one arc.
    """
    phi = 0
    nseg = 0
    narc = 0
    arc_pure = True
    if direction > 0:
        while True:
            r, th, _, k, kind = macro_step(ell, r, th, cap - phi)
            phi += k + 1
            if kind == KIND_SEG_RUN:
                nseg += k
                arc_pure = False
            elif kind == KIND_ARC_RUN:
                narc += k
            if in_X(ell, r, th):
                return r, th, phi, nseg, narc, arc_pure
            if phi >= cap:
                raise CapExceeded(f"return time exceeds cap={cap}")
            c = classify_code(ell, r)
            if c == 1 or c == 3:
                nseg += 1
                arc_pure = False
            else:
                narc += 1
    while True:
        comp = classify_code(ell, r)
        if comp == 1 or comp == 3:
            mr, mth, _, k, kind = macro_step(ell, r, -th, cap - phi)
            r, th = mr, -mth
            phi += k + 1
            if kind == KIND_SEG_RUN:
                nseg += k
                arc_pure = False
        else:
            r, th, _ = back_step(ell, r, th)
            phi += 1
        if in_X(ell, r, th):
            return r, th, phi, nseg, narc, arc_pure
        if phi >= cap:
            raise CapExceeded(f"return time exceeds cap={cap}")
        c = classify_code(ell, r)
        if c == 1 or c == 3:
            nseg += 1
            arc_pure = False
        else:
            narc += 1


def excursion_obs(ell, r, th, direction, cap, kind, pars, tr, tth, tv, pyfunc):
    """First-return step with per-collision observable accumulation.

    Forward: fsum = sum of f0 over x, T0 x, ..., T0^(phi-1) x  (the induced
    observable f at x).  Backward: fsum = sum over the visited preimages
    T0^(-1) x ... T0^(-phi) x, i.e. f evaluated at T^(-1) x.
    Returns (r1, th1, phi, fsum, tausum, nseg, narc, arc_pure).
    """
    phi = 0
    fsum = 0.0
    tausum = 0.0
    nseg = 0
    narc = 0
    arc_pure = True
    if direction > 0:
        while True:
            r1, th1, tau = step(ell, r, th)
            fsum += _obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
            tausum += tau
            r, th = r1, th1
            phi += 1
            if in_X(ell, r, th):
                return r, th, phi, fsum, tausum, nseg, narc, arc_pure
            if phi >= cap:
                raise CapExceeded(f"return time exceeds cap={cap}")
            c = classify_code(ell, r)
            if c == 1 or c == 3:
                nseg += 1
                arc_pure = False
            else:
                narc += 1
    while True:
        r, th, tau = back_step(ell, r, th)
        fsum += _obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
        tausum += tau
        phi += 1
        if in_X(ell, r, th):
            return r, th, phi, fsum, tausum, nseg, narc, arc_pure
        if phi >= cap:
            raise CapExceeded(f"return time exceeds cap={cap}")
        c = classify_code(ell, r)
        if c == 1 or c == 3:
            nseg += 1
            arc_pure = False
        else:
            narc += 1


def excursion_batch(ell, rs, ths, direction, cap, kind, pars, tr, tth, tv,
                    pyfunc, out_phi, out_fsum, out_nseg, out_narc):
    """Vector driver for excursion_obs over sample arrays."""
    for i in range(len(rs)):
        _, _, phi, fsum, _, nseg, narc, _ = excursion_obs(
            ell, rs[i], ths[i], direction, cap, kind, pars, tr, tth, tv, pyfunc)
        out_phi[i] = phi
        out_fsum[i] = fsum
        out_nseg[i] = nseg
        out_narc[i] = narc


# ---------------------------------------------------------------------------
# tangent map


def _curvature(ell, r):
    c = classify_code(ell, r)
    return -1.0 if (c == 0 or c == 2) else 0.0


def deriv_step(ell, r, th):
    """One collision with its derivative in (dr, dtheta) coordinates.

    Returns (r1, th1, tau, m00, m01, m10, m11).  The matrix is the standard
    billiard derivative with curvature -1 on the (focusing) arcs and 0 on
    the segments; det = cos(th)/cos(th1).
    """
    r1, th1, tau = step(ell, r, th)
    K = _curvature(ell, r)
    K1 = _curvature(ell, r1)
    c0 = math.cos(th)
    c1 = math.cos(th1)
    a = tau * K + c0
    m00 = -a / c1
    m01 = tau / c1
    m10 = (K1 * a + K * c1) / c1
    m11 = -(tau * K1 + c1) / c1
    return r1, th1, tau, m00, m01, m10, m11


def excursion_deriv(ell, r, th, direction, cap):
    """Compose deriv_step across one application of T (or T^{-1}).

    Returns (r1, th1, phi, m00, m01, m10, m11).
    """
    m00 = 1.0
    m01 = 0.0
    m10 = 0.0
    m11 = 1.0
    phi = 0
    while True:
        if direction > 0:
            r, th, _, a, b, c, d = deriv_step(ell, r, th)
        else:
            # T0^{-1} = R T0 R with R = diag(1,-1), so
            # DT0^{-1}(x) = R . DT0(Rx) . R  (off-diagonal signs flip)
            rb, thb, _, a, b, c, d = deriv_step(ell, r, -th)
            b = -b
            c = -c
            r, th = rb, -thb
        m00, m01, m10, m11 = (a * m00 + b * m10, a * m01 + b * m11,
                              c * m00 + d * m10, c * m01 + d * m11)
        phi += 1
        if in_X(ell, r, th):
            return r, th, phi, m00, m01, m10, m11
        if phi >= cap:
            raise CapExceeded(f"return time exceeds cap={cap}")


# ---------------------------------------------------------------------------
# Birkhoff sums and correlations


def birkhoff_sum(ell, r, th, n, kind, pars, tr, tth, tv, pyfunc):
    """Sum of f0 over n collisions starting at (r, th)."""
    s = 0.0
    for _ in range(n):
        r1, th1, tau = step(ell, r, th)
        s += _obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
        r, th = r1, th1
    return s, r, th


def birkhoff_batch(ell, rs, ths, n, kind, pars, tr, tth, tv, pyfunc, out):
    for i in range(len(rs)):
        out[i] = birkhoff_sum(ell, rs[i], ths[i], n, kind, pars, tr, tth, tv,
                              pyfunc)[0]


def birkhoff_checkpoints(ell, rs, ths, ns, kind, pars, tr, tth, tv, pyfunc,
                         out):
    """Prefix Birkhoff sums: out[i, j] = S_{ns[j]} f0 from start i.

    ns must be sorted ascending; one orbit of length ns[-1] per start.
    """
    ncheck = len(ns)
    for i in range(len(rs)):
        r = rs[i]
        th = ths[i]
        s = 0.0
        j = 0
        for k in range(ns[ncheck - 1]):
            r1, th1, tau = step(ell, r, th)
            s += _obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
            r, th = r1, th1
            if k + 1 == ns[j]:
                out[i, j] = s
                j += 1
    return None


def tau_sum_batch(ell, rs, ths, n):
    """Total flight length over n collisions from each start."""
    total = 0.0
    for i in range(len(rs)):
        r = rs[i]
        th = ths[i]
        for _ in range(n):
            r, th, tau = step(ell, r, th)
            total += tau
    return total


def corr_orbit(ell, r, th, n, lags, kind, pars, tr, tth, tv, pyfunc, out_sums):
    """Accumulate sum f(x_k) f(x_{k+lag}) along one orbit of length n.

    lags must be sorted ascending; out_sums[j] receives the lag-j sum over
    the n - lags[j] available pairs.
    """
    maxlag = lags[-1]
    buf = [0.0] * (maxlag + 1)
    nlags = len(lags)
    for k in range(n):
        r1, th1, tau = step(ell, r, th)
        v = _obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
        buf[k % (maxlag + 1)] = v
        for j in range(nlags):
            lag = lags[j]
            if k >= lag:
                out_sums[j] += buf[(k - lag) % (maxlag + 1)] * v
        r, th = r1, th1
    return r, th


# ---------------------------------------------------------------------------
# stripe sampler (mu conditioned on backward return time n, bouncing)


def stripe_sample(ell, n, u, iu):
    """One sample of mu conditioned on {phi_- = n, bouncing}.

    Launches from the segment cross-section of the n-bounce channel: the
    first segment collision of the excursion is cos-distributed on the band
    of directions whose unfolded bounce count is exactly n-1; the previous
    collision must be an arc point inside the induced set.  Exactness is
    enforced by replaying the excursion.

    u is a buffer of uniforms consumed from index iu.  Returns
    (r, th, iu_new, ok); ok=0 means the buffer ran out.
    """
    half = 0.5 * ell
    nu = len(u)
    while iu + 4 <= nu:
        cfg = int(u[iu] * 4.0)
        D = u[iu + 1] * ell
        ustage = u[iu + 2]
        uband = u[iu + 3]
        iu += 4
        if cfg > 3:
            cfg = 3
        tlo = D / (2.0 * (n - 1))
        slo = tlo / math.sqrt(1.0 + tlo * tlo)
        if n > 2:
            thi = D / (2.0 * (n - 2))
            shi = thi / math.sqrt(1.0 + thi * thi)
        else:
            shi = 1.0
        W = shi - slo
        tlo_max = ell / (2.0 * (n - 1))
        slo_max = tlo_max / math.sqrt(1.0 + tlo_max * tlo_max)
        if n > 2:
            thi_max = ell / (2.0 * (n - 2))
            shi_max = thi_max / math.sqrt(1.0 + thi_max * thi_max)
        else:
            shi_max = 1.0
        Wmax = shi_max - slo_max
        if ustage * Wmax > W:
            continue
        psi = math.asin(slo + uband * W)
        if cfg == 0:      # top segment, drifting toward the left junction
            r = PI + ell - D
            th = -psi
        elif cfg == 1:    # top segment, drifting toward the right junction
            r = PI + D
            th = psi
        elif cfg == 2:    # bottom segment, drifting left
            r = TWO_PI + ell + D
            th = psi
        else:             # bottom segment, drifting right
            r = TWO_PI + 2.0 * ell - D
            th = -psi
        # previous collision must be an arc point inside X
        try:
            rp, thp, _ = back_step(ell, r, th)
        except GeometryDegenerate:
            continue
        cp = classify_code(ell, rp)
        if cp == 1 or cp == 3:
            continue
        if not in_X(ell, rp, thp):
            continue
        # replay: n-2 further segment collisions, then an arc landing in X
        rr = r
        tt = th
        ok = True
        try:
            for j in range(n - 1):
                rr, tt, _ = step(ell, rr, tt)
                c = classify_code(ell, rr)
                if j < n - 2:
                    if c == 0 or c == 2:
                        ok = False
                        break
                else:
                    if c == 1 or c == 3 or not in_X(ell, rr, tt):
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


def _kind_code(phi, nseg, narc, arc_pure):
    """0 bouncing, 1 sliding, 2 short; majority rule, ties to bouncing."""
    if phi <= 8:
        return 2
    if narc == 0:
        return 0
    if nseg == 0 and arc_pure:
        return 1
    return 0 if nseg >= narc else 1


def cascade(ell, r, th, lo, hi, max_steps, step_cap, kind, pars, tr, tth, tv,
            pyfunc, out_seq, out_kinds):
    """Backward cascade from a stripe point until the return time enters
    [lo, hi] or max_steps backward iterations of T are spent.

    out_seq[k] receives phi_-(T^{-k} x) and out_kinds[k] that excursion's
    class code; out_seq[0] is phi_-(x).  Returns (H, stop_index, capped,
    nfilled) with H the h-sum over steps 1..tau-1.
    """
    H = 0.0
    # first backward excursion: determines n0 = phi_-(x), h(x) not in H
    r, th, n0, fs, _, nseg, narc, pure = excursion_obs(
        ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
    out_seq[0] = n0
    out_kinds[0] = _kind_code(n0, nseg, narc, pure)
    k = 1
    while True:
        r, th, nk, fs, _, nseg, narc, pure = excursion_obs(
            ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
        if k < len(out_seq):
            out_seq[k] = nk
            out_kinds[k] = _kind_code(nk, nseg, narc, pure)
        if lo <= nk <= hi:
            return H, k, 0, min(k + 1, len(out_seq))
        H += fs
        k += 1
        if k > max_steps:
            return H, k - 1, 1, min(k, len(out_seq))


def cascade_moment(ell, r, th, lo, hi, max_steps, step_cap, s, kind, pars,
                   tr, tth, tv, pyfunc):
    """Like cascade() but accumulates sum_k |h(T^{-k}x)|^s for k=0..tau-1.

    Returns (moment, stop_index, capped).
    """
    m = 0.0
    r, th, n0, fs, _, _, _, _ = excursion_obs(
        ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
    m += abs(fs) ** s
    k = 1
    while True:
        r, th, nk, fs, _, _, _, _ = excursion_obs(
            ell, r, th, -1, step_cap, kind, pars, tr, tth, tv, pyfunc)
        if lo <= nk <= hi:
            return m, k, 0
        m += abs(fs) ** s
        k += 1
        if k > max_steps:
            return m, k - 1, 1


# ---------------------------------------------------------------------------
# flow integration


def _flow_value(ell, r, th, tau, t, fkind, kind, pars, tr, tth, tv, pyfunc):
    if fkind == FLOW_ZERO:
        return 0.0
    if fkind == FLOW_CONST:
        return pars[0] + pars[7]
    if fkind == FLOW_PULLBACK:
        return (_obs_value(ell, r, th, tau, kind, pars, tr, tth, tv, pyfunc)
                / tau)
    return pyfunc(r, th, t) + pars[7]


def flow_integral(ell, r, th, u0, T, glx, glw, fkind, kind, pars, tr, tth,
                  tv, pyfunc):
    """Integrate a flow observable along the trajectory for time T.

    Starts at flight offset u0 in [0, tau(x)).  Gauss-Legendre nodes glx on
    [-1, 1] with weights glw are mapped to each (partial) flight segment.
    Returns the time integral.
    """
    total = 0.0
    remaining = T
    ng = len(glx)
    first = True
    while remaining > 0.0:
        r1, th1, tau = step(ell, r, th)
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
            acc += glw[g] * _flow_value(ell, r, th, tau, t, fkind, kind, pars,
                                        tr, tth, tv, pyfunc)
        total += acc * halfw
        remaining -= b - a
        r, th = r1, th1
    return total


def flow_batch(ell, rs, ths, u0s, T, glx, glw, fkind, kind, pars, tr, tth,
               tv, pyfunc, out):
    for i in range(len(rs)):
        out[i] = flow_integral(ell, rs[i], ths[i], u0s[i], T, glx, glw,
                               fkind, kind, pars, tr, tth, tv, pyfunc)
