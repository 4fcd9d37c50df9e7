"""Hot kernels: envelope hull, front-tracking engine, explicit viscous loop.

Plain Python so it runs without a compiler; ``_core.pxd`` adds C types and
Cython compiles the same source into an extension.  Two rules keep both
builds identical: no negative indexing (the extension disables wraparound)
and no ``math`` imports (floors go through ``_ifloor``).
"""
import numpy as np

# Event codes returned by Engine.integrate.
EV_NONE = 0
EV_COLLISION = 1
EV_VANISH = 2
EV_ADMISSIBILITY = 3
EV_MERGE = 4
# Error codes.
ERR_WIDTH = -1
ERR_NONFINITE = -2
ERR_CAP = -3
# Factor on the erosion rate of maxima when the mutation hook is on.
MUTATION_RATE = 2.0

# Event-function families (offsets inside the function list).
_FN_GAP = 0
_FN_STRENGTH = 1
_FN_LIU = 2
_FN_KINK = 3


def _ifloor(x):
    i = int(x)
    if i > x:
        i -= 1
    return i


def _iceil(x):
    i = int(x)
    if i < x:
        i += 1
    return i


def table_eval(tab, jmin, scale, u):
    """Affine interpolation of a flux table; exact at nodes."""
    s = u * scale
    k = _ifloor(s) - jmin
    n = tab.shape[0]
    if k < 0:
        k = 0
    if k > n - 2:
        k = n - 2
    t = s - (k + jmin)
    return (1.0 - t) * tab[k] + t * tab[k + 1]


def chord(tab, jmin, scale, a, b):
    """Rankine-Hugoniot slope; the exact cell slope when a and b share a cell."""
    lo = a
    hi = b
    if b < a:
        lo = b
        hi = a
    k = _ifloor(lo * scale)
    if hi * scale <= k + 1:
        n = tab.shape[0]
        i = k - jmin
        if i < 0:
            i = 0
        if i > n - 2:
            i = n - 2
        return (tab[i + 1] - tab[i]) * scale
    return (table_eval(tab, jmin, scale, b) - table_eval(tab, jmin, scale, a)) / (b - a)


def _hull(tab, jmin, scale, a, b, upper, sigma, stol, out_u, out_f):
    """Vertices of the convex minorant (or concave majorant) between a and b.

    Written to ``out_u`` in spatial order: ascending from a for a < b,
    descending from a for a > b.  Returns the vertex count.
    """
    lo = a
    hi = b
    if b < a:
        lo = b
        hi = a
    j0 = _ifloor(lo * scale) + 1
    j1 = _iceil(hi * scale) - 1
    nin = j1 - j0 + 1
    if nin < 0:
        nin = 0
    m = 0
    for idx in range(nin + 2):
        if idx == 0:
            u = lo
            fu = table_eval(tab, jmin, scale, lo)
        elif idx == nin + 1:
            u = hi
            fu = table_eval(tab, jmin, scale, hi)
        else:
            j = j0 + idx - 1
            u = j / scale
            if u - lo <= sigma or hi - u <= sigma:
                continue
            fu = tab[j - jmin]
        while m >= 2:
            s1 = (out_f[m - 1] - out_f[m - 2]) / (out_u[m - 1] - out_u[m - 2])
            s2 = (fu - out_f[m - 1]) / (u - out_u[m - 1])
            if upper:
                if s1 <= s2 + stol:
                    m -= 1
                else:
                    break
            else:
                if s1 >= s2 - stol:
                    m -= 1
                else:
                    break
        out_u[m] = u
        out_f[m] = fu
        m += 1
    if b < a:
        i = 0
        k = m - 1
        while i < k:
            tmp = out_u[i]
            out_u[i] = out_u[k]
            out_u[k] = tmp
            i += 1
            k -= 1
    return m


def envelope_states(tab, jmin, scale, a, b, upper, sigma, stol, out):
    """Python entry to the hull: vertex states between a and b in spatial order."""
    work = np.empty(out.shape[0])
    return _hull(tab, jmin, scale, a, b, upper, sigma, stol, out, work)


def _grow_f(arr, n):
    new = np.zeros(n)
    new[:arr.shape[0]] = arr
    return new


def _grow_i(arr, n):
    new = np.zeros(n, dtype=np.int64)
    new[:arr.shape[0]] = arr
    return new


class Engine:
    """Front-tracking state with plateau ODEs and event detection.

    Fronts ``0..n-1`` sit at ``x``; cell ``k`` lies left of front ``k`` and
    cell ``k+1`` right of it.  On a line there are ``n+1`` cells and the two
    outer ones are the zero state.  Periodic states have ``n`` cells and
    cell ``n`` is cell ``0``.  Only plateau values and plateau-bounding
    fronts are integrated; every other front moves at a frozen speed.
    """

    def __init__(self, ftab, gtab, jmin, nu, periodic, sigma, tol_t, lam, maxgap):
        self.ftab = np.array(ftab, dtype=np.float64)
        self.gtab = np.array(gtab, dtype=np.float64)
        self.jmin = jmin
        self.nu = nu
        self.scale = 2.0 ** nu
        self.periodic = periodic
        self.period = 1.0
        self.sigma = sigma
        self.tol_t = tol_t
        self.tol_x = 1e-10
        self.probe = 10.0 * tol_t
        self.lam = lam
        self.maxgap = maxgap
        self.c_step = 0.01
        sl = 0.0
        for k in range(self.ftab.shape[0] - 1):
            d = abs(self.ftab[k + 1] - self.ftab[k]) * self.scale
            if d > sl:
                sl = d
            d = abs(self.gtab[k + 1] - self.gtab[k]) * self.scale
            if d > sl:
                sl = d
        if sl < 1.0:
            sl = 1.0
        self.stol = 1e-12 * sl
        self.liu_tol = 4.0 * self.stol
        self.mutate = False
        self.record = False
        self.t = 0.0
        self.ta = 0.0
        self.n = 0
        self.ncell = 1
        self.m = 0
        self.np_ = 0
        self.nd = 0
        self.ng = 0
        self.nfun = 0
        self.cap = 0
        self.ev_kind = 0
        self.ev_fn = -1
        self.ev_front = -1
        self.ev_pos = 0.0
        self.t_lin = 0.0
        self.lin_k = -1
        self.n_restart = 0
        self.n_collision = 0
        self.n_vanish = 0
        self.n_admissibility = 0
        self.n_merge = 0
        self.n_steps = 0
        self.n_kinks = 0
        self.max_fronts = 0
        self.hlen = 0
        self.hcap = 0
        self.h_t = np.zeros(0)
        self.h_kind = np.zeros(0, dtype=np.int64)
        self.h_n = np.zeros(0, dtype=np.int64)
        self.h_np = np.zeros(0, dtype=np.int64)
        self.h_tv = np.zeros(0)
        self.h_linf = np.zeros(0)
        self.h_pos = np.zeros(0)
        self.h_neg = np.zeros(0)
        self.h_minw = np.zeros(0)
        nt = self.ftab.shape[0] + 4
        self.su = np.zeros(nt)
        self.sf = np.zeros(nt)
        self.x = np.zeros(0)
        self.spd = np.zeros(0)
        self.fam = np.zeros(0, dtype=np.int64)
        self.cv = np.zeros(0)
        self.kind = np.zeros(0, dtype=np.int64)
        self.jx = np.zeros(0)
        self.jw = np.zeros(0)
        self.pcell = np.zeros(0, dtype=np.int64)
        self.plf = np.zeros(0, dtype=np.int64)
        self.prf = np.zeros(0, dtype=np.int64)
        self.pslot = np.zeros(0, dtype=np.int64)
        self.dslot = np.zeros(0, dtype=np.int64)
        self.dfront = np.zeros(0, dtype=np.int64)
        self.gpair = np.zeros(0, dtype=np.int64)
        self.ktarget = np.zeros(0)
        self.liu0 = np.zeros(0)
        self.trig = np.zeros(0, dtype=np.int64)
        self.uf = np.zeros(0, dtype=np.int64)
        self.wv = np.zeros(0)
        self.gw = np.zeros(0)
        self.gs = np.zeros(0)
        self.gpw = np.zeros(0)
        self.gps = np.zeros(0)
        self.ginf = np.zeros(0, dtype=np.int64)
        self.gcnt = np.zeros(0, dtype=np.int64)
        self.gnst = np.zeros(0, dtype=np.int64)
        self.y = np.zeros(0)
        self.y1 = np.zeros(0)
        self.yt = np.zeros(0)
        self.k1 = np.zeros(0)
        self.k2 = np.zeros(0)
        self.k3 = np.zeros(0)
        self.k4 = np.zeros(0)
        self.ecur = np.zeros(0)
        self.enew = np.zeros(0)
        self._ensure(16)

    # -- storage ---------------------------------------------------------

    def _ensure(self, need):
        if need <= self.cap:
            return
        c = 2 * self.cap
        if c < need:
            c = need
        c1 = c + 1
        self.x = _grow_f(self.x, c)
        self.spd = _grow_f(self.spd, c)
        self.fam = _grow_i(self.fam, c)
        self.cv = _grow_f(self.cv, c1)
        self.kind = _grow_i(self.kind, c1)
        self.jx = _grow_f(self.jx, c)
        self.jw = _grow_f(self.jw, c1)
        self.pcell = np.zeros(c1, dtype=np.int64)
        self.plf = np.zeros(c1, dtype=np.int64)
        self.prf = np.zeros(c1, dtype=np.int64)
        self.pslot = np.zeros(c1, dtype=np.int64)
        self.dslot = np.zeros(c1, dtype=np.int64)
        self.dfront = np.zeros(c1, dtype=np.int64)
        self.gpair = np.zeros(c1, dtype=np.int64)
        self.ktarget = np.zeros(c1)
        self.liu0 = np.zeros(c1)
        self.trig = np.zeros(c1, dtype=np.int64)
        self.uf = np.zeros(c1, dtype=np.int64)
        self.wv = np.zeros(c1)
        self.gw = np.zeros(c1)
        self.gs = np.zeros(c1)
        self.gpw = np.zeros(c1)
        self.gps = np.zeros(c1)
        self.ginf = np.zeros(c1, dtype=np.int64)
        self.gcnt = np.zeros(c1, dtype=np.int64)
        self.gnst = np.zeros(c1, dtype=np.int64)
        ny = 2 * c1
        self.y = np.zeros(ny)
        self.y1 = np.zeros(ny)
        self.yt = np.zeros(ny)
        self.k1 = np.zeros(ny)
        self.k2 = np.zeros(ny)
        self.k3 = np.zeros(ny)
        self.k4 = np.zeros(ny)
        self.ecur = np.zeros(4 * c1)
        self.enew = np.zeros(4 * c1)
        self.cap = c

    def _hist_push(self, kind):
        if self.hlen >= self.hcap:
            c = 2 * self.hcap
            if c < 64:
                c = 64
            self.h_t = _grow_f(self.h_t, c)
            self.h_kind = _grow_i(self.h_kind, c)
            self.h_n = _grow_i(self.h_n, c)
            self.h_np = _grow_i(self.h_np, c)
            self.h_tv = _grow_f(self.h_tv, c)
            self.h_linf = _grow_f(self.h_linf, c)
            self.h_pos = _grow_f(self.h_pos, c)
            self.h_neg = _grow_f(self.h_neg, c)
            self.h_minw = _grow_f(self.h_minw, c)
            self.hcap = c
        i = self.hlen
        self.h_t[i] = self.t
        self.h_kind[i] = kind
        self.h_n[i] = self.n
        self.h_np[i] = self.np_
        tv = 0.0
        linf = 0.0
        pos = 0.0
        neg = 0.0
        minw = -1.0
        for c in range(self.ncell):
            v = self.cv[c]
            if abs(v) > linf:
                linf = abs(v)
            if self.periodic or (c > 0 and c < self.n):
                w = self._width(c)
                if v > 0.0:
                    pos += v * w
                else:
                    neg -= v * w
                if self.kind[c] != 0 and (minw < 0.0 or w < minw):
                    minw = w
        for k in range(self.n):
            tv += abs(self._right(k) - self.cv[k])
        self.h_tv[i] = tv
        self.h_linf[i] = linf
        self.h_pos[i] = pos
        self.h_neg[i] = neg
        self.h_minw[i] = minw
        self.hlen = i + 1

    # -- small helpers ---------------------------------------------------

    def _right(self, k):
        if k + 1 < self.ncell:
            return self.cv[k + 1]
        return self.cv[0]

    def _width(self, c):
        if self.n == 0:
            return self.period
        if c > 0:
            return self.x[c] - self.x[c - 1]
        return self.x[0] + self.period - self.x[self.n - 1]

    def _flux(self, fam, u):
        if fam > 0:
            return table_eval(self.ftab, self.jmin, self.scale, u)
        return table_eval(self.gtab, self.jmin, self.scale, u)

    def _speed(self, fam, a, b):
        if fam > 0:
            return chord(self.ftab, self.jmin, self.scale, a, b)
        return chord(self.gtab, self.jmin, self.scale, a, b)

    def _gap(self, u):
        return table_eval(self.gtab, self.jmin, self.scale, u) - table_eval(self.ftab, self.jmin, self.scale, u)

    def _liu_margin(self, fam, a, b):
        """min over interior nodes of chord(a, node) - chord(a, b); large if none."""
        lo = a
        hi = b
        if b < a:
            lo = b
            hi = a
        j0 = _ifloor(lo * self.scale) + 1
        j1 = _iceil(hi * self.scale) - 1
        out = 1e300
        if j1 < j0:
            return out
        tab = self.ftab
        if fam < 0:
            tab = self.gtab
        fa = table_eval(tab, self.jmin, self.scale, a)
        s = (table_eval(tab, self.jmin, self.scale, b) - fa) / (b - a)
        for j in range(j0, j1 + 1):
            u = j / self.scale
            if u - lo <= self.sigma or hi - u <= self.sigma:
                continue
            d = (tab[j - self.jmin] - fa) / (u - a) - s
            if d < out:
                out = d
        return out

    # -- profile <-> fronts ----------------------------------------------

    def load(self, px, pw, m):
        """Start from a jump list: ``px[i]`` positions, ``pw[i]`` value left of jump i."""
        self._ensure(m + 2)
        for i in range(m):
            self.jx[i] = px[i]
        nv = m
        if not self.periodic:
            nv = m + 1
        for i in range(nv):
            self.jw[i] = pw[i]
        self.m = m
        self._reinit()
        if self.record:
            self._hist_push(0)

    def _push_fan(self, pos, a, b, last):
        """Append the fan of the jump a -> b at pos; writes right-cell values."""
        need = self.n + self.ftab.shape[0] + 4
        if need > self.cap:
            self._ensure(need)
        upper = b < a
        tab = self.ftab
        fam = 1
        if upper:
            tab = self.gtab
            fam = -1
        r = _hull(tab, self.jmin, self.scale, a, b, upper, self.sigma, self.stol, self.su, self.sf)
        for q in range(r - 1):
            k = self.n
            self.x[k] = pos
            self.fam[k] = fam
            self.spd[k] = self._speed(fam, self.su[q], self.su[q + 1])
            if q < r - 2 or not last:
                self.cv[k + 1] = self.su[q + 1]
            self.n = k + 1

    def _reinit(self):
        m = self.m
        self.n = 0
        self.cv[0] = self.jw[0]
        for i in range(m):
            a = self.jw[i]
            if i + 1 < m or not self.periodic:
                b = self.jw[i + 1]
            else:
                b = self.jw[0]
            self._push_fan(self.jx[i], a, b, self.periodic and i == m - 1)
        if self.periodic:
            self.ncell = self.n
            if self.n == 0:
                self.ncell = 1
        else:
            self.ncell = self.n + 1
        if self.n > self.max_fronts:
            self.max_fronts = self.n
        self._classify()
        self.ta = self.t
        self._setup_dynamic()

    def _classify(self):
        n = self.n
        for c in range(self.ncell):
            self.kind[c] = 0
        if n < 2:
            return
        for c in range(self.ncell):
            if not self.periodic and (c == 0 or c == n):
                continue
            v = self.cv[c]
            if c > 0:
                vl = self.cv[c - 1]
            else:
                vl = self.cv[self.ncell - 1]
            if c + 1 < self.ncell:
                vr = self.cv[c + 1]
            else:
                vr = self.cv[0]
            if v > vl and v > vr:
                self.kind[c] = 1
            elif v < vl and v < vr:
                self.kind[c] = -1

    def _setup_dynamic(self):
        n = self.n
        for k in range(n):
            self.dslot[k] = -1
        for c in range(self.ncell):
            self.pslot[c] = -1
        P = 0
        for c in range(self.ncell):
            if self.kind[c] != 0:
                self.pcell[P] = c
                self.pslot[c] = P
                if c > 0:
                    self.plf[P] = c - 1
                else:
                    self.plf[P] = n - 1
                self.prf[P] = c
                self.dslot[self.plf[P]] = 0
                self.dslot[c] = 0
                P += 1
        self.np_ = P
        D = 0
        for k in range(n):
            if self.dslot[k] >= 0:
                self.dslot[k] = D
                self.dfront[D] = k
                D += 1
        self.nd = D
        for p in range(P):
            c = self.pcell[p]
            self.y[p] = self.cv[c]
            self._set_kink(p)
        for d in range(D):
            k = self.dfront[d]
            self.y[P + d] = self.x[k]
            mg = self._liu_margin(self.fam[k], self.cv[k], self._right(k))
            if mg > 0.0:
                mg = 0.0
            self.liu0[d] = mg
        G = 0
        self.t_lin = 1e300
        self.lin_k = -1
        npair = n - 1
        if self.periodic:
            npair = n
            if n < 2:
                npair = 0
        for k in range(npair):
            k2 = k + 1
            if k2 == n:
                k2 = 0
            if self.dslot[k] >= 0 or self.dslot[k2] >= 0:
                self.gpair[G] = k
                G += 1
            else:
                rel = self.spd[k] - self.spd[k2]
                if rel > 0.0:
                    gap = self.x[k2] - self.x[k]
                    if k2 == 0:
                        gap += self.period
                    tc = self.t + gap / rel
                    if tc < self.t_lin:
                        self.t_lin = tc
                        self.lin_k = k
        self.ng = G
        self.nfun = G + 2 * D + P
        self._eval_all(self.y, 0.0, self.ecur)

    def _set_kink(self, p):
        u = self.y[p]
        if self.kind[self.pcell[p]] > 0:
            self.ktarget[p] = (_iceil(u * self.scale) - 1) / self.scale
        else:
            self.ktarget[p] = (_ifloor(u * self.scale) + 1) / self.scale

    # -- ODE system -------------------------------------------------------

    def _val(self, c, yv):
        p = self.pslot[c]
        if p >= 0:
            return yv[p]
        return self.cv[c]

    def _pos(self, k, yv, dt):
        d = self.dslot[k]
        if d >= 0:
            return yv[self.np_ + d]
        return self.x[k] + self.spd[k] * (self.t - self.ta + dt)

    def _rhs(self, yv, dy):
        P = self.np_
        for p in range(P):
            c = self.pcell[p]
            xl = yv[P + self.dslot[self.plf[p]]]
            xr = yv[P + self.dslot[self.prf[p]]]
            w = xr - xl
            if c == 0:
                w += self.period
            g = self._gap(yv[p])
            if self.kind[c] > 0:
                dy[p] = -g / w
                if self.mutate:
                    # test hook: maxima erode at a wrong rate
                    dy[p] = MUTATION_RATE * dy[p]
            else:
                dy[p] = g / w
        for d in range(self.nd):
            k = self.dfront[d]
            c2 = k + 1
            if c2 == self.ncell:
                c2 = 0
            dy[P + d] = self._speed(self.fam[k], self._val(k, yv), self._val(c2, yv))

    def _rk4(self, h, y0, out):
        N = self.np_ + self.nd
        self._rhs(y0, self.k1)
        for i in range(N):
            self.yt[i] = y0[i] + 0.5 * h * self.k1[i]
        self._rhs(self.yt, self.k2)
        for i in range(N):
            self.yt[i] = y0[i] + 0.5 * h * self.k2[i]
        self._rhs(self.yt, self.k3)
        for i in range(N):
            self.yt[i] = y0[i] + h * self.k3[i]
        self._rhs(self.yt, self.k4)
        for i in range(N):
            out[i] = y0[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i])

    def _min_width(self, yv):
        P = self.np_
        out = 1e300
        for p in range(P):
            xl = yv[P + self.dslot[self.plf[p]]]
            xr = yv[P + self.dslot[self.prf[p]]]
            w = xr - xl
            if self.pcell[p] == 0:
                w += self.period
            if w < out:
                out = w
        return out

    # -- event functions ----------------------------------------------------

    def _fn_family(self, i):
        if i < self.ng:
            return _FN_GAP
        i -= self.ng
        if i < self.nd:
            return _FN_STRENGTH
        i -= self.nd
        if i < self.nd:
            return _FN_LIU
        return _FN_KINK

    def _eval_fn(self, i, yv, dt):
        P = self.np_
        if i < self.ng:
            k = self.gpair[i]
            k2 = k + 1
            if k2 == self.n:
                k2 = 0
            gap = self._pos(k2, yv, dt) - self._pos(k, yv, dt)
            if k2 == 0:
                gap += self.period
            return gap
        i -= self.ng
        if i < self.nd:
            k = self.dfront[i]
            c2 = k + 1
            if c2 == self.ncell:
                c2 = 0
            return self.fam[k] * (self._val(c2, yv) - self._val(k, yv)) - self.sigma
        i -= self.nd
        if i < self.nd:
            k = self.dfront[i]
            c2 = k + 1
            if c2 == self.ncell:
                c2 = 0
            mg = self._liu_margin(self.fam[k], self._val(k, yv), self._val(c2, yv))
            return mg - self.liu0[i] + self.liu_tol
        i -= self.nd
        c = self.pcell[i]
        return self.kind[c] * (yv[i] - self.ktarget[i])

    def _eval_all(self, yv, dt, out):
        for i in range(self.nfun):
            out[i] = self._eval_fn(i, yv, dt)

    def _crossed(self, i):
        e1 = self.enew[i]
        if e1 > 0.0:
            return False
        if self.ecur[i] > 0.0:
            return True
        return e1 < 0.0

    def _root(self, i, h):
        """Earliest s in (0, h] with fn_i <= 0 along the RK4 step, bracketed to tol_t."""
        a = 0.0
        ea = self.ecur[i]
        b = h
        eb = self.enew[i]
        if ea <= 0.0:
            s = 0.5 * h
            found = False
            for it in range(60):
                self._rk4(s, self.y, self.y1)
                e = self._eval_fn(i, self.y1, s)
                if e > 0.0:
                    a = s
                    ea = e
                    found = True
                    break
                b = s
                eb = e
                s = 0.5 * s
            if not found:
                return b
        side = 0
        width = b - a
        for it in range(200):
            if b - a <= self.tol_t:
                break
            if it % 2 == 1 and b - a > 0.5 * width:
                s = 0.5 * (a + b)
            else:
                s = (a * eb - b * ea) / (eb - ea)
                if not (s > a and s < b):
                    s = 0.5 * (a + b)
            if it % 2 == 1:
                width = b - a
            self._rk4(s, self.y, self.y1)
            e = self._eval_fn(i, self.y1, s)
            if e <= 0.0:
                b = s
                eb = e
                if side == -1:
                    ea *= 0.5
                side = -1
            else:
                a = s
                ea = e
                if side == 1:
                    eb *= 0.5
                side = 1
        return b

    # -- integration ------------------------------------------------------

    def _writeback(self):
        P = self.np_
        dt = self.t - self.ta
        for k in range(self.n):
            d = self.dslot[k]
            if d >= 0:
                self.x[k] = self.y[P + d]
            else:
                self.x[k] = self.x[k] + self.spd[k] * dt
        for p in range(P):
            self.cv[self.pcell[p]] = self.y[p]
        self.ta = self.t

    def integrate(self, t_stop, detect):
        """Advance to ``t_stop`` or, with ``detect``, to the first restart event.

        Returns 0 when ``t_stop`` is reached, an EV_* code at an event, or a
        negative error code.  The state is written back to ``x``/``cv``.
        """
        while True:
            if self.t >= t_stop:
                self._writeback()
                return EV_NONE
            t_end = t_stop
            lin = False
            if detect and self.t_lin <= t_end:
                t_end = self.t_lin
                lin = True
            h = t_end - self.t
            if self.np_ > 0:
                w = self._min_width(self.y)
                if not (w > 0.0):
                    self._writeback()
                    return ERR_WIDTH
                sc = self.lam
                if self.maxgap > sc:
                    sc = self.maxgap
                if sc < 1.0:
                    sc = 1.0
                hb = self.c_step * w / sc
                if hb < h:
                    h = hb
                    lin = False
            if h < 0.0:
                h = 0.0
            if self.nfun == 0 or self.np_ == 0:
                # nothing dynamic: frozen fronts only
                self.t += h
                if lin:
                    self._writeback()
                    self.ev_kind = EV_COLLISION
                    self.ev_fn = -1
                    self.ev_front = self.lin_k
                    self.ev_pos = self.x[self.lin_k]
                    return EV_COLLISION
                continue
            self._rk4(h, self.y, self.y1)
            self.n_steps += 1
            for i in range(self.np_ + self.nd):
                if not (self.y1[i] == self.y1[i]) or abs(self.y1[i]) > 1e300:
                    self._writeback()
                    return ERR_NONFINITE
            self._eval_all(self.y1, h, self.enew)
            best = -1
            sbest = h
            for i in range(self.nfun):
                if not self._crossed(i):
                    continue
                fam = self._fn_family(i)
                if fam != _FN_KINK and not detect:
                    continue
                s = self._root(i, h)
                if best < 0 or s < sbest:
                    best = i
                    sbest = s
            if best < 0:
                N = self.np_ + self.nd
                for i in range(N):
                    self.y[i] = self.y1[i]
                for i in range(self.nfun):
                    self.ecur[i] = self.enew[i]
                self.t += h
                if lin:
                    self._writeback()
                    self.ev_kind = EV_COLLISION
                    self.ev_fn = -1
                    self.ev_front = self.lin_k
                    self.ev_pos = self.x[self.lin_k]
                    return EV_COLLISION
                continue
            # move to the localized crossing
            self._rk4(sbest, self.y, self.y1)
            N = self.np_ + self.nd
            for i in range(N):
                self.y[i] = self.y1[i]
            self.t += sbest
            self._eval_all(self.y, 0.0, self.enew)
            evi = -1
            if detect:
                if self._fn_family(best) != _FN_KINK:
                    evi = best
                else:
                    for i in range(self.nfun):
                        if self._fn_family(i) != _FN_KINK and self.enew[i] <= 0.0:
                            evi = i
                            break
            if evi >= 0:
                self._writeback()
                self._mark_event(evi)
                return self.ev_kind
            # kink only: refresh pieces and continue
            for p in range(self.np_):
                fi = self.ng + 2 * self.nd + p
                if self.enew[fi] <= 0.0:
                    self._set_kink(p)
                    self.n_kinks += 1
            self._eval_all(self.y, 0.0, self.ecur)

    def _mark_event(self, best):
        """Classify the event at the current time and flag vanishing fronts."""
        n = self.n
        for k in range(n):
            self.trig[k] = 0
        fam = self._fn_family(best)
        # strengths at the event and a hair later: near-simultaneous vanishings
        self._rk4(self.probe, self.y, self.y1)
        for d in range(self.nd):
            fi = self.ng + d
            k = self.dfront[d]
            e0 = self._eval_fn(fi, self.y, 0.0)
            e1 = self._eval_fn(fi, self.y1, self.probe)
            if e0 <= 0.0 or e1 <= 0.0:
                self.trig[k] = 1
        self.ev_fn = best
        self.ev_front = -1
        if fam == _FN_GAP:
            self.ev_kind = EV_COLLISION
            self.ev_front = self.gpair[best]
        elif fam == _FN_LIU:
            self.ev_kind = EV_ADMISSIBILITY
            self.ev_front = self.dfront[best - self.ng - self.nd]
        else:
            k = self.dfront[best - self.ng]
            self.ev_front = k
            self.ev_kind = EV_MERGE
            for p in range(self.np_):
                if self.trig[self.plf[p]] and self.trig[self.prf[p]]:
                    self.ev_kind = EV_VANISH
        if self.ev_front >= 0:
            self.ev_pos = self.x[self.ev_front]

    def clear_triggers(self):
        for k in range(self.n):
            self.trig[k] = 0

    def restart(self):
        """Snapshot (with the flagged merges) and re-solve every jump."""
        kind = self.ev_kind
        self.m = self._snapshot(True)
        self._reinit()
        self.n_restart += 1
        if kind == EV_COLLISION:
            self.n_collision += 1
        elif kind == EV_VANISH:
            self.n_vanish += 1
        elif kind == EV_ADMISSIBILITY:
            self.n_admissibility += 1
        elif kind == EV_MERGE:
            self.n_merge += 1
        if self.record:
            self._hist_push(kind)
        self.ev_kind = EV_NONE
        for k in range(self.n):
            self.trig[k] = 0

    def evolve(self, t_stop, cap):
        """Alternate integration and restarts up to ``t_stop``."""
        while True:
            code = self.integrate(t_stop, True)
            if code == EV_NONE:
                return EV_NONE
            if code < 0:
                return code
            if self.n_restart >= cap:
                return ERR_CAP
            self.restart()

    # -- snapshot ---------------------------------------------------------

    def _find(self, c):
        while self.uf[c] != c:
            self.uf[c] = self.uf[self.uf[c]]
            c = self.uf[c]
        return c

    def _snapshot(self, merge):
        """Clean jump list into jx/jw; returns the jump count.

        With ``merge``, cells joined by flagged vanishing fronts get one common
        value: the outer zero state if the group touches it, else the
        width-weighted mean of its static cells, else of its plateau cells.
        """
        n = self.n
        nc = self.ncell
        for c in range(nc):
            self.wv[c] = self.cv[c]
        if merge and n > 0:
            anyt = False
            for c in range(nc):
                self.uf[c] = c
            for k in range(n):
                if self.trig[k]:
                    c2 = k + 1
                    if c2 == nc:
                        c2 = 0
                    r1 = self._find(k)
                    r2 = self._find(c2)
                    if r1 < r2:
                        self.uf[r2] = r1
                    elif r2 < r1:
                        self.uf[r1] = r2
                    anyt = True
            if anyt:
                self._merge_groups()
        if not self.periodic:
            return self._snap_line()
        return self._snap_periodic()

    def _merge_groups(self):
        n = self.n
        nc = self.ncell
        for c in range(nc):
            self.gw[c] = 0.0
            self.gs[c] = 0.0
            self.gpw[c] = 0.0
            self.gps[c] = 0.0
            self.ginf[c] = 0
            self.gcnt[c] = 0
            self.gnst[c] = 0
        for c in range(nc):
            r = self._find(c)
            self.gcnt[r] += 1
            if not self.periodic and (c == 0 or c == n):
                self.ginf[r] = 1
                self.gs[r] = self.cv[c]
                continue
            w = self._width(c)
            if w < 0.0:
                w = 0.0
            if self.kind[c] != 0:
                self.gpw[r] += w
                self.gps[r] += w * self.cv[c]
            elif self.ginf[r] == 0:
                self.gnst[r] += 1
                self.gw[r] += w
                self.gs[r] += w * self.cv[c]
        for c in range(nc):
            r = self._find(c)
            if self.gcnt[r] <= 1:
                continue
            if self.ginf[r]:
                self.wv[c] = self.gs[r]
            elif self.gnst[r] > 0:
                if self.gw[r] > 0.0:
                    self.wv[c] = self.gs[r] / self.gw[r]
                else:
                    self.wv[c] = self._static_mean(r)
            elif self.gpw[r] > 0.0:
                self.wv[c] = self.gps[r] / self.gpw[r]

    def _static_mean(self, r):
        s = 0.0
        cnt = 0
        for c in range(self.ncell):
            if self._find(c) == r and self.kind[c] == 0:
                s += self.cv[c]
                cnt += 1
        return s / cnt

    def _snap_line(self):
        n = self.n
        m = 0
        cur = self.wv[0]
        self.jw[0] = cur
        pend = -1
        for k in range(n):
            if pend < 0:
                pend = k
            c = k + 1
            if c < n and self.x[c] - self.x[c - 1] <= self.tol_x:
                continue
            v = self.wv[c]
            if abs(v - cur) > self.sigma:
                self.jx[m] = self.x[pend]
                m += 1
                self.jw[m] = v
                cur = v
            pend = -1
        self.jw[m] = 0.0
        return m

    def _snap_periodic(self):
        n = self.n
        if n == 0:
            self.jw[0] = self.cv[0]
            return 0
        s0 = 0
        wbest = -1.0
        for c in range(n):
            w = self._width(c)
            if w > wbest:
                wbest = w
                s0 = c
        m = 0
        cur = self.wv[s0]
        self.jw[0] = cur
        pend = 0.0
        have = False
        for i in range(n):
            k = s0 + i
            if k >= n:
                k -= n
            if not have:
                pend = self.x[k]
                have = True
            c = k + 1
            if c == n:
                c = 0
            if c == s0:
                if abs(self.wv[s0] - cur) > self.sigma:
                    self.jx[m] = pend
                    m += 1
                break
            if self._width(c) <= self.tol_x:
                continue
            v = self.wv[c]
            if abs(v - cur) > self.sigma:
                self.jx[m] = pend
                m += 1
                self.jw[m] = v
                cur = v
            have = False
        if m < 2:
            self.jw[0] = self.wv[s0]
            return 0
        # reduce each position into [0, period) once, then rotate to ascending order
        for i in range(m):
            v = self.jx[i]
            if v < 0.0 or v >= self.period:
                v -= _ifloor(v / self.period) * self.period
                if v >= self.period:
                    v -= self.period
            self.jx[i] = v
        r = m
        for i in range(1, m):
            if self.jx[i] < self.jx[i - 1]:
                r = i
                break
        if r < m:
            for i in range(m):
                self.gw[i] = self.jx[i]
                self.gs[i] = self.jw[i]
            for i in range(m):
                j = r + i
                if j >= m:
                    j -= m
                self.jx[i] = self.gw[j]
                self.jw[i] = self.gs[j]
        return m

    def snapshot(self, px, pw):
        """Current profile as a jump list (no forced merges); returns the count."""
        m = self._snapshot(False)
        nv = m
        if not self.periodic:
            nv = m + 1
        for i in range(m):
            px[i] = self.jx[i]
        for i in range(nv):
            pw[i] = self.jw[i]
        if self.periodic and m == 0:
            pw[0] = self.jw[0]
        return m

    def copy(self):
        """Independent engine in the same state; integrates identically."""
        other = Engine(self.ftab, self.gtab, self.jmin, self.nu, self.periodic,
                       self.sigma, self.tol_t, self.lam, self.maxgap)
        other.c_step = self.c_step
        other.stol = self.stol
        other.liu_tol = self.liu_tol
        other.tol_x = self.tol_x
        other.probe = self.probe
        other.mutate = self.mutate
        other._ensure(self.cap)
        other.t = self.t
        other.n = self.n
        other.ncell = self.ncell
        other.m = self.m
        for k in range(self.n):
            other.x[k] = self.x[k]
            other.spd[k] = self.spd[k]
            other.fam[k] = self.fam[k]
        for c in range(self.ncell):
            other.cv[c] = self.cv[c]
            other.kind[c] = self.kind[c]
        other.ta = self.t
        other._setup_dynamic()
        for d in range(self.nd):
            other.liu0[d] = self.liu0[d]
        for p in range(self.np_):
            other.ktarget[p] = self.ktarget[p]
        other._eval_all(other.y, 0.0, other.ecur)
        other.n_restart = self.n_restart
        return other


# -- viscous kernel ----------------------------------------------------------

# Polynomial fluxes are passed as 5 ascending coefficients (degree <= 4).
VISC_NCOEF = 5


def _iface(a, b, r, cd, inv, deg, f0, f1, f2, f3, f4, g0, g1, g2, g3, g4):
    s = (b - a) * inv
    if s > 1.0:
        s = 1.0
    elif s < -1.0:
        s = -1.0
    th = 0.5 + 0.75 * (s - s * s * s / 3.0)
    if deg == 0:
        fv = f0
        gv = g0
    else:
        ub = 0.5 * (a + b)
        if deg <= 2:
            fv = (f2 * ub + f1) * ub + f0
            gv = (g2 * ub + g1) * ub + g0
        else:
            fv = (((f4 * ub + f3) * ub + f2) * ub + f1) * ub + f0
            gv = (((g4 * ub + g3) * ub + g2) * ub + g1) * ub + g0
    return r * (th * fv + (1.0 - th) * gv) - cd * (b - a)


def visc_steps(u, lo, nsteps, dt, dx, eps, delta, fc, gc):
    """Run ``nsteps`` explicit steps in place on a periodic grid.

    The total flux through interface j+1/2 (advective minus diffusive) is
    subtracted from cell j and added to cell j+1.  Increments are
    accumulated with compensated summation (``lo`` keeps the lost low-order
    bits), so the cell sum is conserved to the rounding of the increments.
    Both arrays must be contiguous.  Returns ``nsteps``, or -(step+1) when a
    probe finds a non-finite value (probes run every 4096 steps and after
    the last one).
    """
    n = u.shape[0]
    r = dt / dx
    cd = delta * dt / (dx * dx)
    inv = 1.0 / (eps * dx)
    f0 = fc[0]
    f1 = fc[1]
    f2 = fc[2]
    f3 = fc[3]
    f4 = fc[4]
    g0 = gc[0]
    g1 = gc[1]
    g2 = gc[2]
    g3 = gc[3]
    g4 = gc[4]
    deg = 0
    for j in range(1, 5):
        if fc[j] != 0.0 or gc[j] != 0.0:
            deg = j
    for it in range(nsteps):
        # one fused pass: interface j+1/2 is computed before u[j] changes
        last = _iface(u[n - 1], u[0], r, cd, inv, deg, f0, f1, f2, f3, f4, g0, g1, g2, g3, g4)
        prev = last
        for j in range(n - 1):
            ph = _iface(u[j], u[j + 1], r, cd, inv, deg, f0, f1, f2, f3, f4, g0, g1, g2, g3, g4)
            yv = (prev - ph) - lo[j]
            tv = u[j] + yv
            lo[j] = (tv - u[j]) - yv
            u[j] = tv
            prev = ph
        yv = (prev - last) - lo[n - 1]
        tv = u[n - 1] + yv
        lo[n - 1] = (tv - u[n - 1]) - yv
        u[n - 1] = tv
        # periodic finiteness probe, plus one after the last step
        if it % 4096 == 4095 or it == nsteps - 1:
            acc = 0.0
            for j in range(n):
                acc += u[j]
            if not (acc == acc) or abs(acc) > 1e300:
                return -(it + 1)
    return nsteps
