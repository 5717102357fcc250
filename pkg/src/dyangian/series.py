"""Exact truncated iterated-Laurent series over Q.

Series live in a fixed Context: an ordered tuple of spectral variable names
(dominance order, most dominant first) plus the deformation parameter h,
which is always present and always truncated at order H.  Coefficients are
Fractions, TensorMatrix values, or vacuum-module states; the arithmetic here
only needs +, * and truthiness from them.

Every series carries an honest validity window.  Per spectral variable the
window is a 4-tuple (lo, hi, lo_hard, hi_hard): a hard bound means the true
series has no support beyond it (so coefficients past it are known to be
zero), a soft bound means knowledge simply stops there.  Products combine
windows so that a stored coefficient is always the true coefficient of the
expansion: e.g. with hard lows the certified high is min(hi_a+lo_b,
hi_b+lo_a).  The h-exponent is always >= 0 and certified up to h_valid
(h_valid can drop below the context H after dividing by h).
"""

from fractions import Fraction
from math import inf

ZERO = Fraction(0)
ONE = Fraction(1)


class WindowError(Exception):
    """Operands' windows leave no certifiable region, or orders mismatch."""


class OutOfWindowError(Exception):
    """Queried monomial lies outside the certified window (unknown, not 0)."""


class ExpansionError(Exception):
    """Ill-posed geometric expansion (no dominant term to expand against)."""


class Context:
    """Ordered spectral variables (dominant first) and h-truncation order."""

    def __init__(self, names, H):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise WindowError("duplicate variable names: %r" % (names,))
        if "h" in names:
            raise WindowError("h is implicit and cannot be a spectral variable")
        if H < 1:
            raise WindowError("H must be >= 1")
        self.names = names
        self.H = H
        self.index = {n: i for i, n in enumerate(names)}
        self.n = len(names)

    def __eq__(self, other):
        return isinstance(other, Context) and self.names == other.names and self.H == other.H

    def __hash__(self):
        return hash((self.names, self.H))

    def __repr__(self):
        return "Context(%r, H=%d)" % (self.names, self.H)

    # -- constructors ----------------------------------------------------

    def zero(self, h_valid=None):
        return TruncatedSeries(self, _full_bounds(self.n), h_valid or self.H, {})

    def const(self, coeff, h_valid=None):
        s = self.zero(h_valid)
        if coeff:
            s.coeffs[(0,) * (self.n + 1)] = coeff
        return s

    def one(self, h_valid=None):
        return self.const(ONE, h_valid)

    def monomial(self, exps, h_exp, coeff, h_valid=None):
        """Single exact monomial; exps maps variable name -> exponent."""
        if h_exp < 0:
            raise WindowError("negative h exponent")
        bounds = []
        key = [0] * (self.n + 1)
        for i, name in enumerate(self.names):
            e = exps.get(name, 0)
            key[i] = e
            bounds.append((min(e, 0), max(e, 0), True, True))
        key[self.n] = h_exp
        h_valid = h_valid or self.H
        coeffs = {}
        if coeff and h_exp < h_valid:
            coeffs[tuple(key)] = coeff
        return TruncatedSeries(self, tuple(bounds), h_valid, coeffs)


def _full_bounds(n):
    return tuple((0, 0, True, True) for _ in range(n))


class AffineForm:
    """a1*x1 + ... + ak*xk + b*h + c with rational coefficients.

    The constant c is zero for every R-matrix / T-series argument in scope;
    it is only nonzero during fusion-procedure evaluations.
    """

    def __init__(self, terms=None, h=ZERO, const=ZERO):
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v}
        self.h = Fraction(h)
        self.const = Fraction(const)

    def __neg__(self):
        return AffineForm({k: -v for k, v in self.terms.items()}, -self.h, -self.const)

    def __add__(self, other):
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, ZERO) + v
        return AffineForm(terms, self.h + other.h, self.const + other.const)

    def shifted_h(self, dh):
        return AffineForm(self.terms, self.h + Fraction(dh), self.const)

    def dominant(self, ctx):
        """First context variable with a nonzero coefficient, or None."""
        for name in ctx.names:
            if name in self.terms:
                return name
        return None

    def __repr__(self):
        parts = ["%s*%s" % (v, k) for k, v in sorted(self.terms.items())]
        if self.h:
            parts.append("%s*h" % self.h)
        if self.const:
            parts.append(str(self.const))
        return " + ".join(parts) if parts else "0"


def var(name, coeff=1):
    return AffineForm({name: Fraction(coeff)})


def hterm(coeff):
    return AffineForm({}, h=Fraction(coeff))


# -- window algebra ------------------------------------------------------

def _kinterval(b):
    lo, hi, lo_hard, hi_hard = b
    return (-inf if lo_hard else lo, inf if hi_hard else hi)


def _sinterval(b):
    lo, hi, lo_hard, hi_hard = b
    return (lo if lo_hard else -inf, hi if hi_hard else inf)


def _encode(k_lo, k_hi, s_lo, s_hi):
    if k_lo > k_hi:
        raise WindowError("empty certified window")
    if s_lo > -inf and s_lo >= k_lo:
        lo, lo_hard = int(s_lo), True
    else:
        lo, lo_hard = int(k_lo), False
    if s_hi < inf and s_hi <= k_hi:
        hi, hi_hard = int(s_hi), True
    else:
        hi, hi_hard = int(k_hi), False
    return (lo, hi, lo_hard, hi_hard)


def _add_bound(a, b):
    ak, bk = _kinterval(a), _kinterval(b)
    asu, bs = _sinterval(a), _sinterval(b)
    return _encode(max(ak[0], bk[0]), min(ak[1], bk[1]),
                   min(asu[0], bs[0]), max(asu[1], bs[1]))


def _mul_bound(a, b):
    a_slo, a_shi = _sinterval(a)
    b_slo, b_shi = _sinterval(b)
    s_lo, s_hi = a_slo + b_slo, a_shi + b_shi
    # a coefficient of the product at exponent e is certified when every
    # split e = x + y with x in supp(a), y in supp(b) has x, y known
    cand1 = inf if a[3] else a[1] + b_slo
    cand2 = inf if b[3] else b[1] + a_slo
    k_hi = min(cand1, cand2)
    cand3 = -inf if a[2] else a[0] + b_shi
    cand4 = -inf if b[2] else b[0] + a_shi
    k_lo = max(cand3, cand4)
    return _encode(k_lo, k_hi, s_lo, s_hi)


def _in_bound(b, e):
    k_lo, k_hi = _kinterval(b)
    return k_lo <= e <= k_hi


class TruncatedSeries:
    __slots__ = ("ctx", "bounds", "h_valid", "coeffs")

    def __init__(self, ctx, bounds, h_valid, coeffs, normalize=True):
        self.ctx = ctx
        self.bounds = tuple(bounds)
        self.h_valid = min(h_valid, ctx.H)
        if normalize:
            coeffs = {k: c for k, c in coeffs.items()
                      if c and k[-1] < self.h_valid
                      and all(_in_bound(self.bounds[i], k[i]) for i in range(ctx.n))}
        self.coeffs = coeffs

    # -- bookkeeping ------------------------------------------------------

    def _check_ctx(self, other):
        if self.ctx != other.ctx:
            raise WindowError("mismatched variable order: %r vs %r"
                              % (self.ctx, other.ctx))

    def bound_of(self, name):
        return self.bounds[self.ctx.index[name]]

    def knowledge(self, name):
        return _kinterval(self.bound_of(name))

    def is_zero(self):
        return not self.coeffs

    def support_h_min(self):
        return min((k[-1] for k in self.coeffs), default=None)

    # -- ring operations --------------------------------------------------

    def __add__(self, other):
        self._check_ctx(other)
        bounds = tuple(_add_bound(a, b) for a, b in zip(self.bounds, other.bounds))
        h_valid = min(self.h_valid, other.h_valid)
        coeffs = dict(self.coeffs)
        for k, c in other.coeffs.items():
            s = coeffs.get(k)
            if s is None:
                coeffs[k] = c
            else:
                s = s + c
                if s:
                    coeffs[k] = s
                else:
                    del coeffs[k]
        return TruncatedSeries(self.ctx, bounds, h_valid, coeffs)

    def __sub__(self, other):
        return self + other.scaled(-1)

    def scaled(self, fr):
        """Scalar multiple; does not touch the window."""
        fr = Fraction(fr)
        if not fr:
            return TruncatedSeries(self.ctx, self.bounds, self.h_valid, {})
        return TruncatedSeries(self.ctx, self.bounds, self.h_valid,
                               {k: fr * c for k, c in self.coeffs.items()},
                               normalize=False)

    def __mul__(self, other):
        self._check_ctx(other)
        bounds = tuple(_mul_bound(a, b) for a, b in zip(self.bounds, other.bounds))
        h_valid = min(self.h_valid, other.h_valid)
        n = self.ctx.n
        ks = [_kinterval(b) for b in bounds]
        coeffs = {}
        for ka, ca in self.coeffs.items():
            for kb, cb in other.coeffs.items():
                he = ka[-1] + kb[-1]
                if he >= h_valid:
                    continue
                key = tuple(ka[i] + kb[i] for i in range(n)) + (he,)
                if any(not ks[i][0] <= key[i] <= ks[i][1] for i in range(n)):
                    continue
                c = ca * cb
                s = coeffs.get(key)
                if s is None:
                    coeffs[key] = c
                else:
                    coeffs[key] = s + c
        coeffs = {k: c for k, c in coeffs.items() if c}
        return TruncatedSeries(self.ctx, bounds, h_valid, coeffs, normalize=False)

    def pow(self, n):
        if n < 0:
            raise ValueError("use invert_unit / expand_affine_inverse for negative powers")
        out = self.ctx.one(self.h_valid)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    def mul_h(self, k=1):
        """Multiply by h^k (k >= 0)."""
        if k == 0:
            return self
        coeffs = {key[:-1] + (key[-1] + k,): c for key, c in self.coeffs.items()
                  if key[-1] + k < self.h_valid}
        return TruncatedSeries(self.ctx, self.bounds, self.h_valid, coeffs,
                               normalize=False)

    def divide_h(self, m):
        """Exact division by h^m; every certified monomial must carry h^m."""
        if m == 0:
            return self
        bad = [k for k in self.coeffs if k[-1] < m]
        if bad:
            raise ValueError("not divisible by h^%d, witness %r" % (m, bad[0]))
        coeffs = {key[:-1] + (key[-1] - m,): c for key, c in self.coeffs.items()}
        return TruncatedSeries(self.ctx, self.bounds, self.h_valid - m, coeffs,
                               normalize=False)

    # -- queries ----------------------------------------------------------

    def coefficient(self, exps, h_exp=0):
        """Certified coefficient at a monomial; raises when unknown."""
        key = [0] * (self.ctx.n + 1)
        for name, e in exps.items():
            key[self.ctx.index[name]] = e
        key[self.ctx.n] = h_exp
        if h_exp >= self.h_valid or h_exp < 0:
            raise OutOfWindowError("h^%d beyond certified order %d" % (h_exp, self.h_valid))
        for i in range(self.ctx.n):
            if not _in_bound(self.bounds[i], key[i]):
                raise OutOfWindowError("%s^%d outside window %r"
                                       % (self.ctx.names[i], key[i], self.bounds[i]))
        return self.coeffs.get(tuple(key), ZERO)

    def h_slice(self, h_exp):
        """Coefficient map of h^h_exp (monomial tuple without the h slot)."""
        if h_exp >= self.h_valid:
            raise OutOfWindowError("h^%d beyond certified order" % h_exp)
        return {k[:-1]: c for k, c in self.coeffs.items() if k[-1] == h_exp}

    def restricted(self, target):
        """Clip knowledge to `target` = {name: (lo, hi)}; for comparisons."""
        bounds = list(self.bounds)
        coeffs = self.coeffs
        for name, (lo, hi) in target.items():
            i = self.ctx.index[name]
            k_lo, k_hi = _kinterval(bounds[i])
            if k_lo > lo or k_hi < hi:
                raise OutOfWindowError(
                    "window of %s is [%s,%s], cannot certify [%d,%d]"
                    % (name, k_lo, k_hi, lo, hi))
            bounds[i] = (lo, hi, False, False)
            coeffs = {k: c for k, c in coeffs.items() if lo <= k[i] <= hi}
        return TruncatedSeries(self.ctx, bounds, self.h_valid, coeffs, normalize=False)

    def require_window(self, target, h_order=None):
        """Assert the certified window covers `target` (guards vacuity)."""
        for name, (lo, hi) in target.items():
            k_lo, k_hi = self.knowledge(name)
            if k_lo > lo or k_hi < hi:
                raise OutOfWindowError(
                    "certified %s-window [%s,%s] does not cover [%d,%d]"
                    % (name, k_lo, k_hi, lo, hi))
        if h_order is not None and self.h_valid < h_order:
            raise OutOfWindowError("certified h-order %d < required %d"
                                   % (self.h_valid, h_order))
        return self

    def pole_degree_bounded(self):
        """Whether every monomial's total negative spectral degree is <= its
        h-degree (holds for everything built from R-matrices and t-series)."""
        for k in self.coeffs:
            if -min(0, sum(k[:-1])) > k[-1]:
                return False
        return True

    def __repr__(self):
        n = len(self.coeffs)
        return "<series %d terms, h<%d, %s>" % (
            n, self.h_valid,
            " ".join("%s:[%s,%s]" % (nm, *_kinterval(b))
                     for nm, b in zip(self.ctx.names, self.bounds)))


# -- expansions ----------------------------------------------------------


def affine_series(ctx, form, h_valid=None):
    """The affine form itself as an exact (polynomial) series."""
    h_valid = h_valid or ctx.H
    out = ctx.const(form.const, h_valid)
    if form.h:
        out = out + ctx.monomial({}, 1, form.h, h_valid)
    for name, a in form.terms.items():
        out = out + ctx.monomial({name: 1}, 0, a, h_valid)
    return out


def _binom(alpha, k):
    out = ONE
    for i in range(k):
        out *= Fraction(alpha - i, i + 1)
    return out


def expand_affine_inverse(ctx, form, power, depth, h_valid=None):
    """(a*x + b*y + c*h [+ d])^power for power < 0, expanded geometrically
    against the dominant term and truncated at `depth` correction orders.

    The dominant term is the constant d when nonzero, else the first context
    variable appearing in the form (the paper's left-to-right convention).
    """
    if power >= 0:
        return affine_series(ctx, form, h_valid).pow(power)
    h_valid = h_valid or ctx.H
    p = -power
    if form.const:
        lead = form.const
        rest = AffineForm(form.terms, form.h)
        base = ctx.const(lead ** power, h_valid)
    else:
        dom = form.dominant(ctx)
        if dom is None:
            raise ExpansionError("no spectral variable to expand against in %r" % form)
        lead = form.terms[dom]
        rest = AffineForm({k: v for k, v in form.terms.items() if k != dom}, form.h)
        base = ctx.monomial({dom: power}, 0, lead ** power, h_valid)
    if not rest.terms and not rest.h:
        return base
    # (lead*X + rest)^power = lead^power X^power * sum_k binom(power,k) (rest/(lead X))^k
    if form.const:
        ratio = affine_series(ctx, rest, h_valid).scaled(ONE / lead)
    else:
        ratio = affine_series(ctx, rest, h_valid).scaled(ONE / lead) \
            * ctx.monomial({dom: -1}, 0, ONE, h_valid)
    total = ctx.zero(h_valid)
    term = ctx.one(h_valid)
    for k in range(depth + 1):
        total = total + term.scaled(_binom(power, k))
        if k < depth:
            term = term * ratio
    out = base * total
    # honest window: knowledge stops where dropped k > depth terms could land
    bounds = list(out.bounds)
    if form.const:
        for name in form.terms:
            i = ctx.index[name]
            bounds[i] = (0, depth, True, False)
    else:
        i = ctx.index[dom]
        bounds[i] = (-p - depth, -p, False, True)
        for name in rest.terms:
            j = ctx.index[name]
            bounds[j] = (0, depth, True, False)
    hv = h_valid if not form.h else min(h_valid, depth + 1)
    return TruncatedSeries(ctx, bounds, hv, out.coeffs)


def substitute_affine(s, name, alpha, target=None, beta=ZERO):
    """Exact substitution  name -> alpha*target + beta*h  (alpha != 0).

    `target` defaults to `name`; otherwise the series must not already
    depend on `target`.  Windows are preserved (the substitution is exact;
    only h-exponents at or above h_valid are dropped, as always).
    """
    ctx = s.ctx
    alpha = Fraction(alpha)
    beta = Fraction(beta)
    if not alpha:
        raise ValueError("alpha must be nonzero")
    i = ctx.index[name]
    target = target or name
    j = ctx.index[target]
    if j != i:
        k_lo, k_hi = _kinterval(s.bounds[j])
        if any(k[j] for k in s.coeffs) or k_lo > 0 or k_hi < 0:
            raise WindowError("substitution target %s already in use" % target)
    out = {}
    ratio = beta / alpha if beta else ZERO
    for key, c in s.coeffs.items():
        e = key[i]
        base = c * (alpha ** e)
        if not ratio or e == 0:
            k2 = list(key)
            k2[i] = 0
            k2[j] += e
            _acc(out, tuple(k2), base)
            continue
        # (alpha*t + beta*h)^e = alpha^e t^e (1 + (beta/alpha) h/t)^e
        kmax = s.h_valid - 1 - key[-1] if e < 0 else e
        for k in range(kmax + 1):
            coeff = base * _binom(e, k) * ratio ** k
            if not coeff:
                continue
            k2 = list(key)
            k2[i] = 0
            k2[j] += e - k
            k2[-1] += k
            if k2[-1] >= s.h_valid:
                continue
            _acc(out, tuple(k2), coeff)
    bounds = list(s.bounds)
    bi = bounds[i]
    if beta and any(k[i] < 0 for k in s.coeffs):
        # negative powers smear downward in the target variable
        lo = min(_kinterval(bi)[0], bi[0]) - (s.h_valid - 1)
        bi = (lo, bi[1], bi[2], bi[3]) if lo > -inf else bi
    if j != i:
        bounds[j] = _add_bound(bi, bounds[j]) if False else bi
        bounds[i] = (0, 0, True, True)
    else:
        bounds[i] = bi
    out = {k: c for k, c in out.items() if c}
    return TruncatedSeries(ctx, bounds, s.h_valid, out)


def _acc(d, key, c):
    s = d.get(key)
    if s is None:
        d[key] = c
    else:
        s = s + c
        if s:
            d[key] = s
        else:
            del d[key]


def invert_unit(s, inverter=None):
    """Neumann inverse of s = s0 + s' with s0 the constant term (a unit) and
    every monomial of s' carrying h.  inverter(s0) supplies s0^-1 when the
    coefficients are not Fractions."""
    ctx = s.ctx
    key0 = (0,) * (ctx.n + 1)
    s0 = s.coeffs.get(key0)
    if s0 is None:
        raise ValueError("constant term is zero, not a unit")
    rest = dict(s.coeffs)
    del rest[key0]
    if any(k[-1] == 0 for k in rest):
        raise ValueError("non-constant h^0 part; Neumann precondition fails")
    if inverter is None:
        inv0 = ONE / s0
    else:
        inv0 = inverter(s0)
    sp = TruncatedSeries(ctx, s.bounds, s.h_valid, rest, normalize=False)
    inv0s = ctx.const(inv0, s.h_valid)
    step = (inv0s * sp).scaled(-1)
    out = ctx.zero(s.h_valid)
    term = ctx.one(s.h_valid)
    for _ in range(s.h_valid):
        out = out + term
        if term.is_zero():
            break
        term = step * term
    return out * inv0s


def g_coefficients(N, K):
    """g_0..g_K of the unique g(u) in 1 + u^-1 Q[[u^-1]] with
    g(u+N) = g(u)(1 - u^-2), solved by matching powers of u^-1."""
    g = [ONE] + [ZERO] * K
    # coefficient of u^-m of g(u+N) is sum_k g_k binom(-k, m-k) N^(m-k);
    # of g(u)(1-u^-2) is g_m - g_{m-2}; the order-m equation fixes g_{m-1}
    for m in range(2, K + 2):
        acc = ZERO
        for k in range(0, min(m - 2, K) + 1):
            acc += g[k] * _binom(-k, m - k) * Fraction(N) ** (m - k)
        rhs = -(g[m - 2] if m - 2 <= K else ZERO)
        gm1 = (rhs - acc) / (_binom(-(m - 1), 1) * N)
        if m - 1 <= K:
            g[m - 1] = gm1
    return g


def g_series(N, K, ctx=None, name="u"):
    """g(u) truncated at u^-K, as a series (for the functional-equation test)."""
    ctx = ctx or Context((name,), 1)
    g = g_coefficients(N, K)
    coeffs = {}
    for k, c in enumerate(g):
        if c:
            key = [0] * (ctx.n + 1)
            key[ctx.index[name]] = -k
            coeffs[tuple(key)] = c
    bounds = list(_full_bounds(ctx.n))
    bounds[ctx.index[name]] = (-K, 0, False, True)
    return TruncatedSeries(ctx, bounds, ctx.H, coeffs)


def format_monomial(ctx, key):
    parts = []
    for i, name in enumerate(ctx.names):
        if key[i]:
            parts.append("%s^%d" % (name, key[i]) if key[i] != 1 else name)
    if key[-1]:
        parts.append("h^%d" % key[-1] if key[-1] != 1 else "h")
    return " ".join(parts) if parts else "1"
