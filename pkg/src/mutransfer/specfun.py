"""Special functions used by the basis and matching layers.

Contents:

* normalized Legendre polynomials (unit norm on [-1, 1]) and derivatives,
* hydrogenic bound radial functions C_nl(r) with configurable effective
  charge and reduced mass,
* translational reference functions for neutral channels (Riccati-Bessel
  sine/cosine types, scaled exponentials for closed channels),
* regular and irregular Coulomb continuum functions F_l, G_l with
  x-derivatives, robust for strongly repulsive channels including the
  classically forbidden region below the Coulomb barrier,
* exact Clebsch-Gordan coefficients (Condon-Shortley phase).

Everything is in atomic units.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import eval_genlaguerre, gammaln, loggamma
from scipy.special import spherical_jn, spherical_yn


class SpecFunError(ValueError):
    """Domain error in a special-function evaluation."""


class NumericsError(RuntimeError):
    """An evaluation scheme failed to converge; message carries diagnostics."""


# ---------------------------------------------------------------------------
# Legendre polynomials
# ---------------------------------------------------------------------------

def legendre_norm(l: int, x):
    """Normalized Legendre polynomial, integral of its square on [-1,1] is 1."""
    if l < 0:
        raise SpecFunError("Legendre degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise SpecFunError("Legendre argument outside [-1, 1]")
    table, _ = legendre_norm_table(l + 1, np.atleast_1d(x))
    out = table[l]
    return out[0] if np.isscalar(x) or x.ndim == 0 else out.reshape(x.shape)


def legendre_norm_table(n: int, x):
    """Values and derivatives of the first n normalized Legendre polynomials.

    Returns two arrays of shape (n, len(x)); derivatives are with respect
    to x and are finite for |x| < 1 (endpoint values use the recurrence
    limit of (1 - x^2) P' and are clamped there).
    """
    x = np.asarray(x, dtype=float)
    p = np.zeros((max(n, 2), x.size))
    p[0] = 1.0
    p[1] = x
    for k in range(1, n - 1):
        p[k + 1] = ((2 * k + 1) * x * p[k] - k * p[k - 1]) / (k + 1)
    dp = np.zeros_like(p)
    one_minus = np.clip(1.0 - x**2, 1e-14, None)
    for k in range(1, n):
        dp[k] = k * (p[k - 1] - x * p[k]) / one_minus
    norms = np.sqrt((2.0 * np.arange(max(n, 2)) + 1.0) / 2.0)
    return (norms[:n, None] * p[:n]), (norms[:n, None] * dp[:n])


# ---------------------------------------------------------------------------
# Hydrogenic bound functions
# ---------------------------------------------------------------------------

def coulomb_bound(n: int, l: int, zeff: float, mu_red: float, r,
                  with_derivative: bool = False):
    """Hydrogenic radial function C_nl(r), unit-normalized as int C^2 r^2 dr = 1.

    zeff and mu_red enter only through q = zeff * mu_red (inverse length);
    the binding energy is -q^2 / (2 mu_red n^2).
    """
    if n < 1 or l < 0 or l >= n:
        raise SpecFunError(f"invalid hydrogenic quantum numbers (n={n}, l={l})")
    if zeff <= 0.0 or mu_red <= 0.0:
        raise SpecFunError("zeff and mu_red must be positive")
    r = np.asarray(r, dtype=float)
    q = zeff * mu_red
    x = 2.0 * q * r / n
    k = n - l - 1
    lognorm = (1.5 * math.log(2.0 * q / n)
               + 0.5 * (gammaln(n - l) - math.log(2.0 * n) - gammaln(n + l + 1)))
    lag = eval_genlaguerre(k, 2 * l + 1, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        powl = np.where(x > 0.0, x, 1.0)**l if l else np.ones_like(x)
    powl = np.where((x == 0.0) & (l > 0), 0.0, powl)
    val = math.exp(lognorm) * powl * np.exp(-x / 2.0) * lag
    if not with_derivative:
        return val
    dlag = -eval_genlaguerre(k - 1, 2 * l + 2, x) if k >= 1 else np.zeros_like(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        term_l = np.where(x > 0.0, l / np.where(x > 0.0, x, 1.0), 0.0)
    dval_dx = val * (term_l - 0.5) + math.exp(lognorm) * powl * np.exp(-x / 2.0) * dlag
    return val, dval_dx * (2.0 * q / n)


def hydrogenic_energy(n: int, zeff: float, mu_red: float) -> float:
    """Bound-state energy -(zeff^2 mu_red) / (2 n^2) in hartree."""
    return -(zeff**2) * mu_red / (2.0 * n * n)


# ---------------------------------------------------------------------------
# Neutral-channel translational functions
# ---------------------------------------------------------------------------

def riccati_or_exponential(kind: str, k_or_kappa: float, big_r, l: int = 0,
                           r_ref: float = 0.0):
    """Reference translational functions and their R-derivatives.

    kind:
        "open_s"   sine-type Riccati-Bessel  kR j_l(kR)   (sin kR at l=0)
        "open_c"   cosine-type              -kR y_l(kR)   (cos kR at l=0)
        "closed_s" decaying  exp(-kappa (R - r_ref))
        "closed_c" growing   exp(+kappa (R - r_ref))

    Closed-channel forms are referenced to r_ref so that values near the
    matching radius stay O(1); no silent overflow is possible.
    """
    big_r = np.asarray(big_r, dtype=float)
    if np.any(big_r <= 0.0):
        raise SpecFunError("translational functions require R > 0")
    q = float(k_or_kappa)
    if q <= 0.0:
        raise SpecFunError("wavenumber must be positive")
    x = q * big_r
    if kind == "open_s":
        val = x * spherical_jn(l, x)
        dval = q * (spherical_jn(l, x) + x * spherical_jn(l, x, derivative=True))
        return val, dval
    if kind == "open_c":
        val = -x * spherical_yn(l, x)
        dval = -q * (spherical_yn(l, x) + x * spherical_yn(l, x, derivative=True))
        return val, dval
    arg = q * (big_r - r_ref)
    arg = np.clip(arg, -700.0, 700.0)
    if kind == "closed_s":
        val = np.exp(-arg)
        return val, -q * val
    if kind == "closed_c":
        val = np.exp(arg)
        return val, q * val
    raise SpecFunError(f"unknown translational kind {kind!r}")


# ---------------------------------------------------------------------------
# Clebsch-Gordan coefficients
# ---------------------------------------------------------------------------

def _twice(j) -> int:
    t = 2.0 * float(j)
    ti = round(t)
    if abs(t - ti) > 1e-9:
        raise SpecFunError(f"angular momentum {j} is not half-integral")
    return int(ti)


def clebsch_gordan(j1, j2, m1, m2, j, m) -> float:
    """Clebsch-Gordan coefficient <j1 m1 j2 m2 | j m>, Condon-Shortley phase.

    Arguments may be half-integral.  Returns 0 when the triangle rule or
    m = m1 + m2 fails; raises on malformed (j, m) pairs.  The Racah sum is
    evaluated in exact rational arithmetic.
    """
    tj1, tj2, tj = _twice(j1), _twice(j2), _twice(j)
    tm1, tm2, tm = _twice(m1), _twice(m2), _twice(m)
    for tjj, tmm in ((tj1, tm1), (tj2, tm2), (tj, tm)):
        if tjj < 0 or abs(tmm) > tjj or (tjj - tmm) % 2 != 0:
            raise SpecFunError("inconsistent (j, m) pair")
    if tm1 + tm2 != tm:
        return 0.0
    if tj < abs(tj1 - tj2) or tj > tj1 + tj2 or (tj1 + tj2 - tj) % 2 != 0:
        return 0.0

    def fact(twice_val: int):
        if twice_val % 2 != 0 or twice_val < 0:
            raise SpecFunError("non-integer factorial argument")
        return math.factorial(twice_val // 2)

    pref = Fraction(tj + 1, 1)
    pref *= Fraction(fact(tj1 + tj2 - tj) * fact(tj1 - tj2 + tj)
                     * fact(-tj1 + tj2 + tj), fact(tj1 + tj2 + tj + 2) // 1)
    pref *= Fraction(fact(tj1 + tm1) * fact(tj1 - tm1) * fact(tj2 + tm2)
                     * fact(tj2 - tm2) * fact(tj + tm) * fact(tj - tm), 1)

    k_min = max(0, (tj2 - tj - tm1) // 2, (tj1 - tj + tm2) // 2)
    k_max = min((tj1 + tj2 - tj) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        denom = (math.factorial(k)
                 * fact(tj1 + tj2 - tj - 2 * k)
                 * fact(tj1 - tm1 - 2 * k)
                 * fact(tj2 + tm2 - 2 * k)
                 * fact(tj - tj2 + tm1 + 2 * k)
                 * fact(tj - tj1 - tm2 + 2 * k))
        total += Fraction(-1 if k % 2 else 1, denom)
    if total == 0:
        return 0.0
    sign = 1.0 if total > 0 else -1.0
    return sign * math.sqrt(float(pref * total * total))


# ---------------------------------------------------------------------------
# Coulomb continuum functions
# ---------------------------------------------------------------------------

_CF_MAX_ITER = 200000
_CF_TINY = 1e-300


def coulomb_phase(l: int, eta: float) -> float:
    """Coulomb phase shift sigma_l = arg Gamma(l + 1 + i eta)."""
    return float(np.imag(loggamma(complex(l + 1, eta))))


def _cf1(l: int, eta: float, x: float, rtol: float = 1e-14) -> float:
    """F'_l / F_l by Steed's continued fraction (modified Lentz)."""
    def s_term(k):
        return k / x + eta / k

    b = s_term(l + 1)
    f = b if abs(b) > _CF_TINY else _CF_TINY
    c = f
    d = 0.0
    k = l + 1
    for _ in range(_CF_MAX_ITER):
        k += 1
        a = -(1.0 + (eta / (k - 1))**2) if k - 1 > 0 else -1.0
        b = s_term(k - 1) + s_term(k)
        d = b + a * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = b + a / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < rtol:
            return f
    raise NumericsError(
        f"CF1 failed to converge (l={l}, eta={eta:.3g}, x={x:.3g})")


def _cf2(l: int, eta: float, x: float, rtol: float = 1e-14) -> complex:
    """(G' + iF') / (G + iF) by the H+ continued fraction (modified Lentz)."""
    ll = l * (l + 1)
    pq = complex(0.0, 1.0 - eta / x)
    c = pq if abs(pq) > _CF_TINY else complex(_CF_TINY)
    d = 0.0 + 0.0j
    n = 0
    for _ in range(_CF_MAX_ITER):
        n += 1
        an = complex(n, eta) * complex(n - 1, eta) - ll
        if n == 1:
            # the leading i/x multiplies the whole continued fraction
            an *= complex(0.0, 1.0) / x
        bn = complex(2.0 * (x - eta), 2.0 * n)
        d = bn + an * d
        if abs(d) < _CF_TINY:
            d = complex(_CF_TINY)
        c = bn + an / c
        if abs(c) < _CF_TINY:
            c = complex(_CF_TINY)
        d = 1.0 / d
        delta = c * d
        pq *= delta
        if abs(delta - 1.0) < rtol:
            if pq.imag <= 0.0:
                raise NumericsError(
                    f"CF2 returned nonpositive q (l={l}, eta={eta:.3g}, "
                    f"x={x:.3g})")
            return pq
    raise NumericsError(
        f"CF2 failed to converge (l={l}, eta={eta:.3g}, x={x:.3g})")


def turning_point(l: int, eta: float) -> float:
    """Outer classical turning point of the Coulomb + centrifugal potential."""
    return eta + math.sqrt(eta * eta + l * (l + 1))


def _wkb_phase(l: int, eta: float, x: float) -> float:
    """Langer-corrected WKB phase from the turning point to x.

    Exact for eta = 0 and accurate to O(1e-2) rad otherwise, which is ample
    for resolving the sign of F via sin(phase).
    """
    nu2 = (l + 0.5)**2
    tp = eta + math.sqrt(eta * eta + nu2)
    if x <= tp:
        return 0.0
    # integrate sqrt(1 - 2 eta/t - nu^2/t^2) dt with a sqrt substitution
    # t = tp + (x - tp) u^2 that removes the turning-point singularity
    nodes, weights = np.polynomial.legendre.leggauss(80)
    u = 0.5 * (nodes + 1.0)
    du = 0.5 * weights
    t = tp + (x - tp) * u**2
    q2 = np.clip(1.0 - 2.0 * eta / t - nu2 / t**2, 0.0, None)
    integrand = np.sqrt(q2) * 2.0 * u * (x - tp)
    return float(np.sum(integrand * du)) + math.pi / 4.0


def _steed_at_point(l: int, eta: float, x: float):
    """F, F', G, G' in the oscillatory region via CF1 + CF2.

    The magnitude comes from the Wronskian identity; the sign of F from the
    WKB phase (a wrong sign can only occur within quadrature error of a
    zero of F, where it is numerically irrelevant).
    """
    f = _cf1(l, eta, x)
    pq = _cf2(l, eta, x)
    p, q = pq.real, pq.imag
    fmag = 1.0 / math.sqrt(q + (f - p)**2 / q)
    sign = 1.0 if math.sin(_wkb_phase(l, eta, x)) >= 0.0 else -1.0
    fv = sign * fmag
    fp = f * fv
    gv = (f - p) * fv / q
    gp = (p * (f - p) / q - q) * fv
    return fv, fp, gv, gp


def _coulomb_ode(l: int, eta: float):
    ll = l * (l + 1)

    def rhs(t, y):
        return [y[1], (2.0 * eta / t + ll / (t * t) - 1.0) * y[0]]

    return rhs


def _march_linear(l, eta, x_from, x_to, y0, yp0, rtol=1e-12):
    sol = solve_ivp(_coulomb_ode(l, eta), (x_from, x_to), [y0, yp0],
                    method="DOP853", rtol=rtol, atol=1e-280,
                    dense_output=False)
    if not sol.success:
        raise NumericsError(f"Coulomb ODE march failed: {sol.message}")
    return sol.y[0][-1], sol.y[1][-1]


def _series_f_scaled(l: int, eta: float, x: float):
    """Unnormalized regular solution near the origin.

    Returns (value, derivative, log_scale) with F = value * exp(log_scale
    + log C_l(eta)); the Gamow factor C_l is kept in log form to survive
    strongly repulsive channels.
    """
    a_prev2, a_prev = 1.0, eta / (l + 1.0)
    s = 1.0 + a_prev * x
    sp = (l + 1.0) + (l + 2.0) * a_prev * x
    xk = x
    small_run = 0
    for k in range(2, 2000):
        a_k = (2.0 * eta * a_prev - a_prev2) / (k * (k + 2.0 * l + 1.0))
        xk *= x
        term = a_k * xk
        s += term
        sp += (l + 1.0 + k) * a_k * xk
        # zero terms occur by parity at eta = 0: demand a run of small ones
        small_run = small_run + 1 if abs(term) < 1e-17 * abs(s) else 0
        if small_run >= 3 and k > 5:
            break
        a_prev2, a_prev = a_prev, a_k
    else:
        raise NumericsError(
            f"origin series failed to converge (l={l}, eta={eta:.3g}, x={x:.3g})")
    val = s * x**(l + 1)
    dval = sp * x**l
    scale = max(abs(val), abs(dval), 1e-300)
    return val / scale, dval / scale, math.log(scale)


def _log_coulomb_norm(l: int, eta: float) -> float:
    """log C_l(eta) of the regular-solution normalization constant."""
    return (l * math.log(2.0) - math.pi * eta / 2.0
            + float(np.real(loggamma(complex(l + 1, eta))))
            - float(gammaln(2 * l + 2)))


def _riccati_march(l, eta, x_from, x_to, u0, logy0, rtol=1e-12):
    """March log-derivative u = y'/y and log y through a forbidden region."""
    ll = l * (l + 1)

    def rhs(t, s):
        u = s[0]
        return [2.0 * eta / t + ll / (t * t) - 1.0 - u * u, u]

    sol = solve_ivp(rhs, (x_from, x_to), [u0, logy0], method="DOP853",
                    rtol=rtol, atol=1e-12)
    if not sol.success:
        raise NumericsError(f"Riccati march failed: {sol.message}")
    return sol.y[0][-1], sol.y[1][-1]


def _subbarrier_f(l: int, eta: float, x: float):
    """(F, F', log_scale) below the barrier: F = value * exp(log_scale)."""
    tp = turning_point(l, eta)
    x0 = min(x, max(0.5, min(2.5, 0.1 * tp)))
    val, dval, logscale = _series_f_scaled(l, eta, x0)
    logscale += _log_coulomb_norm(l, eta)
    if x <= x0:
        return val, dval, logscale
    # log-derivative marching is overflow-free but must stop short of the
    # oscillatory region where F acquires zeros
    x_switch = min(x, max(x0, tp - 1.0))
    u = dval / val
    sgn = 1.0 if val > 0 else -1.0
    logscale += math.log(abs(val))
    if x_switch > x0:
        u, logy = _riccati_march(l, eta, x0, x_switch, u, 0.0)
        logscale += logy
    yv, yp = sgn * 1.0, sgn * u
    if x > x_switch:
        yv, yp = _march_linear(l, eta, x_switch, x, yv, yp)
    return yv, yp, logscale


def coulomb_continuum(l: int, eta: float, x: float):
    """Regular and irregular Coulomb functions (F, G, F', G') at x = k R.

    Standard asymptotic normalization (F ~ sin theta, G ~ cos theta,
    unit Wronskian F'G - FG' = 1); derivatives are with respect to x.
    Handles attractive and repulsive eta including the classically
    forbidden region x < turning point, where F underflows gracefully to 0
    once the suppression passes ~300 decades.

    Raises NumericsError when no evaluation scheme converges.
    """
    if x <= 0.0:
        raise SpecFunError("Coulomb functions require x > 0")
    if l < 0:
        raise SpecFunError("l must be nonnegative")
    tp = turning_point(l, eta)
    margin = max(3.0, 0.08 * tp)

    if eta < -2.0 and x < 2.0 * abs(eta) + 20.0:
        # strongly attractive at moderate x: anchor far out, march inward
        xa = 2.0 * abs(eta) + 20.0
        fa, fpa, ga, gpa = _steed_at_point(l, eta, xa)
        fv, fp = _march_linear(l, eta, xa, x, fa, fpa)
        gv, gp = _march_linear(l, eta, xa, x, ga, gpa)
        return fv, gv, fp, gp

    if x >= tp + margin:
        fv, fp, gv, gp = _steed_at_point(l, eta, x)
        return fv, gv, fp, gp

    # sub-barrier (or barely past the turning point): build F from the
    # origin series, G from a Steed anchor in the oscillatory region
    fval, fder, logscale = _subbarrier_f(l, eta, x)
    xa = tp + max(6.0, 0.15 * tp)
    fa, fpa, ga, gpa = _steed_at_point(l, eta, xa)
    gv, gp = _march_linear(l, eta, xa, x, ga, gpa)
    if logscale < -690.0:
        return 0.0, gv, 0.0, gp
    scale = math.exp(logscale)
    return fval * scale, gv, fder * scale, gp


def coulomb_fg_grid(l: int, eta: float, x_anchor: float, x_values):
    """Coulomb functions on a narrow grid around one anchored evaluation.

    x_values must lie within a few wavelengths of x_anchor (the matching
    windows span well under 1% of the anchor).  Returns arrays
    (F, G, F', G') aligned with x_values.
    """
    x_values = np.asarray(x_values, dtype=float)
    fa, ga, fpa, gpa = coulomb_continuum(l, eta, x_anchor)
    out = np.zeros((4, x_values.size))
    order = np.argsort(x_values)

    def sweep(idx):
        if idx.size == 0:
            return
        targets = x_values[idx]
        state = np.array([fa, fpa, ga, gpa])

        def rhs4(t, y):
            w = 2.0 * eta / t + l * (l + 1) / (t * t) - 1.0
            return [y[1], w * y[0], y[3], w * y[2]]

        sol = solve_ivp(rhs4, (x_anchor, targets[-1]), state,
                        method="DOP853", rtol=1e-11, atol=1e-280,
                        t_eval=targets)
        if not sol.success:
            raise NumericsError("window propagation of Coulomb pair failed")
        out[0, idx] = sol.y[0]
        out[2, idx] = sol.y[1]
        out[1, idx] = sol.y[2]
        out[3, idx] = sol.y[3]

    above = order[x_values[order] > x_anchor]
    below = order[x_values[order] < x_anchor][::-1]
    exact = np.where(x_values == x_anchor)[0]
    sweep(above)
    sweep(below)
    out[0, exact], out[1, exact], out[2, exact], out[3, exact] = fa, ga, fpa, gpa
    return out[0], out[1], out[2], out[3]
