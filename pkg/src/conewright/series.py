"""Truncated complex power series and cone normal forms.

A :class:`PowerSeries` holds the Taylor coefficients ``c_0 ... c_M`` of a
function of one complex variable at 0, truncated at ``order`` M (default 32).
All arithmetic is closed under truncation: an operation never reads or
invents coefficients beyond the order it can honestly know, so the order of
``a * b`` is ``min(a.order, b.order)``, a derivative loses one order and an
antiderivative gains one.

Two coefficient backends share the same code paths.  General series algebra
runs on ``numpy.clongdouble`` (80-bit extended precision on x86).  The
normal-form constructions below switch to arbitrary precision (``mpmath``
numbers in object arrays, default 60 digits) because the implicit-function
coordinate they solve for may have a small convergence radius: its order-32
coefficients then reach 1e10 and beyond, and the defining identity only
cancels them back down to O(1) when the arithmetic carries enough digits.
Certifying the identity to an absolute coefficient residual of 1e-12 is
impossible in any fixed hardware precision for such inputs.

The normal form itself: writing a conformally conical flat metric near the
cone as ``|exp(-F(z)) z**(-theta) dz|**2`` with F holomorphic (Im F(0) = 0),
a new coordinate ``u = u(z)``, ``u(0) = 0``, ``u'(0) != 0`` is computed with

* ``theta`` not a positive integer:  ``exp(-F) z**-theta dz = u**-theta du``;
  the cone angle ``2*pi*(1-theta)`` is unchanged.  The unit factor
  ``v = (u/z)**(1-theta)`` obeys the exact recursion
  ``v_n = (1-theta)/(1-theta+n) * a_n`` where ``a = exp(-F)``.
* ``theta == 1``:  ``exp(-F) dz/z = exp(-F(0)) du/u``; the metric is a
  cylinder whose circumference is rescaled by ``exp(-Re F(0))``.
* ``theta`` an integer >= 2:
  ``exp(-F) z**-theta dz = (1 + c u**(theta-1)) u**-theta du`` where ``c``
  is forced to be the coefficient of ``z**(theta-1)`` in ``exp(-F)`` (the
  residue of ``exp(-F) z**-theta``); the cone carries a translation
  component of length ``2*pi*abs(c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from .errors import DomainError, NumericalError

CDTYPE = np.clongdouble
DEFAULT_ORDER = 32
DEFAULT_DPS = 60

_MP_TYPES = (mpmath.mpf, mpmath.mpc)

__all__ = [
    "PowerSeries",
    "exp",
    "log",
    "compose",
    "power",
    "radial_reparam",
    "NormalForm",
    "normal_form",
    "verify_normal_form",
    "CutoffProfile",
    "cutoff_log_integral",
]


def _scalar_exp(x):
    if isinstance(x, _MP_TYPES):
        return mpmath.exp(x)
    return np.exp(x)


def _scalar_log(x):
    if isinstance(x, _MP_TYPES):
        return mpmath.log(x)
    return np.log(x)


class PowerSeries:
    """Complex Taylor coefficients c_0..c_M of a function at 0.

    ``PowerSeries([1, 2, 0.5])`` is ``1 + 2 z + z**2/2`` truncated at order 2.
    Instances are immutable; arithmetic returns new series truncated at the
    lowest operand order.  Coefficients live either in extended precision
    (default) or, when constructed from mpmath numbers, in an object array
    at whatever working precision created them.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs, order=None):
        c = np.atleast_1d(np.asarray(coeffs))
        if c.ndim != 1:
            raise DomainError("coefficients must be a 1-d sequence")
        if c.dtype != object:
            c = c.astype(CDTYPE)
        if order is not None:
            if order < 0:
                raise DomainError("order must be >= 0")
            out = np.zeros(order + 1, dtype=c.dtype)
            keep = min(len(c), order + 1)
            out[:keep] = c[:keep]
            c = out
        else:
            c = c.copy()
        self._c = c

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, order=DEFAULT_ORDER):
        return cls(np.zeros(order + 1))

    @classmethod
    def constant(cls, value, order=DEFAULT_ORDER):
        dtype = object if isinstance(value, _MP_TYPES) else CDTYPE
        c = np.zeros(order + 1, dtype=dtype)
        c[0] = value
        return cls(c)

    @classmethod
    def identity(cls, order=DEFAULT_ORDER):
        """The series of z itself."""
        c = np.zeros(order + 1, dtype=CDTYPE)
        if order >= 1:
            c[1] = 1
        return cls(c)

    # -- inspection --------------------------------------------------------

    @property
    def order(self):
        return len(self._c) - 1

    @property
    def coeffs(self):
        """Coefficient array (backend dtype, copied)."""
        return self._c.copy()

    def tolist(self):
        """Coefficients as built-in complex numbers."""
        return [complex(v) for v in self._c]

    def __len__(self):
        return len(self._c)

    def __getitem__(self, n):
        return self._c[n]

    def __call__(self, z):
        """Evaluate by Horner's rule at a point (or array) z, in double."""
        acc = np.zeros_like(np.asarray(z, dtype=complex))
        for c in self._c[::-1]:
            acc = acc * z + complex(c)
        return acc if acc.shape else complex(acc)

    def __repr__(self):
        head = ", ".join(f"{complex(v):.6g}" for v in self._c[:4])
        tail = ", ..." if len(self._c) > 4 else ""
        return f"PowerSeries([{head}{tail}], order={self.order})"

    def max_abs(self):
        if len(self._c) == 0:
            return 0.0
        return float(max(abs(v) for v in self._c))

    def to_mp(self):
        """Copy with mpmath coefficients at the current working precision.

        Extended-precision coefficients pass through ``complex`` (their
        double rounding), which is exact for everything that originates in
        user-supplied data.
        """
        if self._c.dtype == object:
            return PowerSeries(self._c)
        out = np.empty(len(self._c), dtype=object)
        for k, v in enumerate(self._c):
            out[k] = mpmath.mpc(float(np.real(v)), float(np.imag(v)))
        return PowerSeries(out)

    # -- ring operations ---------------------------------------------------

    def truncate(self, order):
        return PowerSeries(self._c, order=order)

    def _coerced(self, other):
        """Align backends with another series or scalar; mp wins."""
        if isinstance(other, PowerSeries):
            a, b = self._c, other._c
            if (a.dtype == object) == (b.dtype == object):
                return a, b
            to_obj = lambda arr: np.array([complex(v) for v in arr], dtype=object)
            return (a if a.dtype == object else to_obj(a),
                    b if b.dtype == object else to_obj(b))
        if self._c.dtype != object and isinstance(other, _MP_TYPES):
            return np.array([complex(v) for v in self._c], dtype=object), other
        return self._c, other

    def __neg__(self):
        return PowerSeries(-self._c)

    def __add__(self, other):
        if isinstance(other, PowerSeries):
            a, b = self._coerced(other)
            n = min(len(a), len(b))
            return PowerSeries(a[:n] + b[:n])
        a, other = self._coerced(other)
        c = a.copy()
        c[0] = c[0] + other
        return PowerSeries(c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PowerSeries):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PowerSeries):
            a, b = self._coerced(other)
            n = min(len(a), len(b))
            return PowerSeries(np.convolve(a, b)[:n])
        a, other = self._coerced(other)
        if a.dtype == object:
            return PowerSeries(a * other)
        return PowerSeries(a * CDTYPE(other))

    __rmul__ = __mul__

    def reciprocal(self):
        """Multiplicative inverse; needs a non-zero constant term."""
        if self._c[0] == 0:
            raise DomainError("cannot invert a series vanishing at 0")
        n = len(self._c)
        r = np.zeros(n, dtype=self._c.dtype)
        r[0] = 1 / self._c[0]
        for k in range(1, n):
            r[k] = -np.dot(self._c[1 : k + 1], r[:k][::-1]) / self._c[0]
        return PowerSeries(r)

    def __truediv__(self, other):
        if isinstance(other, PowerSeries):
            return self * other.reciprocal()
        a, other = self._coerced(other)
        return PowerSeries(a / (other if a.dtype == object else CDTYPE(other)))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    # -- calculus ----------------------------------------------------------

    def derivative(self):
        """Derivative; the result honestly knows one order less."""
        if len(self._c) == 1:
            return PowerSeries(np.zeros(1, dtype=self._c.dtype))
        return PowerSeries(self._c[1:] * np.arange(1, len(self._c)))

    def antiderivative(self):
        """Antiderivative with value 0 at 0; gains one order."""
        out = np.zeros(len(self._c) + 1, dtype=self._c.dtype)
        out[1:] = self._c / np.arange(1, len(self._c) + 1)
        return PowerSeries(out)

    def shift_up(self, k=1):
        """Multiply by z**k (exact; order grows by k)."""
        out = np.zeros(len(self._c) + k, dtype=self._c.dtype)
        out[k:] = self._c
        return PowerSeries(out)

    def shift_down(self, k=1):
        """Divide by z**k, discarding the first k coefficients."""
        if len(self._c) <= k:
            return PowerSeries(np.zeros(1, dtype=self._c.dtype))
        return PowerSeries(self._c[k:])


def exp(s):
    """Exponential of a truncated series.

    Uses the first-order recurrence E' = s'E, so each coefficient is exact
    in the working precision given the previous ones.
    """
    c = s._c
    n = len(c)
    e = np.zeros(n, dtype=c.dtype)
    e[0] = _scalar_exp(c[0])
    if n == 1:
        return PowerSeries(e)
    ks = c[1:] * np.arange(1, n)
    for m in range(1, n):
        e[m] = np.dot(ks[:m], e[:m][::-1]) / m
    return PowerSeries(e)


def log(s):
    """Principal-branch logarithm; requires s(0) != 0."""
    if s._c[0] == 0:
        raise DomainError("log of a series vanishing at 0")
    body = (s.derivative() / s).antiderivative().truncate(s.order)
    return body + _scalar_log(s._c[0])


def compose(f, g):
    """f(g(z)) for g(0) = 0, by Horner's rule on whole series."""
    if g._c[0] != 0:
        raise DomainError("composition requires the inner series to vanish at 0")
    order = min(f.order, g.order)
    g = g.truncate(order)
    acc = PowerSeries.constant(f._c[order] if f.order >= order else f._c[-1], order)
    for k in range(order - 1, -1, -1):
        acc = acc * g + f._c[k]
    return acc


def power(s, exponent):
    """s**exponent for arbitrary complex exponent, principal branch at s(0)."""
    return exp(log(s) * exponent)


# ---------------------------------------------------------------------------
# Radial change of variable for the model cone metric
# ---------------------------------------------------------------------------


def radial_reparam(theta, r):
    """Radial coordinate R(r) flattening (dr^2 + r^2 dsigma^2) / r^(2 theta).

    In the new variable the metric reads dR^2 + ((1-theta) R)^2 dsigma^2, a
    cone of total angle 2*pi*(1-theta); for theta = 1 the metric is already a
    cylinder of circumference 2*pi and R = r.  Away from theta = 1 the
    substitution satisfies R'(r)^2 * r^(2 theta) = 1 and
    (|1-theta| R)^2 = r^(2(1-theta)).
    """
    if r <= 0:
        raise DomainError("radius must be positive")
    if theta == 1:
        return float(r)
    # Both branches are r**(1-theta) / |1-theta|; for theta > 1 this blows up
    # at r = 0, the cone opening toward infinity.
    return float(r ** (1.0 - theta) / abs(1.0 - theta))


# ---------------------------------------------------------------------------
# Normal forms
# ---------------------------------------------------------------------------

_INTEGER_TOL = 1e-9


def _integer_theta(theta):
    """Round theta to int when within tolerance, else None."""
    k = round(theta)
    if abs(theta - k) <= _INTEGER_TOL:
        return int(k)
    return None


@dataclass(frozen=True)
class NormalForm:
    """Canonical local coordinate of a conformally conical flat metric.

    Exactly one of the trichotomy markers is populated: a plain cone
    (neither), a cylinder (``circumference``), or a cone with translation
    component (``translation_c``/``translation_length``) when the cone
    exponent is an integer >= 2.  ``u`` vanishes at 0 with u'(0) != 0 and is
    carried to one order beyond the input since its constant term is forced;
    its coefficients are mpmath numbers (use ``u.tolist()`` for plain
    complex).  ``imag_shift`` records the constant removed from Im F to pin
    the normalization Im F(0) = 0.
    """

    theta: float
    angle: float
    u: PowerSeries
    circumference: Optional[float] = None
    translation_c: Optional[complex] = None  # mpmath.mpc at working precision
    translation_length: Optional[float] = None
    imag_shift: float = 0.0

    @property
    def case(self):
        if self.circumference is not None:
            return "cylinder"
        if self.translation_c is not None:
            return "translation"
        return "cone"


def _normalize_imag_mp(F):
    """(F - i Im F(0), shift) on the mp backend; the metric sees only |exp(-F)|."""
    f0 = F._c[0]
    shift = float(mpmath.im(f0))
    if shift == 0.0:
        return F, 0.0
    return F - mpmath.mpc(0, 1) * mpmath.im(f0), shift


def normal_form(F, theta, circumference=None, newton_tol=1e-14, max_newton=40,
                dps=DEFAULT_DPS):
    """Normal form of ``|exp(-F(z)) z**(-theta) dz|**2`` near z = 0.

    ``F`` is the holomorphic completion of the harmonic conformal factor,
    truncated at the working order; ``circumference`` is the cylinder
    circumference before rescaling and is required exactly when
    ``theta == 1``.  Computation runs at ``dps`` decimal digits.
    """
    with mpmath.workdps(dps):
        Fmp, shift = _normalize_imag_mp(F.to_mp())
        order = Fmp.order
        a = exp(-Fmp)
        k_int = _integer_theta(theta)
        angle = 2 * math.pi * (1 - theta)

        if k_int == 1:
            # Cylinder: solve exp(F(0) - F) = 1 + z v'(z) with v(0) = 0.
            if circumference is None:
                raise DomainError("theta = 1 requires the cylinder circumference")
            w = exp(PowerSeries.constant(Fmp._c[0], order) - Fmp) - 1
            v = w.shift_down().antiderivative().truncate(order)
            u = exp(v).shift_up()
            circ = float(mpmath.exp(-mpmath.re(Fmp._c[0]))) * float(circumference)
            return NormalForm(theta=float(theta), angle=angle, u=u,
                              circumference=circ, imag_shift=shift)

        if k_int is not None and k_int >= 2:
            # Integer exponent >= 2: the antiderivative of exp(-F) z**-theta
            # picks up a log whose coefficient is forced, leaving the
            # implicit equation h + c z**(theta-1) log h = A(z), solved by
            # Newton on the coefficient vector.  Each step doubles the
            # settled prefix, so transient growth of high-order residuals is
            # normal; only a non-finite iterate means divergence.
            m = k_int
            c = a._c[m - 1]
            A_c = np.empty(order + 1, dtype=object)
            for n in range(order + 1):
                A_c[n] = 0 if n == m - 1 else a._c[n] * (1 - m) / (n + 1 - m)
            A = PowerSeries(A_c)

            def shifted(s):
                return s.shift_up(m - 1).truncate(order)

            h = A
            resid = math.inf
            polished = False
            for _ in range(max_newton):
                phi = h + shifted(log(h)) * c - A
                resid = phi.max_abs()
                if resid <= newton_tol and polished:
                    break
                polished = resid <= newton_tol  # one extra step past tolerance
                if not math.isfinite(resid):
                    raise NumericalError(
                        "coefficient Newton diverged (non-finite residual)")
                jac = shifted(h.reciprocal()) * c + 1
                h = h - phi / jac
            else:
                raise NumericalError(
                    f"coefficient Newton residual not decreasing below "
                    f"{newton_tol:g} in {max_newton} iterations "
                    f"(best {resid:.3e})")

            u = power(h, mpmath.mpf(1) / (1 - m)).shift_up()
            # c is kept at working precision (verification needs it); the
            # reported length uses its double rounding.
            return NormalForm(theta=float(theta), angle=angle, u=u,
                              translation_c=c,
                              translation_length=2 * math.pi * abs(complex(c)),
                              imag_shift=shift)

        # Generic exponent (theta = 0 and negative integers included):
        # v_n = (1-theta)/(1-theta+n) a_n, h = v**(1/(1-theta)), u = z h.
        th = mpmath.mpf(float(theta))
        v_c = np.empty(order + 1, dtype=object)
        for n in range(order + 1):
            v_c[n] = a._c[n] * (1 - th) / (1 - th + n)
        v = PowerSeries(v_c)
        h = exp(log(v) / (1 - th))
        u = h.shift_up()
        return NormalForm(theta=float(theta), angle=angle, u=u, imag_shift=shift)


def verify_normal_form(F, theta, nf, dps=DEFAULT_DPS):
    """Residual of the defining differential identity of a normal form.

    Both sides are multiplied by z**theta, cancelling the z**-theta pole
    symbolically (and, in the translation case, the c/z log-derivative term
    against the matching Laurent coefficient of exp(-F) z**-theta); the two
    sides are then compared coefficient by coefficient and the largest
    coefficient magnitude of the difference is returned.  Correct normal
    forms at order <= 32 stay below 1e-12.
    """
    with mpmath.workdps(dps):
        Fmp, _ = _normalize_imag_mp(F.to_mp())
        order = Fmp.order
        a = exp(-Fmp)
        q = nf.u.to_mp().shift_down().truncate(order)  # u/z, the unit factor
        if q._c[0] == 0:
            raise DomainError("normal form coordinate must have u'(0) != 0")
        k_int = _integer_theta(theta)

        qp = q.derivative().shift_up().truncate(order)  # z q'
        if k_int == 1:
            # exp(-F)/z = exp(-F(0)) u'/u  <=>  a = a(0) (1 + z q'/q)
            rhs = (1 + qp / q) * a._c[0]
        elif k_int is not None and k_int >= 2:
            m = k_int
            cval = nf.translation_c
            c = cval if isinstance(cval, _MP_TYPES) else mpmath.mpc(cval)
            rhs = (power(q, -mpmath.mpf(m)) * (q + qp)
                   + ((1 + qp / q) * c).shift_up(m - 1).truncate(order))
        else:
            rhs = power(q, -mpmath.mpf(float(theta))) * (q + qp)
        return (rhs - a).max_abs()


# ---------------------------------------------------------------------------
# Cutoff profile and the log-singularity curvature integral
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth radial bump: 1 on [0, eps/4], 0 on [eps/2, inf).

    The transition is the C-infinity step sigma(p*(1/(1-x) - 1/x)) in the
    rescaled variable x = (eps/2 - r)/(eps/4); ``steepness`` p > 0 picks a
    different (equally valid) profile, which the curvature integral must not
    see.
    """

    epsilon: float
    steepness: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise DomainError("epsilon must be positive")
        if self.steepness <= 0:
            raise DomainError("steepness must be positive")

    def _x(self, r):
        return (self.epsilon / 2 - r) / (self.epsilon / 4)

    def value(self, r):
        r = float(r)
        if r <= self.epsilon / 4:
            return 1.0
        if r >= self.epsilon / 2:
            return 0.0
        x = self._x(r)
        p = self.steepness
        return float(expit(p * (1 / (1 - x) - 1 / x)))

    def derivatives(self, r):
        """(phi, phi', phi'') at radius r."""
        r = float(r)
        lo, hi = self.epsilon / 4, self.epsilon / 2
        if r <= lo:
            return 1.0, 0.0, 0.0
        if r >= hi:
            return 0.0, 0.0, 0.0
        x = self._x(r)
        if x < 1e-12:
            return 0.0, 0.0, 0.0
        if x > 1 - 1e-12:
            return 1.0, 0.0, 0.0
        p = self.steepness
        h = 1 / (1 - x) - 1 / x
        hp = 1 / (1 - x) ** 2 + 1 / x ** 2
        hpp = 2 / (1 - x) ** 3 - 2 / x ** 3
        s = expit(p * h)
        s1 = s * (1 - s)          # sigma'
        s2 = s1 * (1 - 2 * s)     # sigma''
        Sx = s1 * p * hp
        Sxx = s2 * (p * hp) ** 2 + s1 * p * hpp
        dxdr = -4 / self.epsilon
        return float(s), float(Sx * dxdr), float(Sxx * dxdr * dxdr)


def cutoff_log_integral(profile, theta, epsabs=1e-10):
    """Integral of Delta(theta * phi(r) * log r) over the plane.

    Delta is the positive flat Laplacian -r^{-1} d_r (r d_r .) on radial
    functions; the integrand is supported in the transition annulus
    [eps/4, eps/2] and the integral equals 2*pi*theta for every admissible
    profile.  Adaptive quadrature; raises NumericalError if the quadrature
    error estimate is not well below 1e-6.
    """
    if theta == 0:
        return 0.0

    def integrand(r):
        phi, dphi, ddphi = profile.derivatives(r)
        lg = math.log(r)
        w1 = theta * (dphi * lg + phi / r)
        w2 = theta * (ddphi * lg + 2 * dphi / r - phi / r ** 2)
        lap = -(w2 + w1 / r)
        return lap * 2 * math.pi * r

    lo, hi = profile.epsilon / 4, profile.epsilon / 2
    value, err = quad(integrand, lo, hi, epsabs=epsabs, epsrel=1e-12, limit=200)
    if err > 1e-7 * max(1.0, abs(value)):
        raise NumericalError(
            f"quadrature error estimate {err:.3e} too large for contract")
    return float(value)
