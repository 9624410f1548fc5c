"""Universal near-critical solution built on the Pearcey integral.

    Lambda(X, Y) = int exp(-(z^4 - 2 Y z^2 + 4 X z) / 8) dz
    u(X, Y)      = -2 d/dX log Lambda

``u`` solves the normalised Burgers equation ``u_Y + u u_X = u_XX`` and
``Lambda`` the heat equation ``Lambda_Y = Lambda_XX``. Differentiating under
the integral sign pulls down powers of ``-z/2``, so every ``X``-derivative
of ``log Lambda`` is a cumulant of ``z`` under the normalised integrand:
``u = k1``, ``u_X = -k2/2``, ``u_XX = k3/4``.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .eos_core import CriticalPoint, EosSpec, critical_point
from .errors import ComplexSigmaError, DegenerateError, QuadratureError, TieError, WindowWarning

# Integrand cut where it falls below 1e-18 of its peak.
_LOG_CUTOFF = np.log(1e18)
_FD_STEP = 1e-2
VALID_RANGE = 50.0

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WK15 = np.concatenate([_WK[:-1], _WK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[13, 11, 9]] = _WG[:3]
_WG15[7] = _WG[3]


def gauss_kronrod(func, breaks, tol, max_rounds=40):
    """Adaptive Gauss-Kronrod (7/15) integral of a vector-valued integrand.

    ``func`` maps an array of abscissae of shape ``s`` to values of shape
    ``(m,) + s``. All open intervals are evaluated in one batch per round; an
    interval is accepted once its Kronrod-Gauss difference, measured against
    the integral of ``|func|``, falls below its share of ``tol``.
    Returns ``(integral, error_estimate)``.
    """
    a = np.asarray(breaks[:-1], dtype=float)
    b = np.asarray(breaks[1:], dtype=float)
    span = b[-1] - a[0]
    total = None
    error = 0.0
    scale = None
    for _ in range(max_rounds):
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        z = mid[:, None] + half[:, None] * _NODES[None, :]
        fz = func(z)
        K = np.einsum("mij,j->mi", fz, _WK15) * half
        G = np.einsum("mij,j->mi", fz, _WG15) * half
        A = np.einsum("mij,j->mi", np.abs(fz), _WK15) * half
        if scale is None:
            scale = A.sum(axis=1)
            scale[scale == 0] = 1.0
        err = np.max(np.abs(K - G) / scale[:, None], axis=0)
        # Differences at rounding level of the interval's own mass cannot shrink further.
        floor = 64 * np.finfo(float).eps * np.max(A / scale[:, None], axis=0)
        ok = err <= np.maximum(tol * (b - a) / span, floor)
        part = K[:, ok].sum(axis=1)
        total = part if total is None else total + part
        error += err[ok].sum()
        if ok.all():
            return total, error
        a_bad, b_bad, m_bad = a[~ok], b[~ok], mid[~ok]
        a = np.concatenate([a_bad, m_bad])
        b = np.concatenate([m_bad, b_bad])
    raise QuadratureError(f"adaptive Gauss-Kronrod did not converge ({len(a)} open intervals)")


# ODE variables: u_ode(x, y) = 2**-1/4 u(-2**3/4 x, 2**1/2 y).
_ODE_A = 2.0**0.25
_ODE_B = -(2.0**-0.75)
_ODE_C = 2.0**-0.5


@dataclass(frozen=True)
class PearceyValue:
    X: float
    Y: float
    log_Lambda: float
    Lambda: float
    dLambda_dX: float
    dLambda_dY: float
    d2Lambda_dX2: float
    u: float
    du_dX: float
    d2u_dX2: float

    @property
    def du_dY(self):
        """``u_Y`` from the Burgers equation itself."""
        return self.d2u_dX2 - self.u * self.du_dX


def exponent(z, X, Y):
    return -(z**4 - 2.0 * Y * z**2 + 4.0 * X * z) / 8.0


def saddle_points(X, Y):
    """Real roots of ``z^3 - Y z + X = 0`` (critical points of the exponent), ascending."""
    r = np.roots([1.0, 0.0, -Y, X])
    # Three real saddles exactly inside the caustic 4 Y^3 > 27 X^2; otherwise keep the most nearly real root.
    if 4.0 * Y**3 > 27.0 * X * X:
        real = r.real
    else:
        real = r[[int(np.argmin(np.abs(r.imag)))]].real
    out = []
    for z in np.sort(real):
        # One Newton step cleans up the companion-matrix rounding.
        d = 3 * z * z - Y
        if d != 0:
            z = z - (z**3 - Y * z + X) / d
        out.append(float(z))
    return out


def _dominant(X, Y, saddles):
    vals = [exponent(z, X, Y) for z in saddles]
    i = int(np.argmax(vals))
    return saddles[i], vals[i], vals


def _truncation(X, Y, saddles, peak):
    level = peak - _LOG_CUTOFF - 5.0

    def g(z):
        return exponent(z, X, Y) - level

    bounds = []
    for start, step in ((saddles[-1], 1.0), (saddles[0], -1.0)):
        if g(start) <= 0:
            # Outer saddle already negligible; the exponent decays beyond it.
            bounds.append(start)
            continue
        far = start + step
        while g(far) > 0:
            step *= 2.0
            far = start + step
        bounds.append(brentq(g, min(start, far), max(start, far), xtol=1e-12))
    return bounds[1], bounds[0]


def pearcey_moments(X, Y, tol=1e-12) -> PearceyValue:
    """Pearcey function, its derivatives and ``u`` at ``(X, Y)``.

    The moments ``int w^k exp(phi(z) - phi_max) dz`` with ``w = z - z*``
    (``z*`` the dominant saddle) are integrated together by adaptive
    Gauss-Kronrod quadrature on the interval where the integrand exceeds
    ``1e-18`` of its peak. Shifting to ``z*`` keeps the cumulant formulas
    free of cancellation.
    """
    X, Y = float(X), float(Y)
    if not (np.isfinite(X) and np.isfinite(Y)):
        raise ValueError("X and Y must be finite")
    saddles = saddle_points(X, Y)
    c, peak, _ = _dominant(X, Y, saddles)
    lo, hi = _truncation(X, Y, saddles, peak)
    powers = np.arange(5)

    centres = np.asarray(saddles)
    offsets = np.array([exponent(s, X, Y) for s in saddles]) - peak
    q2s, q3s = (6 * centres**2 - 2 * Y) / 8.0, 4 * centres / 8.0

    def integrand(z):
        # Exponent expanded about the nearest saddle; avoids cancelling the z^4 terms.
        j = np.argmin(np.abs(z[..., None] - centres), axis=-1)
        v = z - centres[j]
        q2, q3 = q2s[j], q3s[j]
        phi = offsets[j] - (v * v) * (q2 + v * (q3 + v / 8.0))
        w = z - c
        return w[None] ** powers[:, None, None] * np.exp(phi)[None]

    breaks = np.unique(np.concatenate([[lo, hi], [s for s in saddles if lo < s < hi]]))
    breaks = np.unique(np.concatenate([np.linspace(p, q, 5) for p, q in zip(breaks[:-1], breaks[1:])]))
    M, _ = gauss_kronrod(integrand, breaks, tol)
    if not np.all(np.isfinite(M)) or M[0] <= 0:
        raise QuadratureError(f"Pearcey quadrature failed at X={X}, Y={Y}")
    m1, m2, m3 = M[1] / M[0], M[2] / M[0], M[3] / M[0]
    k2 = m2 - m1 * m1
    k3 = m3 - 3 * m1 * m2 + 2 * m1**3
    u = c + m1
    log_L = np.log(M[0]) + peak
    L = np.exp(log_L) if log_L < 700 else np.inf
    Lxx = L * (k2 + u * u) / 4.0
    return PearceyValue(
        X=X,
        Y=Y,
        log_Lambda=float(log_L),
        Lambda=float(L),
        dLambda_dX=float(-L * u / 2.0),
        dLambda_dY=float(Lxx),
        d2Lambda_dX2=float(Lxx),
        u=float(u),
        du_dX=float(-k2 / 2.0),
        d2u_dX2=float(k3 / 4.0),
    )


def pearcey_u(X, Y, tol=1e-12):
    return pearcey_moments(X, Y, tol).u


def _d_dY(func, X, Y, h=_FD_STEP):
    # Fourth-order central difference.
    return (func(X, Y - 2 * h) - 8 * func(X, Y - h) + 8 * func(X, Y + h) - func(X, Y + 2 * h)) / (12 * h)


def heat_residual(X, Y) -> float:
    """``|Lambda_Y - Lambda_XX| / Lambda``.

    ``Lambda_Y`` comes from a finite difference of ``log Lambda`` in ``Y``;
    ``Lambda_XX`` from the second moment.
    """
    v = pearcey_moments(X, Y)
    dlogL_dY = _d_dY(lambda x, y: pearcey_moments(x, y).log_Lambda, X, Y)
    return float(abs(dlogL_dY - (v.du_dX * -2.0 + v.u**2) / 4.0))


def burgers_residual(X, Y) -> float:
    """``|u_Y + u u_X - u_XX|`` with ``u_Y`` by finite differences."""
    v = pearcey_moments(X, Y)
    u_Y = _d_dY(pearcey_u, X, Y)
    return float(abs(u_Y + v.u * v.du_dX - v.d2u_dX2))


def ode_value(x, y):
    """``(u, u_x, u_xx)`` of the universal solution in the ODE normalisation.

    In these variables the solution satisfies
    ``u_xx + 3 u u_x + u^3 - y u = x``.
    """
    v = pearcey_moments(x / _ODE_B, y / _ODE_C)
    return v.u / _ODE_A, v.du_dX / (_ODE_A * _ODE_B), v.d2u_dX2 / (_ODE_A * _ODE_B**2)


def ode_residual(x, y) -> float:
    """``|u_xx + 3 u u_x + u^3 - y u - x|`` for the rescaled universal solution."""
    u, ux, uxx = ode_value(x, y)
    return float(abs(uxx + 3 * u * ux + u**3 - y * u - x))


def native_ode_residual(X, Y) -> float:
    """Same ODE written for ``u = -2 d/dX log Lambda`` itself.

    With this normalisation it reads ``4 u_XX - 6 u u_X + u^3 - Y u + X = 0``.
    """
    v = pearcey_moments(X, Y)
    return float(abs(4 * v.d2u_dX2 - 6 * v.u * v.du_dX + v.u**3 - Y * v.u + X))


def cubic_limit(X, Y, rtol=1e-12) -> float:
    """Inviscid limit of ``u``: the dominant real root of ``z^3 - Y z + X = 0``.

    Raises :class:`TieError` on the shock line, where the two outer saddles
    are co-dominant.
    """
    saddles = saddle_points(X, Y)
    if len(saddles) == 1:
        return saddles[0]
    _, peak, vals = _dominant(X, Y, saddles)
    top = sorted(vals)[-2:]
    if abs(top[1] - top[0]) <= rtol * max(1.0, abs(peak)):
        raise TieError(f"co-dominant saddles at X={X}, Y={Y} (shock line)")
    return saddles[int(np.argmax(vals))]


@dataclass(frozen=True)
class ScalingMap:
    cp: CriticalPoint
    alpha0: float
    alpha1: float
    gamma0: float
    sigma: float
    nu: float

    def __post_init__(self):
        if not self.alpha1 * self.gamma0 < 0:
            raise ComplexSigmaError("scaling map needs alpha1 * gamma0 < 0")
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    @property
    def lam(self):
        return self.nu**0.25

    def with_nu(self, nu):
        return replace(self, nu=float(nu))

    def to_XY(self, P, T):
        """Universal variables ``(X, Y)`` for the state ``(P, T)``."""
        p = np.asarray(P, dtype=float) - self.cp.P_c
        tbar = (np.asarray(T, dtype=float) - self.cp.T_c - self.alpha0 * p) / self.nu**0.75
        pbar = p / self.nu**0.5
        return -(self.alpha1 / self.gamma0) * tbar, -(self.alpha1**2 / self.gamma0) * pbar

    def from_XY(self, X, Y):
        pbar = -np.asarray(Y, dtype=float) * self.gamma0 / self.alpha1**2
        tbar = -np.asarray(X, dtype=float) * self.gamma0 / self.alpha1
        p = pbar * self.nu**0.5
        return self.cp.P_c + p, self.cp.T_c + self.alpha0 * p + tbar * self.nu**0.75


def sigma_matching(eos: EosSpec, cp: CriticalPoint, gamma0: float) -> float:
    """Matching constant between the universal solution and the local cubic.

    ``sigma^4 = 6 gamma0 / (alpha'(V_c) (f'''(V_c) + alpha'''(V_c) P_c))``; the
    sign of the fourth root is fixed by ``sigma alpha'(V_c) gamma0 < 0``.
    """
    a1 = float(eos.alpha(cp.V_c, 1))
    k3 = float(eos.f(cp.V_c, 3) + eos.alpha(cp.V_c, 3) * cp.P_c)
    if a1 == 0 or k3 == 0:
        raise DegenerateError("alpha'(V_c) and the cubic coefficient must be non-zero")
    if gamma0 == 0:
        raise DegenerateError("gamma0 must be non-zero")
    arg = 6.0 * gamma0 / (a1 * k3)
    if arg < 0:
        raise ComplexSigmaError(
            f"sigma^4 = {arg:.6g} < 0: no real matching constant (gamma0={gamma0:.6g}, alpha'={a1:.6g}, cubic={k3:.6g})"
        )
    s0 = arg**0.25
    return -s0 if a1 * gamma0 > 0 else s0


def scaling_map(eos: EosSpec, gamma0: float, nu: float, cp: CriticalPoint = None) -> ScalingMap:
    cp = cp or critical_point(eos)
    sigma = sigma_matching(eos, cp, gamma0)
    return ScalingMap(
        cp=cp,
        alpha0=float(eos.alpha(cp.V_c)),
        alpha1=float(sigma * eos.alpha(cp.V_c, 1)),
        gamma0=float(gamma0),
        sigma=float(sigma),
        nu=float(nu),
    )


def _check_window(X, Y):
    if max(abs(X), abs(Y)) > VALID_RANGE:
        warnings.warn(f"(X, Y) = ({X:.3g}, {Y:.3g}) outside the universal window", WindowWarning, stacklevel=3)


def universal_volume(P, T, smap: ScalingMap) -> float:
    """``V_c + sigma nu^(1/4) u(X, Y)`` at the state ``(P, T)``."""
    X, Y = smap.to_XY(P, T)
    X, Y = float(X), float(Y)
    _check_window(X, Y)
    return smap.cp.V_c + smap.sigma * smap.lam * pearcey_u(X, Y)


def universal_dV_dP(P, T, smap: ScalingMap) -> float:
    """Isothermal ``dV/dP`` of the universal solution (analytic, via moments)."""
    X, Y = smap.to_XY(P, T)
    X, Y = float(X), float(Y)
    _check_window(X, Y)
    v = pearcey_moments(X, Y)
    dX_dP = smap.alpha1 * smap.alpha0 / (smap.gamma0 * smap.nu**0.75)
    dY_dP = -(smap.alpha1**2) / (smap.gamma0 * smap.nu**0.5)
    return smap.sigma * smap.lam * (v.du_dX * dX_dP + v.du_dY * dY_dP)


def pearcey_grid(xs, ys):
    """Rows ``(X, Y, Lambda, u)`` over the Cartesian product of ``xs`` and ``ys``."""
    rows = []
    for y in ys:
        for x in xs:
            v = pearcey_moments(x, y)
            rows.append((float(x), float(y), v.Lambda, v.u))
    return rows
