"""Two-phase region: equal-areas rule, Gibbs potential, coexistence curves.

Below ``T_c`` an isotherm ``P(V)`` has a loop between its two spinodal
points. The saturation pressure ``P_sat`` cuts the loop so that

    A(P) = int_{V_l}^{V_g} (P(V) - P) dV = 0,

with ``V_l < V_g`` the outer volumes at ``(P, T)``. ``dA/dP = -(V_g - V_l)``,
so ``A`` is strictly decreasing between the spinodal pressures and the zero
is unique. The jump across the transition moves in the ``(T, P)`` plane with
speed ``U = dP_sat/dT = Delta S / Delta V`` (Clapeyron), where ``S0`` is the
volume part of the entropy with ``S0' = 1 / alpha``.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from ._roots import hierarchical_roots
from .eos_core import CriticalPoint, EosSpec, critical_point, isotherm_pressure, solve_volumes
from .errors import BranchCountError, ConvergenceError, DegenerateError, NoTransitionError

NEAR_CRITICAL = 1e-6
NEAR_SEED = 1e-2
AREA_TOL = 1e-10
_QUAD = dict(epsrel=1e-12, limit=200)


@dataclass(frozen=True)
class VolumeEntropySpec:
    """Volume part ``S0(V)`` of a separable entropy, with ``S0' = 1 / alpha``.

    ``S0`` is a callable ``S0(V, nu)`` for ``nu`` in ``{0, 1}``. The additive
    constant is irrelevant and fixed by ``V_ref``.
    """

    S0: object
    V_ref: float = 0.0

    def dS0(self, V):
        return self.S0(V, 1)

    def delta(self, V1, V2):
        return float(self.S0(V2) - self.S0(V1))

    def consistent_with(self, eos: EosSpec, V, rtol=1e-8):
        V = np.asarray(V, dtype=float)
        return bool(np.allclose(1.0 / self.S0(V, 1), eos.alpha(V), rtol=rtol, atol=0.0))


class _VdwS0:
    def __init__(self, nR, nb):
        self.nR, self.nb = nR, nb

    def __call__(self, V, nu=0):
        V = np.asarray(V, dtype=float)
        if nu == 0:
            return self.nR * np.log(V - self.nb)
        if nu == 1:
            return self.nR / (V - self.nb)
        raise ValueError("S0 derivatives above first order are not provided")


class _QuadS0:
    def __init__(self, eos, V_ref):
        self.eos, self.V_ref = eos, V_ref

    def __call__(self, V, nu=0):
        if nu == 1:
            return 1.0 / self.eos.alpha(V)
        if nu != 0:
            raise ValueError("S0 derivatives above first order are not provided")
        V = np.asarray(V, dtype=float)
        out = [quad(lambda v: 1.0 / float(self.eos.alpha(v)), self.V_ref, x, **_QUAD)[0] for x in V.ravel()]
        return np.asarray(out).reshape(V.shape) if V.ndim else out[0]


def volume_entropy(eos: EosSpec, V_ref=None) -> VolumeEntropySpec:
    """``S0`` with ``S0' = 1 / alpha``; closed form for van der Waals."""
    if eos.kind == "vdw":
        m = eos.meta
        return VolumeEntropySpec(_VdwS0(m["n"] * m["R"], m["n"] * m["b"]))
    if V_ref is None:
        V_ref = eos.v_scale
    return VolumeEntropySpec(_QuadS0(eos, V_ref), V_ref=V_ref)


@dataclass(frozen=True)
class SaturationPoint:
    T: float
    P_sat: float
    V_l: float
    V_g: float
    delta_S: float
    delta_V: float
    L_h: float
    area_residual: float = 0.0


@dataclass(frozen=True)
class CoexistenceCurve:
    points: tuple

    @property
    def T_range(self):
        return self.points[0].T, self.points[-1].T

    def column(self, name):
        return np.array([getattr(p, name) for p in self.points])

    def to_csv(self, path, header=()):
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["T", "P_sat", "V_l", "V_g", "delta_S", "latent_heat"])
            for p in self.points:
                w.writerow([repr(p.T), repr(p.P_sat), repr(p.V_l), repr(p.V_g), repr(p.delta_S), repr(p.L_h)])


def _dP_numerators(eos, T):
    # q = alpha' (T - f) + f' alpha has the opposite sign of dP/dV.
    def q(V):
        return eos.alpha(V, 1) * (T - eos.f(V)) + eos.f(V, 1) * eos.alpha(V)

    def q1(V):
        return eos.alpha(V, 2) * (T - eos.f(V)) + eos.f(V, 2) * eos.alpha(V)

    def q2(V):
        return (eos.alpha(V, 3) * (T - eos.f(V)) - eos.alpha(V, 2) * eos.f(V, 1)
                + eos.f(V, 3) * eos.alpha(V) + eos.f(V, 2) * eos.alpha(V, 1))

    return [q, q1, q2]


def spinodals(T, eos: EosSpec):
    """Volumes ``(V_a, V_b)`` of the local minimum and maximum of ``P`` on the isotherm.

    Raises :class:`NoTransitionError` when the isotherm is monotone.
    """
    roots = hierarchical_roots(_dP_numerators(eos, T), eos.grid())
    if len(roots) < 2:
        raise NoTransitionError(f"isotherm T={T!r} is monotone: no two-phase region")
    if len(roots) > 2:
        raise BranchCountError(f"isotherm T={T!r} has {len(roots)} turning points; expected 2")
    return float(roots[0]), float(roots[1])


class _Isotherm:
    """Outer-branch inversion and areas on one subcritical isotherm."""

    def __init__(self, T, eos):
        self.T, self.eos = T, eos
        self.V_a, self.V_b = spinodals(T, eos)
        self.P_a = isotherm_pressure(self.V_a, T, eos)
        self.P_b = isotherm_pressure(self.V_b, T, eos)
        grid = eos.grid()
        self.lo = float(grid[0])
        self.hi = float(grid[-1])

    def P(self, V):
        return float((self.T - self.eos.f(V)) / self.eos.alpha(V))

    def outer(self, P):
        g = lambda V: self.P(V) - P
        if g(self.lo) <= 0:
            raise ConvergenceError(f"liquid branch not bracketed at P={P!r}, T={self.T!r}")
        V_l = brentq(g, self.lo, self.V_a, xtol=1e-300, rtol=8.9e-16, maxiter=200)
        hi = max(self.hi, 2 * self.V_b)
        while g(hi) > 0:
            if hi > 1e30:
                raise ConvergenceError(f"gas branch not bracketed at P={P!r}, T={self.T!r}")
            hi *= 10.0
        V_g = brentq(g, self.V_b, hi, xtol=1e-300, rtol=8.9e-16, maxiter=200)
        return V_l, V_g

    def area(self, P):
        """``A(P) = int (P(V) - P) dV`` between the outer roots, and the roots."""
        V_l, V_g = self.outer(P)
        pts = [v for v in (self.V_a, self.V_b) if V_l < v < V_g]
        tol = 1e-14 * (abs(P) + abs(self.P_a) + abs(self.P_b)) * (V_g - V_l)
        A = quad(lambda V: self.P(V) - P, V_l, V_g, points=pts or None, epsabs=tol, **_QUAD)[0]
        return A, V_l, V_g


def _check_T(T, cp):
    if not T > 0:
        raise NoTransitionError(f"temperature must be positive, got {T!r}")
    if T >= cp.T_c:
        raise NoTransitionError(f"T={T!r} is not below T_c={cp.T_c!r}")
    if T > cp.T_c * (1 - NEAR_CRITICAL):
        raise NoTransitionError(f"T={T!r} is within {NEAR_CRITICAL:g} of T_c; the two phases are not resolvable")


def maxwell_pressure(T, eos: EosSpec, cp: CriticalPoint = None, seed=None, entropy: VolumeEntropySpec = None) -> SaturationPoint:
    """Saturation state at temperature ``T`` by the equal-areas rule.

    The area function is bracketed by the spinodal pressures (the lower one
    clipped to a small positive value) and solved by Brent's method, then
    polished with Newton steps using ``dA/dP = -(V_g - V_l)``. A ``seed``
    pressure (e.g. from a neighbouring temperature) is tried first with
    safeguarded Newton iterations.
    """
    cp = cp or critical_point(eos)
    _check_T(T, cp)
    iso = _Isotherm(T, eos)
    lo = max(iso.P_a, 1e-12 * cp.P_c)
    hi = iso.P_b
    if not lo < hi:
        raise NoTransitionError(f"no positive-pressure loop at T={T!r}")
    area_scale = cp.P_c * cp.V_c

    if seed is None and T > cp.T_c * (1 - NEAR_SEED):
        # Odd local cubic: the equal-areas line is T_bar = 0, i.e. T - T_c = alpha(V_c) (P - P_c).
        seed = cp.P_c + (T - cp.T_c) / float(eos.alpha(cp.V_c))
    P = None
    if seed is not None and lo < seed < hi:
        P = float(seed)
        for _ in range(30):
            A, V_l, V_g = iso.area(P)
            step = A / (V_g - V_l)
            new = P + step
            if not lo < new < hi:
                P = None
                break
            P = new
            if abs(step) <= 4e-16 * P:
                break
        else:
            P = None
    if P is None:
        P = brentq(lambda p: iso.area(p)[0], lo, hi, xtol=1e-300, rtol=8.9e-16, maxiter=300)
        for _ in range(3):
            A, V_l, V_g = iso.area(P)
            new = P + A / (V_g - V_l)
            if not lo < new < hi:
                break
            P = new
    A, V_l, V_g = iso.area(P)
    if abs(A) > AREA_TOL * area_scale:
        raise ConvergenceError(f"equal-areas residual {A:.3e} above tolerance at T={T!r}")
    entropy = entropy or volume_entropy(eos)
    dS = entropy.delta(V_l, V_g)
    return SaturationPoint(
        T=float(T), P_sat=float(P), V_l=float(V_l), V_g=float(V_g),
        delta_S=dS, delta_V=float(V_g - V_l), L_h=float(T * dS), area_residual=float(A / area_scale),
    )


def equal_area_residual(P, T, eos: EosSpec):
    """``A(P)`` on the isotherm ``T`` (positive below ``P_sat``)."""
    return _Isotherm(T, eos).area(P)[0]


def gibbs_difference(P, T, eos: EosSpec):
    """``Phi(gas) - Phi(liquid)`` at ``(P, T)`` from ``int V dP`` along the isotherm.

    The contour runs over the multivalued isotherm from ``V_l`` to ``V_g``,
    parameterised by ``V``: ``int V P'(V) dV``. It is negative below ``P_sat``
    (the gas is the stable phase) and positive above.
    """
    roots = solve_volumes(P, T, eos)
    if len(roots) != 3:
        raise BranchCountError(f"expected 3 volumes at P={P!r}, T={T!r}, found {len(roots)}")
    V_l, V_g = float(roots[0]), float(roots[-1])

    def integrand(V):
        a0, a1 = eos.alpha(V), eos.alpha(V, 1)
        dP = (-eos.f(V, 1) * a0 - (T - eos.f(V)) * a1) / a0**2
        return float(V * dP)

    # |V P'| integrates to at most V_g times the total variation of P on the loop.
    V_a, V_b = spinodals(T, eos)
    tol = 2e-14 * V_g * (isotherm_pressure(V_b, T, eos) - isotherm_pressure(V_a, T, eos))
    # Rounding floor of the integrand itself.
    tol = max(tol, 1e-13 * abs(P) * (V_g - V_l))
    return quad(integrand, V_l, V_g, points=[float(roots[1])], epsabs=tol, **_QUAD)[0]


def coexistence_curve(T_lo, T_hi, steps, eos: EosSpec, cp: CriticalPoint = None) -> CoexistenceCurve:
    """Saturation points on ``linspace(T_lo, T_hi, steps)``, each seeded by its predecessor."""
    cp = cp or critical_point(eos)
    if not 0 < T_lo < T_hi < cp.T_c:
        raise NoTransitionError(f"need 0 < T_lo < T_hi < T_c, got {T_lo!r}, {T_hi!r} (T_c={cp.T_c!r})")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    entropy = volume_entropy(eos)
    points = []
    seed = None
    for T in np.linspace(T_lo, T_hi, int(steps)):
        try:
            sp = maxwell_pressure(float(T), eos, cp=cp, seed=seed, entropy=entropy)
        except (ConvergenceError, NoTransitionError, BranchCountError) as exc:
            raise type(exc)(f"coexistence curve failed at T={T!r}: {exc}") from exc
        points.append(sp)
        seed = sp.P_sat
    return CoexistenceCurve(tuple(points))


def clapeyron_speed(sp: SaturationPoint, s: VolumeEntropySpec, rtol=1e-9):
    """Rankine-Hugoniot speed ``Delta S / Delta V`` of the transition (equals ``dP_sat/dT``)."""
    dV = sp.V_g - sp.V_l
    if not dV > rtol * abs(sp.V_g):
        raise DegenerateError(f"volume jump {dV!r} too small at T={sp.T!r}")
    return s.delta(sp.V_l, sp.V_g) / dV
