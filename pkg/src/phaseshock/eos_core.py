"""Equations of state of the form ``T - alpha(V) P - f(V) = 0``.

Every state surface in this family is the characteristic solution of the
quasilinear equation ``V_P + alpha(V) V_T = 0``: along each line
``T = alpha(V0) P + f(V0)`` the volume keeps the value ``V0``. The van der
Waals gas is the special case

    alpha(V) = (V - n b) / (n R)
    f(V)     = n a / (R V) - n^2 a b / (R V^2)

Numerics default to reduced units (``V_c = P_c = T_c = 1``), in which the
van der Waals model is ``VdwParams(a=3, b=1/3, n=1, R=8/3)``.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.interpolate import CubicSpline

from ._roots import dedup, hierarchical_roots, merge_flat, sign_change_roots
from .errors import ConvergenceError, DegenerateError, DomainError, NoRootError

GRID_POINTS = 4096
RESIDUAL_TOL = 1e-12
DEDUP_TOL = 1e-9


@dataclass(frozen=True)
class VdwParams:
    """Van der Waals constants in SI units."""

    a: float
    b: float
    n: float = 1.0
    R: float = 8.3144

    def __post_init__(self):
        for name in ("a", "b", "n", "R"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"VdwParams.{name} must be positive, got {value!r}")


HYDROGEN = VdwParams(a=24.76e-3, b=0.02661e-3, n=1000.0, R=8.3144)
REDUCED_VDW = VdwParams(a=3.0, b=1.0 / 3.0, n=1.0, R=8.0 / 3.0)


class _VdwAlpha:
    def __init__(self, p):
        self.nb = p.n * p.b
        self.nR = p.n * p.R

    def __call__(self, V, nu=0):
        V = np.asarray(V, dtype=float)
        if nu == 0:
            return (V - self.nb) / self.nR
        if nu == 1:
            return np.full_like(V, 1.0 / self.nR)
        return np.zeros_like(V)


class _VdwF:
    def __init__(self, p):
        self.c = p.n * p.a / p.R
        self.nb = p.n * p.b

    def __call__(self, V, nu=0):
        V = np.asarray(V, dtype=float)
        k = nu
        sign = -1.0 if k % 2 else 1.0
        return self.c * sign * (factorial(k) / V ** (k + 1) - self.nb * factorial(k + 1) / V ** (k + 2))


class _Scaled:
    """``g(x) = out_scale * h(in_scale * x)`` with chain-rule derivatives."""

    def __init__(self, h, in_scale, out_scale):
        self.h, self.s, self.o = h, in_scale, out_scale

    def __call__(self, V, nu=0):
        return self.o * self.s**nu * self.h(self.s * np.asarray(V, dtype=float), nu)


class _Tabulated:
    def __init__(self, V, y):
        self.spline = CubicSpline(V, y)

    def __call__(self, V, nu=0):
        return self.spline(np.asarray(V, dtype=float), nu)


@dataclass(frozen=True)
class EosSpec:
    """Implicit state surface ``T - alpha(V) P - f(V) = 0``.

    ``alpha`` and ``f`` are callables ``g(V, nu)`` returning the ``nu``-th
    derivative (``nu`` up to 3), vectorised over ``V``.
    """

    alpha: object
    f: object
    V_domain: tuple
    kind: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)
    v_scale: float = 1.0

    def check_domain(self, V):
        lo, hi = self.V_domain
        V = np.asarray(V, dtype=float)
        bad = ~((V > lo) & (V < hi)) if self.kind != "tabulated" else ~((V >= lo) & (V <= hi))
        if np.any(bad):
            raise DomainError(f"volume outside admissible domain {self.V_domain}: {V[bad].ravel()[:3]}")

    def residual(self, P, T, V):
        """Left-hand side ``T - alpha(V) P - f(V)``."""
        return T - self.alpha(V) * P - self.f(V)

    def grid(self, n=GRID_POINTS):
        lo, hi = self.V_domain
        if self.kind == "tabulated":
            return np.linspace(lo, hi, n)
        start = lo * (1 + 1e-9) if lo > 0 else lo + 1e-9 * self.v_scale
        stop = min(hi, 1e3 * self.v_scale) if np.isfinite(hi) else 1e3 * self.v_scale
        if start > 0:
            return np.geomspace(start, stop, n)
        return np.linspace(start, stop, n)


@dataclass(frozen=True)
class ThermoPoint:
    P: float
    T: float
    V: float

    def on_surface(self, eos, tol=RESIDUAL_TOL):
        return abs(eos.residual(self.P, self.T, self.V)) <= tol * max(1.0, abs(self.T))


@dataclass(frozen=True)
class CriticalPoint:
    V_c: float
    P_c: float
    T_c: float


def vdw_spec(params: VdwParams) -> EosSpec:
    nb = params.n * params.b
    return EosSpec(
        alpha=_VdwAlpha(params),
        f=_VdwF(params),
        V_domain=(nb, np.inf),
        kind="vdw",
        meta={"a": params.a, "b": params.b, "n": params.n, "R": params.R},
        v_scale=3.0 * nb,
    )


def tabulated_spec(V, alpha, f) -> EosSpec:
    """State surface from sampled ``alpha`` and ``f`` (cubic splines)."""
    V = np.asarray(V, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    f = np.asarray(f, dtype=float)
    if V.ndim != 1 or len(V) < 4 or V.shape != alpha.shape or V.shape != f.shape:
        raise DomainError("tabulated EOS needs three equal-length 1-D arrays with at least 4 samples")
    if np.any(np.diff(V) <= 0):
        raise DomainError("tabulated volumes must be strictly increasing")
    if np.any(alpha <= 0):
        raise DomainError("alpha(V) must be positive on the tabulated window")
    return EosSpec(
        alpha=_Tabulated(V, alpha),
        f=_Tabulated(V, f),
        V_domain=(float(V[0]), float(V[-1])),
        kind="tabulated",
        meta={"V": V.tolist(), "alpha": alpha.tolist(), "f": f.tolist()},
        v_scale=float(np.median(V)),
    )


def eos_to_dict(eos: EosSpec) -> dict:
    if eos.kind not in ("vdw", "tabulated"):
        raise DomainError(f"cannot serialise an EOS of kind {eos.kind!r}")
    return {"kind": eos.kind, **eos.meta}


def eos_from_dict(doc: dict) -> EosSpec:
    kind = doc.get("kind")
    if kind == "vdw":
        extra = set(doc) - {"kind", "a", "b", "n", "R"}
        if extra:
            raise DomainError(f"unknown keys in vdw EOS document: {sorted(extra)}")
        return vdw_spec(VdwParams(**{k: float(v) for k, v in doc.items() if k != "kind"}))
    if kind == "tabulated":
        extra = set(doc) - {"kind", "V", "alpha", "f"}
        if extra:
            raise DomainError(f"unknown keys in tabulated EOS document: {sorted(extra)}")
        return tabulated_spec(doc["V"], doc["alpha"], doc["f"])
    raise DomainError(f"unknown EOS kind {kind!r}")


def isotherm_pressure(V, T, eos: EosSpec):
    """Pressure on the isotherm ``T`` at volume ``V``: ``(T - f(V)) / alpha(V)``."""
    eos.check_domain(V)
    P = (T - eos.f(V)) / eos.alpha(V)
    return P if np.ndim(P) else float(P)


def characteristic_residual(V, P, T, eos: EosSpec):
    return eos.residual(P, T, V)


def isotherm_derivatives(V, T, eos: EosSpec):
    """``P``, ``dP/dV`` and ``d2P/dV2`` along the isotherm ``T``."""
    a0, a1, a2 = eos.alpha(V), eos.alpha(V, 1), eos.alpha(V, 2)
    N0, N1, N2 = T - eos.f(V), -eos.f(V, 1), -eos.f(V, 2)
    P = N0 / a0
    dP = (N1 * a0 - N0 * a1) / a0**2
    d2P = (N2 * a0 - N0 * a2) / a0**2 - 2 * a1 * (N1 * a0 - N0 * a1) / a0**3
    return P, dP, d2P


def _upper_extension(eos, grid, P, T):
    # The residual tends to -inf for P > 0 as V grows; push the grid until it does.
    if np.isfinite(eos.V_domain[1]) or P <= 0:
        return grid
    top = grid[-1]
    extra = []
    while eos.residual(P, T, top) > 0 and top < 1e15 * eos.v_scale:
        top *= 10.0
        extra.append(top)
    if extra:
        grid = np.concatenate([grid, np.geomspace(grid[-1], extra[-1], 64 * len(extra))[1:]])
    return grid


def solve_volumes(P, T, eos: EosSpec, n=GRID_POINTS):
    """All volumes on the state surface at pressure ``P`` and temperature ``T``.

    Returns an ascending array, deduplicated to ``1e-9 * v_scale``. Roots are
    bracketed on a log-spaced volume grid refined by the zeros of the first
    two volume derivatives of the residual, so nearly tangent roots close to
    the critical point are still separated.
    """
    if not (np.isfinite(P) and np.isfinite(T)):
        raise DomainError("P and T must be finite")
    grid = _upper_extension(eos, eos.grid(n), P, T)

    def g(V):
        return T - eos.alpha(V) * P - eos.f(V)

    def g1(V):
        return -eos.alpha(V, 1) * P - eos.f(V, 1)

    def g2(V):
        return -eos.alpha(V, 2) * P - eos.f(V, 2)

    roots = hierarchical_roots([g, g1, g2], grid)
    if len(roots) == 0:
        raise NoRootError(f"no volume on the state surface at P={P!r}, T={T!r} (bracket exhausted on [{grid[0]:.6g}, {grid[-1]:.6g}])")
    roots = dedup(roots, DEDUP_TOL * eos.v_scale)
    if len(roots) > 1:
        scale = abs(T) + np.abs(eos.alpha(roots) * P).max() + np.abs(eos.f(roots)).max()
        roots = merge_flat(roots, g, 256 * np.finfo(float).eps * scale)
    return roots


def critical_point(eos: EosSpec, n=GRID_POINTS) -> CriticalPoint:
    """Gradient-catastrophe point of the state surface.

    Solves ``T_c - alpha P_c = f``, ``-alpha' P_c = f'`` and
    ``-alpha'' P_c = f''``. Eliminating ``P_c`` from the last two leaves the
    scalar condition ``f' alpha'' - f'' alpha' = 0`` in ``V``.
    """
    grid = eos.grid(n)

    def h(V):
        return eos.f(V, 1) * eos.alpha(V, 2) - eos.f(V, 2) * eos.alpha(V, 1)

    candidates = []
    for V in sign_change_roots(h, grid):
        a1, a2 = eos.alpha(V, 1), eos.alpha(V, 2)
        if abs(a1) >= abs(a2) * eos.v_scale:
            P = -eos.f(V, 1) / a1
        else:
            P = -eos.f(V, 2) / a2
        T = eos.alpha(V) * P + eos.f(V)
        if P > 0 and T > 0:
            candidates.append((float(V), float(P), float(T)))
    if not candidates:
        raise ConvergenceError("no critical point found in the volume domain")
    if len(candidates) > 1:
        raise ConvergenceError(f"several critical point candidates: {candidates}")
    V, P, T = candidates[0]
    cp = CriticalPoint(V, P, T)
    res = critical_residuals(eos, cp)
    # Each condition is compared with T divided by the matching power of V.
    scale = [T, T / V, T / V**2]
    for r, s in zip(res, scale):
        if abs(r) > 1e-8 * max(s, 1e-300):
            raise ConvergenceError(f"critical point residuals too large: {res}")
    c3 = (eos.f(V, 3) + eos.alpha(V, 3) * P) / 6.0
    if abs(c3) * V**3 <= 1e-12 * T:
        raise DegenerateError("degenerate critical point: cubic coefficient vanishes")
    return cp


def critical_residuals(eos: EosSpec, cp: CriticalPoint):
    V, P, T = cp.V_c, cp.P_c, cp.T_c
    return (
        float(T - eos.alpha(V) * P - eos.f(V)),
        float(-eos.alpha(V, 1) * P - eos.f(V, 1)),
        float(-eos.alpha(V, 2) * P - eos.f(V, 2)),
    )


def local_cubic_coeffs(eos: EosSpec, cp: CriticalPoint):
    """Coefficients ``(c1, c3)`` of the local surface ``T' - c1 V' P' - c3 V'^3 = 0``.

    Here ``V' = V - V_c``, ``P' = P - P_c`` and ``T' = T - T_c - alpha(V_c) P'``.
    """
    V = cp.V_c
    c1 = float(eos.alpha(V, 1))
    c3 = float((eos.f(V, 3) + eos.alpha(V, 3) * cp.P_c) / 6.0)
    if c3 == 0.0 or abs(c3) * V**3 <= 1e-12 * cp.T_c:
        raise DegenerateError("cubic coefficient vanishes at the critical point")
    return c1, c3


def reduce_eos(eos: EosSpec, cp: CriticalPoint = None) -> EosSpec:
    """Rewrite ``eos`` in reduced variables ``V/V_c``, ``P/P_c``, ``T/T_c``."""
    cp = cp or critical_point(eos)
    if eos.kind == "vdw":
        # The reduced van der Waals surface is parameter free.
        return vdw_spec(REDUCED_VDW)
    lo, hi = eos.V_domain
    return EosSpec(
        alpha=_Scaled(eos.alpha, cp.V_c, cp.P_c / cp.T_c),
        f=_Scaled(eos.f, cp.V_c, 1.0 / cp.T_c),
        V_domain=(lo / cp.V_c, hi / cp.V_c),
        kind="reduced" if eos.kind != "tabulated" else "reduced-tabulated",
        v_scale=1.0,
    )
