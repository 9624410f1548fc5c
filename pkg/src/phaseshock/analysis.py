"""Critical exponents and thermodynamic stability checks.

Near the critical point the universal solution gives

    K_T = -(1/V) dV/dP ~ 2 alpha0 alpha1 sigma / (gamma0 V_c) (log Lambda)_XX nu^(-1/2)
    V_L - V_G ~ nu Delta_p dV/dP(P_c, T_c) ~ nu^(1/2)

so both exponents are 1/2 (mean field). Exponents are estimated as
least-squares slopes on log-log data. ``Delta_p`` only rescales prefactors.
"""

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .coexistence import maxwell_pressure
from .eos_core import CriticalPoint, EosSpec, critical_point
from .errors import DomainError, ExtrapolationError
from .pearcey_universal import ScalingMap, pearcey_moments, universal_dV_dP
from .viscous_solver import FieldSolution, ViscousEntropySpec, _LogTerm, constant

MIN_POINTS = 6


@dataclass(frozen=True)
class ExponentEstimate:
    name: str
    value: float
    stderr: float
    nu_range: tuple
    slope: float = 0.0
    intercept: float = 0.0
    data: tuple = ()

    def to_dict(self):
        d = asdict(self)
        d["nu_range"] = list(self.nu_range)
        d["data"] = [list(p) for p in self.data]
        return d

    def to_csv(self, path, quantity, header=()):
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["nu", quantity])
            for x, y in self.data:
                w.writerow([repr(x), repr(y)])


def loglog_fit(x, y):
    """Slope, intercept and slope standard error of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} points for an exponent fit, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0:
        raise DomainError("log-log fit needs distinct abscissae")
    return float(coef[0]), float(coef[1]), float(np.sqrt(s2 / sxx))


def _check_nus(nu_list):
    nus = np.sort(np.asarray(nu_list, dtype=float))
    if np.any(nus <= 0) or np.any(nus >= 1):
        raise DomainError("nu values must lie in (0, 1)")
    if len(nus) < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} nu values")
    return nus


def compressibility_at_critical(smap: ScalingMap):
    """``K_T`` at ``(P_c, T_c)`` from the analytic derivatives of the universal solution."""
    cp = smap.cp
    return -universal_dV_dP(cp.P_c, cp.T_c, smap) / cp.V_c


def compressibility_prefactor(smap: ScalingMap):
    """``2 alpha0 alpha1 sigma / (gamma0 V_c) (log Lambda)_XX(0, 0)``."""
    v = pearcey_moments(0.0, 0.0)
    logL_xx = -0.5 * v.du_dX
    return 2 * smap.alpha0 * smap.alpha1 * smap.sigma / (smap.gamma0 * smap.cp.V_c) * logL_xx


def compressibility_scaling(smap: ScalingMap, nu_list) -> ExponentEstimate:
    """Exponent ``gamma`` from ``K_T ~ nu^(-gamma)`` at the critical point."""
    nus = _check_nus(nu_list)
    K = np.array([compressibility_at_critical(smap.with_nu(n)) for n in nus])
    slope, icpt, err = loglog_fit(nus, K)
    return ExponentEstimate("gamma", -slope, err, (float(nus[0]), float(nus[-1])), slope, icpt,
                            tuple(zip(nus.tolist(), K.tolist())))


def volume_jump(smap: ScalingMap, delta_p_d=1.0):
    """``|V_L - V_G| ~ nu Delta_p |dV/dP|`` at the critical point."""
    cp = smap.cp
    return abs(smap.nu * delta_p_d * universal_dV_dP(cp.P_c, cp.T_c, smap))


def volume_jump_scaling(smap: ScalingMap, nu_list, delta_p_d=1.0) -> ExponentEstimate:
    """Exponent ``beta`` from ``|V_L - V_G| ~ nu^beta``."""
    if not delta_p_d > 0:
        raise DomainError("delta_p_d must be positive")
    nus = _check_nus(nu_list)
    J = np.array([volume_jump(smap.with_nu(n), delta_p_d) for n in nus])
    slope, icpt, err = loglog_fit(nus, J)
    return ExponentEstimate("beta", slope, err, (float(nus[0]), float(nus[-1])), slope, icpt,
                            tuple(zip(nus.tolist(), J.tolist())))


def maxwell_jump_scaling(eos: EosSpec, dT_list, cp: CriticalPoint = None) -> ExponentEstimate:
    """Exponent of ``V_g - V_l ~ (T_c - T)^beta`` from the equal-areas construction."""
    cp = cp or critical_point(eos)
    dTs = np.sort(np.asarray(dT_list, dtype=float))
    J = np.array([maxwell_pressure(cp.T_c - d, eos, cp=cp).delta_V for d in dTs])
    slope, icpt, err = loglog_fit(dTs, J)
    return ExponentEstimate("beta", slope, err, (float(dTs[0]), float(dTs[-1])), slope, icpt,
                            tuple(zip(dTs.tolist(), J.tolist())))


def ideal_gas_spec(n=1.0, R=8.3144) -> EosSpec:
    """Ideal gas ``PV = nRT``: ``alpha = V/(nR)``, ``f = 0``."""
    nR = n * R

    def alpha(V, nu=0):
        V = np.asarray(V, dtype=float)
        return V / nR if nu == 0 else (np.full_like(V, 1 / nR) if nu == 1 else np.zeros_like(V))

    def f(V, nu=0):
        return np.zeros_like(np.asarray(V, dtype=float))

    return EosSpec(alpha=alpha, f=f, V_domain=(0.0, np.inf), kind="ideal", meta={"n": n, "R": R}, v_scale=1.0)


def ideal_gas_entropy_spec(n=1.0, R=8.3144, nu=1e-3, c_v=1.5) -> ViscousEntropySpec:
    """``S0 = nR log V``, ``F = nR c_v log T``, no viscous terms."""
    return ViscousEntropySpec(S0=_LogTerm(n * R), S1=constant(0.0), S2=constant(0.0), F=_LogTerm(n * R * c_v), nu=nu)


@dataclass
class ConvexityReport:
    name: str
    n_points: int
    n_violations: int
    min_value: float
    violations: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.n_violations == 0

    def to_dict(self):
        return {
            "name": self.name,
            "n_points": self.n_points,
            "n_violations": self.n_violations,
            "min_value": self.min_value,
            "ok": self.ok,
            "violations": self.violations,
            **self.extra,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)


def _in_region(P, T, region):
    if region is None:
        return np.ones_like(P, dtype=bool)
    p0, p1, t0, t1 = region
    return (P >= p0) & (P <= p1) & (T >= t0) & (T <= t1)


def entropy_field(spec: ViscousEntropySpec, solution: FieldSolution, nu=None):
    """``S`` and its first and second derivatives in ``(P, T)`` on the solution grid.

    Returns a dict of arrays with keys ``P, T, S, S_P, S_T, S_PP, S_TT, S_PT``
    (``S_TT`` without ``F''``) and ``V_P, V_T``.
    """
    nu = spec.nu if nu is None else nu
    P = np.asarray(solution.P, dtype=float)
    xi = solution.xi
    V = solution.V
    if len(P) < 3:
        raise DomainError("need at least three pressure snapshots for second derivatives")
    c = solution.frame_speed
    V_p = np.gradient(V, P, axis=0, edge_order=2)
    V_xi = np.gradient(V, xi, axis=1, edge_order=2)
    V_P = V_p - c * V_xi
    V_T = V_xi
    S = spec.S0(V) + nu * spec.S1(V) * V_P + nu * spec.S2(V) * V_T
    S_p = np.gradient(S, P, axis=0, edge_order=2)
    S_xi = np.gradient(S, xi, axis=1, edge_order=2)
    S_pp = np.gradient(S_p, P, axis=0, edge_order=2)
    S_pxi = np.gradient(S_p, xi, axis=1, edge_order=2)
    S_xixi = np.gradient(S_xi, xi, axis=1, edge_order=2)
    # Convert from (P, xi) with T = xi + c (P - P_ref) to (P, T).
    S_PP = S_pp - 2 * c * S_pxi + c * c * S_xixi
    S_PT = S_pxi - c * S_xixi
    S_TT = S_xixi
    Tgrid = solution.T
    Pgrid = np.broadcast_to(P[:, None], V.shape)
    return dict(P=Pgrid, T=Tgrid, S=S, S_P=S_p - c * S_xi, S_T=S_xi, S_PP=S_PP, S_TT=S_TT, S_PT=S_PT, V_P=V_P, V_T=V_T)


def _interior(shape):
    m = np.zeros(shape, dtype=bool)
    m[1:-1, 1:-1] = True
    return m


def entropy_convexity_check(spec: ViscousEntropySpec, solution: FieldSolution, region=None, F=None, tol=0.0,
                            max_listed=50) -> tuple:
    """Sign maps of ``S_PP`` and of the Hessian ``S_PP S_TT - S_PT^2``.

    ``S_PP`` does not involve ``F(T)``; the Hessian adds ``F''(T)`` to
    ``S_TT`` (``F`` defaults to ``spec.F``). ``region`` is
    ``(P_min, P_max, T_min, T_max)``; grid edges are excluded. Returns two
    :class:`ConvexityReport` objects.
    """
    F = spec.F if F is None else F
    d = entropy_field(spec, solution)
    mask = _interior(d["S"].shape) & _in_region(d["P"], d["T"], region)
    if not mask.any():
        raise DomainError("region contains no interior grid points")
    spp = d["S_PP"]
    hess = spp * (d["S_TT"] + F(d["T"], 2)) - d["S_PT"] ** 2
    reports = []
    for name, val in (("S_PP", spp), ("hessian", hess)):
        bad = mask & (val < -tol)
        idx = np.argwhere(bad)
        listed = [
            {"P": float(d["P"][i, j]), "T": float(d["T"][i, j]), "value": float(val[i, j])}
            for i, j in idx[:max_listed]
        ]
        reports.append(ConvexityReport(name, int(mask.sum()), int(bad.sum()), float(val[mask].min()), listed))
    return tuple(reports)


def pressure_from_solution(solution: FieldSolution):
    """Callable ``P(V, T)`` by inverting ``V(P, T)`` column by column.

    Needs a fixed temperature grid (``frame_speed == 0``) and ``V`` strictly
    monotone in ``P`` along every column.
    """
    from scipy.interpolate import CubicSpline, RectBivariateSpline

    if solution.frame_speed != 0:
        raise DomainError("inversion needs a solution on a fixed temperature grid")
    P = np.asarray(solution.P, dtype=float)
    V = solution.V
    dV = np.diff(V, axis=0)
    if not (np.all(dV < 0) or np.all(dV > 0)):
        raise DomainError("V(P, T) is not monotone in P on the grid: isotherms are multivalued")
    T = solution.xi
    # Common volume grid inside every column's range.
    lo = V.min(axis=0).max()
    hi = V.max(axis=0).min()
    if not lo < hi:
        raise DomainError("columns do not share a volume range")
    Vg = np.linspace(lo, hi, len(P))
    table = np.empty((len(Vg), len(T)))
    for j in range(len(T)):
        col = V[:, j]
        order = np.argsort(col)
        table[:, j] = CubicSpline(col[order], P[order])(Vg)
    spline = RectBivariateSpline(Vg, T, table, kx=3, ky=3)

    def P_of(v, t):
        v, t = np.asarray(v, dtype=float), np.asarray(t, dtype=float)
        if np.any(v < lo) or np.any(v > hi) or np.any(t < T[0]) or np.any(t > T[-1]):
            raise ExtrapolationError(f"(V, T) outside the inverted table: V in [{lo!r}, {hi!r}], T in [{T[0]!r}, {T[-1]!r}]")
        return spline.ev(v, t)

    return P_of


def _surface_pressure(eos):
    def P(V, T):
        return (T - eos.f(V)) / eos.alpha(V)

    return P


def isentrope_convexity_check(spec: ViscousEntropySpec, solution, region, n=(24, 24), h=None, tol=0.0,
                              nu=None, max_listed=50) -> ConvexityReport:
    """Sign map of ``[d/dV - (S_V/S_T) d/dT]^2 P(V, T)`` on a ``(V, T)`` grid.

    ``solution`` is a :class:`FieldSolution` (inverted to ``P(V, T)``), an
    :class:`~phaseshock.eos_core.EosSpec` (its state surface) or a callable
    ``P(V, T)``. ``region`` is ``(V_min, V_max, T_min, T_max)``. ``S(V, T)``
    is the entropy expansion evaluated on the state with ``V_P = 1/P_V`` and
    ``V_T = -P_T/P_V``. All derivatives are nested central differences.
    """
    nu = spec.nu if nu is None else nu
    if isinstance(solution, FieldSolution):
        Pf = pressure_from_solution(solution)
    elif isinstance(solution, EosSpec):
        Pf = _surface_pressure(solution)
    elif callable(solution):
        Pf = solution
    else:
        raise DomainError("solution must be a FieldSolution, an EosSpec or a callable P(V, T)")
    v0, v1, t0, t1 = region
    Vs = np.linspace(v0, v1, n[0])
    Ts = np.linspace(t0, t1, n[1])
    VV, TT = np.meshgrid(Vs, Ts, indexing="ij")
    hv = h if h is not None else 1e-3 * max(abs(v1 - v0), 1e-300)
    ht = hv * (t1 - t0) / max(v1 - v0, 1e-300) if h is None else h

    def S(V, T):
        PV = (Pf(V + hv, T) - Pf(V - hv, T)) / (2 * hv)
        PT = (Pf(V, T + ht) - Pf(V, T - ht)) / (2 * ht)
        if np.any(PV == 0):
            raise DomainError("P_V vanishes: state not invertible")
        return spec.S0(V) + nu * spec.S1(V) / PV - nu * spec.S2(V) * PT / PV + spec.F(T)

    def ratio(V, T):
        SV = (S(V + hv, T) - S(V - hv, T)) / (2 * hv)
        ST = (S(V, T + ht) - S(V, T - ht)) / (2 * ht)
        if np.any(ST == 0):
            raise DomainError("S_T vanishes: direction undefined")
        return SV / ST

    def D(g):
        def Dg(V, T):
            r = ratio(V, T)
            return (g(V + hv, T - r * hv) - g(V - hv, T + r * hv)) / (2 * hv)

        return Dg

    val = D(D(Pf))(VV, TT)
    bad = val <= tol
    idx = np.argwhere(bad)
    listed = [{"V": float(VV[i, j]), "T": float(TT[i, j]), "value": float(val[i, j])} for i, j in idx[:max_listed]]
    return ConvexityReport("isentrope", int(val.size), int(bad.sum()), float(val.min()), listed,
                           extra={"V": Vs.tolist(), "T": Ts.tolist(), "sign": np.sign(val).astype(int).tolist()})
