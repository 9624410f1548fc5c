import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import vdw_critical, vdw_f3, vdw_pressure, scan_roots
from phaseshock.coexistence import maxwell_pressure
from phaseshock.eos_core import (
    HYDROGEN,
    REDUCED_VDW,
    CriticalPoint,
    EosSpec,
    ThermoPoint,
    VdwParams,
    characteristic_residual,
    critical_point,
    critical_residuals,
    eos_from_dict,
    eos_to_dict,
    isotherm_derivatives,
    isotherm_pressure,
    local_cubic_coeffs,
    reduce_eos,
    solve_volumes,
    tabulated_spec,
    vdw_spec,
)
from phaseshock.errors import DegenerateError, DomainError, NoRootError

H = HYDROGEN


def test_params_validated():
    with pytest.raises(DomainError):
        VdwParams(a=-1.0, b=1.0)
    with pytest.raises(DomainError):
        VdwParams(a=1.0, b=0.0)


def test_alpha_hydrogen(hydrogen):
    assert hydrogen.alpha(0.07983) == pytest.approx((0.07983 - H.n * H.b) / (H.n * H.R), rel=1e-14)
    assert hydrogen.alpha(0.07983) == pytest.approx(6.401e-6, rel=1e-3)


def test_alpha_vanishes_at_covolume(hydrogen):
    nb = H.n * H.b
    vals = hydrogen.alpha(nb * (1 + np.array([1e-3, 1e-6, 1e-9])))
    assert np.all(vals > 0) and np.all(np.diff(vals) < 0) and vals[-1] < 1e-14


def test_surface_reproduces_vdw_law(hydrogen):
    V = np.geomspace(0.03, 10, 50)
    for T in (20.0, 33.0, 300.0):
        assert np.allclose(isotherm_pressure(V, T, hydrogen), vdw_pressure(V, T, H.a, H.b, H.n, H.R), rtol=1e-12)


def test_f_third_derivative(hydrogen):
    V = np.array([0.05, 0.07983, 0.2])
    assert np.allclose(hydrogen.f(V, 3), vdw_f3(V, H.a, H.b, H.n, H.R), rtol=1e-12)
    assert hydrogen.f(0.07983, 3) > 0


def test_domain_error(hydrogen):
    with pytest.raises(DomainError):
        isotherm_pressure(H.n * H.b * 0.5, 30.0, hydrogen)
    with pytest.raises(DomainError):
        isotherm_pressure(H.n * H.b, 30.0, hydrogen)


def test_critical_pressure_at_critical_state(hydrogen):
    Vc, Pc, Tc = vdw_critical(H.a, H.b, H.n, H.R)
    assert isotherm_pressure(Vc, Tc, hydrogen) == pytest.approx(Pc, rel=1e-12)


def test_characteristic_residual_identity(reduced):
    V = np.linspace(0.5, 5, 30)
    P = isotherm_pressure(V, 1.3, reduced)
    assert np.max(np.abs(characteristic_residual(V, P, 1.3, reduced))) < 1e-14
    assert ThermoPoint(float(P[3]), 1.3, float(V[3])).on_surface(reduced)


def test_monotone_above_critical(hydrogen, hydrogen_cp):
    V = np.geomspace(H.n * H.b * 1.001, 100 * hydrogen_cp.V_c, 5000)
    for T in (1.0001, 1.2, 3.0):
        _, dP, _ = isotherm_derivatives(V, T * hydrogen_cp.T_c, hydrogen)
        assert np.all(dP < 0)


def test_critical_point_hydrogen(hydrogen):
    cp = critical_point(hydrogen)
    Vc, Pc, Tc = vdw_critical(H.a, H.b, H.n, H.R)
    assert cp.V_c == pytest.approx(0.07983, rel=1e-4)
    assert cp.V_c == pytest.approx(Vc, rel=1e-12)
    assert cp.P_c == pytest.approx(Pc, rel=1e-10)
    assert cp.T_c == pytest.approx(Tc, rel=1e-10)
    assert cp.T_c == pytest.approx(33.16, abs=5e-3)
    assert cp.P_c == pytest.approx(1.295e6, rel=1e-3)


def test_critical_point_scaling():
    base = critical_point(vdw_spec(HYDROGEN))
    cp = critical_point(vdw_spec(VdwParams(a=4 * H.a, b=H.b, n=H.n, R=H.R)))
    assert cp.V_c == pytest.approx(base.V_c, rel=1e-12)
    assert cp.P_c == pytest.approx(4 * base.P_c, rel=1e-10)
    assert cp.T_c == pytest.approx(4 * base.T_c, rel=1e-10)


def test_critical_residuals_and_derivatives(hydrogen, hydrogen_cp):
    r = critical_residuals(hydrogen, hydrogen_cp)
    assert abs(r[0]) < 1e-12 * hydrogen_cp.T_c
    P, dP, d2P = isotherm_derivatives(hydrogen_cp.V_c, hydrogen_cp.T_c, hydrogen)
    scale = hydrogen_cp.P_c / hydrogen_cp.V_c
    assert abs(dP) < 1e-9 * scale and abs(d2P) < 1e-9 * scale / hydrogen_cp.V_c
    # Independent finite differences on the isotherm.
    h = 1e-3 * hydrogen_cp.V_c
    p = lambda v: isotherm_pressure(v, hydrogen_cp.T_c, hydrogen)
    V = hydrogen_cp.V_c
    assert abs((p(V + h) - p(V - h)) / (2 * h)) < 1e-5 * scale
    assert abs((p(V + h) - 2 * p(V) + p(V - h)) / h**2) < 1e-4 * scale / V


def test_local_cubic(hydrogen, hydrogen_cp):
    c1, c3 = local_cubic_coeffs(hydrogen, hydrogen_cp)
    assert c1 == pytest.approx(1 / (H.n * H.R), rel=1e-14)
    assert hydrogen.alpha(hydrogen_cp.V_c, 3) == 0
    assert c3 == pytest.approx(vdw_f3(hydrogen_cp.V_c, H.a, H.b, H.n, H.R) / 6, rel=1e-12)
    assert c3 > 0


def test_local_cubic_taylor_remainder(reduced):
    cp = critical_point(reduced)
    c1, c3 = local_cubic_coeffs(reduced, cp)
    alpha0 = float(reduced.alpha(cp.V_c))
    rems = []
    for lam in (1e-2, 1e-3):
        Vb, Pb, Tb = 0.7 * lam, -0.4 * lam**2, 0.3 * lam**3
        P = cp.P_c + Pb
        T = cp.T_c + Tb + alpha0 * Pb
        full = float(reduced.residual(P, T, cp.V_c + Vb))
        cubic = Tb - c1 * Vb * Pb - c3 * Vb**3
        rems.append(abs(full - cubic))
    # O(lambda^4): a factor 10 in lambda gives a factor 1e4 in the remainder.
    assert rems[0] / rems[1] == pytest.approx(1e4, rel=0.05)


def test_degenerate_critical_point():
    # alpha = V, f = 2 - V - (V - 1)^5: all three conditions hold at V = 1 but f''' vanishes.
    def alpha(V, nu=0):
        V = np.asarray(V, dtype=float)
        return V if nu == 0 else (np.ones_like(V) if nu == 1 else np.zeros_like(V))

    def f(V, nu=0):
        x = np.asarray(V, dtype=float) - 1
        c = [1, 5, 20, 60][nu]
        return -c * x ** (5 - nu) + (1 - x if nu == 0 else (-1.0 if nu == 1 else 0.0))

    eos = EosSpec(alpha, f, (0.5, 2.0), v_scale=1.0)
    with pytest.raises(DegenerateError):
        critical_point(eos)
    with pytest.raises(DegenerateError):
        local_cubic_coeffs(eos, CriticalPoint(1.0, 1.0, 0.0))


def test_single_root_at_critical_point(hydrogen, hydrogen_cp):
    roots = solve_volumes(hydrogen_cp.P_c, hydrogen_cp.T_c, hydrogen)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(hydrogen_cp.V_c, rel=1e-4)


def test_three_roots_at_saturation(reduced):
    sp = maxwell_pressure(0.9, reduced)
    roots = solve_volumes(sp.P_sat, 0.9, reduced)
    brute = scan_roots(lambda V: float(reduced.residual(sp.P_sat, 0.9, V)), 0.34, 50.0, 10_000)
    assert len(roots) == 3 == len(brute)
    assert np.allclose(roots, brute, rtol=1e-10)


@given(st.floats(0.01, 50.0))
def test_one_root_above_critical(P):
    eos = vdw_spec(REDUCED_VDW)
    assert len(solve_volumes(P, 1.5, eos)) == 1


def test_no_root():
    # alpha bounded below and above on a finite window: the surface misses this state.
    V = np.linspace(1.0, 2.0, 50)
    eos = tabulated_spec(V, np.ones_like(V), np.zeros_like(V))
    with pytest.raises(NoRootError):
        solve_volumes(5.0, 1.0, eos)


def _root_tol(V, T):
    # A triple root at the critical point is only determined to (eps T / c3)^(1/3), c3 = 3/8.
    return max(1e-8 * V, 4 * (np.finfo(float).eps * T / 0.375) ** (1 / 3))


@given(st.floats(0.4, 20.0), st.floats(0.3, 3.0))
def test_roundtrip(V, T):
    eos = vdw_spec(REDUCED_VDW)
    P = isotherm_pressure(V, T, eos)
    roots = solve_volumes(P, T, eos)
    near = abs(V - 1) < 0.05 and abs(T - 1) < 0.05
    assert np.min(np.abs(roots - V)) <= (_root_tol(V, T) if near else 1e-8 * V)


@given(st.floats(0.4, 10.0), st.floats(-0.5, 0.5))
def test_characteristic_lines(V0, P):
    # Along T = alpha(V0) P + f(V0) the surface returns V0.
    eos = vdw_spec(REDUCED_VDW)
    P = 1.0 + P
    T = float(eos.alpha(V0) * P + eos.f(V0))
    if T <= 0:
        return
    roots = solve_volumes(P, T, eos)
    near = abs(V0 - 1) < 0.05 and abs(T - 1) < 0.05
    assert np.min(np.abs(roots - V0)) <= (_root_tol(V0, T) if near else 1e-8 * V0)


def test_reduce_eos(hydrogen):
    red = reduce_eos(hydrogen)
    cp = critical_point(red)
    assert (cp.V_c, cp.P_c, cp.T_c) == pytest.approx((1, 1, 1), rel=1e-12)


def test_reduce_tabulated():
    eos = vdw_spec(HYDROGEN)
    cp = critical_point(eos)
    V = np.linspace(0.5 * cp.V_c, 4 * cp.V_c, 400)
    tab = tabulated_spec(V, eos.alpha(V), eos.f(V))
    red = reduce_eos(tab)
    rcp = critical_point(red)
    assert (rcp.V_c, rcp.P_c, rcp.T_c) == pytest.approx((1, 1, 1), rel=1e-5)


def test_json_roundtrip(tmp_path, hydrogen):
    doc = eos_to_dict(hydrogen)
    assert doc == {"kind": "vdw", "a": H.a, "b": H.b, "n": H.n, "R": H.R}
    back = eos_from_dict(json.loads(json.dumps(doc)))
    assert critical_point(back) == critical_point(hydrogen)
    V = np.linspace(1, 3, 10)
    tab = tabulated_spec(V, V, V**2)
    back = eos_from_dict(json.loads(json.dumps(eos_to_dict(tab))))
    assert np.allclose(back.alpha(V), V) and np.allclose(back.f(V), V**2)
    with pytest.raises(DomainError):
        eos_from_dict({"kind": "vdw", "a": 1, "b": 1, "n": 1, "R": 1, "extra": 2})
    with pytest.raises(DomainError):
        eos_from_dict({"kind": "virial"})


def test_tabulated_validation():
    V = np.linspace(1, 2, 10)
    with pytest.raises(DomainError):
        tabulated_spec(V[::-1], V, V)
    with pytest.raises(DomainError):
        tabulated_spec(V, -V, V)
    with pytest.raises(DomainError):
        tabulated_spec(V[:3], V[:3], V[:3])


def test_critical_point_dataclass():
    cp = CriticalPoint(1.0, 2.0, 3.0)
    assert (cp.V_c, cp.P_c, cp.T_c) == (1.0, 2.0, 3.0)
