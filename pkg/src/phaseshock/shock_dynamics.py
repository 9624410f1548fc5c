"""Phase boundaries as shocks on the ``(T, P)`` plane.

A coexistence curve separating phases ``a`` and ``b`` moves with the
Rankine-Hugoniot speed ``dP/dT = (S_b - S_a) / (V_b - V_a)``. Two such curves
sharing a phase (solid/liquid and liquid/gas) meet at a triple point and
continue as a single curve between the outer phases (solid/gas).
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .coexistence import volume_entropy
from .eos_core import EosSpec, solve_volumes
from .errors import DegenerateError, NoIntersectionError, PhaseShockError


def rh_speed(left, right, rtol=1e-14):
    """``(S_right - S_left) / (V_right - V_left)`` for states ``(V, S)``."""
    (Vl, Sl), (Vr, Sr) = left, right
    dV = Vr - Vl
    if abs(dV) <= rtol * max(abs(Vl), abs(Vr)) or dV == 0:
        raise DegenerateError(f"degenerate jump: V_left={Vl!r}, V_right={Vr!r}")
    return (Sr - Sl) / dV


@dataclass(frozen=True)
class PhaseState:
    """A labelled phase whose volume and entropy are functions of ``(P, T)``."""

    label: str
    V: object
    S: object

    def __call__(self, P, T):
        return float(self.V(P, T)), float(self.S(P, T))


def constant_state(label, V, S, F=None) -> PhaseState:
    """Phase with fixed volume and entropy ``S + F(T)``."""
    if F is None:
        return PhaseState(label, lambda P, T: V, lambda P, T: S)
    return PhaseState(label, lambda P, T: V, lambda P, T: S + float(F(T)))


def eos_states(eos: EosSpec, F=None):
    """Liquid (smallest root) and gas (largest root) states of an equation of state.

    ``S = S0(V) + F(T)`` with ``S0' = 1/alpha``; ``F`` defaults to zero.
    """
    s0 = volume_entropy(eos)
    Fv = (lambda T: 0.0) if F is None else F

    def V_liq(P, T):
        return float(solve_volumes(P, T, eos)[0])

    def V_gas(P, T):
        return float(solve_volumes(P, T, eos)[-1])

    liquid = PhaseState("liquid", V_liq, lambda P, T: float(s0.S0(V_liq(P, T))) + float(Fv(T)))
    gas = PhaseState("gas", V_gas, lambda P, T: float(s0.S0(V_gas(P, T))) + float(Fv(T)))
    return liquid, gas


@dataclass(frozen=True)
class PhaseStateTriple:
    solid: PhaseState
    liquid: PhaseState
    gas: PhaseState

    def ordered(self, P, T):
        """True when ``V_s < V_l < V_g`` and ``S_s < S_l < S_g`` at ``(P, T)``."""
        (Vs, Ss), (Vl, Sl), (Vg, Sg) = self.solid(P, T), self.liquid(P, T), self.gas(P, T)
        return Vs < Vl < Vg and Ss < Sl < Sg


@dataclass(frozen=True)
class ShockTrajectory:
    """Polyline ``P(T)`` with the flanking states and the speed at each node."""

    T: np.ndarray
    P: np.ndarray
    U: np.ndarray
    left: PhaseState
    right: PhaseState
    name: str = ""

    @property
    def labels(self):
        return self.left.label, self.right.label

    def interpolant(self):
        order = np.argsort(self.T)
        return CubicHermiteSpline(self.T[order], self.P[order], self.U[order])

    def to_dict(self):
        return {
            "name": self.name or f"{self.left.label}-{self.right.label}",
            "left": self.left.label,
            "right": self.right.label,
            "T": [float(t) for t in self.T],
            "P": [float(p) for p in self.P],
            "U": [float(u) for u in self.U],
        }


def _speed(left, right, P, T):
    try:
        return rh_speed(left(P, T), right(P, T))
    except PhaseShockError as exc:
        raise type(exc)(f"state evaluation failed at T={T!r}, P={P!r} (left the model window): {exc}") from exc


def propagate_shock(T0, P0, left: PhaseState, right: PhaseState, T_end, step, name="") -> ShockTrajectory:
    """Integrate ``dP/dT = Delta S / Delta V`` from ``(T0, P0)`` to ``T_end`` with classical RK4.

    ``step`` is the magnitude of the temperature step; the last step is
    shortened so that ``T_end`` is hit exactly.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    n = max(1, int(np.ceil(abs(T_end - T0) / step - 1e-12)))
    h = (T_end - T0) / n
    T = T0 + h * np.arange(n + 1)
    T[-1] = T_end
    P = np.empty(n + 1)
    U = np.empty(n + 1)
    P[0] = P0
    for i in range(n):
        t, p = T[i], P[i]
        k1 = _speed(left, right, p, t)
        k2 = _speed(left, right, p + 0.5 * h * k1, t + 0.5 * h)
        k3 = _speed(left, right, p + 0.5 * h * k2, t + 0.5 * h)
        k4 = _speed(left, right, p + h * k3, t + h)
        U[i] = k1
        P[i + 1] = p + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    U[n] = _speed(left, right, P[n], T[n])
    return ShockTrajectory(T=T, P=P, U=U, left=left, right=right, name=name)


@dataclass(frozen=True)
class ConfluenceEvent:
    T_triple: float
    P_triple: float
    incoming: tuple
    outgoing: ShockTrajectory
    common: str = ""

    @property
    def U_out(self):
        return float(self.outgoing.U[0])

    def jumps(self):
        """Volume jumps ``(dV_in1, dV_in2, dV_out)`` across the three curves at the event point.

        Each is taken from the common phase outward, so ``dV_out = dV_in1 + dV_in2``
        up to sign convention: ``V_outer2 - V_outer1`` telescopes through the common phase.
        """
        P, T = self.P_triple, self.T_triple
        a, b = self.outgoing.left, self.outgoing.right
        mid = [s for tr in self.incoming for s in (tr.left, tr.right) if s.label == self.common][0]
        Va, Vm, Vb = a(P, T)[0], mid(P, T)[0], b(P, T)[0]
        return Vm - Va, Vb - Vm, Vb - Va


def _direction(traj):
    return np.sign(traj.T[-1] - traj.T[0])


def detect_confluence(traj1: ShockTrajectory, traj2: ShockTrajectory, T_end=None, step=None, rtol=1e-13) -> ConfluenceEvent:
    """First crossing of two trajectories and the merged curve that leaves it.

    Crossings are bracketed by sign changes of ``P1(T) - P2(T)`` on the union
    of both node sets (cubic Hermite interpolation with the node speeds) and
    refined by Brent's method. "First" is along the common direction of
    travel in ``T``. The outgoing curve joins the two phases not shared by
    the incoming ones; it is integrated to ``T_end`` when given.
    """
    d1, d2 = _direction(traj1), _direction(traj2)
    if d1 == 0 or d2 == 0 or d1 != d2:
        raise DegenerateError("trajectories must run in the same direction in T")
    lo = max(traj1.T.min(), traj2.T.min())
    hi = min(traj1.T.max(), traj2.T.max())
    if not lo < hi:
        raise NoIntersectionError("trajectories have no overlapping temperature range")
    p1, p2 = traj1.interpolant(), traj2.interpolant()
    nodes = np.union1d(traj1.T, traj2.T)
    nodes = nodes[(nodes >= lo) & (nodes <= hi)]
    nodes = np.union1d(nodes, [lo, hi])
    if d1 < 0:
        nodes = nodes[::-1]

    def diff(t):
        return float(p1(t) - p2(t))

    scale = max(np.abs(traj1.P).max(), np.abs(traj2.P).max())
    vals = np.array([diff(t) for t in nodes])
    T_star = None
    for i in range(len(nodes)):
        if abs(vals[i]) <= rtol * scale:
            T_star = float(nodes[i])
            break
        if i + 1 < len(nodes) and vals[i] * vals[i + 1] < 0:
            a, b = sorted((nodes[i], nodes[i + 1]))
            T_star = brentq(diff, a, b, xtol=1e-300, rtol=8.9e-16, maxiter=200)
            break
    if T_star is None:
        raise NoIntersectionError(f"no crossing on the overlap [{lo!r}, {hi!r}]")
    P_star = float(0.5 * (p1(T_star) + p2(T_star)))
    s1, s2 = float(p1(T_star, 1)), float(p2(T_star, 1))
    if abs(s1 - s2) <= 1e-9 * max(abs(s1), abs(s2), 1e-300):
        raise DegenerateError(f"tangential contact at T={T_star!r}: equal speeds")

    labels1, labels2 = set(traj1.labels), set(traj2.labels)
    common = labels1 & labels2
    if len(common) != 1:
        raise DegenerateError(f"incoming curves must share exactly one phase, got {traj1.labels} and {traj2.labels}")
    common = common.pop()
    states = {s.label: s for tr in (traj1, traj2) for s in (tr.left, tr.right)}
    # Canonical order of the outer phases keeps the result independent of argument order.
    outer = sorted((labels1 | labels2) - {common}, key=lambda lab: states[lab](P_star, T_star)[0])
    a, b = states[outer[0]], states[outer[1]]
    if T_end is not None and step is not None:
        out = propagate_shock(T_star, P_star, a, b, T_end, step, name=f"{a.label}-{b.label}")
    else:
        U3 = rh_speed(a(P_star, T_star), b(P_star, T_star))
        out = ShockTrajectory(np.array([T_star]), np.array([P_star]), np.array([U3]), a, b, name=f"{a.label}-{b.label}")
    incoming = tuple(sorted((traj1, traj2), key=lambda tr: sorted(tr.labels)))
    return ConfluenceEvent(T_triple=float(T_star), P_triple=P_star, incoming=incoming, outgoing=out, common=common)


@dataclass
class PhaseDiagram:
    curves: list
    triple_points: list = field(default_factory=list)

    def to_dict(self):
        return {
            "curves": [c.to_dict() for c in self.curves],
            "triple_points": [
                {
                    "T": ev.T_triple,
                    "P": ev.P_triple,
                    "U_out": ev.U_out,
                    "incoming": [tr.to_dict()["name"] for tr in ev.incoming],
                    "outgoing": ev.outgoing.to_dict()["name"],
                }
                for ev in self.triple_points
            ],
        }

    def write(self, json_path, csv_stem=None, header=None):
        doc = self.to_dict()
        if header:
            doc = {"header": header, **doc}
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
        paths = []
        if csv_stem is not None:
            for c in doc["curves"]:
                path = f"{csv_stem}_{c['name']}.csv"
                with open(path, "w", newline="") as fh:
                    for line in header or ():
                        fh.write(f"# {line}\n")
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["T", "P", "U"])
                    for row in zip(c["T"], c["P"], c["U"]):
                        w.writerow([repr(x) for x in row])
                paths.append(path)
        return paths
