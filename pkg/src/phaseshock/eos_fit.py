"""Recover ``(alpha, f)`` from two isotherms and predict the others.

Two isotherms ``P1(V)`` at ``T1`` and ``P2(V)`` at ``T2`` fix the state
surface pointwise through the 2x2 linear system

    T1 = alpha(V) P1(V) + f(V)
    T2 = alpha(V) P2(V) + f(V)
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator, make_smoothing_spline

from .eos_core import CriticalPoint, EosSpec, tabulated_spec
from .errors import ConfigError, ConvergenceError, DomainError, ExtrapolationError, SingularSystemError

MIN_SAMPLES = 8
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class IsothermDataset:
    """Samples ``(V, P)`` of one isotherm at temperature ``T``; ``V`` strictly increasing."""

    T: float
    V: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "P", P)
        if not (np.isfinite(self.T) and self.T > 0):
            raise DomainError(f"isotherm temperature must be positive and finite, got {self.T!r}")
        if V.ndim != 1 or V.shape != P.shape:
            raise DomainError("V and P must be 1-D arrays of equal length")
        if len(V) < MIN_SAMPLES:
            raise DomainError(f"an isotherm needs at least {MIN_SAMPLES} samples, got {len(V)}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(P))):
            raise DomainError("isotherm samples must be finite")
        if np.any(np.diff(V) <= 0):
            raise DomainError("isotherm volumes must be strictly increasing")

    @classmethod
    def from_pairs(cls, T, samples):
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DomainError("samples must be (V, P) pairs")
        return cls(T, arr[:, 0], arr[:, 1])

    @property
    def samples(self):
        return list(zip(self.V.tolist(), self.P.tolist()))

    def interpolant(self, smooth=False, lam=None):
        if smooth:
            return make_smoothing_spline(self.V, self.P, lam=lam)
        return PchipInterpolator(self.V, self.P, extrapolate=False)


def read_isotherm_csv(path) -> IsothermDataset:
    """Read columns ``V,P`` with a ``# T=<value>`` header line."""
    T = None
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                body = s[1:].strip()
                if body.startswith("T="):
                    try:
                        T = float(body[2:])
                    except ValueError as exc:
                        raise ConfigError(f"{path}: bad temperature header {s!r}") from exc
                continue
            rows.append(s)
    if T is None:
        raise ConfigError(f"{path}: missing '# T=<value>' header")
    reader = csv.reader(rows)
    head = next(reader, None)
    if head is None or [h.strip() for h in head] != ["V", "P"]:
        raise ConfigError(f"{path}: expected a 'V,P' column header, got {head!r}")
    try:
        data = [(float(v), float(p)) for v, p in reader]
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric sample: {exc}") from exc
    return IsothermDataset.from_pairs(T, data)


def write_isotherm_csv(path, V, P, T, header=()):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(f"# T={T!r}\n")
        w = csv.writer(fh)
        w.writerow(["V", "P"])
        for v, p in zip(V, P):
            w.writerow([repr(float(v)), repr(float(p))])


def overlap_window(d1: IsothermDataset, d2: IsothermDataset):
    lo = max(d1.V[0], d2.V[0])
    hi = min(d1.V[-1], d2.V[-1])
    if not lo < hi:
        raise ExtrapolationError("isotherms share no common volume window")
    return float(lo), float(hi)


def fit_alpha_f(d1: IsothermDataset, d2: IsothermDataset, grid=None, smooth=False, lam=None) -> EosSpec:
    """Solve for ``alpha(V)`` and ``f(V)`` on the common volume grid.

    Both isotherms are interpolated with monotone cubics (or a smoothing
    spline with generalised cross-validation when ``smooth``) onto
    ``grid``, which defaults to the union of sample volumes inside the
    overlap window. The result is symmetric in ``d1``, ``d2``.
    """
    if d1.T == d2.T:
        raise DomainError(f"the two isotherms need distinct temperatures, both are T={d1.T!r}")
    lo, hi = overlap_window(d1, d2)
    if grid is None:
        V = np.union1d(d1.V, d2.V)
        V = V[(V >= lo) & (V <= hi)]
    else:
        V = np.asarray(grid, dtype=float)
        if V.min() < lo or V.max() > hi:
            raise ExtrapolationError(f"fit grid leaves the overlap window [{lo!r}, {hi!r}]")
    if len(V) < 4:
        raise DomainError("overlap window holds fewer than four volumes")
    P1 = d1.interpolant(smooth, lam)(V)
    P2 = d2.interpolant(smooth, lam)(V)
    dP = P1 - P2
    scale = np.maximum(np.abs(P1), np.abs(P2))
    bad = np.abs(dP) <= SINGULAR_TOL * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        raise SingularSystemError(f"P1(V) = P2(V) at V = {V[bad][:3].tolist()}: linear system is singular")
    alpha = (d1.T - d2.T) / dP
    f = (d2.T * P1 - d1.T * P2) / dP
    if np.any(alpha <= 0):
        raise DomainError("fitted alpha(V) is not positive: check the temperature ordering of the isotherms")
    return tabulated_spec(V, alpha, f)


def predict_isotherm(eos: EosSpec, T, V=None):
    """``P(V) = (T - f(V)) / alpha(V)`` on the tabulated grid (or on ``V`` inside it)."""
    lo, hi = eos.V_domain
    if V is None:
        if eos.kind != "tabulated":
            raise DomainError("a volume grid is required for non-tabulated equations of state")
        V = np.asarray(eos.meta["V"], dtype=float)
    else:
        V = np.asarray(V, dtype=float)
        if np.any(V < lo) or np.any(V > hi):
            raise ExtrapolationError(f"volumes outside the fitted window [{lo!r}, {hi!r}]")
    if not (np.isfinite(T) and T > 0):
        raise DomainError(f"temperature must be positive, got {T!r}")
    return V, (T - eos.f(V)) / eos.alpha(V)


def predict_isobar(eos: EosSpec, P, V=None):
    """``T(V) = alpha(V) P + f(V)`` on the tabulated grid (or on ``V`` inside it)."""
    lo, hi = eos.V_domain
    if V is None:
        V = np.asarray(eos.meta["V"], dtype=float)
    else:
        V = np.asarray(V, dtype=float)
        if np.any(V < lo) or np.any(V > hi):
            raise ExtrapolationError(f"volumes outside the fitted window [{lo!r}, {hi!r}]")
    return V, eos.alpha(V) * P + eos.f(V)


def fitted_critical_point(eos: EosSpec, window=0.3, degree=6, n=4000) -> CriticalPoint:
    """Critical point of a fitted (possibly noisy) surface from first derivatives only.

    An isotherm is monotone exactly when ``T >= g(V) = f - f' alpha / alpha'``
    for every ``V`` with ``alpha' > 0``, so ``T_c = max g`` and
    ``P_c = -f'(V_c) / alpha'(V_c)``. The maximum is located on a
    least-squares polynomial of ``g`` over ``|V - V_max| <= window V_max``,
    which averages out the noise that second and third spline derivatives
    would amplify.
    """
    lo, hi = eos.V_domain
    V = np.linspace(lo, hi, n)
    a1 = eos.alpha(V, 1)
    ok = a1 > 0
    if not ok.any():
        raise ConvergenceError("alpha' is nowhere positive: no critical point on the window")
    V = V[ok]
    g = eos.f(V) - eos.f(V, 1) * eos.alpha(V) / a1[ok]
    m = float(V[np.argmax(g)])
    for _ in range(3):
        sel = np.abs(V - m) <= window * m
        if sel.sum() <= degree + 1:
            raise ConvergenceError("too few points around the maximum for the polynomial fit")
        poly = np.polynomial.Polynomial.fit(V[sel], g[sel], degree)
        r = poly.deriv().roots()
        r = r[np.isreal(r)].real
        r = r[np.abs(r - m) <= window * m]
        if len(r) == 0:
            raise ConvergenceError("fitted monotonicity bound has no interior maximum")
        m = float(r[np.argmax(poly(r))])
    if m <= V[0] or m >= V[-1]:
        raise ConvergenceError("critical volume at the edge of the fitted window")
    P = float(-eos.f(m, 1) / eos.alpha(m, 1))
    return CriticalPoint(m, P, float(poly(m)))
