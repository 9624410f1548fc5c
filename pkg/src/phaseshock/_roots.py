"""Bracketing helpers for enumerating every root of a smooth scalar function."""

import numpy as np
from scipy.optimize import brentq


def sign_change_roots(func, x, fx=None, xtol=1e-300):
    """Roots of ``func`` inside every sign change of the sampled values.

    ``x`` must be increasing. Exact zeros at sample points are returned as
    roots too. Each bracket is refined with Brent's method.
    """
    x = np.asarray(x, dtype=float)
    if fx is None:
        fx = np.asarray(func(x), dtype=float)
    ok = np.isfinite(fx)
    a, b = fx[:-1], fx[1:]
    pair = ok[:-1] & ok[1:]
    zeros = np.flatnonzero(ok & (fx == 0.0))
    changes = np.flatnonzero(pair & (a * b < 0.0))
    roots = [x[i] for i in zeros]
    rtol = 4 * np.finfo(float).eps
    for i in changes:
        roots.append(brentq(func, x[i], x[i + 1], xtol=xtol, rtol=rtol, maxiter=200))
    roots.sort()
    return roots


def hierarchical_roots(funcs, grid, xtol=1e-300):
    """All roots of ``funcs[0]`` on ``grid``, using its derivatives as guides.

    ``funcs`` is ``[g, g', g'', ...]``. Roots of the highest derivative are
    located by a plain sign-change scan; each lower level is then scanned on
    the grid augmented by the roots of the level above. Between two
    consecutive roots of ``g'`` the function ``g`` is monotone, so closely
    spaced (near-tangent) roots are still separated even when the grid
    straddles them.
    """
    grid = np.asarray(grid, dtype=float)
    extra = np.empty(0)
    for level in reversed(funcs):
        pts = np.union1d(grid, extra)
        found = sign_change_roots(level, pts, xtol=xtol)
        extra = np.asarray(found, dtype=float)
    return extra


def dedup(values, tol):
    out = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > tol:
            out.append(v)
    return np.asarray(out, dtype=float)


def merge_flat(roots, func, noise):
    """Merge neighbouring roots when ``func`` stays at rounding level between them.

    At a multiple root the sampled sign pattern is noise, so several spurious
    simple roots can appear within a tiny neighbourhood.
    """
    out = []
    for r in roots:
        if out:
            prev = out[-1][-1]
            probe = np.linspace(prev, r, 7)[1:-1]
            if np.all(np.abs(func(probe)) <= noise):
                out[-1].append(r)
                continue
        out.append([r])
    return np.asarray([np.mean(c) for c in out], dtype=float)
