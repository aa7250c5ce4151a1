"""Adaptive Simpson quadrature for the smooth 1-D integrands used here.

Kept deliberately small: every integrand in this package is bounded and
piecewise-smooth, so recursive Simpson with Richardson extrapolation
converges quickly and gives a usable error estimate.
"""

from __future__ import annotations

from collections.abc import Callable

from .errors import NumericError


def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
    return h / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-9,
    max_depth: int = 40,
) -> float:
    """Integrate f over [a, b] to absolute tolerance ``tol``.

    Raises NumericError (reporting the achieved tolerance) if the recursion
    depth limit is hit before the local error bound falls below ``tol``.
    """
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_simpson(f, b, a, tol, max_depth)

    # Error estimates of intervals that hit max_depth without meeting their
    # local budget; their sum bounds the shortfall against the global tol.
    unconverged = [0.0]

    def recurse(x0: float, x2: float, f0: float, f1: float, f2: float,
                whole: float, eps: float, depth: int) -> float:
        x1 = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + x1)
        xr = 0.5 * (x1 + x2)
        fl = f(xl)
        fr = f(xr)
        left = _simpson(f0, fl, f1, x1 - x0)
        right = _simpson(f1, fr, f2, x2 - x1)
        err = (left + right - whole) / 15.0
        if abs(err) <= eps or depth >= max_depth:
            if abs(err) > eps:
                unconverged[0] += abs(err)
            return left + right + err
        return (recurse(x0, x1, f0, fl, f1, left, eps / 2.0, depth + 1)
                + recurse(x1, x2, f1, fr, f2, right, eps / 2.0, depth + 1))

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    total = recurse(a, b, fa, fm, fb, _simpson(fa, fm, fb, b - a), tol, 0)
    if unconverged[0] > tol:
        raise NumericError(
            f"quadrature did not converge to tol={tol:g}; "
            f"achieved {unconverged[0]:g}")
    return total
