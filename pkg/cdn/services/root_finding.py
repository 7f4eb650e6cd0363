"""
Brent's method for increasing objectives on (0, 1), vectorised over a batch.

Each entry of the batch is an independent root problem sharing one
objective callable f(x, idx) that evaluates the problems listed in idx at
the points x. Entries converge at their own pace; only unfinished entries
are evaluated.
"""

import logging

import numpy as np

from .errors import MaxIterations, NoBracket

logger = logging.getLogger(__name__)

BRACKET = (1e-12, 1.0 - 1e-12)
XTOL = 1e-12
MAX_ITER = 200
_RTOL = 4.0 * np.finfo(float).eps
_NUDGE_STEPS = 13


class RootProblem:
    """Find x in bracket with objective(x) = target."""

    def __init__(self, objective, target=0.0, bracket=BRACKET):
        self.objective = objective
        self.target = float(target)
        self.bracket = (float(bracket[0]), float(bracket[1]))

    def __call__(self, x):
        return self.objective(x) - self.target


def _nudged(f, x0, mid, idx):
    """Move endpoints towards mid geometrically until f is finite."""
    x = np.array(x0, dtype=float)
    fx = np.asarray(f(x, idx), dtype=float)
    bad = ~np.isfinite(fx)
    for k in range(_NUDGE_STEPS):
        if not np.any(bad):
            break
        step = 10.0 ** (k - _NUDGE_STEPS + 1)
        x[bad] = x0[bad] + (mid[bad] - x0[bad]) * step
        fx[bad] = f(x[bad], idx[bad])
        bad = ~np.isfinite(fx)
    return x, fx


def brent_roots(f, size, bracket=BRACKET, tol=XTOL, max_iter=MAX_ITER, pin=False):
    """
    Roots of `size` increasing objectives.

    With pin=False a problem whose endpoints do not bracket a root raises
    NoBracket; with pin=True its root is the nearer endpoint (the endpoint
    whose objective is closer to zero in sign). Hitting max_iter raises
    MaxIterations.
    """
    idx_all = np.arange(size)
    lo = np.full(size, bracket[0])
    hi = np.full(size, bracket[1])
    mid = (lo + hi) / 2.0
    xpre, fpre = _nudged(f, lo, mid, idx_all)
    xcur, fcur = _nudged(f, hi, mid, idx_all)

    root = np.full(size, np.nan)
    active = np.ones(size, dtype=bool)

    at_lo = fpre == 0.0
    at_hi = (fcur == 0.0) & ~at_lo
    root[at_lo] = xpre[at_lo]
    root[at_hi] = xcur[at_hi]
    active &= ~(at_lo | at_hi)

    unbracketed = active & ((fpre * fcur > 0.0) | ~np.isfinite(fpre) | ~np.isfinite(fcur))
    if np.any(unbracketed):
        if not pin:
            first = int(np.flatnonzero(unbracketed)[0])
            raise NoBracket(
                f'objective does not change sign on [{xpre[first]:.3g}, {xcur[first]:.3g}] '
                f'(f = {fpre[first]:.3g}, {fcur[first]:.3g})'
            )
        below = unbracketed & (fpre > 0.0)
        root[below] = xpre[below]
        root[unbracketed & ~below] = xcur[unbracketed & ~below]
        active &= ~unbracketed
        logger.debug('Pinned %d roots to the bracket endpoints', int(unbracketed.sum()))

    xblk = np.zeros(size)
    fblk = np.zeros(size)
    spre = np.zeros(size)
    scur = np.zeros(size)

    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        for _ in range(max_iter):
            if not np.any(active):
                break
            flip = active & (fpre * fcur < 0.0)
            xblk = np.where(flip, xpre, xblk)
            fblk = np.where(flip, fpre, fblk)
            spre = np.where(flip, xcur - xpre, spre)
            scur = np.where(flip, xcur - xpre, scur)

            swap = active & (np.abs(fblk) < np.abs(fcur))
            xpre, xcur, xblk = (
                np.where(swap, xcur, xpre), np.where(swap, xblk, xcur), np.where(swap, xcur, xblk),
            )
            fpre, fcur, fblk = (
                np.where(swap, fcur, fpre), np.where(swap, fblk, fcur), np.where(swap, fcur, fblk),
            )

            delta = (tol + _RTOL * np.abs(xcur)) / 2.0
            sbis = (xblk - xcur) / 2.0
            done = active & ((fcur == 0.0) | (np.abs(sbis) < delta))
            root[done] = xcur[done]
            active &= ~done
            if not np.any(active):
                break

            secant = -fcur * (xcur - xpre) / (fcur - fpre)
            dpre = (fpre - fcur) / (xpre - xcur)
            dblk = (fblk - fcur) / (xblk - xcur)
            inverse_quad = -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            stry = np.where(xpre == xblk, secant, inverse_quad)
            interpolate = (np.abs(spre) > delta) & (np.abs(fcur) < np.abs(fpre))
            good = interpolate & (2.0 * np.abs(stry) < np.minimum(np.abs(spre), 3.0 * np.abs(sbis) - delta))

            spre = np.where(active, np.where(good, scur, sbis), spre)
            scur = np.where(active, np.where(good, stry, sbis), scur)
            xpre = np.where(active, xcur, xpre)
            fpre = np.where(active, fcur, fpre)
            step = np.where(np.abs(scur) > delta, scur, np.where(sbis > 0.0, delta, -delta))
            xcur = np.where(active, xcur + step, xcur)

            idx = np.flatnonzero(active)
            fcur[idx] = f(xcur[idx], idx)

    if np.any(active):
        raise MaxIterations(f'{int(active.sum())} of {size} roots did not converge in {max_iter} iterations')
    return root


def brent_root(problem, tol=XTOL, max_iter=MAX_ITER):
    """Scalar Brent solve of a RootProblem."""

    def batch(x, idx):
        return np.array([problem(float(xi)) for xi in x], dtype=float)

    return float(brent_roots(batch, 1, problem.bracket, tol, max_iter)[0])
