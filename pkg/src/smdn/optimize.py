"""Golden-section minimization of a 1-D unimodal function."""

from __future__ import annotations

import math
from typing import Callable

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    trace: list[tuple[float, float]] | None = None,
) -> tuple[float, float]:
    """Return ``(x, f(x))`` minimizing ``f`` on ``[lo, hi]`` to within ``tol``.

    Every evaluation is appended to ``trace`` when given. The returned point is
    the best one actually evaluated (bracket ends included), so the reported
    minimum never exceeds ``f`` at either bound.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")

    def eval_at(x: float) -> float:
        fx = f(x)
        if trace is not None:
            trace.append((x, fx))
        return fx

    best_x, best_f = lo, eval_at(lo)
    f_hi = eval_at(hi)
    if f_hi < best_f:
        best_x, best_f = hi, f_hi

    c = hi - INVPHI * (hi - lo)
    d = lo + INVPHI * (hi - lo)
    fc = eval_at(c)
    fd = eval_at(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - INVPHI * (hi - lo)
            fc = eval_at(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INVPHI * (hi - lo)
            fd = eval_at(d)

    for x, fx in ((c, fc), (d, fd)):
        if fx < best_f:
            best_x, best_f = x, fx
    mid = 0.5 * (lo + hi)
    f_mid = eval_at(mid)
    if f_mid < best_f:
        best_x, best_f = mid, f_mid
    return best_x, best_f
