"""Dense BFGS with a strong-Wolfe line search for locating the MAP point."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import OutOfSupportStart

log = logging.getLogger(__name__)


@dataclass
class OptimizeResult:
    psi_map: np.ndarray
    J_final: float
    grad_norm_final: float
    iterations: int
    converged: bool
    line_search_failures: int = 0
    message: str = ""
    history: list = field(default_factory=list)
    inv_hessian: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("inv_hessian")
        d["psi_map"] = self.psi_map.tolist()
        return d


def _interpolate(a_lo, a_hi, f_lo, d_lo, f_hi):
    """Minimizer of the quadratic through (a_lo, f_lo, d_lo) and (a_hi, f_hi), safeguarded."""
    w = a_hi - a_lo
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    if np.isfinite(f_hi):
        denom = 2.0 * (f_hi - f_lo - d_lo * w)
        if denom > 0:
            a = a_lo - d_lo * w * w / denom
            pad = 0.1 * abs(w)
            if lo + pad <= a <= hi - pad:
                return a
    return 0.5 * (a_lo + a_hi)


def wolfe_line_search(fg, x, f0, g0, p, alpha0=1.0, c1=1e-4, c2=0.9, max_evals=40):
    """Strong-Wolfe step length along ``p``.

    ``fg`` returns ``(f, g)``; ``f = inf`` marks an infeasible trial and is
    treated as a failed sufficient-decrease test. Returns ``(alpha, f, g)`` or
    ``None`` if no acceptable step was found.
    """
    d0 = float(g0 @ p)
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = fg(x + a * p)
        if not np.isfinite(f):
            return np.inf, None, np.nan
        return f, g, float(g @ p)

    def zoom(a_lo, f_lo, d_lo, g_lo, a_hi, f_hi):
        while evals < max_evals:
            a = _interpolate(a_lo, a_hi, f_lo, d_lo, f_hi)
            f, g, d = phi(a)
            if not np.isfinite(f) or f > f0 + c1 * a * d0 or f >= f_lo:
                a_hi, f_hi = a, f
            else:
                if abs(d) <= -c2 * d0:
                    return a, f, g
                if d * (a_hi - a_lo) >= 0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, d_lo, g_lo = a, f, d, g
            if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
                break
        # no strong-Wolfe point; a_lo still satisfies sufficient decrease
        return (a_lo, f_lo, g_lo) if a_lo > 0 else None

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, d0, g0
    a = alpha0
    while evals < max_evals:
        f, g, d = phi(a)
        if not np.isfinite(f) or f > f0 + c1 * a * d0 or (a_prev > 0 and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, g_prev, a, f)
        if abs(d) <= -c2 * d0:
            return a, f, g
        if d >= 0:
            return zoom(a, f, d, g, a_prev, f_prev)
        a_prev, f_prev, d_prev, g_prev = a, f, d, g
        a *= 2.0
    return None


def bfgs_minimize(target, psi0, gtol=None, max_iter=500, c1=1e-4, c2=0.9):
    """Minimize ``target.value`` from ``psi0``; stops when ``max|grad| <= gtol``.

    Default ``gtol`` is ``1e-6 * max(1, |J(psi0)|)``. A failed line search is
    not fatal: the inverse-Hessian estimate is reset once and the best iterate
    is returned if steepest descent also fails.
    """
    x = np.array(psi0, dtype=float)
    f, g = target.value_and_grad(x)
    if not np.isfinite(f):
        raise OutOfSupportStart("starting point is outside the target support")
    if gtol is None:
        gtol = 1e-6 * max(1.0, abs(f))
    n = x.size
    I = np.eye(n)

    def scaled_identity(gv):
        return I / max(np.linalg.norm(gv), 1e-300)

    H = scaled_identity(g)
    fresh = True
    failures = 0
    history = [f]
    it = 0
    msg = "maximum iterations reached"
    while True:
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= gtol:
            msg = "gradient tolerance reached"
            break
        if it >= max_iter:
            break
        p = -H @ g
        if g @ p >= 0:
            H, fresh = scaled_identity(g), True
            p = -H @ g
        step = wolfe_line_search(target.value_and_grad, x, f, g, p, 1.0, c1, c2)
        if step is None:
            failures += 1
            if fresh:
                msg = "line search failed along steepest descent"
                break
            H, fresh = scaled_identity(g), True
            continue
        a, f_new, g_new = step
        s = a * p
        yv = g_new - g
        ys = float(yv @ s)
        if ys > 1e-14 * np.linalg.norm(yv) * np.linalg.norm(s):
            if fresh:
                H = I * (ys / float(yv @ yv))
            rho = 1.0 / ys
            Hy = H @ yv
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s)
            fresh = False
        x, f, g = x + s, f_new, g_new
        history.append(f)
        it += 1
        log.debug("bfgs it=%d J=%.6e |g|=%.3e", it, f, np.max(np.abs(g)))
    return OptimizeResult(
        psi_map=x,
        J_final=float(f),
        grad_norm_final=float(np.max(np.abs(g))),
        iterations=it,
        converged=bool(np.max(np.abs(g)) <= gtol),
        line_search_failures=failures,
        message=msg,
        history=[float(v) for v in history],
        inv_hessian=H,
    )
