"""Local refiners: BFGS quasi-Newton, Nelder-Mead simplex and a dogleg
trust-region Gauss-Newton solver.  All work unconstrained in scaled
coordinates with finite-difference derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

LOCAL_ALGORITHMS = ("bfgs", "nelder_mead", "trust_region")

ARMIJO_C = 1e-4
MAX_HALVINGS = 40
CURVATURE_GUARD = 1e-12


@dataclass
class LocalResult:
    x_final: np.ndarray
    f_final: float
    iterations: int
    status: str
    trace: list[tuple[int, float]] = field(default_factory=list)
    evals: int = 0
    grad_norms: list[float] = field(default_factory=list)


class _Exhausted(Exception):
    pass


class _Counted:
    """Scalar objective wrapper: counts calls and maps failures and NaN to
    +inf.  A call beyond ``max_evals`` raises _Exhausted instead of
    evaluating."""

    def __init__(self, f: Callable, max_evals: int | None):
        self.f = f
        self.max_evals = max_evals
        self.evals = 0

    @property
    def exhausted(self) -> bool:
        return self.max_evals is not None and self.evals >= self.max_evals

    def __call__(self, x) -> float:
        if self.exhausted:
            raise _Exhausted
        self.evals += 1
        try:
            val = float(self.f(x))
        except ArithmeticError:
            return np.inf
        return val if np.isfinite(val) else np.inf


def central_gradient(f: Callable, x: np.ndarray, step: float) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def bfgs_update(Binv: np.ndarray, dx: np.ndarray, dg: np.ndarray) -> tuple[np.ndarray, bool]:
    """Inverse-Hessian BFGS update; returns (new matrix, applied?).

    Skipped (matrix returned unchanged) when the curvature dx.dg is not
    safely positive.
    """
    sy = float(dx @ dg)
    if not sy > CURVATURE_GUARD * np.linalg.norm(dx) * np.linalg.norm(dg):
        return Binv, False
    rho = 1.0 / sy
    n = dx.size
    left = np.eye(n) - rho * np.outer(dx, dg)
    new = left @ Binv @ left.T + rho * np.outer(dx, dx)
    return 0.5 * (new + new.T), True


def bfgs_minimize(
    f: Callable,
    x0,
    eps: float = 1e-6,
    max_iter: int = 200,
    fd_step: float = 1e-7,
    max_evals: int | None = None,
) -> LocalResult:
    fc = _Counted(f, max_evals)
    x = np.array(x0, dtype=float)
    fx = fc(x)
    if not np.isfinite(fx):
        raise ValueError("objective is not finite at the starting point")
    g = central_gradient(fc, x, fd_step)
    Binv = np.eye(x.size)
    trace = [(0, fx)]
    norms = [float(np.linalg.norm(g))]
    status = "max_iter"
    it = 0
    while True:
        if not np.all(np.isfinite(g)):
            # the objective is infinite next to x: no usable direction
            status = "stalled"
            break
        if np.linalg.norm(g) < eps:
            status = "converged"
            break
        if it >= max_iter or fc.exhausted:
            break
        try:
            x_new, f_new, g_new, ok = _bfgs_iteration(fc, x, fx, g, Binv, fd_step)
        except _Exhausted:
            break
        if not ok:
            status = "line_search_failed"
            break
        Binv, _ = bfgs_update(Binv, x_new - x, g_new - g)
        x, fx, g = x_new, f_new, g_new
        it += 1
        trace.append((it, fx))
        norms.append(float(np.linalg.norm(g)))
    return LocalResult(x, fx, it, status, trace, fc.evals, norms)


def _bfgs_iteration(fc, x, fx, g, Binv, fd_step):
    """Search direction, Armijo backtracking and the new gradient."""
    d = -Binv @ g
    slope = float(g @ d)
    if not slope < 0:
        # not a descent direction: fall back to steepest descent
        d = -g
        slope = -float(g @ g)
    step = 1.0
    for _ in range(MAX_HALVINGS + 1):
        x_try = x + step * d
        f_try = fc(x_try)
        if f_try <= fx + ARMIJO_C * step * slope:
            break
        step *= 0.5
    else:
        return x, fx, g, False
    return x_try, f_try, central_gradient(fc, x_try, fd_step), True


def nelder_mead_minimize(
    f: Callable,
    x0,
    tol: float = 1e-6,
    max_iter: int = 1000,
    span=None,
    max_evals: int | None = None,
) -> LocalResult:
    """Simplex search with reflect 1, expand 2, contract 0.5, shrink 0.5.

    Initial edges are 5% of each starting coordinate (0.00025 for a zero
    coordinate), or 5% of ``span`` per axis when that is given.
    """
    fc = _Counted(f, max_evals)
    x0 = np.array(x0, dtype=float)
    n = x0.size
    if max_iter <= 0:
        f0 = fc(x0)
        return LocalResult(x0, f0, 0, "max_iter", [(0, f0)], fc.evals)
    if span is not None:
        steps = 0.05 * np.asarray(span, dtype=float) * np.ones(n)
    else:
        steps = np.where(x0 != 0, 0.05 * x0, 0.00025)
    simplex = np.vstack([x0] + [x0 + np.eye(n)[i] * steps[i] for i in range(n)])
    fvals = np.array([fc(p) for p in simplex])
    if not np.isfinite(fvals[0]):
        raise ValueError("objective is not finite at the starting point")
    trace = [(0, float(fvals.min()))]
    it = 0
    status = "max_iter"
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if fvals[-1] - fvals[0] < tol:
            status = "converged"
            break
        if it >= max_iter or fc.exhausted:
            break
        try:
            simplex, fvals = _simplex_move(fc, simplex, fvals)
        except _Exhausted:
            break
        it += 1
        trace.append((it, float(fvals.min())))
    k = int(np.argmin(fvals))
    return LocalResult(simplex[k].copy(), float(fvals[k]), it, status, trace, fc.evals)


def _simplex_move(fc, simplex, fvals):
    """One reflect/expand/contract/shrink move on a sorted simplex."""
    simplex, fvals = simplex.copy(), fvals.copy()
    centroid = simplex[:-1].mean(axis=0)
    worst = simplex[-1]
    xr = centroid + (centroid - worst)
    fr = fc(xr)
    if fr < fvals[0]:
        xe = centroid + 2.0 * (centroid - worst)
        fe = fc(xe)
        simplex[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
    elif fr < fvals[-2]:
        simplex[-1], fvals[-1] = xr, fr
    else:
        if fr < fvals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fcn = fc(xc)
            accept = fcn <= fr
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fcn = fc(xc)
            accept = fcn < fvals[-1]
        if accept:
            simplex[-1], fvals[-1] = xc, fcn
        else:
            simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
            fvals[1:] = [fc(p) for p in simplex[1:]]
    return simplex, fvals


def forward_jacobian(r: Callable, x: np.ndarray, r0: np.ndarray, step: float) -> np.ndarray:
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        ri = r(x + e)
        if ri is None:  # fall back to a backward difference
            ri = r(x - e)
            if ri is None:
                raise ValueError("residuals not finite on either side of a Jacobian probe")
            J[:, i] = (r0 - ri) / step
        else:
            J[:, i] = (ri - r0) / step
    return J


def dogleg(J: np.ndarray, r: np.ndarray, radius: float) -> tuple[np.ndarray, bool]:
    """Dogleg step for min |r + J p|^2 with |p| <= radius; returns (p, on_boundary)."""
    g = J.T @ r
    p_gn = np.linalg.lstsq(J, -r, rcond=None)[0]
    if np.linalg.norm(p_gn) <= radius:
        return p_gn, False
    Jg = J @ g
    gg = float(g @ g)
    if gg == 0.0:
        return np.zeros_like(g), False
    p_c = -(gg / float(Jg @ Jg)) * g if float(Jg @ Jg) > 0 else -g / np.sqrt(gg) * radius
    if np.linalg.norm(p_c) >= radius:
        return -g / np.sqrt(gg) * radius, True
    # walk from the Cauchy point toward the Gauss-Newton point to the boundary
    d = p_gn - p_c
    a, b, c = float(d @ d), 2.0 * float(p_c @ d), float(p_c @ p_c) - radius**2
    tau = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return p_c + tau * d, True


def trust_region_lsq(
    residual_fn: Callable,
    x0,
    tol: float = 1e-6,
    max_iter: int = 1000,
    fd_step: float = 1e-6,
    radius: float = 1.0,
    max_radius: float = 1e3,
    max_evals: int | None = None,
    max_rejects: int = 60,
) -> LocalResult:
    """Minimize |r(x)|^2 with Gauss-Newton dogleg steps in an adaptive region."""
    calls = 0

    def r(x):
        nonlocal calls
        if max_evals is not None and calls >= max_evals:
            raise _Exhausted
        calls += 1
        try:
            out = np.asarray(residual_fn(x), dtype=float)
        except ArithmeticError:
            return None
        return out if np.all(np.isfinite(out)) else None

    x = np.array(x0, dtype=float)
    try:
        rx = r(x)
    except _Exhausted:
        rx = None
    if rx is None:
        raise ValueError("residuals are not finite at the starting point")
    fx = float(rx @ rx)
    trace = [(0, fx)]
    norms = []
    status = "max_iter"
    it = 0
    rejects = 0
    try:
        J = forward_jacobian(r, x, rx, fd_step)
    except _Exhausted:
        return LocalResult(x, fx, 0, "max_iter", trace, calls, norms)
    while True:
        grad = 2.0 * J.T @ rx
        norms.append(float(np.linalg.norm(grad)))
        if norms[-1] < tol:
            status = "converged"
            break
        if it >= max_iter or (max_evals is not None and calls >= max_evals):
            break
        it += 1
        p, at_boundary = dogleg(J, rx, radius)
        predicted = fx - float(np.sum((rx + J @ p) ** 2))
        try:
            r_try = r(x + p)
        except _Exhausted:
            break
        if r_try is None or predicted <= 0:
            radius *= 0.25
            rejects += 1
            if rejects > max_rejects:
                status = "stalled"
                break
            continue
        f_try = float(r_try @ r_try)
        rho = (fx - f_try) / predicted
        if rho < 0.25:
            radius *= 0.25
        elif rho > 0.75 and at_boundary:
            radius = min(2.0 * radius, max_radius)
        if rho > 0:
            rejects = 0
            rel_change = (fx - f_try) / max(abs(fx), np.finfo(float).tiny)
            x, rx, fx = x + p, r_try, f_try
            trace.append((it, fx))
            if rel_change < tol and fx > 0:
                status = "converged"
                break
            try:
                J = forward_jacobian(r, x, rx, fd_step)
            except _Exhausted:
                break
        else:
            rejects += 1
            if rejects > max_rejects:
                status = "stalled"
                break
    return LocalResult(x, fx, it, status, trace, calls, norms)


def run_local(
    alg: str,
    f: Callable,
    x0,
    tol: float = 1e-6,
    max_iter: int = 200,
    residual_fn: Callable | None = None,
    span=None,
    max_evals: int | None = None,
    residual_offset: float = 0.0,
) -> LocalResult:
    """Dispatch by name.  For the trust region, ``f = |r|^2 + residual_offset``."""
    if alg == "bfgs":
        return bfgs_minimize(f, x0, tol, max_iter, max_evals=max_evals)
    if alg == "nelder_mead":
        return nelder_mead_minimize(f, x0, tol, max_iter, span=span, max_evals=max_evals)
    if alg == "trust_region":
        if residual_fn is None:
            raise ValueError("trust_region needs a residual function")
        res = trust_region_lsq(residual_fn, x0, tol, max_iter, max_evals=max_evals)
        if residual_offset:
            res.f_final += residual_offset
            res.trace = [(i, v + residual_offset) for i, v in res.trace]
        return res
    raise ValueError(f"unknown local algorithm {alg!r}; choose from {LOCAL_ALGORITHMS}")
