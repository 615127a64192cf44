"""Bound-constrained derivative-free least squares.

Trust-region method on linear interpolation models: residual vectors are
sampled on an n+1 point simplex, an affine model J is interpolated through
them, and damped Gauss-Newton steps are taken inside the trust region and
the variable box. No user gradients; all variables are internally scaled to
the unit box so the radius thresholds are dimensionless.

Designed for small, expensive problems (every residual evaluation here is
an accelerated lifetime simulation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RHO_BEG = 0.1
RHO_END = 1e-8
EXIT_RADIUS = "radius_converged"
EXIT_MAXFUN = "max_evals"


@dataclass
class DFOResult:
    x: np.ndarray               # best point, original scale
    residual: np.ndarray        # residual vector at x
    norm: float                 # ||residual||
    n_evals: int
    flag: str                   # EXIT_RADIUS or EXIT_MAXFUN
    trace: list = field(default_factory=list)  # (n_evals, best_norm), non-increasing


def _tr_step(jac: np.ndarray, resid: np.ndarray, radius: float) -> np.ndarray:
    """Damped Gauss-Newton step with ||s|| <= radius (Levenberg search)."""
    jtj = jac.T @ jac
    g = jac.T @ resid
    n = jtj.shape[0]
    lam = 0.0
    eye = np.eye(n)
    for _ in range(30):
        try:
            s = np.linalg.solve(jtj + lam * eye, -g)
        except np.linalg.LinAlgError:
            lam = max(2.0 * lam, 1e-8)
            continue
        ns = float(np.linalg.norm(s))
        if ns <= radius or not math.isfinite(ns):
            if not math.isfinite(ns):
                lam = max(2.0 * lam, 1e-8)
                continue
            return s
        lam = max(2.0 * lam, 1e-8 * float(np.trace(jtj)) / n, 1e-12)
    # fall back to a clipped step
    ns = float(np.linalg.norm(s))
    return s * (radius / ns) if ns > 0 else s


def solve_dfo_ls(residual_fn, x0, lower, upper, budget: int | None = None,
                 rho_end: float = RHO_END) -> DFOResult:
    """Minimize ||residual_fn(x)||^2 over lower <= x <= upper.

    Parameters
    ----------
    residual_fn : callable
        Maps a parameter vector to a residual vector (any fixed length).
    x0, lower, upper : array_like
        Start and finite box bounds, lower < upper elementwise.
    budget : int
        Maximum residual evaluations (default 100 per dimension).
    rho_end : float
        Final trust-region radius on the unit-box scale.
    """
    x0 = np.asarray(x0, dtype=float)
    lb = np.asarray(lower, dtype=float)
    ub = np.asarray(upper, dtype=float)
    n = x0.size
    if budget is None:
        budget = 100 * n
    if budget < n + 1:
        raise ValueError("budget must allow at least n+1 evaluations")
    if np.any(~np.isfinite(lb)) or np.any(~np.isfinite(ub)) or np.any(lb >= ub):
        raise ValueError("bounds must be finite with lower < upper")
    if np.any(x0 < lb - 1e-12) or np.any(x0 > ub + 1e-12):
        raise ValueError("x0 must lie within the bounds")

    span = ub - lb

    def to_z(x):
        return (x - lb) / span

    def to_x(z):
        return lb + z * span

    nf = 0
    trace: list[tuple[int, float]] = []

    def evaluate(z):
        nonlocal nf
        r = np.asarray(residual_fn(to_x(np.clip(z, 0.0, 1.0))), dtype=float)
        nf += 1
        return r

    # initial simplex around z0
    z0 = to_z(x0)
    pts = [np.clip(z0, 0.0, 1.0)]
    for i in range(n):
        step = RHO_BEG if z0[i] + RHO_BEG <= 1.0 else -RHO_BEG
        zi = z0.copy()
        zi[i] = min(max(zi[i] + step, 0.0), 1.0)
        pts.append(zi)
    resids = [evaluate(z) for z in pts]
    norms = [float(np.linalg.norm(r)) for r in resids]
    best = int(np.argmin(norms))
    trace.append((nf, norms[best]))

    delta = RHO_BEG
    rho = RHO_BEG
    flag = EXIT_MAXFUN

    while nf < budget:
        if rho < rho_end:
            flag = EXIT_RADIUS
            break
        zb = pts[best]
        rb = resids[best]
        fb = norms[best] ** 2
        # affine model through the simplex: J @ (z_i - zb) = r_i - rb
        dzs = np.array([pts[i] - zb for i in range(len(pts)) if i != best])
        drs = np.array([resids[i] - rb for i in range(len(pts)) if i != best])
        try:
            jac = np.linalg.solve(dzs, drs).T  # (m, n)
            cond_bad = not np.all(np.isfinite(jac))
        except np.linalg.LinAlgError:
            cond_bad = True
        if cond_bad:
            _rebuild_simplex(pts, resids, norms, best, max(delta, rho), evaluate)
            best = int(np.argmin(norms))
            trace.append((nf, norms[best]))
            continue

        s = _tr_step(jac, rb, delta)
        z_new = np.clip(zb + s, 0.0, 1.0)
        step_len = float(np.linalg.norm(z_new - zb))
        if step_len < 0.5 * rho:
            # model says we are at a minimum at this resolution
            spread = max(float(np.linalg.norm(p - zb)) for p in pts)
            if spread > 2.0 * rho and nf + n + 1 <= budget:
                _rebuild_simplex(pts, resids, norms, best, rho, evaluate)
                best = int(np.argmin(norms))
                trace.append((nf, norms[best]))
            else:
                rho *= 0.25
                delta = max(rho, delta * 0.5)
            continue

        r_new = evaluate(z_new)
        f_new = float(np.linalg.norm(r_new)) ** 2
        m_new = float(np.linalg.norm(rb + jac @ (z_new - zb))) ** 2
        pred = fb - m_new
        actual = fb - f_new
        ratio = actual / pred if pred > 0 else (1.0 if actual > 0 else -1.0)

        # replace the farthest-from-best point to keep the simplex compact
        dists = [float(np.linalg.norm(p - z_new)) for p in pts]
        worst = int(np.argmax([float(np.linalg.norm(p - zb)) for p in pts]))
        if worst == best:
            worst = int(np.argmax(norms))
        if f_new < norms[best] ** 2 or dists[worst] > delta:
            pts[worst] = z_new
            resids[worst] = r_new
            norms[worst] = math.sqrt(f_new)
        best = int(np.argmin(norms))
        trace.append((nf, norms[best]))

        if ratio >= 0.7 and step_len >= 0.9 * delta:
            delta = min(2.0 * delta, 1.0)
        elif ratio < 0.1:
            delta = max(0.5 * delta, rho)
            if step_len <= 1.05 * rho:
                rho *= 0.25
                delta = max(delta, rho)

    zb = pts[best]
    return DFOResult(x=to_x(zb), residual=resids[best], norm=norms[best],
                     n_evals=nf, flag=flag, trace=trace)


def _rebuild_simplex(pts, resids, norms, best, radius, evaluate):
    """Re-sample a fresh axis-aligned simplex of the given radius around best."""
    zb = pts[best]
    n = zb.size
    new_pts = [zb]
    new_resids = [resids[best]]
    new_norms = [norms[best]]
    for i in range(n):
        step = radius if zb[i] + radius <= 1.0 else -radius
        zi = zb.copy()
        zi[i] = min(max(zi[i] + step, 0.0), 1.0)
        r = evaluate(zi)
        new_pts.append(zi)
        new_resids.append(r)
        new_norms.append(float(np.linalg.norm(r)))
    pts[:] = new_pts
    resids[:] = new_resids
    norms[:] = new_norms
