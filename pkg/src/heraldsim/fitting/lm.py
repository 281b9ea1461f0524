"""Box-constrained Levenberg-Marquardt with a finite-difference Jacobian."""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np


@dataclass
class FitResult:
    """Outcome of a weighted least-squares fit.

    ``std_errors`` come from the inverse of ``J^T J`` at the optimum, with
    ``J`` the Jacobian of the error-weighted residuals (no rescaling by the
    reduced chi-square). ``degenerate`` is set when ``J^T J`` is singular;
    the errors are then NaN.
    """

    estimates: dict
    std_errors: dict
    residual_norm: float
    n_iterations: int
    converged: bool
    covariance: np.ndarray = None
    gradient_norm: float = math.nan
    degenerate: bool = False
    n_points: int = 0
    derived: dict = field(default_factory=dict)

    @property
    def chi2(self):
        return self.residual_norm ** 2

    @property
    def dof(self):
        return self.n_points - len(self.estimates)

    def table(self, sep=","):
        """``parameter,estimate,std_error`` rows followed by fit diagnostics."""
        rows = [sep.join(("parameter", "estimate", "std_error"))]
        for k, v in self.estimates.items():
            rows.append(sep.join((k, repr(float(v)), repr(float(self.std_errors[k])))))
        for k, (v, e) in self.derived.items():
            rows.append(sep.join((k, repr(float(v)), repr(float(e)))))
        rows.append(sep.join(("residual_norm", repr(float(self.residual_norm)), "")))
        rows.append(sep.join(("n_iterations", str(self.n_iterations), "")))
        rows.append(sep.join(("converged", str(self.converged).lower(), "")))
        rows.append(sep.join(("degenerate", str(self.degenerate).lower(), "")))
        return "\n".join(rows) + "\n"


def _axis(lo, hi, init, n):
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return [init]
    if lo > 0 and hi / lo > 100:
        return list(np.geomspace(lo, hi, n))
    if lo == 0 and hi > 0 and n > 2:
        return [0.0] + list(np.geomspace(hi * 1e-4, hi, n - 1))
    return list(np.linspace(lo, hi, n))


def _jacobian(fun, theta, lo, hi, r0):
    J = np.empty((r0.size, theta.size))
    for j in range(theta.size):
        h = max(1e-6, 1e-6 * abs(theta[j]))
        up, dn = theta.copy(), theta.copy()
        if theta[j] + h <= hi[j] and theta[j] - h >= lo[j]:
            up[j] += h
            dn[j] -= h
            J[:, j] = (fun(up) - fun(dn)) / (2 * h)
        elif theta[j] + h <= hi[j]:
            up[j] += h
            J[:, j] = (fun(up) - r0) / h
        else:
            dn[j] -= h
            J[:, j] = (r0 - fun(dn)) / h
    return J


def _projected_gradient(g, theta, lo, hi):
    pg = g.copy()
    pg[(theta <= lo) & (g > 0)] = 0.0
    pg[(theta >= hi) & (g < 0)] = 0.0
    return pg


def levenberg_marquardt(fun, theta0, lo, hi, ftol=1e-10, gtol=1e-8, max_iter=200):
    """Minimize ``sum(fun(theta)**2)`` inside the box ``[lo, hi]``.

    Returns ``(theta, objective, n_iter, converged, history)`` where
    ``history`` lists the objective after every accepted step. Steps that
    leave the box are projected back onto it.
    """
    theta = np.clip(np.asarray(theta0, dtype=float), lo, hi)
    r = fun(theta)
    f = float(r @ r)
    history = [f]
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(fun, theta, lo, hi, r)
        g = J.T @ r
        scale = np.where(theta != 0, np.abs(theta), 1.0)
        if np.linalg.norm(2 * _projected_gradient(g, theta, lo, hi) * scale) < gtol:
            converged = True
            break
        A = J.T @ J
        d = np.maximum(np.diag(A), 1e-30)
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            new = np.clip(theta + step, lo, hi)
            rn = fun(new)
            with np.errstate(over="ignore"):
                fn = float(rn @ rn)  # an overflowing trial step is simply rejected
            if np.isfinite(fn) and fn < f:
                accepted = True
                break
            lam *= 10
        if not accepted:
            # no damped step lowers the objective: a local minimum to working precision
            converged = True
            break
        decrease = f - fn
        theta, r, f = new, rn, fn
        history.append(f)
        lam = max(lam / 10, 1e-12)
        if decrease <= ftol * max(f, 1e-300) or f == 0.0:
            converged = True
            break
    return theta, f, it, converged, history


def nlls_minimize(model, series, init, bounds=None, n_grid=5, n_starts=3,
                  ftol=1e-10, gtol=1e-8, max_iter=200):
    """Weighted least squares ``sum(((y - model(x, **p)) / y_err)**2)``.

    ``series`` is a DataSeries or an ``(x, y, y_err)`` tuple.

    ``init`` maps parameter names to starting values; ``bounds`` maps names
    to ``(lo, hi)`` (missing entries are unbounded). The objective is scanned
    on a grid of ``n_grid`` points per bounded axis, and the damped iteration
    is started from ``init`` plus the ``n_starts`` best grid points. The
    lowest optimum wins, ties broken by the lexicographically smaller
    parameter vector.
    """
    x, y, y_err = (series.x, series.y, series.y_err) if hasattr(series, "y_err") else series
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y_err = np.asarray(y_err, dtype=float)
    names = list(init)
    if len(y) < len(names):
        raise ValueError(f"{len(y)} points cannot constrain {len(names)} free parameters")
    if np.any(y_err <= 0):
        raise ValueError("y_err must be positive")
    bounds = bounds or {}
    lo = np.array([bounds.get(k, (-np.inf, np.inf))[0] for k in names], dtype=float)
    hi = np.array([bounds.get(k, (-np.inf, np.inf))[1] for k in names], dtype=float)
    theta0 = np.array([init[k] for k in names], dtype=float)
    if np.any(theta0 < lo) or np.any(theta0 > hi):
        raise ValueError("initial parameters lie outside the bounds")

    def fun(theta):
        with np.errstate(all="ignore"):
            res = (np.asarray(model(x, **dict(zip(names, theta))), dtype=float) - y) / y_err
        return np.where(np.isfinite(res), res, 1e100)

    def objective(theta):
        r = fun(theta)
        return float(r @ r)

    starts = [theta0]
    if n_grid and n_starts:
        axes = [_axis(lo[j], hi[j], theta0[j], n_grid) for j in range(len(names))]
        grid = [np.array(p) for p in itertools.product(*axes)]
        grid.sort(key=lambda p: (objective(p), tuple(p)))
        starts += grid[:n_starts]

    best = None
    for s in starts:
        theta, f, n_it, conv, _ = levenberg_marquardt(fun, s, lo, hi, ftol, gtol, max_iter)
        key = (f, tuple(theta))
        if best is None or key < best[0]:
            best = (key, theta, f, n_it, conv)
    _, theta, f, n_it, conv = best

    r = fun(theta)
    J = _jacobian(fun, theta, lo, hi, r)
    A = J.T @ J
    g = _projected_gradient(J.T @ r, theta, lo, hi)
    d = np.sqrt(np.diag(A))
    degenerate = (not np.all(np.isfinite(A))) or np.any(d == 0)
    if not degenerate:
        # condition of the correlation-scaled matrix; raw units differ by many decades
        degenerate = np.linalg.cond(A / np.outer(d, d)) > 1e12
    if degenerate:
        cov = np.full((len(names), len(names)), np.nan)
    else:
        cov = np.linalg.inv(A)
    errs = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(
        estimates=dict(zip(names, map(float, theta))),
        std_errors=dict(zip(names, map(float, errs))),
        residual_norm=math.sqrt(f),
        n_iterations=n_it,
        converged=bool(conv),
        covariance=cov,
        gradient_norm=float(np.linalg.norm(2 * g)),
        degenerate=bool(degenerate),
        n_points=len(y),
    )
