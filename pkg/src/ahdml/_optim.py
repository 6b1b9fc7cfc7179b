"""Small Newton-type solvers shared by the nuisance fitters."""

from __future__ import annotations

import numpy as np

from .errors import NonConvergenceError


def newton_linesearch(negloglik, grad, x0, hess=None, tol=1e-8, max_iter=100, name="fit"):
    """Minimize a smooth negative log-likelihood by damped Newton steps.

    ``grad`` is analytic; when ``hess`` is None the Hessian comes from
    central finite differences of the gradient.  Eigenvalues are clipped to
    keep the search direction a descent direction on non-convex stretches,
    and an Armijo backtracking line search guards every step.  Convergence
    is declared when the max-norm of the gradient drops below ``tol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    f = negloglik(x)
    for _ in range(max_iter):
        g = grad(x)
        if np.max(np.abs(g)) < tol:
            return x
        H = hess(x) if hess is not None else _fd_hessian(grad, x)
        step = _descent_direction(H, g)
        t = 1.0
        moved = False
        for _ in range(60):
            x_new = x - t * step
            f_new = negloglik(x_new)
            if np.isfinite(f_new) and f_new <= f - 1e-4 * t * float(g @ step):
                moved = True
                break
            t *= 0.5
        if not moved:
            # descent direction with a failed line search: the gradient is
            # numerically at the floor for this objective's conditioning
            if np.max(np.abs(g)) < 1e-5:
                return x
            raise NonConvergenceError(f"{name}: line search stalled", last_iterate=x)
        x, f = x_new, f_new
    if np.max(np.abs(grad(x))) < 1e-5:   # near-solution: accept with loose score
        return x
    raise NonConvergenceError(f"{name}: no convergence in {max_iter} iterations",
                              last_iterate=x)


def _descent_direction(H, g):
    """Solve H s = g after clipping the spectrum to be positive definite."""
    try:
        vals, vecs = np.linalg.eigh(0.5 * (H + H.T))
    except np.linalg.LinAlgError:
        return g / max(1.0, float(np.max(np.abs(g))))
    floor = max(1e-8, 1e-8 * float(vals.max(initial=0.0)))
    vals = np.maximum(vals, floor)
    step = vecs @ ((vecs.T @ g) / vals)
    if not np.all(np.isfinite(step)) or float(g @ step) <= 0.0:
        return g / max(1.0, float(np.max(np.abs(g))))
    return step


def _fd_hessian(grad, x, eps=1e-6):
    p = len(x)
    H = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = eps * max(1.0, abs(x[j]))
        H[:, j] = (grad(x + e) - grad(x - e)) / (2 * e[j])
    return 0.5 * (H + H.T)
