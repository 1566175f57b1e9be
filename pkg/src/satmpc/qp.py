"""Dense primal active-set solver for small strictly convex QPs.

Solves

    min  0.5 * x'Hx + g'x
    s.t. A x  = b
         G x <= h

for problems with a handful of variables, the size produced by the
per-zone identification step (p + 3 variables, p + 1 inequalities).
Textbook primal active-set iteration: solve the equality-constrained
subproblem on the current working set via its KKT system, step to the
nearest blocking constraint, drop constraints with negative
multipliers.  Everything is dense numpy; the method is deterministic
(ties broken by lowest constraint index), which the identification
contract relies on.

A feasible start can be supplied; otherwise a phase-1 problem (same
solver, one slack variable) finds one.
"""

from __future__ import annotations

import numpy as np

__all__ = ["QpError", "solve_qp_active_set"]

_STEP_TOL = 1e-12
_FEAS_TOL = 1e-9
_MULT_TOL = 1e-10
_DECREASE_TOL = 1e-14


class QpError(RuntimeError):
    """Raised on infeasible constraints or non-convergence."""


def _as_2d(M, n, name):
    if M is None:
        return np.zeros((0, n))
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.shape[1] != n:
        raise ValueError(f"{name} has {M.shape[1]} columns, expected {n}")
    return M


def _kkt_step(H, grad, A_act):
    """Direction + multipliers for min 0.5 p'Hp + grad'p s.t. A_act p = 0."""
    n = H.shape[0]
    m = A_act.shape[0]
    if m == 0:
        try:
            p = np.linalg.solve(H, -grad)
        except np.linalg.LinAlgError:
            p = np.linalg.lstsq(H, -grad, rcond=None)[0]
        return p, np.zeros(0)
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = H
    kkt[:n, n:] = A_act.T
    kkt[n:, :n] = A_act
    rhs = np.concatenate([-grad, np.zeros(m)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _active_set_iterate(H, g, A, b, G, h, x0, max_iter):
    n = H.shape[0]
    x = np.asarray(x0, dtype=float).copy()
    n_eq = A.shape[0]
    # Working set holds inequality indices; equalities are always active.
    work = sorted(i for i in range(G.shape[0]) if G[i] @ x >= h[i] - _FEAS_TOL)

    for it in range(max_iter):
        rows = [A] if n_eq else []
        if work:
            rows.append(G[work])
        A_act = np.vstack(rows) if rows else np.zeros((0, n))
        grad = H @ x + g
        p, mult = _kkt_step(H, grad, A_act)

        # For the exact KKT step the model decrease is 0.5 p'Hp; once that is
        # negligible against the objective scale the remaining p is rounding
        # noise (ill-conditioned H amplifies gradient cancellation error), so
        # a pure step-norm test would never fire.
        decrease = 0.5 * max(float(p @ H @ p), 0.0)
        obj_scale = max(1.0, abs(float(0.5 * x @ H @ x) + float(g @ x)))
        negligible = (
            np.linalg.norm(p, np.inf) <= _STEP_TOL * max(1.0, np.linalg.norm(x, np.inf))
            or decrease <= _DECREASE_TOL * obj_scale
        )
        if negligible:
            lam_ineq = mult[n_eq:]
            if lam_ineq.size == 0 or lam_ineq.min() >= -_MULT_TOL:
                lam = np.zeros(G.shape[0])
                if work:
                    lam[work] = lam_ineq
                return x, mult[:n_eq], lam, it + 1
            work.pop(int(np.argmin(lam_ineq)))
            continue

        alpha = 1.0
        blocking = -1
        for i in range(G.shape[0]):
            if i in work:
                continue
            gp = G[i] @ p
            if gp > _STEP_TOL:
                step = max(0.0, (h[i] - G[i] @ x)) / gp
                if step < alpha:
                    alpha = step
                    blocking = i
        x = x + alpha * p
        if blocking >= 0:
            work = sorted(set(work) | {blocking})
    raise QpError(f"active-set iteration did not converge in {max_iter} steps")


def _phase1(A, b, G, h):
    """Find a point satisfying A x = b and G x <= h, or raise QpError."""
    n = A.shape[1] if A.size else G.shape[1]
    if A.size:
        x0, *_ = np.linalg.lstsq(A, b, rcond=None)
        if np.linalg.norm(A @ x0 - b, np.inf) > _FEAS_TOL * max(1.0, np.linalg.norm(b, np.inf)):
            raise QpError("equality constraints are inconsistent")
    else:
        x0 = np.zeros(n)
    if G.shape[0] == 0 or (G @ x0 - h).max() <= _FEAS_TOL:
        return x0

    # Augmented problem in (x, s): push the common slack s below zero.
    scale = max(1.0, float(np.abs(h).max()))
    eps = 1e-4
    H_aug = np.zeros((n + 1, n + 1))
    H_aug[:n, :n] = 2.0 * eps * np.eye(n)
    H_aug[n, n] = 1.0
    g_aug = np.concatenate([-2.0 * eps * x0, [scale]])
    A_aug = np.hstack([A, np.zeros((A.shape[0], 1))]) if A.size else np.zeros((0, n + 1))
    G_aug = np.hstack([G, -np.ones((G.shape[0], 1))])
    s0 = float((G @ x0 - h).max()) + scale
    z0 = np.concatenate([x0, [s0]])
    z, _, _, _ = _active_set_iterate(H_aug, g_aug, A_aug, b, G_aug, h, z0, max_iter=200 * (n + 2))
    x = z[:n]
    if (G @ x - h).max() > _FEAS_TOL * scale:
        raise QpError("constraint set appears infeasible")
    return x


def solve_qp_active_set(H, g, A=None, b=None, G=None, h=None, x0=None, max_iter=None):
    """Minimize 0.5*x'Hx + g'x subject to A x = b and G x <= h.

    Returns (x, objective, lam_eq, lam_ineq, iterations).  H must be
    positive definite on the feasible subspace.  If x0 (feasible) is not
    given, a phase-1 solve constructs one.  Raises QpError when the
    constraints are infeasible or the iteration cap is hit.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = H.shape[0]
    if H.shape != (n, n) or g.shape != (n,):
        raise ValueError("H must be square and g conformant")
    A = _as_2d(A, n, "A")
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    G = _as_2d(G, n, "G")
    h = np.zeros(0) if h is None else np.atleast_1d(np.asarray(h, dtype=float))
    if A.shape[0] != b.shape[0] or G.shape[0] != h.shape[0]:
        raise ValueError("constraint right-hand sides do not match row counts")
    if max_iter is None:
        max_iter = 100 * (n + A.shape[0] + G.shape[0] + 1)

    if x0 is None:
        x0 = _phase1(A, b, G, h)
    else:
        x0 = np.asarray(x0, dtype=float)
        bad_eq = A.size and np.linalg.norm(A @ x0 - b, np.inf) > _FEAS_TOL
        bad_ineq = G.size and (G @ x0 - h).max() > _FEAS_TOL
        if bad_eq or bad_ineq:
            x0 = _phase1(A, b, G, h)

    x, lam_eq, lam_ineq, iters = _active_set_iterate(H, g, A, b, G, h, x0, max_iter)
    obj = 0.5 * x @ H @ x + g @ x
    return x, float(obj), lam_eq, lam_ineq, iters
