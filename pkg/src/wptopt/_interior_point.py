"""Dense Mehrotra predictor-corrector solver for the max-min allocation LP.

The max-min problem  max_p min_r (F p)_r  over the probability simplex is the
classic matrix-game LP.  With F > 0 it is solved through the standard
transformation: minimize 1'q subject to F q >= 1, q >= 0, whose optimum
satisfies 1'q = 1/m and p = m q, while the dual  max 1'y, F'y <= 1, y >= 0
carries the receiver weights (lambda = m y).  The solver works on whichever
orientation yields the smaller normal-equations system and never materializes
the stacked constraint matrix: for A = [B, s*I] all products are evaluated
blockwise, so the per-iteration cost is one dense B-weighted Gram matrix plus
one Cholesky factorization.

A crossover "polish" step refines the interior-point iterate: the active sets
identified at convergence are re-solved as a small least-squares system and
accepted only if the resulting pair verifies primal feasibility, dual
feasibility, and complementary slackness on the full instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import nnls


class SolverError(RuntimeError):
    """Raised when the LP solver cannot reach the requested tolerance."""

    def __init__(self, message: str, stats: dict | None = None):
        super().__init__(message)
        self.stats = stats or {}


@dataclass
class GameSolution:
    """Solution of max_p min_r (F p)_r over the simplex."""

    weights: np.ndarray        # optimal allocation p, unit sum
    duals: np.ndarray          # receiver weights lambda, unit sum
    value: float               # m = min_r (F p)_r
    stats: dict = field(default_factory=dict)


class _BlockLP:
    """Standard-form LP data  min c'x  s.t. [B, s*I] x = b, x >= 0."""

    def __init__(self, B: np.ndarray, sign: float, b: np.ndarray, c: np.ndarray):
        self.B = B
        self.sign = sign
        self.b = b
        self.c = c
        self.m, self.k = B.shape
        self.n = self.k + self.m

    def mat_vec(self, v: np.ndarray) -> np.ndarray:
        return self.B @ v[: self.k] + self.sign * v[self.k :]

    def rmat_vec(self, w: np.ndarray) -> np.ndarray:
        return np.concatenate([self.B.T @ w, self.sign * w])

    def normal_matrix(self, d: np.ndarray) -> np.ndarray:
        M = (self.B * d[None, : self.k]) @ self.B.T
        M[np.diag_indices_from(M)] += d[self.k :]
        return M


def _cho_solve_with_jitter(M: np.ndarray, rhs_list):
    """Cholesky with escalating diagonal jitter; returns solutions or None."""
    jitter = 0.0
    base = max(float(M.diagonal().max()), 1.0)
    for attempt in range(4):
        try:
            Mj = M if jitter == 0.0 else M + jitter * base * np.eye(M.shape[0])
            fac = sla.cho_factor(Mj, lower=True, check_finite=False)
            return [sla.cho_solve(fac, r, check_finite=False) for r in rhs_list]
        except (np.linalg.LinAlgError, ValueError):
            jitter = 1e-14 if jitter == 0.0 else jitter * 1e3
    return None


def _step_length(v: np.ndarray, dv: np.ndarray, scale: float = 1.0) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return min(1.0, scale * float(np.min(-v[neg] / dv[neg])))


def _ipm_standard(lp: _BlockLP, tol: float, max_iter: int):
    """Mehrotra predictor-corrector on the standard-form block LP.

    Returns (x, w, z, stats); the best iterate by worst-case relative
    residual is retained, which matters on highly degenerate instances where
    late iterations lose ground to roundoff.
    """
    m, n = lp.m, lp.n
    # least-squares starting point
    AAt = lp.normal_matrix(np.ones(n))
    sols = _cho_solve_with_jitter(AAt, [lp.b, lp.mat_vec(lp.c)])
    if sols is None:
        raise SolverError("could not factor the initial normal matrix")
    x = lp.rmat_vec(sols[0])
    w = sols[1]
    z = lp.c - lp.rmat_vec(w)
    shift_x = max(-1.5 * x.min(), 0.0)
    shift_z = max(-1.5 * z.min(), 0.0)
    x = x + shift_x
    z = z + shift_z
    xz = x @ z
    if xz <= 0:
        x = np.ones(n)
        z = np.ones(n)
        xz = float(n)
    x = x + 0.5 * xz / z.sum()
    z = z + 0.5 * xz / x.sum()

    b_norm = 1.0 + np.linalg.norm(lp.b)
    c_norm = 1.0 + np.linalg.norm(lp.c)
    best = None
    best_score = np.inf
    stall = 0
    status = "iteration_limit"
    it = 0
    for it in range(max_iter):
        rp = lp.b - lp.mat_vec(x)
        rd = lp.c - lp.rmat_vec(w) - z
        mu = (x @ z) / n
        pobj = lp.c @ x
        dobj = lp.b @ w
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        score = max(np.linalg.norm(rp) / b_norm, np.linalg.norm(rd) / c_norm, gap)
        if not np.isfinite(score):
            status = "numerical_breakdown"
            break
        if score < best_score:
            best_score = score
            best = (x.copy(), w.copy(), z.copy())
            stall = 0
        else:
            stall += 1
        if best_score < tol:
            status = "converged"
            break
        if stall >= 5 or mu < 1e-17:
            status = "stalled"
            break

        d = x / np.maximum(z, 1e-280)
        np.clip(d, 0.0, 1e18, out=d)
        M = lp.normal_matrix(d)
        if not np.all(np.isfinite(M)):
            status = "numerical_breakdown"
            break

        # affine scoring direction
        rxs = -x * z
        rhs_aff = rp - lp.mat_vec(rxs / z) + lp.mat_vec(d * rd)
        sols = _cho_solve_with_jitter(M, [rhs_aff])
        if sols is None:
            status = "factorization_failure"
            break
        dw = sols[0]
        dz = rd - lp.rmat_vec(dw)
        dx = rxs / z - d * dz
        alpha_p = _step_length(x, dx)
        alpha_d = _step_length(z, dz)
        mu_aff = ((x + alpha_p * dx) @ (z + alpha_d * dz)) / n
        sigma = (max(mu_aff, 0.0) / mu) ** 3

        # combined predictor-corrector step (same factorization)
        rxs = sigma * mu - x * z - dx * dz
        rhs = rp - lp.mat_vec(rxs / z) + lp.mat_vec(d * rd)
        sols = _cho_solve_with_jitter(M, [rhs])
        if sols is None:
            status = "factorization_failure"
            break
        dw = sols[0]
        dz = rd - lp.rmat_vec(dw)
        dx = rxs / z - d * dz
        alpha_p = _step_length(x, dx, 0.99995)
        alpha_d = _step_length(z, dz, 0.99995)
        x = x + alpha_p * dx
        z = z + alpha_d * dz
        w = w + alpha_d * dw

    if best is None:
        raise SolverError("interior-point iteration produced no usable iterate")
    x, w, z = best
    stats = {
        "iterations": it + 1,
        "status": status if best_score >= tol else "converged",
        "residual": best_score,
    }
    return x, w, z, stats


def _lsq_nonneg(A: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Least squares, retried as NNLS when the plain solution goes negative."""
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    if sol.min() >= -1e-12:
        return np.maximum(sol, 0.0)
    try:
        sol, _ = nnls(A, b)
        return sol
    except RuntimeError:
        return None


def _fit_primal(F: np.ndarray, sup: np.ndarray, crit: np.ndarray):
    """Solve  F[C,S] p_S = m 1, sum p_S = 1  in the least-squares sense."""
    G = F[np.ix_(crit, sup)]
    nc, ns = G.shape
    A = np.zeros((nc + 1, ns + 1))
    A[:nc, :ns] = G
    A[:nc, ns] = -1.0
    A[nc, :ns] = 1.0
    rhs = np.zeros(nc + 1)
    rhs[nc] = 1.0
    sol = _lsq_nonneg(A, rhs)
    if sol is None:
        return None
    p_s = sol[:ns]
    total = p_s.sum()
    if total <= 0:
        return None
    return p_s / total


def _fit_duals(F: np.ndarray, sup: np.ndarray, crit: np.ndarray, m: float):
    """Solve  F[C,S]' lam_C = m 1, sum lam_C = 1  with lam_C >= 0."""
    G = F[np.ix_(crit, sup)]
    nc, ns = G.shape
    A = np.zeros((ns + 1, nc))
    A[:ns] = G.T
    A[ns] = 1.0
    rhs = np.concatenate([np.full(ns, m), [1.0]])
    lam_c = _lsq_nonneg(A, rhs)
    if lam_c is None or lam_c.sum() <= 0:
        return None
    return lam_c / lam_c.sum()


def _polish(F: np.ndarray, p: np.ndarray, lam: np.ndarray, tol: float):
    """Active-set crossover seeded by the interior-point iterate.

    The support comes from the weight magnitudes; the critical receiver set is
    identified from the received values of the iterate (rows within a band of
    the minimum), with the band escalated when the fit does not verify.  The
    support is grown when the fitted duals reveal a profitable off-support
    column.  The refined pair is accepted only when it verifies, on the full
    instance, primal feasibility, dual feasibility, and complementary
    slackness within tol.
    """
    n_rx, n_tx = F.shape
    sup = np.flatnonzero(p > max(1e-8, 1e-5 * p.max()))
    if len(sup) == 0:
        return None
    received0 = F @ p
    m0 = float(received0.min())
    if m0 <= 0:
        return None

    for band in (100.0 * tol, 1e-7, 3e-6, 1e-4):
        crit = np.flatnonzero(received0 <= m0 * (1.0 + band))
        for _ in range(6):
            p_s = _fit_primal(F, sup, crit)
            if p_s is None:
                break
            p_new = np.zeros(n_tx)
            p_new[sup] = p_s
            received = F @ p_new
            m_new = float(received.min())
            if m_new <= 0:
                break
            primal_res = float(np.max(np.abs(received[crit] - m_new))) / m_new
            if primal_res > tol:
                break  # critical set inconsistent at this band; escalate
            lam_c = _fit_duals(F, sup, crit, m_new)
            if lam_c is None:
                break
            lam_new = np.zeros(n_rx)
            lam_new[crit] = lam_c
            fbar = lam_new @ F
            residuals = {
                "primal": primal_res,
                "dual": float(max(fbar.max() - m_new, 0.0)) / m_new,
                "support": float(np.max(np.abs(fbar[sup] - m_new))) / m_new,
                "slackness": float(np.max(lam_new * np.abs(received - m_new))) / m_new,
            }
            if max(residuals.values()) <= tol:
                return p_new, lam_new, m_new, residuals
            grow = int(fbar.argmax())
            if residuals["dual"] > tol and grow not in sup:
                # a profitable off-support column: grow the support
                sup = np.sort(np.append(sup, grow))
                continue
            break
    return None


def solve_game(
    F: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 60,
    polish: bool = True,
) -> GameSolution:
    """Solve max_p min_r (F p)_r over the simplex; F must be positive."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.size == 0:
        raise ValueError("gain matrix must be a nonempty 2-D array")
    if not np.all(np.isfinite(F)) or F.min() <= 0:
        raise ValueError("gain matrix entries must be finite and strictly positive")
    n_rx, n_tx = F.shape

    # trivial single-column / single-row games
    if n_tx == 1:
        p = np.ones(1)
        received = F[:, 0]
        m = float(received.min())
        lam = np.zeros(n_rx)
        lam[np.argmin(received)] = 1.0
        return GameSolution(p, lam, m, {"status": "closed_form", "iterations": 0,
                                        "residual": 0.0, "polished": False})

    if n_tx <= n_rx:
        # dual orientation: A = [F', I], x = (y, t); recovers p from the dual
        lp = _BlockLP(F.T, 1.0, np.ones(n_tx),
                      np.concatenate([-np.ones(n_rx), np.zeros(n_tx)]))
        x, w, z, stats = _ipm_standard(lp, tol, max_iter)
        y = np.maximum(x[:n_rx], 0.0)
        q = np.maximum(-w, 0.0)
    else:
        # primal orientation: A = [F, -I], x = (q, s); duals come from w
        lp = _BlockLP(F, -1.0, np.ones(n_rx),
                      np.concatenate([np.ones(n_tx), np.zeros(n_rx)]))
        x, w, z, stats = _ipm_standard(lp, tol, max_iter)
        q = np.maximum(x[:n_tx], 0.0)
        y = np.maximum(w, 0.0)

    if q.sum() <= 0 or y.sum() <= 0:
        raise SolverError("interior-point solve collapsed to a zero iterate", stats)
    p = q / q.sum()
    lam = y / y.sum()
    m = float((F @ p).min())
    stats["polished"] = False

    if polish:
        refined = _polish(F, p, lam, max(tol, 1e-12))
        if refined is not None:
            p, lam, m, res = refined
            stats["polished"] = True
            stats["status"] = "converged"
            stats["residual"] = max(res.values())
            stats["polish_residuals"] = res

    if stats["status"] != "converged":
        raise SolverError(
            f"max-min solve did not reach tol={tol:g} "
            f"(best residual {stats['residual']:.3e}, status {stats['status']})",
            stats,
        )
    return GameSolution(p, lam, m, stats)
