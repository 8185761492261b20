"""Deterministic solver for min theta^T G theta - 2 b^T theta on the probability simplex.

Projected gradient with a fixed 1/L step, L estimated by power iteration.
Sizes here are small (mixture weights, at most a few hundred components),
so the plain first-order method with a projection-based KKT certificate
is both fast enough and easy to audit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimplexQPProblem",
    "SimplexQPSolution",
    "SimplexQPError",
    "project_simplex",
    "solve",
]

_SYM_TOL = 1e-10
_EIG_TOL = 1e-8


class SimplexQPError(RuntimeError):
    """Solver did not converge; carries the last iterate and KKT residual."""

    def __init__(self, message: str, theta: np.ndarray, kkt_residual: float, iterations: int):
        super().__init__(message)
        self.theta = theta
        self.kkt_residual = kkt_residual
        self.iterations = iterations


@dataclass(frozen=True)
class SimplexQPProblem:
    """Quadratic form data: G symmetric PSD (n, n), b an n-vector.

    Eigenvalues in [-1e-8, 0) are tolerated and clamped by adding 1e-8*I;
    anything more negative is rejected as an input error.
    """

    G: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        G = np.asarray(self.G, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"G must be square, got shape {G.shape}")
        if G.shape[0] != b.shape[0]:
            raise ValueError(f"G is {G.shape[0]}x{G.shape[0]} but b has length {b.shape[0]}")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(b))):
            raise ValueError("G and b must be finite")
        if np.max(np.abs(G - G.T), initial=0.0) > _SYM_TOL:
            raise ValueError(f"G must be symmetric within {_SYM_TOL}")
        min_eig = float(np.linalg.eigvalsh(G)[0])
        if min_eig < -_EIG_TOL:
            raise ValueError(f"G has eigenvalue {min_eig} < -{_EIG_TOL}; not PSD")
        if min_eig < 0.0:
            G = G + _EIG_TOL * np.eye(G.shape[0])
        G = G.copy()
        G.flags.writeable = False
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return int(self.b.shape[0])


@dataclass(frozen=True)
class SimplexQPSolution:
    theta: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        if np.min(theta) < -1e-12:
            raise ValueError(f"solution has negative entry {np.min(theta)}")
        if abs(float(np.sum(theta)) - 1.0) > 1e-9:
            raise ValueError(f"solution mass {np.sum(theta)} is not 1 within 1e-9")
        theta = theta.copy()
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of v onto {theta >= 0, 1^T theta = 1}.

    Sort-and-threshold algorithm; ties are broken by a stable
    descending-value-then-index sort, so output is deterministic.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    n = v.shape[0]
    if n < 1:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project non-finite input")
    order = np.argsort(-v, kind="stable")
    u = v[order]
    css = np.cumsum(u)
    j = np.arange(1, n + 1, dtype=np.float64)
    support = np.nonzero(u - (css - 1.0) / j > 0.0)[0]
    k = int(support[-1])  # support[0] == 0 always holds
    tau = (css[k] - 1.0) / (k + 1.0)
    return np.maximum(v - tau, 0.0)


def _matvec(G: np.ndarray, v: np.ndarray) -> np.ndarray:
    # row-wise pairwise reduction instead of BLAS, for reproducibility
    return np.sum(G * v[None, :], axis=1)


def _objective(G: np.ndarray, b: np.ndarray, theta: np.ndarray) -> float:
    return float(np.sum(theta * _matvec(G, theta)) - 2.0 * np.sum(b * theta))


def _lambda_max_power(G: np.ndarray, iterations: int = 100) -> float:
    n = G.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(iterations):
        w = _matvec(G, v)
        norm = float(np.sqrt(np.sum(w * w)))
        if norm <= 0.0:
            return lam
        v = w / norm
        lam = float(np.sum(v * _matvec(G, v)))
    return lam


def solve(p: SimplexQPProblem, tol: float = 1e-10, max_iter: int = 50000) -> SimplexQPSolution:
    """Projected-gradient minimization of theta^T G theta - 2 b^T theta on the simplex.

    Starts from the uniform vector, steps by 1/L with L = 2 * lambda_max(G)
    (power iteration, 100 rounds, fixed start 1/sqrt(n)), and stops when the
    iterate displacement drops to `tol`. The returned kkt_residual is
    || theta - project(theta - grad f(theta)) ||, zero exactly at a minimizer.
    """
    G, b = p.G, p.b
    n = p.n
    lam = _lambda_max_power(G)
    L = 2.0 * lam
    if L <= 1e-12:
        # objective is (numerically) linear; a huge step jumps straight to a vertex
        L = 1e-12
    theta = np.full(n, 1.0 / n)
    if __debug__:
        prev_obj = _objective(G, b, theta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * _matvec(G, theta) - 2.0 * b
        theta_new = project_simplex(theta - grad / L)
        if __debug__:
            obj = _objective(G, b, theta_new)
            assert obj <= prev_obj + 1e-9 * (1.0 + abs(prev_obj)), (
                f"objective increased at iteration {it}: {prev_obj} -> {obj}"
            )
            prev_obj = obj
        disp = float(np.sqrt(np.sum((theta_new - theta) ** 2)))
        theta = theta_new
        if disp <= tol:
            converged = True
            break
    grad = 2.0 * _matvec(G, theta) - 2.0 * b
    kkt = float(np.sqrt(np.sum((theta - project_simplex(theta - grad)) ** 2)))
    if not converged:
        raise SimplexQPError(
            f"projected gradient did not converge in {max_iter} iterations "
            f"(kkt residual {kkt:.3e})",
            theta=theta,
            kkt_residual=kkt,
            iterations=it,
        )
    return SimplexQPSolution(
        theta=theta,
        objective=_objective(G, b, theta),
        kkt_residual=kkt,
        iterations=it,
    )
