"""Linear solvers for the assembled upwind system."""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import DGSolution
from .errors import MaxIterationsExceeded, SingularMatrix

METHODS = ("direct", "gmres")


@dataclass
class SolverConfig:
    method: str = "direct"
    tol: float = 1e-12
    max_iter: Optional[int] = None  # default 10 * Nelem
    restart: int = 100

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown solver method {self.method!r}; choose from {METHODS}")
        if not self.tol > 0:
            raise ValueError("solver tolerance must be positive")


def block_jacobi(matrix, blocksize):
    """Preconditioner applying the inverse of every diagonal element block."""
    N = matrix.shape[0]
    E = N // blocksize
    blocks = _diag_blocks(matrix, blocksize)
    try:
        inv = np.linalg.inv(blocks)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("singular diagonal block in block-Jacobi preconditioner") from exc

    def apply(r):
        return np.einsum("eij,ej->ei", inv, r.reshape(E, blocksize)).reshape(-1)

    return spla.LinearOperator((N, N), matvec=apply, dtype=float)


def _diag_blocks(matrix, n):
    coo = matrix.tocoo()
    keep = (coo.row // n) == (coo.col // n)
    E = matrix.shape[0] // n
    out = np.zeros((E, n, n))
    r, c = coo.row[keep], coo.col[keep]
    np.add.at(out, (r // n, r % n, c % n), coo.data[keep])
    return out


def _residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / nb if nb > 0 else r


def solve(system, config=None):
    """Solve ``A x = b``; returns a :class:`DGSolution` carrying the residual.

    Raises
    ------
    SingularMatrix
        The factorization found an exactly singular matrix.
    MaxIterationsExceeded
        Krylov iteration cap reached; ``exc.result`` holds the best iterate.
    """
    config = config or SolverConfig()
    A = system.matrix.tocsc() if config.method == "direct" else system.matrix.tocsr()
    b = system.rhs
    space = system.space
    if config.method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from exc
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrix("direct solve produced non-finite values")
        return DGSolution(space, x, _residual(A, x, b), True, 1, "direct")

    max_iter = config.max_iter or 10 * space.mesh.nelem
    M = block_jacobi(A, space.nloc)
    count = [0]

    def cb(_):
        count[0] += 1

    x = np.zeros_like(b)
    res = _residual(A, x, b)
    # gmres monitors the preconditioned residual; restart until the true one is small
    while res > config.tol and count[0] < max_iter:
        cycles = max(1, (max_iter - count[0]) // config.restart + 1)
        x, info = spla.gmres(A, b, x0=x, rtol=config.tol, atol=0.0, restart=config.restart,
                             maxiter=cycles, M=M, callback=cb, callback_type="pr_norm")
        if info < 0:
            raise SingularMatrix(f"GMRES breakdown (info={info})")
        new = _residual(A, x, b)
        if new >= res:
            break
        res = new
    sol = DGSolution(space, x, res, res <= config.tol, count[0], "gmres")
    if not sol.converged:
        raise MaxIterationsExceeded(
            f"GMRES stopped after {count[0]} iterations with relative residual {res:.3e}",
            result=sol,
        )
    return sol
