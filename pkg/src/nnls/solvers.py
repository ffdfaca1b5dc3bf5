"""Linear solves for shifted elliptic operators kappa (-lap) + c(x).

One dimension gets a direct symmetric tridiagonal factorization; higher
dimensions use conjugate gradients with diagonal (Jacobi) preconditioning.
Both paths report loss of positive definiteness, which downstream signals a
curvature-hypothesis violation of the coupling.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solveh_banded

from .grids import GridSpec, apply_dirichlet, laplacian_values


class CurvatureError(RuntimeError):
    """The inner operator stopped being positive definite."""

    def __init__(self, curvature: float):
        super().__init__(f"non-positive curvature {curvature:g} detected in inner solve")
        self.curvature = curvature


class LinearSolveError(RuntimeError):
    pass


class EllipticOperator:
    """A = kappa (-lap) + c(x) on interior nodes, homogeneous Dirichlet."""

    def __init__(self, grid: GridSpec, kappa: float, c_values: np.ndarray):
        self.grid = grid
        self.kappa = float(kappa)
        self.c = np.asarray(c_values, dtype=float)
        self.interior = grid.interior()

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = -self.kappa * laplacian_values(self.grid, x) + self.c * x
        return apply_dirichlet(out)

    def diagonal(self) -> np.ndarray:
        return self.kappa * 2.0 * self.grid.dimension / self.grid.dx**2 + self.c

    def solve(self, rhs: np.ndarray, x0: np.ndarray | None = None,
              rtol: float = 1e-12, maxiter: int | None = None) -> np.ndarray:
        if self.grid.dimension == 1:
            return self._solve_banded(rhs)
        return self._solve_pcg(rhs, x0, rtol, maxiter)

    def _solve_banded(self, rhs: np.ndarray) -> np.ndarray:
        n = self.grid.points_per_axis
        off = -self.kappa / self.grid.dx**2
        ab = np.zeros((2, n - 2))
        ab[0, 1:] = off
        ab[1, :] = self.diagonal()[1:-1]
        try:
            sol = solveh_banded(ab, rhs[1:-1])
        except np.linalg.LinAlgError as exc:
            raise CurvatureError(float(np.min(self.diagonal()))) from exc
        out = np.zeros_like(rhs)
        out[1:-1] = sol
        return out

    def _solve_pcg(self, rhs: np.ndarray, x0, rtol: float, maxiter: int | None) -> np.ndarray:
        b = rhs * self.interior
        x = np.zeros_like(b) if x0 is None else x0 * self.interior
        r = b - self.apply(x)
        dinv = self.interior / self.diagonal()
        z = dinv * r
        p = z.copy()
        rz = float(np.sum(r * z))
        bnorm = float(np.sqrt(np.sum(b * b)))
        if bnorm == 0.0:
            return np.zeros_like(b)
        if maxiter is None:
            maxiter = max(2000, 20 * self.grid.points_per_axis)
        for _ in range(maxiter):
            if np.sqrt(np.sum(r * r)) <= rtol * bnorm:
                break
            Ap = self.apply(p)
            pAp = float(np.sum(p * Ap))
            if pAp <= 0.0:
                raise CurvatureError(pAp / max(float(np.sum(p * p)), 1e-300))
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            z = dinv * r
            rz_new = float(np.sum(r * z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        return x
