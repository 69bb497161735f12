"""Block Gauss-Borel factorization of truncated moment matrices."""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Union

import numpy as np
import pandas as pd
from scipy.linalg import lu_factor, lu_solve, solve_triangular, svdvals

from .cmv import BlockMatrix, block_part
from .exceptions import QuasiDefinitenessError
from .utils import VERBOSE_LVL, max_abs

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-10


def _as_array(g: Union[BlockMatrix, np.ndarray]) -> np.ndarray:
    return g.data if isinstance(g, BlockMatrix) else np.asarray(g, dtype=complex)


@dataclass
class Factorization:
    """Block LU factors g = L·U of one truncated moment matrix.

    Side L reads g^L = S1^{-1} S2 (S1 = L^{-1}, S2 = U); side R reads g^R = Z2 Z1^{-1} (Z2 = L, Z1 = U^{-1}).
    """

    side: str
    m: int
    lower: np.ndarray
    upper: np.ndarray
    D: List[np.ndarray] = field(default_factory=list)
    condition: List[float] = field(default_factory=list)

    @property
    def N(self) -> int:
        """Number of blocks."""
        return self.lower.shape[0] // self.m

    def inverse_lower(self) -> np.ndarray:
        """L^{-1} with exact structural zeros."""
        inv = solve_triangular(self.lower, np.eye(self.lower.shape[0]), lower=True, unit_diagonal=True)
        return block_part(inv, self.m, "lower")

    def normalized_upper(self) -> np.ndarray:
        """diag(D)^{-1}·U, block upper unitriangular."""
        return block_part(np.linalg.solve(self.D_matrix, self.upper), self.m, "upper")

    def inverse_upper(self) -> np.ndarray:
        """U^{-1} = (D^{-1}U)^{-1} D^{-1} with exact structural zeros."""
        unit = self.normalized_upper()
        inv_unit = solve_triangular(unit, np.eye(unit.shape[0]), lower=False, unit_diagonal=True)
        return block_part(inv_unit @ np.linalg.inv(self.D_matrix), self.m, "upper")

    @cached_property
    def D_matrix(self) -> np.ndarray:
        """Block diagonal diag(D_0, ..., D_{N-1})."""
        out = np.zeros_like(self.upper)
        m = self.m
        for l, d in enumerate(self.D):
            out[l * m : (l + 1) * m, l * m : (l + 1) * m] = d
        return out

    def _require(self, side: str) -> None:
        if self.side != side:
            raise ValueError(f"Factor only defined for side {side}, this factorization is side {self.side}.")

    @cached_property
    def S1(self) -> np.ndarray:
        """Block lower unitriangular S1 = L^{-1} (side L)."""
        self._require("L")
        return self.inverse_lower()

    @cached_property
    def S2(self) -> np.ndarray:
        """Block upper S2 = U (side L)."""
        self._require("L")
        return self.upper

    @cached_property
    def S2_inv(self) -> np.ndarray:
        """S2^{-1} (side L)."""
        self._require("L")
        return self.inverse_upper()

    @cached_property
    def S2_hat_inv(self) -> np.ndarray:
        """Ŝ2^{-1} = S2^{-1} D (side L)."""
        self._require("L")
        return block_part(self.S2_inv @ self.D_matrix, self.m, "upper")

    @cached_property
    def Z2(self) -> np.ndarray:
        """Block lower unitriangular Z2 = L (side R)."""
        self._require("R")
        return self.lower

    @cached_property
    def Z2_inv(self) -> np.ndarray:
        """Z2^{-1} (side R)."""
        self._require("R")
        return self.inverse_lower()

    @cached_property
    def Z1(self) -> np.ndarray:
        """Block upper Z1 = U^{-1} (side R), with diagonal blocks (D^R_l)^{-1}."""
        self._require("R")
        return self.inverse_upper()

    @cached_property
    def Z1_hat(self) -> np.ndarray:
        """Ẑ1 = Z1 D, block upper unitriangular (side R)."""
        self._require("R")
        return block_part(self.Z1 @ self.D_matrix, self.m, "upper")

    def reconstruction_residual(self, g: Union[BlockMatrix, np.ndarray]) -> float:
        """||L U - g|| / ||g||."""
        g = _as_array(g)
        return float(np.linalg.norm(self.lower @ self.upper - g) / max(np.linalg.norm(g), 1e-300))

    def to_frame(self) -> pd.DataFrame:
        """One row per level with the quasi-norm block and its condition number."""
        return pd.DataFrame(
            {
                "level": list(range(self.N)),
                "D": [d.tolist() for d in self.D],
                "condition": self.condition,
            }
        )


def block_lu(g: Union[BlockMatrix, np.ndarray], side: str, m: int = None, tol: float = PIVOT_TOL) -> Factorization:
    """Block Doolittle factorization without pivoting.

    Args:
        g: Moment matrix.
        side (str): "L" or "R", recorded on the result.
        m (int, optional): Block size, read from a BlockMatrix when omitted.
        tol (float, optional): Pivot blocks with smallest singular value below tol·||g|| are rejected.

    Raises:
        QuasiDefinitenessError: A leading block minor is numerically singular.

    Returns:
        Factorization: the factors.
    """
    if side not in ("L", "R"):
        raise ValueError(f"Unrecognised side {side}.")
    m = g.m if isinstance(g, BlockMatrix) else m
    a = _as_array(g).copy()
    n = a.shape[0]
    N = n // m
    scale = np.linalg.norm(a)
    lower = np.eye(n, dtype=complex)
    upper = np.zeros_like(a)
    D: List[np.ndarray] = []
    condition: List[float] = []
    for k in range(N):
        rows = slice(k * m, (k + 1) * m)
        rest = slice((k + 1) * m, n)
        pivot = a[rows, rows]
        sv = svdvals(pivot)
        if sv.min() < tol * scale:
            msg = f"Moment matrix is not quasi-definite at level {k + 1}: smallest pivot singular value {sv.min():.3e}"
            logger.error(msg)
            raise QuasiDefinitenessError(msg, level=k + 1)
        D.append(pivot.copy())
        condition.append(float(sv.max() / sv.min()))
        upper[rows, k * m :] = a[rows, k * m :]
        if k + 1 < N:
            # right division by the pivot: X·P = B  <=>  Pᵀ Xᵀ = Bᵀ
            factor = lu_solve(lu_factor(pivot), a[rest, rows].T, trans=1).T
            lower[rest, rows] = factor
            a[rest, rest] -= factor @ a[rows, rest]
    logger.log(VERBOSE_LVL, f"Factorized side {side} moment matrix with {N} blocks, max pivot condition {max(condition):.3e}")
    return Factorization(side, m, lower, upper, D, condition)


def schur_complement(M: Union[BlockMatrix, np.ndarray], p: int, m: int = None) -> np.ndarray:
    """Schur complement D - C A^{-1} B of the leading p×p block split.

    Args:
        M: Square block matrix.
        p (int): Number of blocks in the leading part A.
        m (int, optional): Block size, read from a BlockMatrix when omitted.

    Returns:
        np.ndarray: the complement.
    """
    m = M.m if isinstance(M, BlockMatrix) else m
    a = _as_array(M)
    k = p * m
    A, B, C, D = a[:k, :k], a[:k, k:], a[k:, :k], a[k:, k:]
    if k == 0:
        return D.copy()
    sv = svdvals(A)
    if sv.min() < PIVOT_TOL * max(sv.max(), 1e-300):
        raise QuasiDefinitenessError(f"Leading {p}-block submatrix is singular.", level=p)
    return D - C @ np.linalg.solve(A, B)


def quasi_definiteness_scan(g: Union[BlockMatrix, np.ndarray], m: int = None, tol: float = PIVOT_TOL) -> pd.DataFrame:
    """Determinant and smallest singular value of every leading truncation g^{[l]}.

    Args:
        g: Moment matrix.
        m (int, optional): Block size, read from a BlockMatrix when omitted.
        tol (float, optional): Relative threshold on the smallest singular value.

    Returns:
        pd.DataFrame: columns level, abs_det, min_singular, passed.
    """
    m = g.m if isinstance(g, BlockMatrix) else m
    a = _as_array(g)
    scale = max(np.linalg.norm(a), 1e-300)
    rows = []
    for l in range(1, a.shape[0] // m + 1):
        sub = a[: l * m, : l * m]
        lu, _ = lu_factor(sub)
        abs_det = float(np.prod(np.abs(np.diag(lu))))
        smin = float(svdvals(sub).min())
        rows.append({"level": l, "abs_det": abs_det, "min_singular": smin, "passed": bool(smin >= tol * scale)})
    return pd.DataFrame(rows)


def schur_residual(fact: Factorization, g: Union[BlockMatrix, np.ndarray]) -> float:
    """Max relative gap between D_l and the Schur complement g^{[l+1]} / g^{[l]}."""
    a = _as_array(g)
    m = fact.m
    worst = 0.0
    for l, d in enumerate(fact.D):
        sc = schur_complement(a[: (l + 1) * m, : (l + 1) * m], l, m)
        worst = max(worst, np.linalg.norm(sc - d) / max(np.linalg.norm(d), 1.0))
    return float(worst)


def nested_consistency(small: Factorization, large: Factorization) -> float:
    """Leading-block agreement of factorizations at two truncation sizes."""
    k = small.lower.shape[0]
    lo = max_abs(small.lower - large.lower[:k, :k])
    up = max_abs(small.upper - large.upper[:k, :k])
    return float(max(lo, up) / max(np.linalg.norm(large.upper), 1.0))


def hermitian_duality_residual(fact_l: Factorization, fact_r: Factorization) -> float:
    """max(||S1† - Ŝ2^{-1}||, ||Z2† - Ẑ1^{-1}||) for a Hermitian measure."""
    left = max_abs(fact_l.S1.conj().T - fact_l.S2_hat_inv)
    z1_hat_inv = solve_triangular(fact_r.Z1_hat, np.eye(fact_r.Z1_hat.shape[0]), lower=False, unit_diagonal=True)
    right = max_abs(fact_r.Z2.conj().T - z1_hat_inv)
    return float(max(left, right))
