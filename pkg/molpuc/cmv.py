"""CMV basis, structural matrices and moment matrix assembly."""

import logging
from typing import Dict

import numpy as np

from .exceptions import DomainError, InsufficientMomentsError
from .measure import MomentSet
from .utils import VERBOSE_LVL, max_abs

logger = logging.getLogger(__name__)


def cmv_index(l: int) -> int:
    """Power of z carried by the CMV basis element l: a(0)=0, a(2k)=k, a(2k-1)=-k.

    Args:
        l (int): Block index.

    Returns:
        int: Integer power.
    """
    if l < 0:
        raise ValueError(f"Block index must be non-negative, got {l}.")
    return l // 2 if l % 2 == 0 else -(l + 1) // 2


def cmv_position(power: int) -> int:
    """Inverse of cmv_index."""
    return 2 * power if power >= 0 else -2 * power - 1


def chi_eval(l: int, z: complex, m: int = 1) -> np.ndarray:
    """χ^{(l)}(z) = z^{a(l)} I.

    Args:
        l (int): Block index.
        z (complex): Evaluation point.
        m (int, optional): Block size. Defaults to 1.

    Returns:
        np.ndarray: m×m matrix.
    """
    a = cmv_index(l)
    if z == 0 and a < 0:
        raise DomainError(f"χ^({l}) has a pole at z = 0.")
    return complex(z) ** a * np.eye(m, dtype=complex)


def chi_vector(N: int, z: complex, m: int = 1) -> np.ndarray:
    """Block column (χ^{(0)}(z), ..., χ^{(N-1)}(z)) of shape (N·m, m)."""
    return np.vstack([chi_eval(l, z, m) for l in range(N)])


class BlockMatrix:
    """Dense N·m × N·m complex matrix with block-indexed access."""

    def __init__(self, data: np.ndarray, m: int) -> None:
        """Constructor.

        Args:
            data (np.ndarray): Square matrix whose side is a multiple of m.
            m (int): Block size.
        """
        data = np.asarray(data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] % m:
            raise ValueError(f"Shape {data.shape} is not an N·m square with m={m}.")
        self.data = data
        self.m = m

    def __repr__(self) -> str:
        return f"BlockMatrix(N={self.N}, m={self.m})"

    @property
    def N(self) -> int:
        """Number of block rows."""
        return self.data.shape[0] // self.m

    def block(self, i: int, j: int) -> np.ndarray:
        """View of block (i, j)."""
        m = self.m
        return self.data[i * m : (i + 1) * m, j * m : (j + 1) * m]

    def leading(self, k: int) -> "BlockMatrix":
        """Leading k×k block truncation."""
        return BlockMatrix(self.data[: k * self.m, : k * self.m], self.m)

    def interior(self, margin: int) -> np.ndarray:
        """Leading (N - margin) blocks, where semi-infinite identities survive truncation."""
        k = max(self.N - margin, 0) * self.m
        return self.data[:k, :k]

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.data))

    def __matmul__(self, other: "BlockMatrix") -> "BlockMatrix":
        return BlockMatrix(self.data @ other.data, self.m)

    def dagger(self) -> "BlockMatrix":
        """Conjugate transpose."""
        return BlockMatrix(self.data.conj().T, self.m)


def interior(a: np.ndarray, m: int, margin: int) -> np.ndarray:
    """Leading (N - margin) blocks of a square block array."""
    k = max(a.shape[0] // m - margin, 0) * m
    return a[:k, :k]


def block_mask(N: int, m: int, part: str) -> np.ndarray:
    """Boolean mask selecting a block triangle.

    Args:
        N (int): Number of blocks.
        m (int): Block size.
        part (str): "upper" (with diagonal), "strict_upper", "lower" (with diagonal) or "strict_lower".

    Returns:
        np.ndarray: N·m × N·m mask.
    """
    tri = {
        "upper": np.triu(np.ones((N, N))),
        "strict_upper": np.triu(np.ones((N, N)), 1),
        "lower": np.tril(np.ones((N, N))),
        "strict_lower": np.tril(np.ones((N, N)), -1),
    }[part]
    return np.kron(tri, np.ones((m, m))).astype(bool)


def block_part(a: np.ndarray, m: int, part: str) -> np.ndarray:
    """Projection of a block matrix onto a block triangle (other entries set to zero)."""
    return np.where(block_mask(a.shape[0] // m, m, part), a, 0.0)


def block_diag_lift(E: np.ndarray, N: int) -> np.ndarray:
    """Block-diagonal matrix diag(E, ..., E) with N copies."""
    return np.kron(np.eye(N), np.asarray(E, dtype=complex))


def required_moments(N: int) -> int:
    """Largest |a(j) - a(i)| over i, j < N."""
    powers = [cmv_index(l) for l in range(N)]
    return max(powers) - min(powers)


def build_moment_matrix(moments: MomentSet, side: str, N: int) -> BlockMatrix:
    """Truncated CMV moment matrix: g^L_{ij} = 2π c_{a(j)-a(i)}, g^R_{ij} = 2π c_{a(i)-a(j)}.

    Args:
        moments (MomentSet): Moments of the measure.
        side (str): "L" or "R".
        N (int): Number of blocks.

    Returns:
        BlockMatrix: the moment matrix.
    """
    if side not in ("L", "R"):
        raise ValueError(f"Unrecognised side {side}.")
    need = required_moments(N)
    if need > moments.n_max:
        raise InsufficientMomentsError(f"Moment matrix with N={N} needs c_{need} but only |n| <= {moments.n_max} are available.")
    m = moments.m
    g = np.zeros((N * m, N * m), dtype=complex)
    a = [cmv_index(l) for l in range(N)]
    for i in range(N):
        for j in range(N):
            n = a[j] - a[i] if side == "L" else a[i] - a[j]
            g[i * m : (i + 1) * m, j * m : (j + 1) * m] = 2.0 * np.pi * moments[n]
    return BlockMatrix(g, m)


def _scalar_upsilon(N: int) -> np.ndarray:
    ups = np.zeros((N, N))
    for i in range(N):
        power = cmv_index(i) + 1
        j = cmv_position(power)
        if j < N:
            ups[i, j] = 1.0
    return ups


def upsilon(N: int, m: int = 1) -> BlockMatrix:
    """Truncated Υ: the permutation-like matrix with Υχ(z) = zχ(z) away from the edge.

    Args:
        N (int): Number of blocks.
        m (int, optional): Block size. Defaults to 1.

    Returns:
        BlockMatrix: Υ.
    """
    return BlockMatrix(np.kron(_scalar_upsilon(N), np.eye(m)), m)


def upsilon_power(N: int, p: int, m: int = 1) -> BlockMatrix:
    """Υ^p, using Υ^{-1} = Υᵀ for negative powers."""
    base = _scalar_upsilon(N) if p >= 0 else _scalar_upsilon(N).T
    return BlockMatrix(np.kron(np.linalg.matrix_power(base, abs(p)), np.eye(m)), m)


def eta(N: int, m: int = 1) -> BlockMatrix:
    """Truncated η: swaps CMV positions 2k-1 and 2k, fixes 0, so that ηχ(z) = χ(1/z).

    When N is even the last (unpaired) position is fixed so that η stays an involution.
    """
    e = np.zeros((N, N))
    e[0, 0] = 1.0
    for k in range(1, N):
        partner = k + 1 if k % 2 else k - 1
        e[k, partner if partner < N else k] = 1.0
    return BlockMatrix(np.kron(e, np.eye(m)), m)


def structural_checks(g_L: BlockMatrix, g_R: BlockMatrix, ups: BlockMatrix, et: BlockMatrix) -> Dict[str, float]:
    """Interior residuals of Υg^H = g^HΥ, ηg^R = g^Lη and ηΥ = Υ^{-1}η.

    Args:
        g_L (BlockMatrix): Left moment matrix.
        g_R (BlockMatrix): Right moment matrix.
        ups (BlockMatrix): Υ at the same N.
        et (BlockMatrix): η at the same N.

    Returns:
        Dict[str, float]: Residuals scaled by ||g||.
    """
    m = g_L.m
    scale = max(g_L.norm(), 1.0)
    u, e = ups.data, et.data
    out = {
        "upsilon_commutes_gL": max_abs(interior(u @ g_L.data - g_L.data @ u, m, 2)) / scale,
        "upsilon_commutes_gR": max_abs(interior(u @ g_R.data - g_R.data @ u, m, 2)) / scale,
        "eta_intertwines_gR_gL": max_abs(interior(e @ g_R.data - g_L.data @ e, m, 2)) / scale,
        "eta_inverts_upsilon": max_abs(interior(e @ u - u.T @ e, m, 3)),
    }
    result = {k: float(v) for k, v in out.items()}
    logger.log(VERBOSE_LVL, f"Structural residuals {result}")
    return result
