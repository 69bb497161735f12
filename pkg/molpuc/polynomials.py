"""Matrix orthogonal Laurent polynomials, matrix Szegő polynomials, Verblunsky data and second kind functions."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from .cmv import BlockMatrix, build_moment_matrix, chi_vector, cmv_index, required_moments
from .exceptions import ConsistencyError, DomainError
from .gauss_borel import Factorization, schur_complement
from .measure import MatrixMeasure, MomentSet
from .utils import VERBOSE_LVL, encode_matrix, max_abs, quadrature_size, relative_residual, trapezoid_nodes

logger = logging.getLogger(__name__)

FAMILIES = ("phi1L", "phi2L", "phi1R", "phi2R")
MONIC_TOL = 1e-10
VERBLUNSKY_TOL = 1e-10


class MatrixLaurentPoly:
    """Finite sum Σ_k A_k z^k with m×m complex coefficients."""

    # ndarray operands defer to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, coeffs: Dict[int, np.ndarray], m: int, family: str = "", index: int = None) -> None:
        """Constructor.

        Args:
            coeffs (Dict[int, np.ndarray]): Power to coefficient.
            m (int): Block size.
            family (str, optional): Family tag. Defaults to "".
            index (int, optional): Degree index l. Defaults to None.
        """
        self.m = m
        self.coeffs = {int(k): np.asarray(v, dtype=complex) for k, v in coeffs.items()}
        self.family = family
        self.index = index

    def __repr__(self) -> str:
        return f"MatrixLaurentPoly(family={self.family!r}, index={self.index}, powers=[{self.min_power}, {self.max_power}])"

    @property
    def min_power(self) -> int:
        """Lowest power present (0 for the zero polynomial)."""
        return min(self.coeffs) if self.coeffs else 0

    @property
    def max_power(self) -> int:
        """Highest power present (0 for the zero polynomial)."""
        return max(self.coeffs) if self.coeffs else 0

    def coefficient(self, k: int) -> np.ndarray:
        """Coefficient of z^k."""
        return self.coeffs.get(k, np.zeros((self.m, self.m), dtype=complex))

    def __call__(self, z: complex) -> np.ndarray:
        if z == 0 and self.min_power < 0:
            raise DomainError(f"{self.family or 'Laurent polynomial'} has a pole at z = 0.")
        out = np.zeros((self.m, self.m), dtype=complex)
        for k in sorted(self.coeffs):
            out += self.coeffs[k] * complex(z) ** k
        return out

    def evaluate(self, zs: np.ndarray) -> np.ndarray:
        """Values at many points, shape (len(zs), m, m)."""
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        out = np.zeros((zs.shape[0], self.m, self.m), dtype=complex)
        for k in sorted(self.coeffs):
            out += (zs**k)[:, None, None] * self.coeffs[k]
        return out

    def _combine(self, other: "MatrixLaurentPoly", sign: float) -> "MatrixLaurentPoly":
        keys = set(self.coeffs) | set(other.coeffs)
        return MatrixLaurentPoly({k: self.coefficient(k) + sign * other.coefficient(k) for k in keys}, self.m)

    def __add__(self, other: "MatrixLaurentPoly") -> "MatrixLaurentPoly":
        return self._combine(other, 1.0)

    def __sub__(self, other: "MatrixLaurentPoly") -> "MatrixLaurentPoly":
        return self._combine(other, -1.0)

    def __matmul__(self, other: Union["MatrixLaurentPoly", np.ndarray]) -> "MatrixLaurentPoly":
        if isinstance(other, MatrixLaurentPoly):
            out: Dict[int, np.ndarray] = {}
            for i, a in self.coeffs.items():
                for j, b in other.coeffs.items():
                    out[i + j] = out.get(i + j, 0) + a @ b
            return MatrixLaurentPoly(out, self.m)
        return MatrixLaurentPoly({k: v @ other for k, v in self.coeffs.items()}, self.m, self.family, self.index)

    def __rmatmul__(self, other: np.ndarray) -> "MatrixLaurentPoly":
        return MatrixLaurentPoly({k: other @ v for k, v in self.coeffs.items()}, self.m, self.family, self.index)

    def scale(self, c: complex) -> "MatrixLaurentPoly":
        """Scalar multiple."""
        return MatrixLaurentPoly({k: c * v for k, v in self.coeffs.items()}, self.m, self.family, self.index)

    def shift(self, k: int) -> "MatrixLaurentPoly":
        """Multiplication by z^k."""
        return MatrixLaurentPoly({p + k: v for p, v in self.coeffs.items()}, self.m, self.family, self.index)

    def reflect(self) -> "MatrixLaurentPoly":
        """p(1/z)."""
        return MatrixLaurentPoly({-p: v for p, v in self.coeffs.items()}, self.m, self.family, self.index)

    def reversed(self, degree: int) -> "MatrixLaurentPoly":
        """Reversed polynomial of the given degree: (P*)_k = (P_{degree-k})†, i.e. z^n (P(1/z̄))†."""
        return MatrixLaurentPoly({degree - p: v.conj().T for p, v in self.coeffs.items()}, self.m)

    def negative_part(self) -> "MatrixLaurentPoly":
        """Terms with negative powers."""
        return MatrixLaurentPoly({p: v for p, v in self.coeffs.items() if p < 0}, self.m)

    def nonnegative_part(self) -> "MatrixLaurentPoly":
        """Terms with nonnegative powers."""
        return MatrixLaurentPoly({p: v for p, v in self.coeffs.items() if p >= 0}, self.m)

    def norm(self) -> float:
        """Euclidean norm of the stacked coefficients."""
        return float(np.sqrt(sum(np.linalg.norm(v) ** 2 for v in self.coeffs.values())))

    def to_dict(self) -> dict:
        """Polynomial export format {"family", "l", "coeffs": {"<power>": matrix}}."""
        return {
            "family": self.family,
            "l": self.index,
            "coeffs": {str(p): encode_matrix(self.coeffs[p]) for p in sorted(self.coeffs)},
        }


def zero_poly(m: int) -> MatrixLaurentPoly:
    """The zero polynomial."""
    return MatrixLaurentPoly({}, m)


def constant_poly(a: np.ndarray) -> MatrixLaurentPoly:
    """Constant polynomial with coefficient a."""
    a = np.asarray(a, dtype=complex)
    return MatrixLaurentPoly({0: a}, a.shape[0])


def _row_poly(row_blocks: Sequence[np.ndarray], m: int, family: str, index: int) -> MatrixLaurentPoly:
    return MatrixLaurentPoly({cmv_index(j): b for j, b in enumerate(row_blocks)}, m, family, index)


def _blk(a: np.ndarray, m: int, i: int, j: int) -> np.ndarray:
    return a[i * m : (i + 1) * m, j * m : (j + 1) * m]


@dataclass
class MolpucFamilies:
    """The four biorthogonal families φ₁^L, φ₂^L, φ₁^R, φ₂^R for l = 0..N-1."""

    m: int
    N: int
    phi1L: List[MatrixLaurentPoly]
    phi2L: List[MatrixLaurentPoly]
    phi1R: List[MatrixLaurentPoly]
    phi2R: List[MatrixLaurentPoly]
    fact_l: Factorization
    fact_r: Factorization

    def family(self, name: str) -> List[MatrixLaurentPoly]:
        """Family by tag."""
        if name not in FAMILIES:
            raise ValueError(f"Unknown family {name}, expected one of {FAMILIES}.")
        return getattr(self, name)

    def values(self, name: str, z: complex) -> np.ndarray:
        """All members evaluated at z, shape (N, m, m)."""
        return np.stack([p(z) for p in self.family(name)])

    def column(self, name: str, z: complex) -> np.ndarray:
        """Stacked block column (N·m, m) of the family at z."""
        return self.values(name, z).reshape(self.N * self.m, self.m)

    def row(self, name: str, z: complex) -> np.ndarray:
        """Block row (m, N·m) of the family at z."""
        return np.hstack(list(self.values(name, z)))

    def adjoint_row(self, name: str, z: complex) -> np.ndarray:
        """Block row (m, N·m) of the adjoints p(z)†."""
        return np.hstack([v.conj().T for v in self.values(name, z)])

    def adjoint_column(self, name: str, z: complex) -> np.ndarray:
        """Block column (N·m, m) of the adjoints p(z)†."""
        return np.vstack([v.conj().T for v in self.values(name, z)])

    def grid(self, name: str, zs: np.ndarray) -> np.ndarray:
        """Values on many points, shape (len(zs), N, m, m)."""
        return np.stack([p.evaluate(zs) for p in self.family(name)], axis=1)

    def to_dict(self) -> dict:
        """All polynomials in the export format."""
        return {name: [p.to_dict() for p in self.family(name)] for name in FAMILIES}


def molpuc_from_factorization(fact_l: Factorization, fact_r: Factorization) -> MolpucFamilies:
    """Read the four families from the factors.

    φ₁^L = S1χ, φ₂^L = (S2^{-1})†χ, φ₁^R = χᵀZ1, φ₂^R = χᵀ(Z2^{-1})†.

    Args:
        fact_l (Factorization): Side L factorization.
        fact_r (Factorization): Side R factorization at the same N.

    Returns:
        MolpucFamilies: the families.
    """
    if fact_l.N != fact_r.N:
        raise ValueError(f"Factorizations have different sizes {fact_l.N} and {fact_r.N}.")
    m, N = fact_l.m, fact_l.N
    S1, S2_inv, Z1, Z2_inv = fact_l.S1, fact_l.S2_inv, fact_r.Z1, fact_r.Z2_inv
    phi1L = [_row_poly([_blk(S1, m, l, j) for j in range(l + 1)], m, "phi1L", l) for l in range(N)]
    phi2L = [_row_poly([_blk(S2_inv, m, j, l).conj().T for j in range(l + 1)], m, "phi2L", l) for l in range(N)]
    phi1R = [_row_poly([_blk(Z1, m, j, l) for j in range(l + 1)], m, "phi1R", l) for l in range(N)]
    phi2R = [_row_poly([_blk(Z2_inv, m, l, j).conj().T for j in range(l + 1)], m, "phi2R", l) for l in range(N)]
    logger.log(VERBOSE_LVL, f"Extracted four MOLPUC families with {N} members each")
    return MolpucFamilies(m, N, phi1L, phi2L, phi1R, phi2R, fact_l, fact_r)


def _weight_on_grid(measure, n_nodes: int):
    theta, zs = trapezoid_nodes(n_nodes)
    return zs, measure.weight(theta), 2.0 * np.pi / n_nodes


def gram_matrices(families: MolpucFamilies, measure, n_nodes: int = None) -> Dict[str, np.ndarray]:
    """Quadrature of the left and right sesquilinear pairings between the families.

    Left: G^L_{kj} = ∮ φ₁^L(k) w φ₂^L(j)† dθ. Right: G^R_{jk} = ∮ φ₂^R(j)† w φ₁^R(k) dθ.

    Returns:
        Dict[str, np.ndarray]: "L" and "R" arrays of shape (N, N, m, m).
    """
    n_nodes = n_nodes if n_nodes else quadrature_size(families.N + measure.bandwidth)
    zs, w, dt = _weight_on_grid(measure, n_nodes)
    p1L, p2L = families.grid("phi1L", zs), families.grid("phi2L", zs)
    p1R, p2R = families.grid("phi1R", zs), families.grid("phi2R", zs)
    left = np.einsum("tkab,tbc,tjdc->kjad", p1L, w, p2L.conj()) * dt
    right = np.einsum("tjba,tbc,tkcd->jkad", p2R.conj(), w, p1R) * dt
    return {"L": left, "R": right}


def biorthogonality_check(families: MolpucFamilies, measure, l_max: int = None, n_nodes: int = None) -> float:
    """Max |⟪φ₂^H(j), φ₁^H(k)⟫_H - δ_{jk} I| over both sides and j, k < l_max.

    Args:
        families (MolpucFamilies): Families to check.
        measure: Measure they were built from.
        l_max (int, optional): Number of members checked. Defaults to N.
        n_nodes (int, optional): Quadrature nodes.

    Returns:
        float: Max residual.
    """
    l_max = l_max if l_max else families.N
    grams = gram_matrices(families, measure, n_nodes)
    eye = np.einsum("kj,ab->kjab", np.eye(families.N), np.eye(families.m))
    worst = 0.0
    for side in ("L", "R"):
        worst = max(worst, max_abs((grams[side] - eye)[:l_max, :l_max]))
    logger.log(VERBOSE_LVL, f"Biorthogonality residual {worst:.3e} for {l_max} members")
    return float(worst)


def quasi_orthogonality_residual(families: MolpucFamilies, measure, n_nodes: int = None) -> float:
    """Orthogonality of each family member against the lower CMV basis elements.

    ∮ φ₁^L(l) w χ^{(k)}† = 0, ∮ χ^{(k)} w φ₂^L(l)† = 0, ∮ χ^{(k)}† w φ₁^R(l) = 0 and
    ∮ φ₂^R(l)† w χ^{(k)} = 0 for k < l; the diagonal pairing returns D_l (resp. I).
    """
    N, m = families.N, families.m
    n_nodes = n_nodes if n_nodes else quadrature_size(families.N + measure.bandwidth)
    zs, w, dt = _weight_on_grid(measure, n_nodes)
    powers = np.array([cmv_index(k) for k in range(N)])
    chi = zs[:, None] ** powers[None, :]
    scale = max(1.0, max(np.linalg.norm(d) for d in families.fact_l.D))
    pairs = {
        "phi1L": np.einsum("tlab,tbc,tk->lkac", families.grid("phi1L", zs), w, chi.conj()),
        "phi2L": np.einsum("tk,tab,tlcb->lkac", chi, w, families.grid("phi2L", zs).conj()),
        "phi1R": np.einsum("tk,tab,tlbc->lkac", chi.conj(), w, families.grid("phi1R", zs)),
        "phi2R": np.einsum("tlba,tbc,tk->lkac", families.grid("phi2R", zs).conj(), w, chi),
    }
    worst = 0.0
    for vals in pairs.values():
        vals = vals * dt
        for l in range(N):
            if l:
                worst = max(worst, max_abs(vals[l, :l]) / scale)
    return float(worst)


def _schur_parts(g: np.ndarray, m: int, l: int):
    k = l * m
    return g[:k, :k], g[:k, k : k + m], g[k : k + m, :k], g[k : k + m, k : k + m]


def molpuc_schur_route(g: BlockMatrix, l: int, z: complex, family: str = "phi1L") -> np.ndarray:
    """Value of one family member at z from the bordered truncation of the moment matrix.

    phi1L and phi2L take g^L, phi1R and phi2R take g^R. Examples:
    φ₁^L(l)(z) = χ^{(l)}(z) - g_{l,[l]} (g^{[l]})^{-1} χ^{[l]}(z),
    φ₁^R(l)(z) = (χ^{(l)}(z) - χ^{[l]}(z)ᵀ (g^{[l]})^{-1} g_{[l],l}) (D_l)^{-1}.

    Args:
        g (BlockMatrix): Moment matrix with at least l+1 blocks.
        l (int): Degree index.
        z (complex): Evaluation point.
        family (str, optional): Family tag. Defaults to "phi1L".

    Returns:
        np.ndarray: m×m value.
    """
    m = g.m
    A, B, C, Dl = _schur_parts(g.data, m, l)
    chi = chi_vector(l + 1, z, m)
    head, last = chi[: l * m], chi[l * m :]
    if family in ("phi2L", "phi1R"):
        sc = schur_complement(g.data[: (l + 1) * m, : (l + 1) * m], l, m)
        sc_inv = np.linalg.inv(sc)
    if family == "phi1L":
        return last - (C @ np.linalg.solve(A, head) if l else 0.0)
    if family == "phi2L":
        # the bordered form yields φ₂^L(l)(z)†
        head_d, last_d = head.conj().T, last.conj().T
        adj = (last_d - (head_d @ np.linalg.solve(A, B) if l else 0.0)) @ sc_inv
        return adj.conj().T
    if family == "phi1R":
        return (last - (head.T @ np.linalg.solve(A, B) if l else 0.0)) @ sc_inv
    if family == "phi2R":
        chi_c = chi_vector(l + 1, np.conj(z), m)
        adj = chi_c[l * m :] - (C @ np.linalg.solve(A, chi_c[: l * m]) if l else 0.0)
        return adj.conj().T
    raise ValueError(f"Unknown family {family}, expected one of {FAMILIES}.")


def dual_route_residual(families: MolpucFamilies, g_L: BlockMatrix, g_R: BlockMatrix, zs: Sequence[complex]) -> Dict[str, float]:
    """Factorization route versus bordered-truncation route for every family, member and sample."""
    out = {}
    for name in FAMILIES:
        g = g_L if name in ("phi1L", "phi2L") else g_R
        worst = 0.0
        for l, p in enumerate(families.family(name)):
            for z in zs:
                worst = max(worst, relative_residual(p(z), molpuc_schur_route(g, l, z, name)))
        out[name] = worst
    return out


@dataclass
class SzegoPolynomials:
    """Monic matrix Szegő polynomials P^L_{1,n}, P^R_{1,n}, P^L_{2,n}, P^R_{2,n} for n = 0..N-1."""

    m: int
    P1L: List[MatrixLaurentPoly]
    P1R: List[MatrixLaurentPoly]
    P2L: List[MatrixLaurentPoly]
    P2R: List[MatrixLaurentPoly]

    def get(self, name: str, n: int) -> MatrixLaurentPoly:
        """Polynomial by tag ("P1L", "P1R", "P2L", "P2R") and degree."""
        return getattr(self, name)[n]

    def reversed(self, name: str, n: int) -> MatrixLaurentPoly:
        """Reversed polynomial (P_n)* of degree n."""
        return self.get(name, n).reversed(n)


def quasi_norms(fact_l: Factorization, fact_r: Factorization) -> Dict[str, List[np.ndarray]]:
    """h^L_{2l}=D^L_{2l}, h^L_{2l+1}=D^R_{2l+1}, h^R_{2l}=D^R_{2l}, h^R_{2l+1}=D^L_{2l+1}."""
    hL = [fact_l.D[n] if n % 2 == 0 else fact_r.D[n] for n in range(fact_l.N)]
    hR = [fact_r.D[n] if n % 2 == 0 else fact_l.D[n] for n in range(fact_l.N)]
    return {"L": hL, "R": hR}


def _monic(q: MatrixLaurentPoly, n: int, tag: str, tol: float) -> MatrixLaurentPoly:
    scale = max(q.norm(), 1.0)
    neg = max([np.linalg.norm(v) for p, v in q.coeffs.items() if p < 0 or p > n] + [0.0])
    lead = np.linalg.norm(q.coefficient(n) - np.eye(q.m))
    if max(neg, lead) > tol * scale:
        msg = f"{tag}_{n} is not monic of degree {n}: stray terms {neg:.3e}, leading deviation {lead:.3e}"
        logger.error(msg)
        raise ConsistencyError(msg)
    coeffs = {p: q.coefficient(p) for p in range(n)}
    coeffs[n] = np.eye(q.m, dtype=complex)
    return MatrixLaurentPoly(coeffs, q.m, tag, n)


def szego_from_molpuc(families: MolpucFamilies, tol: float = MONIC_TOL) -> SzegoPolynomials:
    """Matrix Szegő polynomials from the MOLPUC families.

    Even degree 2l: P^L_{1,2l} = z^l φ₁^L(2l), P^R_{2,2l} = z^l φ₂^R(2l), P^R_{1,2l} = z^l φ₁^R(2l) h^R_{2l},
    P^L_{2,2l} = z^l (h^L_{2l})† φ₂^L(2l). Odd degree 2l+1 goes through the reversed polynomials:
    (P^L_{1,2l+1})* = z^{l+1} φ₂^R(2l+1), (P^R_{2,2l+1})* = z^{l+1} φ₁^L(2l+1),
    (P^L_{2,2l+1})* = z^{l+1} φ₁^R(2l+1) h^L_{2l+1}, (P^R_{1,2l+1})* = z^{l+1} (h^R_{2l+1})† φ₂^L(2l+1).

    Args:
        families (MolpucFamilies): the families.
        tol (float, optional): Relative monicity tolerance.

    Raises:
        ConsistencyError: A result is not a monic polynomial of the expected degree.

    Returns:
        SzegoPolynomials: the polynomials.
    """
    h = quasi_norms(families.fact_l, families.fact_r)
    hL, hR = h["L"], h["R"]
    out: Dict[str, List[MatrixLaurentPoly]] = {"P1L": [], "P1R": [], "P2L": [], "P2R": []}
    for n in range(families.N):
        l = n // 2
        if n % 2 == 0:
            cands = {
                "P1L": families.phi1L[n].shift(l),
                "P2R": families.phi2R[n].shift(l),
                "P1R": (families.phi1R[n] @ hR[n]).shift(l),
                "P2L": (hL[n].conj().T @ families.phi2L[n]).shift(l),
            }
        else:
            cands = {
                "P1L": families.phi2R[n].shift(l + 1).reversed(n),
                "P2R": families.phi1L[n].shift(l + 1).reversed(n),
                "P2L": (families.phi1R[n] @ hL[n]).shift(l + 1).reversed(n),
                "P1R": (hR[n].conj().T @ families.phi2L[n]).shift(l + 1).reversed(n),
            }
        for tag, q in cands.items():
            out[tag].append(_monic(q, n, tag, tol))
    return SzegoPolynomials(families.m, out["P1L"], out["P1R"], out["P2L"], out["P2R"])


def _toeplitz(moments: MomentSet, n: int, transpose: bool) -> np.ndarray:
    m = moments.m
    T = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        for j in range(n):
            T[i * m : (i + 1) * m, j * m : (j + 1) * m] = 2.0 * np.pi * moments[i - j if transpose else j - i]
    return T


def szego_schur_route(moments: MomentSet, n: int, tag: str) -> MatrixLaurentPoly:
    """Monic Szegő polynomial from the block Toeplitz moment matrix of size n.

    With T_{ij} = 2π c_{j-i}: P^L_{1,n} = z^n - Σ_j X_j z^j where X T = (2π c_{j-n})_j, and
    P^L_{2,n} = z^n - Σ_j X_j z^j where T X† = (2π c_{n-k})_k. The right polynomials use T' = Tᵀ-indexed blocks.

    Args:
        moments (MomentSet): Moments with n_max >= n.
        n (int): Degree.
        tag (str): "P1L", "P1R", "P2L" or "P2R".

    Returns:
        MatrixLaurentPoly: the polynomial.
    """
    m = moments.m
    coeffs: Dict[int, np.ndarray] = {n: np.eye(m, dtype=complex)}
    if n == 0:
        return MatrixLaurentPoly(coeffs, m, tag, n)
    if tag in ("P1L", "P2L"):
        T = _toeplitz(moments, n, transpose=False)
    else:
        T = _toeplitz(moments, n, transpose=True)
    if tag == "P1L":
        r = np.hstack([2.0 * np.pi * moments[j - n] for j in range(n)])
        X = np.linalg.solve(T.T, r.T).T
        blocks = [X[:, j * m : (j + 1) * m] for j in range(n)]
    elif tag == "P1R":
        r = np.vstack([2.0 * np.pi * moments[i - n] for i in range(n)])
        Y = np.linalg.solve(T, r)
        blocks = [Y[j * m : (j + 1) * m] for j in range(n)]
    elif tag == "P2L":
        s = np.vstack([2.0 * np.pi * moments[n - k] for k in range(n)])
        Xd = np.linalg.solve(T, s)
        blocks = [Xd[j * m : (j + 1) * m].conj().T for j in range(n)]
    elif tag == "P2R":
        s = np.hstack([2.0 * np.pi * moments[n - k] for k in range(n)])
        Yd = np.linalg.solve(T.T, s.T).T
        blocks = [Yd[:, j * m : (j + 1) * m].conj().T for j in range(n)]
    else:
        raise ValueError(f"Unknown Szegő tag {tag}.")
    for j, b in enumerate(blocks):
        coeffs[j] = -b
    return MatrixLaurentPoly(coeffs, m, tag, n)


def szego_dual_route_residual(szego: SzegoPolynomials, moments: MomentSet) -> float:
    """Max coefficient gap between the MOLPUC route and the Toeplitz route."""
    worst = 0.0
    for tag in ("P1L", "P1R", "P2L", "P2R"):
        for n, p in enumerate(getattr(szego, tag)):
            q = szego_schur_route(moments, n, tag)
            worst = max(worst, (p - q).norm() / max(p.norm(), 1.0))
    return float(worst)


def gram_schmidt_szego(measure: MatrixMeasure, n_max: int, n_nodes: int = None) -> List[np.ndarray]:
    """Monic orthogonal polynomials of a scalar measure by Gram-Schmidt on 1, z, z², ...

    Inner product ⟨f, g⟩ = ∮ f w ḡ dθ by the trapezoid rule.

    Args:
        measure (MatrixMeasure): Scalar (m=1) measure.
        n_max (int): Highest degree.
        n_nodes (int, optional): Quadrature nodes.

    Returns:
        List[np.ndarray]: Coefficient vectors (ascending powers) for degrees 0..n_max.
    """
    if measure.m != 1:
        raise ValueError("Gram-Schmidt oracle is only available for scalar measures.")
    n_nodes = n_nodes if n_nodes else quadrature_size(n_max + measure.bandwidth)
    zs, w, dt = _weight_on_grid(measure, n_nodes)
    w = w[:, 0, 0]
    basis = np.vander(zs, n_max + 1, increasing=True)

    def inner(f, g):
        return np.sum(f * w * np.conj(g)) * dt

    polys: List[np.ndarray] = []
    values: List[np.ndarray] = []
    for n in range(n_max + 1):
        coeff = np.zeros(n_max + 1, dtype=complex)
        coeff[n] = 1.0
        val = basis[:, n].copy()
        for pc, pv in zip(polys, values):
            proj = inner(basis[:, n], pv) / inner(pv, pv)
            coeff -= proj * pc
            val -= proj * pv
        polys.append(coeff)
        values.append(val)
    return [p[: n + 1] for n, p in enumerate(polys)]


@dataclass
class VerblunskyTable:
    """Verblunsky matrices and quasi-norms, index 0 holding the boundary value I.

    a = α^L_1, b = (α^R_2)†, c = α^R_1, d = (α^L_2)†; hL, hR are the quasi-norms.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    hL: np.ndarray
    hR: np.ndarray

    FIELDS = ("a", "b", "c", "d", "hL", "hR")

    @property
    def N(self) -> int:
        """Number of indices."""
        return self.a.shape[0]

    @property
    def m(self) -> int:
        """Block size."""
        return self.a.shape[1]

    def stack(self) -> np.ndarray:
        """State array of shape (6, N, m, m)."""
        return np.stack([getattr(self, f) for f in self.FIELDS])

    @classmethod
    def from_stack(cls, state: np.ndarray) -> "VerblunskyTable":
        """Inverse of stack."""
        return cls(*[np.array(s) for s in state])

    def alpha(self, name: str, n: int) -> np.ndarray:
        """Coefficient by field name with zero padding past the table end."""
        arr = getattr(self, name)
        if n >= arr.shape[0]:
            return np.zeros((self.m, self.m), dtype=complex)
        return arr[n]

    def to_frame(self) -> pd.DataFrame:
        """Long format table with columns l, component, row, col, re, im."""
        rows = []
        for f in self.FIELDS:
            arr = getattr(self, f)
            for l in range(self.N):
                for i in range(self.m):
                    for j in range(self.m):
                        v = arr[l, i, j]
                        rows.append({"l": l, "component": f, "row": i, "col": j, "re": float(v.real), "im": float(v.imag)})
        return pd.DataFrame(rows)


def verblunsky_extract(
    fact_l: Factorization, fact_r: Factorization, families: MolpucFamilies = None, tol: float = VERBLUNSKY_TOL
) -> VerblunskyTable:
    """Verblunsky matrices from the sub/superdiagonal blocks of S1, Z2^{-1}, Ŝ2^{-1} and Ẑ1.

    a_{2k} = S1[2k,2k-1], a_{2k+1} = Z2^{-1}[2k+1,2k], b_{2k+1} = S1[2k+1,2k], b_{2k} = Z2^{-1}[2k,2k-1],
    c_{2k+1} = Ŝ2^{-1}[2k,2k+1], c_{2k} = Ẑ1[2k-1,2k], d_{2k} = Ŝ2^{-1}[2k-1,2k], d_{2k+1} = Ẑ1[2k,2k+1].
    When families are given the table is cross-checked against the constant terms of the Szegő polynomials.

    Raises:
        ConsistencyError: The two routes disagree beyond tol.

    Returns:
        VerblunskyTable: the table.
    """
    m, N = fact_l.m, fact_l.N
    S1, Z2i, S2hi, Z1h = fact_l.S1, fact_r.Z2_inv, fact_l.S2_hat_inv, fact_r.Z1_hat
    eye = np.eye(m, dtype=complex)
    a, b, c, d = (np.zeros((N, m, m), dtype=complex) for _ in range(4))
    for arr in (a, b, c, d):
        arr[0] = eye
    for n in range(1, N):
        if n % 2 == 0:
            a[n] = _blk(S1, m, n, n - 1)
            b[n] = _blk(Z2i, m, n, n - 1)
            c[n] = _blk(Z1h, m, n - 1, n)
            d[n] = _blk(S2hi, m, n - 1, n)
        else:
            a[n] = _blk(Z2i, m, n, n - 1)
            b[n] = _blk(S1, m, n, n - 1)
            c[n] = _blk(S2hi, m, n - 1, n)
            d[n] = _blk(Z1h, m, n - 1, n)
    h = quasi_norms(fact_l, fact_r)
    table = VerblunskyTable(a, b, c, d, np.stack(h["L"]), np.stack(h["R"]))
    if families is not None:
        szego = szego_from_molpuc(families)
        worst = 0.0
        for n in range(1, N):
            worst = max(
                worst,
                max_abs(a[n] - szego.P1L[n].coefficient(0)),
                max_abs(c[n] - szego.P1R[n].coefficient(0)),
                max_abs(d[n] - szego.P2L[n].coefficient(0).conj().T),
                max_abs(b[n] - szego.P2R[n].coefficient(0).conj().T),
            )
        if worst > tol:
            msg = f"Verblunsky matrices disagree with P(0) by {worst:.3e}"
            logger.error(msg)
            raise ConsistencyError(msg)
        logger.log(VERBOSE_LVL, f"Verblunsky cross-check against P(0) passed with {worst:.3e}")
    return table


def verblunsky_relations(table: VerblunskyTable) -> Dict[str, float]:
    """Residuals of the quasi-norm/Verblunsky relations and, for Hermitian data, the pairing a = d†, c = b†.

    a_n h^R_n = h^L_n c_n, b_n h^L_n = h^R_n d_n, h^L_n = (I - a_n b_n) h^L_{n-1} = h^L_{n-1}(I - c_n d_n),
    h^R_n = (I - b_n a_n) h^R_{n-1} = h^R_{n-1}(I - d_n c_n), h^L_0 = h^R_0.
    """
    a, b, c, d, hL, hR = table.a, table.b, table.c, table.d, table.hL, table.hR
    eye = np.eye(table.m)
    scale = max(np.abs(hL).max(), np.abs(hR).max(), 1.0)
    res = {k: 0.0 for k in ("ahR_hLc", "bhL_hRd", "hL_left", "hL_right", "hR_left", "hR_right")}
    for n in range(1, table.N):
        res["ahR_hLc"] = max(res["ahR_hLc"], max_abs(a[n] @ hR[n] - hL[n] @ c[n]) / scale)
        res["bhL_hRd"] = max(res["bhL_hRd"], max_abs(b[n] @ hL[n] - hR[n] @ d[n]) / scale)
        res["hL_left"] = max(res["hL_left"], max_abs(hL[n] - (eye - a[n] @ b[n]) @ hL[n - 1]) / scale)
        res["hL_right"] = max(res["hL_right"], max_abs(hL[n] - hL[n - 1] @ (eye - c[n] @ d[n])) / scale)
        res["hR_left"] = max(res["hR_left"], max_abs(hR[n] - (eye - b[n] @ a[n]) @ hR[n - 1]) / scale)
        res["hR_right"] = max(res["hR_right"], max_abs(hR[n] - hR[n - 1] @ (eye - d[n] @ c[n])) / scale)
    res["h0"] = max_abs(hL[0] - hR[0]) / scale
    return res


def hermitian_pairing_residual(table: VerblunskyTable) -> float:
    """max(|a - d†|, |c - b†|, |h - h†|) for Hermitian measures."""
    dag = lambda x: np.conj(np.transpose(x, (0, 2, 1)))  # noqa: E731
    return float(
        max(
            max_abs(table.a[1:] - dag(table.d[1:])),
            max_abs(table.c[1:] - dag(table.b[1:])),
            max_abs(table.hL - dag(table.hL)) / max(np.abs(table.hL).max(), 1.0),
            max_abs(table.hR - dag(table.hR)) / max(np.abs(table.hR).max(), 1.0),
        )
    )


def norm_integral_residuals(szego: SzegoPolynomials, measure, table: VerblunskyTable, n_nodes: int = None) -> float:
    """h^L_n = ∮ P^L_{1,n} w ζ̄^n dθ and h^R_n = ∮ ζ̄^n w P^R_{1,n} dθ against the table."""
    N = len(szego.P1L)
    n_nodes = n_nodes if n_nodes else quadrature_size(N + measure.bandwidth)
    zs, w, dt = _weight_on_grid(measure, n_nodes)
    worst = 0.0
    for n in range(N):
        zn = (zs.conj() ** n)[:, None, None]
        left = np.einsum("tab,tbc->ac", szego.P1L[n].evaluate(zs), w * zn) * dt
        right = np.einsum("tab,tbc->ac", w * zn, szego.P1R[n].evaluate(zs)) * dt
        scale = max(np.linalg.norm(table.hL[n]), 1.0)
        worst = max(worst, np.linalg.norm(left - table.hL[n]) / scale, np.linalg.norm(right - table.hR[n]) / scale)
    return float(worst)


def fourier_poly(measure: MatrixMeasure, dagger: bool = False) -> MatrixLaurentPoly:
    """F_μ (or F_μ† = Σ c_n† z^n) as a Laurent polynomial over the stored support."""
    coeffs = {n: (c.conj().T if dagger else c) for n, c in measure.coeffs.items()}
    return MatrixLaurentPoly(coeffs, measure.m, "F")


def second_kind(families: MolpucFamilies, measure, l: int, z: complex) -> Dict[str, np.ndarray]:
    """Second kind functions as products of the MOLPUC with the Fourier series.

    C₂^L = 2π z^{-1} φ₁^L(1/z) F(1/z), C₁^L = 2π z^{-1} φ₂^L(1/z) F†(z),
    C₂^R = 2π z^{-1} F(1/z) φ₁^R(1/z), C₁^R = 2π z^{-1} F†(z) φ₂^R(1/z).

    Raises:
        DomainError: z = 0.
    """
    if z == 0:
        raise DomainError("Second kind functions are not defined at z = 0.")
    zi = 1.0 / z
    F_inv = measure.fourier_series(zi)
    F_dag = measure.fourier_series(z, dagger=True)
    pref = 2.0 * np.pi * zi
    return {
        "C2L": pref * families.phi1L[l](zi) @ F_inv,
        "C1L": pref * families.phi2L[l](zi) @ F_dag,
        "C2R": pref * F_inv @ families.phi1R[l](zi),
        "C1R": pref * F_dag @ families.phi2R[l](zi),
    }


def second_kind_series(families: MolpucFamilies, measure: MatrixMeasure, l: int, which: str) -> MatrixLaurentPoly:
    """Second kind function of a trig_poly measure as an explicit Laurent polynomial in z."""
    F = fourier_poly(measure)
    Fd = fourier_poly(measure, dagger=True)
    if which == "C2L":
        body = (families.phi1L[l] @ F).reflect()
    elif which == "C1L":
        body = families.phi2L[l].reflect() @ Fd
    elif which == "C2R":
        body = (F @ families.phi1R[l]).reflect()
    elif which == "C1R":
        body = Fd @ families.phi2R[l].reflect()
    else:
        raise ValueError(f"Unknown second kind function {which}.")
    return body.shift(-1).scale(2.0 * np.pi)


def cauchy_partial(families: MolpucFamilies, measure, l: int, z: complex, which: str, n_nodes: int = 512) -> np.ndarray:
    """Cauchy-integral representation of the part of a second kind function analytic in the region of z.

    For |z| > 1 the kernel z^{-1} u/(u - 1/z) recovers the negative-power part; for |z| < 1 the kernel
    u/(1 - zu) recovers minus the nonnegative-power part, so the returned value is that part itself.

    Raises:
        DomainError: |z| = 1 or z = 0.
    """
    if z == 0 or abs(abs(z) - 1.0) < 1e-12:
        raise DomainError(f"Cauchy representation needs 0 < |z| != 1, got |z| = {abs(z)}.")
    theta, us = trapezoid_nodes(n_nodes)
    w = measure.weight(theta)
    if abs(z) > 1:
        k = us / (z * us - 1.0)
    else:
        k = -us / (1.0 - z * us)
    dt = 2.0 * np.pi / n_nodes
    wd = np.conj(np.transpose(w, (0, 2, 1)))
    if which == "C2L":
        integrand = np.einsum("tab,tbc->tac", families.phi1L[l].evaluate(us), w)
    elif which == "C1L":
        integrand = np.einsum("tab,tbc->tac", families.phi2L[l].evaluate(us), wd)
    elif which == "C2R":
        integrand = np.einsum("tab,tbc->tac", w, families.phi1R[l].evaluate(us))
    elif which == "C1R":
        integrand = np.einsum("tab,tbc->tac", wd, families.phi2R[l].evaluate(us))
    else:
        raise ValueError(f"Unknown second kind function {which}.")
    value = np.einsum("t,tab->ab", k, integrand) * dt
    return value if abs(z) > 1 else -value


def second_kind_residuals(families: MolpucFamilies, measure: MatrixMeasure, points: Sequence[complex] = (2.0, 0.4)) -> Dict[str, float]:
    """Fourier-product route versus Cauchy route, and the Γ-series relation S1Γ = C₂^L.

    For each l and point z the product value is compared with the explicit series, and the Cauchy
    integral with the negative (|z|>1) or nonnegative (|z|<1) part of that series.
    """
    out = {"product_vs_series": 0.0, "cauchy": 0.0, "gamma": 0.0}
    m, N = families.m, families.N
    S1 = families.fact_l.S1
    for l in range(N):
        for z in points:
            vals = second_kind(families, measure, l, z)
            for which in ("C2L", "C1L", "C2R", "C1R"):
                series = second_kind_series(families, measure, l, which)
                out["product_vs_series"] = max(out["product_vs_series"], relative_residual(vals[which], series(z)))
                part = series.negative_part() if abs(z) > 1 else series.nonnegative_part()
                out["cauchy"] = max(out["cauchy"], relative_residual(cauchy_partial(families, measure, l, z, which), part(z)))
            F_inv = measure.fourier_series(1.0 / z)
            gamma = sum(_blk(S1, m, l, j) @ (2.0 * np.pi / z * (1.0 / z) ** cmv_index(j) * F_inv) for j in range(l + 1))
            out["gamma"] = max(out["gamma"], relative_residual(gamma, vals["C2L"]))
    return out


def families_from_measure(measure, N: int):
    """Moments, moment matrices, factorizations and families of a measure at N blocks."""
    from .gauss_borel import block_lu

    moments = measure.moments(required_moments(N))
    g_L = build_moment_matrix(moments, "L", N)
    g_R = build_moment_matrix(moments, "R", N)
    fact_l = block_lu(g_L, "L")
    fact_r = block_lu(g_R, "R")
    return {
        "moments": moments,
        "g_L": g_L,
        "g_R": g_R,
        "fact_l": fact_l,
        "fact_r": fact_r,
        "families": molpuc_from_factorization(fact_l, fact_r),
    }
