"""Dressed CMV operators J^L, J^R, intertwiners C_[p], their closed forms and the recursion catalog."""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .cmv import BlockMatrix, eta, interior, upsilon_power
from .exceptions import ConsistencyError
from .gauss_borel import Factorization
from .polynomials import MolpucFamilies, SzegoPolynomials, VerblunskyTable
from .utils import VERBOSE_LVL, max_abs, relative_residual

logger = logging.getLogger(__name__)

KINDS = ("JL", "JL_inv", "JR", "JR_inv", "C", "C_inv")
DRESS_TOL = 1e-9
J_MARGIN = 2
C_MARGIN = 3
# J† column i reaches J rows up to i + 2, exact only below N - J_MARGIN
DAGGER_MARGIN = J_MARGIN + 2


def c_margin(p: int) -> int:
    """Interior margin for identities involving C_[p]."""
    return C_MARGIN if abs(p) <= 1 else 2 * abs(p) + 1


@dataclass
class CMVOperator:
    """A dressed or synthetic operator with the block range where it is exact."""

    kind: str
    matrix: BlockMatrix
    margin: int
    p: int = 0
    route_residual: float = 0.0

    @property
    def data(self) -> np.ndarray:
        """Dense payload."""
        return self.matrix.data

    @property
    def m(self) -> int:
        """Block size."""
        return self.matrix.m

    def interior(self) -> np.ndarray:
        """Leading blocks unaffected by truncation."""
        return self.matrix.interior(self.margin)


def dress(fact_l: Factorization, fact_r: Factorization, kind: str, p: int = 0, tol: float = DRESS_TOL) -> CMVOperator:
    """Dress Υ^{±1} or ηΥ^p with the factors and compare the two defining routes.

    J^L = S1 Υ S1^{-1} = S2 Υ S2^{-1}, J^R = Z2^{-1} Υ Z2 = Z1^{-1} Υ Z1,
    C_[p] = Z2^{-1} η Υ^p S1^{-1} = Z1^{-1} η Υ^p S2^{-1}, C_[p]^{-1} = S1 Υ^{-p} η Z2 = S2 Υ^{-p} η Z1.

    Args:
        fact_l (Factorization): Side L factorization.
        fact_r (Factorization): Side R factorization at the same N.
        kind (str): One of "JL", "JL_inv", "JR", "JR_inv", "C", "C_inv".
        p (int, optional): Power for the intertwiners. Defaults to 0.
        tol (float, optional): Relative tolerance for route disagreement on the interior.

    Raises:
        ConsistencyError: The two routes disagree.

    Returns:
        CMVOperator: the S1 (resp. Z2) route value.
    """
    if kind not in KINDS:
        raise ValueError(f"Unknown operator kind {kind}, expected one of {KINDS}.")
    m, N = fact_l.m, fact_l.N
    S1, S1_inv, S2, S2_inv = fact_l.S1, fact_l.lower, fact_l.S2, fact_l.S2_inv
    Z2, Z2_inv, Z1, Z1_inv = fact_r.Z2, fact_r.Z2_inv, fact_r.Z1, fact_r.upper
    ups = upsilon_power(N, 1, m).data
    ups_inv = upsilon_power(N, -1, m).data
    if kind == "JL":
        first, second, margin = S1 @ ups @ S1_inv, S2 @ ups @ S2_inv, J_MARGIN
    elif kind == "JL_inv":
        first, second, margin = S1 @ ups_inv @ S1_inv, S2 @ ups_inv @ S2_inv, J_MARGIN
    elif kind == "JR":
        first, second, margin = Z2_inv @ ups @ Z2, Z1_inv @ ups @ Z1, J_MARGIN
    elif kind == "JR_inv":
        first, second, margin = Z2_inv @ ups_inv @ Z2, Z1_inv @ ups_inv @ Z1, J_MARGIN
    else:
        et = eta(N, m).data
        if kind == "C":
            core = et @ upsilon_power(N, p, m).data
            first, second = Z2_inv @ core @ S1_inv, Z1_inv @ core @ S2_inv
        else:
            core = upsilon_power(N, -p, m).data @ et
            first, second = S1 @ core @ Z2, S2 @ core @ Z1
        margin = c_margin(p)
    scale = max(np.linalg.norm(interior(first, m, margin)), 1.0)
    residual = max_abs(interior(first - second, m, margin)) / scale
    if residual > tol:
        msg = f"Dressing routes for {kind}[p={p}] disagree by {residual:.3e}"
        logger.error(msg)
        raise ConsistencyError(msg)
    logger.log(VERBOSE_LVL, f"Dressed {kind}[p={p}] with route residual {residual:.3e}")
    return CMVOperator(kind, BlockMatrix(first, m), margin, p, float(residual))


def dressed_catalog(fact_l: Factorization, fact_r: Factorization, tol: float = DRESS_TOL) -> Dict[str, CMVOperator]:
    """J^{L,R}, their inverses and C_[0]^{±1}, C_[-1]^{±1}, C_[1]^{±1}."""
    ops = {k: dress(fact_l, fact_r, k, tol=tol) for k in ("JL", "JL_inv", "JR", "JR_inv")}
    for p in (0, -1, 1):
        ops[f"C[{p}]"] = dress(fact_l, fact_r, "C", p, tol)
        ops[f"C_inv[{p}]"] = dress(fact_l, fact_r, "C_inv", p, tol)
    return ops


def power_residuals(ops: Dict[str, CMVOperator]) -> Dict[str, float]:
    """(J^R)^{l-p} = C_[p] C_[l]^{-1} for (p, l) in {(0, 1), (-1, 0)} on the interior."""
    m = ops["JR"].m
    out = {}
    for p, l in ((0, 1), (-1, 0)):
        lhs = ops["JR"].data
        rhs = ops[f"C[{p}]"].data @ ops[f"C_inv[{l}]"].data
        out[f"JR^{l - p}=C[{p}]C[{l}]^-1"] = relative_residual(interior(lhs, m, C_MARGIN), interior(rhs, m, C_MARGIN))
    return out


def _set(out: np.ndarray, mask: np.ndarray, m: int, i: int, j: int, value: np.ndarray) -> None:
    N = out.shape[0] // m
    if 0 <= i < N and 0 <= j < N:
        out[i * m : (i + 1) * m, j * m : (j + 1) * m] = value
        mask[i, j] = True


def _pair_operator(table: VerblunskyTable, N: int, parity: int, first: str, second: str) -> Tuple[np.ndarray, np.ndarray]:
    """2×2 block-diagonal operator with blocks [[-x_n, I], [I - y_n x_n, y_n]] on pairs (n-1, n), n of the given parity."""
    m = table.m
    eye = np.eye(m, dtype=complex)
    out = np.zeros((N * m, N * m), dtype=complex)
    mask = np.zeros((N, N), dtype=bool)
    if parity == 0:
        _set(out, mask, m, 0, 0, eye)
    for n in range(2 if parity == 0 else 1, N + 1, 2):
        x, y = table.alpha(first, n), table.alpha(second, n)
        _set(out, mask, m, n - 1, n - 1, -x)
        _set(out, mask, m, n - 1, n, eye)
        _set(out, mask, m, n, n - 1, eye - y @ x)
        _set(out, mask, m, n, n, y)
    return out, mask


def synthetic_operators(table: VerblunskyTable) -> Dict[str, np.ndarray]:
    """C_[0]^{±1}, C_[-1]^{±1} from the Verblunsky table and J^{L,R}, (J^{L,R})^{-1} as their products.

    J^L = C_[-1]^{-1} C_[0], (J^L)^{-1} = C_[0]^{-1} C_[-1], J^R = C_[-1] C_[0]^{-1}, (J^R)^{-1} = C_[0] C_[-1]^{-1}.
    """
    N = table.N
    C0, _ = _pair_operator(table, N, 0, "a", "b")
    C0_inv, _ = _pair_operator(table, N, 0, "b", "a")
    Cm1, _ = _pair_operator(table, N, 1, "b", "a")
    Cm1_inv, _ = _pair_operator(table, N, 1, "a", "b")
    return {
        "C[0]": C0,
        "C_inv[0]": C0_inv,
        "C[-1]": Cm1,
        "C_inv[-1]": Cm1_inv,
        "JL": Cm1_inv @ C0,
        "JL_inv": C0_inv @ Cm1,
        "JR": Cm1 @ C0_inv,
        "JR_inv": C0 @ Cm1_inv,
    }


def _explicit_j(table: VerblunskyTable, x: str, y: str) -> Tuple[np.ndarray, np.ndarray]:
    m, N = table.m, table.N
    eye = np.eye(m, dtype=complex)
    out = np.zeros((N * m, N * m), dtype=complex)
    mask = np.zeros((N, N), dtype=bool)

    def a(n):
        return table.alpha(x, n)

    def b(n):
        return table.alpha(y, n)

    for k in range((N + 1) // 2 + 1):
        e, o = 2 * k, 2 * k + 1
        _set(out, mask, m, e, e - 1, -a(o) @ (eye - b(e) @ a(e)))
        _set(out, mask, m, e, e, -a(o) @ b(e))
        _set(out, mask, m, e, e + 1, -a(e + 2))
        _set(out, mask, m, e, e + 2, eye)
        _set(out, mask, m, o, e - 1, (eye - b(o) @ a(o)) @ (eye - b(e) @ a(e)))
        _set(out, mask, m, o, e, (eye - b(o) @ a(o)) @ b(e))
        _set(out, mask, m, o, e + 1, -b(o) @ a(e + 2))
        _set(out, mask, m, o, e + 2, b(o))
    return out, mask


def _explicit_j_inv(table: VerblunskyTable, x: str, y: str) -> Tuple[np.ndarray, np.ndarray]:
    m, N = table.m, table.N
    eye = np.eye(m, dtype=complex)
    out = np.zeros((N * m, N * m), dtype=complex)
    mask = np.zeros((N, N), dtype=bool)

    def a(n):
        return table.alpha(x, n)

    def b(n):
        return table.alpha(y, n)

    for k in range((N + 1) // 2 + 1):
        e, o = 2 * k, 2 * k - 1
        _set(out, mask, m, e, e, -a(e) @ b(e + 1))
        _set(out, mask, m, e, e + 1, a(e))
        if k:
            _set(out, mask, m, e, e - 2, (eye - a(e) @ b(e)) @ (eye - a(o) @ b(o)))
            _set(out, mask, m, e, e - 1, (eye - a(e) @ b(e)) @ a(o))
            _set(out, mask, m, o, e - 2, -b(e) @ (eye - a(o) @ b(o)))
            _set(out, mask, m, o, e - 1, -b(e) @ a(o))
            _set(out, mask, m, o, e, -b(e + 1))
            _set(out, mask, m, o, e + 1, eye)
    return out, mask


def closed_form_operators(table: VerblunskyTable) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Entry-by-entry J^H and (J^H)^{-1} from the Verblunsky table, with their band masks.

    J^R is J^L with the roles of α^L_1 and (α^R_2)† exchanged. The general-k formulas are used for k = 0
    with the boundary value α_0 = I.
    """
    return {
        "JL": _explicit_j(table, "a", "b"),
        "JL_inv": _explicit_j_inv(table, "a", "b"),
        "JR": _explicit_j(table, "b", "a"),
        "JR_inv": _explicit_j_inv(table, "b", "a"),
    }


def band_residual(op: CMVOperator, mask: np.ndarray) -> float:
    """Largest interior block outside the band pattern, relative to the operator norm."""
    N, m = op.matrix.N, op.m
    k = max(N - op.margin, 0)
    outside = op.data * ~np.kron(mask, np.ones((m, m))).astype(bool)
    return max_abs(outside[: k * m, : k * m]) / max(op.matrix.norm(), 1.0)


def closed_form_residuals(ops: Dict[str, CMVOperator], table: VerblunskyTable) -> Dict[str, float]:
    """Blockwise comparison of the dressed operators with the closed forms and the synthetic products.

    Also checks the band pattern of each J and the two expressions of the C_[0] subdiagonal block,
    I - b_{2k} a_{2k} = h^R_{2k} (h^R_{2k-1})^{-1}.
    """
    out: Dict[str, float] = {}
    m = table.m
    for name, (mat, mask) in closed_form_operators(table).items():
        dressed = ops[name]
        out[f"explicit_{name}"] = relative_residual(interior(mat, m, C_MARGIN), interior(dressed.data, m, C_MARGIN))
        out[f"band_{name}"] = band_residual(dressed, mask)
        row0 = relative_residual(mat[:m, : 3 * m], dressed.data[:m, : 3 * m])
        logger.log(VERBOSE_LVL, f"First block row of {name} against the dressing route: {row0:.3e}")
    for name, mat in synthetic_operators(table).items():
        out[f"synthetic_{name}"] = relative_residual(interior(mat, m, C_MARGIN), interior(ops[name].data, m, C_MARGIN))
    _, mask0 = _pair_operator(table, table.N, 0, "a", "b")
    out["band_C[0]"] = band_residual(ops["C[0]"], mask0)
    _, mask1 = _pair_operator(table, table.N, 1, "b", "a")
    out["band_C[-1]"] = band_residual(ops["C[-1]"], mask1)
    eye = np.eye(m)
    worst = 0.0
    for n in range(2, table.N, 2):
        worst = max(worst, relative_residual(eye - table.b[n] @ table.a[n], table.hR[n] @ np.linalg.inv(table.hR[n - 1])))
    out["C[0]_subdiagonal_quasinorm_form"] = worst
    bad = {k: v for k, v in out.items() if v > 1e-9}
    if bad:
        logger.warning(f"Closed-form operator mismatches: {bad}")
    return out


def _gap(lhs: np.ndarray, rhs: np.ndarray, m: int, margin: int, rows: bool) -> float:
    k = max(lhs.shape[0 if rows else 1] // m - margin, 0) * m
    if rows:
        return relative_residual(lhs[:k], rhs[:k])
    return relative_residual(lhs[:, :k], rhs[:, :k])


def recursion_residuals(
    families: MolpucFamilies, ops: Dict[str, CMVOperator], table: VerblunskyTable, z_samples: Sequence[complex]
) -> Dict[str, float]:
    """Eigen-value relations of J^{L,R} for all four families and the C_[p] intertwining relations.

    J^L Φ₁^L = zΦ₁^L, (J^L)†Φ₂^L = z^{-1}Φ₂^L, Φ₁^R J^R = z^{-1}Φ₁^R, Φ₂^R (J^R)† = zΦ₂^R and their inverses;
    C_[p]Φ₁^L(z) = z^p Φ₂^R(1/z̄)†, Φ₁^R(z)C_[p] = z^p Φ₂^L(1/z̄)† and the C_[p]^{-1} forms for p = 0, -1;
    the five-term recursion through the closed-form J^L.
    """
    m = families.m
    five_term = closed_form_operators(table)["JL"][0]
    JL, JLi, JR, JRi = (ops[k].data for k in ("JL", "JL_inv", "JR", "JR_inv"))
    out: Dict[str, float] = {}

    def record(key, value):
        out[key] = max(out.get(key, 0.0), value)

    for z in z_samples:
        zi, zr = 1.0 / z, 1.0 / np.conj(z)
        p1L, p2L = families.column("phi1L", z), families.column("phi2L", z)
        r1R, r2R = families.row("phi1R", z), families.row("phi2R", z)
        record("JL phi1L = z phi1L", _gap(JL @ p1L, z * p1L, m, C_MARGIN, True))
        record("JL^-1 phi1L = z^-1 phi1L", _gap(JLi @ p1L, zi * p1L, m, C_MARGIN, True))
        record("JL^dag phi2L = z^-1 phi2L", _gap(JL.conj().T @ p2L, zi * p2L, m, DAGGER_MARGIN, True))
        record("(JL^-1)^dag phi2L = z phi2L", _gap(JLi.conj().T @ p2L, z * p2L, m, DAGGER_MARGIN, True))
        record("phi1R JR = z^-1 phi1R", _gap(r1R @ JR, zi * r1R, m, C_MARGIN, False))
        record("phi1R JR^-1 = z phi1R", _gap(r1R @ JRi, z * r1R, m, C_MARGIN, False))
        record("phi2R JR^dag = z phi2R", _gap(r2R @ JR.conj().T, z * r2R, m, DAGGER_MARGIN, False))
        record("phi2R (JR^-1)^dag = z^-1 phi2R", _gap(r2R @ JRi.conj().T, zi * r2R, m, DAGGER_MARGIN, False))
        record("five-term phi1L", _gap(five_term @ p1L, z * p1L, m, C_MARGIN, True))
        q2R, q2L = families.adjoint_column("phi2R", zr), families.adjoint_row("phi2L", zr)
        for p in (0, -1):
            C, Ci = ops[f"C[{p}]"].data, ops[f"C_inv[{p}]"].data
            record(f"C[{p}] phi1L = z^p phi2R(1/zbar)^dag", _gap(C @ p1L, z**p * q2R, m, C_MARGIN, True))
            record(f"phi1R C[{p}] = z^p phi2L(1/zbar)^dag", _gap(r1R @ C, z**p * q2L, m, C_MARGIN, False))
            record(f"C[{p}]^-1 phi2R(1/zbar)^dag = z^-p phi1L", _gap(Ci @ q2R, z ** (-p) * p1L, m, C_MARGIN, True))
            record(f"phi2L(1/zbar)^dag C[{p}]^-1 = z^-p phi1R", _gap(q2L @ Ci, z ** (-p) * r1R, m, C_MARGIN, False))
    logger.log(VERBOSE_LVL, f"Recursion residuals: max {max(out.values()):.3e}")
    return out


def szego_recursion_check(szego: SzegoPolynomials, table: VerblunskyTable, z_samples: Sequence[complex]) -> Dict[str, float]:
    """The four forward and four inverted Szegő recursions between degrees n and n+1.

    With A = P^L_1, B* = (P^R_2)*, U = P^R_1, V* = (P^L_2)* and coefficients at index n+1:
    A_{n+1} = zA_n + aB*_n, B*_{n+1} = B*_n + bzA_n, U_{n+1} = zU_n + V*_n c, V*_{n+1} = V*_n + zU_n d.
    """
    eye = np.eye(szego.m)
    out = {k: 0.0 for k in ("A_fwd", "Bs_fwd", "U_fwd", "Vs_fwd", "A_inv", "Bs_inv", "U_inv", "Vs_inv")}
    for n in range(len(szego.P1L) - 1):
        a, b, c, d = (table.alpha(f, n + 1) for f in ("a", "b", "c", "d"))
        for z in z_samples:
            A0, A1 = szego.P1L[n](z), szego.P1L[n + 1](z)
            U0, U1 = szego.P1R[n](z), szego.P1R[n + 1](z)
            B0, B1 = szego.reversed("P2R", n)(z), szego.reversed("P2R", n + 1)(z)
            V0, V1 = szego.reversed("P2L", n)(z), szego.reversed("P2L", n + 1)(z)
            items = {
                "A_fwd": (A1, z * A0 + a @ B0),
                "Bs_fwd": (B1, B0 + z * b @ A0),
                "U_fwd": (U1, z * U0 + V0 @ c),
                "Vs_fwd": (V1, V0 + z * U0 @ d),
                "A_inv": (z * (eye - a @ b) @ A0, A1 - a @ B1),
                "Bs_inv": ((eye - b @ a) @ B0, B1 - b @ A1),
                "U_inv": (z * U0 @ (eye - d @ c), U1 - V1 @ c),
                "Vs_inv": (V0 @ (eye - c @ d), V1 - U1 @ d),
            }
            for key, (lhs, rhs) in items.items():
                out[key] = max(out[key], relative_residual(lhs, rhs))
    return out
