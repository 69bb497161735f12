"""Christoffel-Darboux kernels, their closed forms, cross relations and the associated projectors."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .operators import CMVOperator
from .polynomials import MatrixLaurentPoly, MolpucFamilies, SzegoPolynomials, VerblunskyTable
from .utils import VERBOSE_LVL, quadrature_size, relative_residual, trapezoid_nodes

logger = logging.getLogger(__name__)

PSD_TOL = 1e-11


def kernel_eval(families: MolpucFamilies, side: str, l: int, z: complex, zp: complex) -> np.ndarray:
    """K^{L,[l]}(z, z') = Σ_{k<l} φ₂^L(k)(z)† φ₁^L(k)(z'), K^{R,[l]}(z, z') = Σ_{k<l} φ₁^R(k)(z) φ₂^R(k)(z')†.

    Args:
        families (MolpucFamilies): the families.
        side (str): "L" or "R".
        l (int): Number of terms, at most N.
        z (complex): First argument.
        zp (complex): Second argument.

    Returns:
        np.ndarray: m×m value.
    """
    if l > families.N:
        raise ValueError(f"Kernel level {l} exceeds the {families.N} available polynomials.")
    out = np.zeros((families.m, families.m), dtype=complex)
    for k in range(l):
        if side == "L":
            out += families.phi2L[k](z).conj().T @ families.phi1L[k](zp)
        elif side == "R":
            out += families.phi1R[k](z) @ families.phi2R[k](zp).conj().T
        else:
            raise ValueError(f"Unrecognised side {side}.")
    return out


@dataclass
class CDKernel:
    """Christoffel-Darboux kernel of one side and level, evaluated from stored families."""

    families: MolpucFamilies
    side: str
    l: int

    def __call__(self, z: complex, zp: complex) -> np.ndarray:
        return kernel_eval(self.families, self.side, self.l, z, zp)

    def on_grid(self, z: complex, us: np.ndarray, first: bool) -> np.ndarray:
        """K(z, u) (first=True) or K(u, z) for all u, shape (len(us), m, m)."""
        fam, l = self.families, self.l
        if self.side == "L":
            if first:
                fixed = np.stack([p(z).conj().T for p in fam.phi2L[:l]])
                return np.einsum("kab,tkbc->tac", fixed, fam.grid("phi1L", us)[:, :l])
            fixed = np.stack([p(z) for p in fam.phi1L[:l]])
            return np.einsum("tkba,kbc->tac", fam.grid("phi2L", us)[:, :l].conj(), fixed)
        if first:
            fixed = np.stack([p(z) for p in fam.phi1R[:l]])
            return np.einsum("kab,tkcb->tac", fixed, fam.grid("phi2R", us)[:, :l].conj())
        fixed = np.stack([p(z).conj().T for p in fam.phi2R[:l]])
        return np.einsum("tkab,kbc->tac", fam.grid("phi1R", us)[:, :l], fixed)


def reproducing_check(kernel: CDKernel, measure, pairs: Sequence[Tuple[complex, complex]], n_nodes: int = None) -> float:
    """Max residual of K(z, y) - ∮ K(z, u) w(u) K(u, y) dθ over the sample pairs."""
    n_nodes = n_nodes if n_nodes else quadrature_size(kernel.families.N + measure.bandwidth)
    theta, us = trapezoid_nodes(n_nodes)
    w = measure.weight(theta)
    dt = 2.0 * np.pi / n_nodes
    worst = 0.0
    for z, y in pairs:
        integral = np.einsum("tab,tbc,tcd->ad", kernel.on_grid(z, us, True), w, kernel.on_grid(y, us, False)) * dt
        worst = max(worst, relative_residual(kernel(z, y), integral))
    return float(worst)


def _pair_integrals(families: MolpucFamilies, measure, f: MatrixLaurentPoly, side: str, l: int, n_nodes: int) -> np.ndarray:
    theta, us = trapezoid_nodes(n_nodes)
    w = measure.weight(theta)
    fv = f.evaluate(us)
    dt = 2.0 * np.pi / n_nodes
    if side == "L":
        p2 = families.grid("phi2L", us)[:, :l]
        return np.einsum("tab,tbc,tkdc->kad", fv, w, p2.conj()) * dt
    p2 = families.grid("phi2R", us)[:, :l]
    return np.einsum("tkba,tbc,tcd->kad", p2.conj(), w, fv) * dt


def project(families: MolpucFamilies, measure, f: MatrixLaurentPoly, side: str, l: int, n_nodes: int = None) -> MatrixLaurentPoly:
    """Projection onto the span of the first l polynomials.

    π_L f = Σ_k [∮ f w φ₂^L(k)† dθ] φ₁^L(k), π_R f = Σ_k φ₁^R(k) [∮ φ₂^R(k)† w f dθ].

    Args:
        families (MolpucFamilies): the families.
        measure: the measure.
        f (MatrixLaurentPoly): Function to project.
        side (str): "L" or "R".
        l (int): Level.
        n_nodes (int, optional): Quadrature nodes.

    Returns:
        MatrixLaurentPoly: the projection.
    """
    span = max(abs(f.min_power), abs(f.max_power)) + families.N
    n_nodes = n_nodes if n_nodes else quadrature_size(span + measure.bandwidth)
    weights = _pair_integrals(families, measure, f, side, l, n_nodes)
    out = MatrixLaurentPoly({}, families.m, f"pi{side}", l)
    for k in range(l):
        if side == "L":
            out = out + (weights[k] @ families.phi1L[k])
        else:
            out = out + (families.phi1R[k] @ weights[k])
    return out


def projector_residuals(families: MolpucFamilies, measure, l: int, seed: int = 42) -> Dict[str, float]:
    """π fixes φ₁(j) for j < l and π∘π = π on a seeded random Laurent polynomial, both sides."""
    rng = np.random.default_rng(seed)
    m = families.m
    coeffs = {p: rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)) for p in range(-3, 4)}
    f = MatrixLaurentPoly(coeffs, m)
    out = {}
    for side, fam in (("L", families.phi1L), ("R", families.phi1R)):
        fixed = max((project(families, measure, fam[j], side, l) - fam[j]).norm() / max(fam[j].norm(), 1.0) for j in range(l))
        once = project(families, measure, f, side, l)
        twice = project(families, measure, once, side, l)
        out[f"pi{side}_fixes_span"] = float(fixed)
        out[f"pi{side}_idempotent"] = float((twice - once).norm() / max(once.norm(), 1.0))
    return out


def psd_check(families: MolpucFamilies, l: int, n_points: int = 64) -> float:
    """Smallest eigenvalue of the Hermitian part of K^{L,[l]}(z, z) on |z| = 1, relative to the trace.

    Returns:
        float: min over the grid of λ_min / trace, which is >= -1e-11 for positive definite weights.
    """
    _, zs = trapezoid_nodes(n_points)
    worst = np.inf
    for z in zs:
        k = kernel_eval(families, "L", l, z, z)
        k = 0.5 * (k + k.conj().T)
        worst = min(worst, np.linalg.eigvalsh(k).min() / max(np.trace(k).real, 1e-300))
    return float(worst)


# commutator forms read C_[p] and J near the cut at l, exact only for l <= N - COMMUTATOR_MARGIN
COMMUTATOR_MARGIN = 6


def _commutator(op: np.ndarray, m: int, l: int, left_first: bool) -> np.ndarray:
    N = op.shape[0] // m
    ind = np.kron((np.arange(N) < l).astype(float), np.ones(m))
    if left_first:
        return op * (ind[:, None] - ind[None, :])
    return op * (ind[None, :] - ind[:, None])


def closed_form_left(families: MolpucFamilies, table: VerblunskyTable, l: int, z: complex, zp: complex) -> np.ndarray:
    """Two-term right-hand side of K^{L,[l]}(z, z')(1 - z̄z')."""
    eye = np.eye(families.m)
    zr = 1.0 / np.conj(z)
    R = [p(zr) for p in families.phi1R[: l + 1]]
    L = [p(zp) for p in families.phi1L[: l + 1]]
    a, b = table.a, table.b
    if l % 2 == 0:
        k = l // 2
        return R[2 * k] @ (eye - b[2 * k] @ a[2 * k]) @ L[2 * k - 1] - R[2 * k - 1] @ L[2 * k]
    k = (l - 1) // 2
    return -zp * (R[2 * k + 1] @ (eye - a[2 * k + 1] @ b[2 * k + 1]) @ L[2 * k] - R[2 * k] @ L[2 * k + 1])


def closed_form_right(families: MolpucFamilies, table: VerblunskyTable, l: int, z: complex, zp: complex) -> np.ndarray:
    """Two-term right-hand side of K^{R,[l]}(z, z')(1 - z̄'z)."""
    eye = np.eye(families.m)
    zr = 1.0 / np.conj(zp)
    R = [p(z) for p in families.phi1R[: l + 1]]
    L = [p(zr) for p in families.phi1L[: l + 1]]
    a, b = table.a, table.b
    if l % 2 == 0:
        k = l // 2
        return R[2 * k - 1] @ L[2 * k] - R[2 * k] @ (eye - b[2 * k] @ a[2 * k]) @ L[2 * k - 1]
    k = (l - 1) // 2
    return z * (R[2 * k + 1] @ (eye - a[2 * k + 1] @ b[2 * k + 1]) @ L[2 * k] - R[2 * k] @ L[2 * k + 1])


def szego_form_left(szego: SzegoPolynomials, table: VerblunskyTable, l: int, z: complex, zp: complex) -> np.ndarray:
    """K^{L,[l]}(z, z')(1 - z̄z') written with the matrix Szegő polynomials and quasi-norms."""
    zb = np.conj(z)
    zr = 1.0 / zb
    hL, hR = table.hL, table.hR
    if l % 2 == 0:
        k = l // 2
        first = szego.P1R[2 * k](zr) @ np.linalg.inv(hR[2 * k - 1]) @ szego.reversed("P2R", 2 * k - 1)(zp)
        second = szego.reversed("P2L", 2 * k - 1)(zr) @ np.linalg.inv(hL[2 * k - 1]) @ szego.P1L[2 * k](zp)
        return zb**k * zp ** (-k) * (first - second)
    k = (l - 1) // 2
    first = szego.P1R[2 * k](zr) @ np.linalg.inv(hR[2 * k]) @ szego.reversed("P2R", 2 * k + 1)(zp)
    second = zb * zp * szego.reversed("P2L", 2 * k + 1)(zr) @ np.linalg.inv(hL[2 * k]) @ szego.P1L[2 * k](zp)
    return zb**k * zp ** (-k) * (first - second)


def cd_formula_residuals(
    families: MolpucFamilies,
    table: VerblunskyTable,
    szego: SzegoPolynomials,
    ops: Dict[str, CMVOperator],
    pairs: Sequence[Tuple[complex, complex]],
    levels: Iterable[int],
) -> Dict[str, float]:
    """Christoffel-Darboux formulas against the definitional kernel sum.

    For each level and sample pair: the two-term closed forms for both sides, the C_[0], C_[-1] commutator
    forms, the J commutator forms K^L(z' - 1/z̄) = Φ₂^L(z)†[Π, J^L]Φ₁^L(z') and
    K^R(z̄' - 1/z) = Φ₁^R(z)[Π, J^R]Φ₂^R(z')†, and the Szegő-polynomial form of the left kernel.
    Commutator forms are only evaluated at levels l <= N - COMMUTATOR_MARGIN.
    """
    m = families.m
    C0, Cm1 = ops["C[0]"].data, ops["C[-1]"].data
    JL, JR = ops["JL"].data, ops["JR"].data
    out: Dict[str, float] = {}

    def record(key, value):
        out[key] = max(out.get(key, 0.0), value)

    for l in levels:
        parity = "even" if l % 2 == 0 else "odd"
        c0_l, cm1_l = _commutator(C0, m, l, False), _commutator(Cm1, m, l, False)
        pj_L, pj_R = _commutator(JL, m, l, True), _commutator(JR, m, l, True)
        interior_level = l <= families.N - COMMUTATOR_MARGIN
        for z, zp in pairs:
            zb, zpb = np.conj(z), np.conj(zp)
            kl = kernel_eval(families, "L", l, z, zp)
            kr = kernel_eval(families, "R", l, z, zp)
            lhs_l, lhs_r = kl * (1.0 - zb * zp), kr * (1.0 - zpb * z)
            record(f"closed_L_{parity}", relative_residual(lhs_l, closed_form_left(families, table, l, z, zp)))
            record(f"closed_R_{parity}", relative_residual(lhs_r, closed_form_right(families, table, l, z, zp)))
            if interior_level:
                row_r = families.row("phi1R", 1.0 / zb)
                col_l = families.column("phi1L", zp)
                record(f"commutator_C_L_{parity}", relative_residual(lhs_l, row_r @ (c0_l - zp * cm1_l) @ col_l))
                row_z = families.row("phi1R", z)
                col_zp = families.column("phi1L", 1.0 / zpb)
                record(f"commutator_C_R_{parity}", relative_residual(lhs_r, -row_z @ (c0_l - z * cm1_l) @ col_zp))
                jl = families.adjoint_row("phi2L", z) @ pj_L @ families.column("phi1L", zp)
                record(f"commutator_J_L_{parity}", relative_residual(kl * (zp - 1.0 / zb), jl))
                jr = row_z @ pj_R @ families.adjoint_column("phi2R", zp)
                record(f"commutator_J_R_{parity}", relative_residual(kr * (zpb - 1.0 / z), jr))
            record(f"szego_form_L_{parity}", relative_residual(lhs_l, szego_form_left(szego, table, l, z, zp)))
    logger.log(VERBOSE_LVL, f"CD formula residuals: max {max(out.values()) if out else 0.0:.3e}")
    return out


def kernel_cross_relations(
    families: MolpucFamilies, table: VerblunskyTable, pairs: Sequence[Tuple[complex, complex]], levels: Iterable[int]
) -> Dict[str, float]:
    """Relations between K^R(z, 1/z̄') and K^L(1/z̄, z').

    Odd l: the two agree. Even l = 2k+2: they differ by
    -φ₁^R(2k+2)(z)(I - b a)φ₁^L(2k+1)(z') + φ₁^R(2k+1)(z)φ₁^L(2k+2)(z').
    (1/z')K^R - (1/z)K^L vanishes for even l and equals -[φ₁^R(2k+1)(I - a b)φ₁^L(2k) - φ₁^R(2k)φ₁^L(2k+1)] for l = 2k+1.
    """
    eye = np.eye(families.m)
    a, b = table.a, table.b
    out: Dict[str, float] = {}

    def record(key, value):
        out[key] = max(out.get(key, 0.0), value)

    for l in levels:
        for z, zp in pairs:
            kr = kernel_eval(families, "R", l, z, 1.0 / np.conj(zp))
            kl = kernel_eval(families, "L", l, 1.0 / np.conj(z), zp)
            R = [p(z) for p in families.phi1R[: l + 1]]
            L = [p(zp) for p in families.phi1L[: l + 1]]
            weighted = kr / zp - kl / z
            if l % 2:
                k = (l - 1) // 2
                record("odd_equal", relative_residual(kr, kl))
                corr = -(R[2 * k + 1] @ (eye - a[2 * k + 1] @ b[2 * k + 1]) @ L[2 * k] - R[2 * k] @ L[2 * k + 1])
                record("odd_weighted_difference", relative_residual(weighted, corr))
            else:
                n = l
                corr = -R[n] @ (eye - b[n] @ a[n]) @ L[n - 1] + R[n - 1] @ L[n]
                record("even_difference", relative_residual(kr - kl, corr))
                record("even_weighted_zero", relative_residual(weighted, np.zeros_like(weighted)))
    return out
