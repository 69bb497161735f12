"""Discrete flows: Darboux steps by linear factors, Miwa shifts, kernel identities and product formulas."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .cmv import block_diag_lift, upsilon_power
from .exceptions import QuasiDefinitenessError
from .gauss_borel import Factorization, block_lu
from .kernels import kernel_eval
from .measure import MatrixMeasure
from .operators import dress
from .polynomials import MolpucFamilies, VerblunskyTable, families_from_measure, verblunsky_extract
from .utils import VERBOSE_LVL, as_diagonal, max_abs, relative_residual

logger = logging.getLogger(__name__)

LEADING_MARGIN = 2
LAX_MARGIN = 3
FLIP_MARGIN = 5


@dataclass(frozen=True)
class LinearShift:
    """Multiplication of the measure by (I - d z^{sign}) on the given side."""

    side: str
    sign: int
    d: complex

    @property
    def label(self) -> str:
        """Compact label such as L+ or R-."""
        return f"{self.side}{'+' if self.sign > 0 else '-'}"

    def apply(self, measure: MatrixMeasure) -> MatrixMeasure:
        """Shifted measure."""
        return measure.multiply_linear(self.d, self.side, self.sign)


@dataclass
class ShiftedSystem:
    """Factorizations, families and Verblunsky data of a measure."""

    measure: MatrixMeasure
    fact_l: Factorization
    fact_r: Factorization
    families: MolpucFamilies
    table: VerblunskyTable

    @staticmethod
    def build(measure: MatrixMeasure, N: int) -> "ShiftedSystem":
        """Factorize at N blocks.

        Raises:
            QuasiDefinitenessError: the measure is singular at some level below N.
        """
        built = families_from_measure(measure, N)
        table = verblunsky_extract(built["fact_l"], built["fact_r"])
        return ShiftedSystem(measure, built["fact_l"], built["fact_r"], built["families"], table)


def _inv_unit_lower(a: np.ndarray) -> np.ndarray:
    return solve_triangular(a, np.eye(a.shape[0]), lower=True, unit_diagonal=True)


def omega_factors(before: ShiftedSystem, after: ShiftedSystem) -> Dict[str, np.ndarray]:
    """Connection matrices between the factors before and after a discrete step.

    ω_lower_L = (TS1)S1^{-1}, ω_upper_L = (TS2)S2^{-1}, ω_upper_R = Z1^{-1}(TZ1), ω_lower_R = Z2^{-1}(TZ2).
    """
    return {
        "lower_L": after.fact_l.S1 @ before.fact_l.lower,
        "upper_L": after.fact_l.S2 @ before.fact_l.S2_inv,
        "upper_R": before.fact_r.upper @ after.fact_r.Z1,
        "lower_R": before.fact_r.Z2_inv @ after.fact_r.Z2,
    }


def delta_matrices(system: ShiftedSystem, shift: LinearShift) -> Dict[str, np.ndarray]:
    """δ^L and δ^R of a step: the dressed linear factor on each family.

    Left multiplication: δ^L = S1(I - D̂Υ^s)S1^{-1}, δ^R = Z2^{-1}(I - D̂Υ^{-s})Z2.
    Right multiplication: δ^L = S2(I - D̂Υ^s)S2^{-1}, δ^R = Z1^{-1}(I - D̂Υ^{-s})Z1.
    """
    m, N = system.fact_l.m, system.fact_l.N
    D = block_diag_lift(as_diagonal(shift.d, m), N)
    eye = np.eye(N * m)
    fwd = eye - D @ upsilon_power(N, shift.sign, m).data
    bwd = eye - D @ upsilon_power(N, -shift.sign, m).data
    if shift.side == "L":
        left = system.fact_l.S1 @ fwd @ system.fact_l.lower
        right = system.fact_r.Z2_inv @ bwd @ system.fact_r.Z2
    else:
        left = system.fact_l.S2 @ fwd @ system.fact_l.S2_inv
        right = system.fact_r.upper @ bwd @ system.fact_r.Z1
    return {"L": left, "R": right}


@dataclass
class DarbouxStep:
    """Result of one discrete step with its residual report."""

    shift: LinearShift
    before: ShiftedSystem
    after: ShiftedSystem
    omega: Dict[str, np.ndarray]
    residuals: Dict[str, float]


def _lead(a: np.ndarray, m: int, margin: int) -> np.ndarray:
    k = max(a.shape[0] // m - margin, 0) * m
    return a[:k, :k]


def darboux_step(measure: MatrixMeasure, shift: LinearShift, N: int, before: ShiftedSystem = None) -> DarbouxStep:
    """Refactorize the shifted measure and check the discrete structure.

    Items: δ against the ω products, δ's own block LU against the ω factors, δ^L = I - (S D̂ S^{-1})(J^L)^s,
    discrete Lax equations TJ^L = ω J^L ω^{-1} and TJ^R = ω^{-1} J^R ω, and the flip T δ = U·L.

    Args:
        measure (MatrixMeasure): Measure before the step.
        shift (LinearShift): Linear factor.
        N (int): Number of blocks.
        before (ShiftedSystem, optional): Already factorized system for `measure`.

    Raises:
        QuasiDefinitenessError: The shifted measure is not quasi-definite.

    Returns:
        DarbouxStep: factors and residuals.
    """
    before = before if before else ShiftedSystem.build(measure, N)
    try:
        after = ShiftedSystem.build(shift.apply(measure), N)
    except QuasiDefinitenessError as e:
        logger.error(f"Shifted measure {shift.label} d={shift.d} is singular: {e}")
        raise
    m = before.fact_l.m
    omega = omega_factors(before, after)
    delta = delta_matrices(before, shift)
    res: Dict[str, float] = {}
    lead = LEADING_MARGIN

    def gap(x, y, margin=lead):
        return relative_residual(_lead(x, m, margin), _lead(y, m, margin))

    lower_L_inv = _inv_unit_lower(omega["lower_L"])
    upper_R_inv = np.linalg.inv(omega["upper_R"])
    res["delta_L_omega"] = gap(delta["L"], lower_L_inv @ omega["upper_L"])
    res["delta_R_omega"] = gap(delta["R"], omega["lower_R"] @ upper_R_inv)
    lu_L = block_lu(_lead(delta["L"], m, lead), "L", m)
    res["delta_L_lu"] = max(
        gap(lu_L.inverse_lower(), _lead(omega["lower_L"], m, lead), 0), gap(lu_L.upper, _lead(omega["upper_L"], m, lead), 0)
    )
    lu_R = block_lu(_lead(delta["R"], m, lead), "R", m)
    res["delta_R_lu"] = max(
        gap(lu_R.lower, _lead(omega["lower_R"], m, lead), 0), gap(lu_R.upper, _lead(upper_R_inv, m, lead), 0)
    )
    JL = dress(before.fact_l, before.fact_r, "JL").data
    S = before.fact_l.S1 if shift.side == "L" else before.fact_l.S2
    S_inv = before.fact_l.lower if shift.side == "L" else before.fact_l.S2_inv
    D = block_diag_lift(as_diagonal(shift.d, m), N)
    if shift.side == "L" or np.ndim(shift.d) == 0:
        # S2 D̂ S2^{-1} is dense upper for non-scalar d and would pull in the truncated rows of J
        J_pow = JL if shift.sign > 0 else dress(before.fact_l, before.fact_r, "JL_inv").data
        res["delta_L_dressed_J"] = gap(delta["L"], np.eye(N * m) - S @ D @ S_inv @ J_pow, LAX_MARGIN)
    TJL = dress(after.fact_l, after.fact_r, "JL").data
    res["discrete_lax_JL"] = gap(TJL, omega["lower_L"] @ JL @ lower_L_inv, LAX_MARGIN)
    JR = dress(before.fact_l, before.fact_r, "JR").data
    TJR = dress(after.fact_l, after.fact_r, "JR").data
    res["discrete_lax_JR"] = gap(TJR, _inv_unit_lower(omega["lower_R"]) @ JR @ omega["lower_R"], LAX_MARGIN)
    T_delta = delta_matrices(after, shift)["L"]
    res["flip_L"] = gap(T_delta, omega["upper_L"] @ lower_L_inv, FLIP_MARGIN)
    logger.log(VERBOSE_LVL, f"Darboux step {shift.label} d={shift.d}: max residual {max(res.values()):.3e}")
    return DarbouxStep(shift, before, after, omega, res)


def discrete_zs_check(measure: MatrixMeasure, first: LinearShift, second: LinearShift, N: int) -> Dict[str, float]:
    """Two shifts applied in both orders give the same composite connection matrices.

    (T_a ω_b)ω_a = (T_b ω_a)ω_b for each of the four ω factors, on the leading blocks.
    """
    base = ShiftedSystem.build(measure, N)
    mid_a = ShiftedSystem.build(first.apply(measure), N)
    mid_b = ShiftedSystem.build(second.apply(measure), N)
    end_ab = ShiftedSystem.build(second.apply(first.apply(measure)), N)
    end_ba = ShiftedSystem.build(first.apply(second.apply(measure)), N)
    w_a, w_b = omega_factors(base, mid_a), omega_factors(base, mid_b)
    w_ab, w_ba = omega_factors(mid_a, end_ab), omega_factors(mid_b, end_ba)
    m = measure.m
    out = {}
    for key in w_a:
        if key in ("lower_L", "upper_L"):
            lhs, rhs = w_ab[key] @ w_a[key], w_ba[key] @ w_b[key]
        else:
            lhs, rhs = w_a[key] @ w_ab[key], w_b[key] @ w_ba[key]
        out[f"zs_{key}"] = relative_residual(_lead(lhs, m, LEADING_MARGIN), _lead(rhs, m, LEADING_MARGIN))
    return out


def miwa_shift(measure: MatrixMeasure, side: str, sign: int, w, N: int) -> Tuple[ShiftedSystem, ShiftedSystem]:
    """Unshifted and Miwa-shifted systems for dμ → (I - w z^{±1})dμ (or the right analogue)."""
    before = ShiftedSystem.build(measure, N)
    after = ShiftedSystem.build(LinearShift(side, sign, w).apply(measure), N)
    return before, after


def darboux_miwa_consistency(measure: MatrixMeasure, w: complex, N: int) -> float:
    """A scalar Miwa shift and the Darboux step with d = w give identical Verblunsky data."""
    _, shifted = miwa_shift(measure, "L", 1, w, N)
    step = darboux_step(measure, LinearShift("L", 1, w), N)
    return max_abs(shifted.table.stack() - step.after.table.stack()) / max(max_abs(shifted.table.stack()), 1.0)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return num @ np.linalg.inv(den)


def miwa_kernel_identities(
    before: ShiftedSystem, after: ShiftedSystem, side: str, sign: int, w, l: int, z: complex, u: complex, drop_tilde: bool = False
) -> Dict[str, float]:
    """Kernel identities between a Miwa-shifted and an unshifted system at level l.

    The shifted kernel enters multiplied by the linear factor in the appropriate variable; with `drop_tilde`
    the shifted kernel term is omitted, which is valid at the zeros of that factor.
    """
    m = before.families.m
    wd = as_diagonal(w, m)
    eye = np.eye(m)
    F, Ft = before.families, after.families
    h, ht = before.table, after.table
    K = kernel_eval
    t = 0.0 if drop_tilde else 1.0
    out = {}
    if (side, sign) == ("L", 1):
        n = 2 * l
        lhs = K(F, "L", n + 1, z, u)
        rhs = t * K(Ft, "L", n, z, u) @ (eye - wd * u) + Ft.phi2L[n](z).conj().T @ _ratio(ht.hL[n], h.hL[n]) @ F.phi1L[n](u)
        out["L+_KL"] = relative_residual(lhs, rhs)
        if l >= 1:
            n = 2 * l - 1
            lhs = K(F, "R", n + 1, z, u)
            rhs = t * K(Ft, "R", n, z, u) @ (eye - wd / np.conj(u)) + Ft.phi1R[n](z) @ _ratio(ht.hL[n], h.hL[n]) @ F.phi2R[n](u).conj().T
            out["L+_KR"] = relative_residual(lhs, rhs)
    elif (side, sign) == ("L", -1):
        if l >= 1:
            n = 2 * l - 1
            lhs = K(F, "L", n + 1, z, u)
            rhs = t * K(Ft, "L", n, z, u) @ (eye - wd / u) + Ft.phi2L[n](z).conj().T @ _ratio(ht.hR[n], h.hR[n]) @ F.phi1L[n](u)
            out["L-_KL"] = relative_residual(lhs, rhs)
        n = 2 * l
        lhs = K(F, "R", n + 1, z, u)
        rhs = t * K(Ft, "R", n, z, u) @ (eye - wd * np.conj(u)) + Ft.phi1R[n](z) @ _ratio(ht.hR[n], h.hR[n]) @ F.phi2R[n](u).conj().T
        out["L-_KR"] = relative_residual(lhs, rhs)
    elif (side, sign) == ("R", 1):
        if l >= 1:
            n = 2 * l - 1
            lhs = K(F, "L", n + 1, z, u)
            rhs = t * (eye - wd / np.conj(z)) @ K(Ft, "L", n, z, u) + F.phi2L[n](z).conj().T @ Ft.phi1L[n](u)
            out["R+_KL"] = relative_residual(lhs, rhs)
        n = 2 * l
        lhs = K(F, "R", n + 1, z, u)
        rhs = t * (eye - wd * z) @ K(Ft, "R", n, z, u) + F.phi1R[n](z) @ Ft.phi2R[n](u).conj().T
        out["R+_KR"] = relative_residual(lhs, rhs)
    else:
        n = 2 * l
        lhs = K(F, "L", n + 1, z, u)
        rhs = t * (eye - wd * np.conj(z)) @ K(Ft, "L", n, z, u) + F.phi2L[n](z).conj().T @ Ft.phi1L[n](u)
        out["R-_KL"] = relative_residual(lhs, rhs)
        if l >= 1:
            n = 2 * l - 1
            lhs = K(F, "R", n + 1, z, u)
            rhs = t * (eye - wd / z) @ K(Ft, "R", n, z, u) + F.phi1R[n](z) @ Ft.phi2R[n](u).conj().T
            out["R-_KR"] = relative_residual(lhs, rhs)
    return out


SPECIAL_POINTS = {
    "L+_KL": ("u", lambda w: 1.0 / w),
    "L+_KR": ("u", lambda w: np.conj(w)),
    "L-_KL": ("u", lambda w: w),
    "L-_KR": ("u", lambda w: 1.0 / np.conj(w)),
    "R+_KL": ("z", lambda w: np.conj(w)),
    "R+_KR": ("z", lambda w: 1.0 / w),
    "R-_KL": ("z", lambda w: 1.0 / np.conj(w)),
    "R-_KR": ("z", lambda w: w),
}


def miwa_identity_report(
    measure: MatrixMeasure, w, N: int, pairs: Sequence[Tuple[complex, complex]], levels: Sequence[int]
) -> Dict[str, float]:
    """All eight kernel identities at sample pairs and, for scalar w, their specializations at the zeros of the factor."""
    out: Dict[str, float] = {}
    scalar = np.ndim(w) == 0
    for side in ("L", "R"):
        for sign in (1, -1):
            before, after = miwa_shift(measure, side, sign, w, N)
            for l in levels:
                for z, u in pairs:
                    for key, val in miwa_kernel_identities(before, after, side, sign, w, l, z, u).items():
                        out[key] = max(out.get(key, 0.0), val)
                if not scalar or w == 0:
                    continue
                z0, u0 = pairs[0]
                for key, (var, point) in SPECIAL_POINTS.items():
                    if not key.startswith(f"{side}{'+' if sign > 0 else '-'}"):
                        continue
                    zz, uu = (point(w), u0) if var == "z" else (z0, point(w))
                    vals = miwa_kernel_identities(before, after, side, sign, w, l, zz, uu, drop_tilde=True)
                    if key in vals:
                        out[f"{key}@zero"] = max(out.get(f"{key}@zero", 0.0), vals[key])
    return out


def christoffel_relations(measure: MatrixMeasure, w: complex, N: int, levels: Sequence[int]) -> Dict[str, float]:
    """Eight scalar-w relations between unshifted polynomials at w^{±1} and quasi-norms of the shifted measures.

    M⁺ is the left shift by (1 - wz), M⁻ the left shift by (1 - wz^{-1}).
    """
    base = ShiftedSystem.build(measure, N)
    _, plus = miwa_shift(measure, "L", 1, w, N)
    _, minus = miwa_shift(measure, "L", -1, w, N)
    F, h, hp, hm = base.families, base.table, plus.table, minus.table
    wb = np.conj(w)
    inv = np.linalg.inv
    out: Dict[str, float] = {}

    def record(key, lhs, rhs):
        out[key] = max(out.get(key, 0.0), relative_residual(lhs, rhs))

    for l in levels:
        if l >= 1 and 2 * l < N:
            n = 2 * l - 1
            record("rel1", F.phi2L[n](wb).conj().T @ hp.hR[n], F.phi1R[n + 1](1.0 / w) @ h.hR[n + 1])
            record("rel2", hm.hR[n] @ inv(h.hR[n]) @ F.phi1L[n](w), F.phi2R[n + 1](1.0 / wb).conj().T)
            record("rel3", F.phi1R[n](w) @ hm.hL[n], F.phi2L[n + 1](1.0 / wb).conj().T @ h.hL[n + 1])
            record("rel4", hp.hL[n] @ inv(h.hL[n]) @ F.phi2R[n](wb).conj().T, F.phi1L[n + 1](1.0 / w))
        if 2 * l + 1 < N:
            n = 2 * l
            record("rel5", F.phi1R[n](1.0 / w) @ hp.hR[n], (wb * F.phi2L[n + 1](wb)).conj().T @ h.hR[n + 1])
            record("rel6", hm.hR[n] @ inv(h.hR[n]) @ F.phi2R[n](1.0 / wb).conj().T, w * F.phi1L[n + 1](w))
            record("rel7", F.phi2L[n](1.0 / wb).conj().T @ hm.hL[n], w * F.phi1R[n + 1](w) @ h.hL[n + 1])
            record("rel8", hp.hL[n] @ inv(h.hL[n]) @ F.phi1L[n](1.0 / w), (wb * F.phi2R[n + 1](wb)).conj().T)
    return out


def _chain(mats: List[np.ndarray], m: int) -> np.ndarray:
    out = np.eye(m, dtype=complex)
    for x in mats:
        out = out @ x
    return out


def product_formula_reconstruct(measure: MatrixMeasure, z_samples: Sequence[complex], l_max: int, N: int = None) -> Dict[str, object]:
    """Reconstruct the MOLPUC at z from quasi-norms of the measures shifted by (1 - ζ/z) and (1 - zζ^{-1}).

    Eight product formulas, e.g. φ₁^L(2l)(z) = z^l ∏_{k=2l-1..0} M⁺(h^L_k)(h^L_k)^{-1}, with M⁺ the left shift
    at parameter 1/z and M⁻ the left shift at parameter z. Samples where a shifted measure is singular are
    skipped and listed.

    Returns:
        Dict[str, object]: {"residuals": {formula: max relative error}, "skipped": [samples]}.
    """
    N = N if N else 2 * l_max + 2
    m = measure.m
    base = ShiftedSystem.build(measure, N)
    F, h = base.families, base.table
    inv = np.linalg.inv
    residuals: Dict[str, float] = {}
    skipped: List[complex] = []

    def record(key, lhs, rhs):
        residuals[key] = max(residuals.get(key, 0.0), relative_residual(lhs, rhs))

    for z in z_samples:
        try:
            _, plus = miwa_shift(measure, "L", 1, 1.0 / z, N)
            _, minus = miwa_shift(measure, "L", -1, z, N)
        except QuasiDefinitenessError as e:
            logger.log(VERBOSE_LVL, f"Skipping sample z={z}: {e}")
            skipped.append(complex(z))
            continue
        hp, hm = plus.table, minus.table
        zr = 1.0 / np.conj(z)
        for l in range(l_max + 1):
            if 2 * l < N:
                n = 2 * l
                down = list(range(n - 1, -1, -1))
                up = list(range(n))
                record("phi1L_even", F.phi1L[n](z), z**l * _chain([hp.hL[k] @ inv(h.hL[k]) for k in down], m))
                record("phi2L_even", F.phi2L[n](zr).conj().T, z ** (-l) * _chain([inv(h.hL[k]) @ hm.hL[k] for k in up], m) @ inv(h.hL[n]))
                record("phi1R_even", F.phi1R[n](z), z**l * _chain([inv(h.hR[k]) @ hp.hR[k] for k in up], m) @ inv(h.hR[n]))
                record("phi2R_even", F.phi2R[n](zr).conj().T, z ** (-l) * _chain([hm.hR[k] @ inv(h.hR[k]) for k in down], m))
            if 2 * l + 1 < N:
                n = 2 * l + 1
                down = list(range(n - 1, -1, -1))
                up = list(range(n))
                record("phi1L_odd", F.phi1L[n](z), z ** (-(l + 1)) * _chain([hm.hR[k] @ inv(h.hR[k]) for k in down], m))
                record("phi2L_odd", F.phi2L[n](zr).conj().T, z ** (l + 1) * _chain([inv(h.hR[k]) @ hp.hR[k] for k in up], m) @ inv(h.hR[n]))
                record("phi1R_odd", F.phi1R[n](z), z ** (-(l + 1)) * _chain([inv(h.hL[k]) @ hm.hL[k] for k in up], m) @ inv(h.hL[n]))
                record("phi2R_odd", F.phi2R[n](zr).conj().T, z ** (l + 1) * _chain([hp.hL[k] @ inv(h.hL[k]) for k in down], m))
    return {"residuals": residuals, "skipped": skipped}
