"""Main MOLPUC module."""

import logging
import sys
from functools import cached_property
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tabulate import tabulate
from tqdm import tqdm

from .cmv import eta, structural_checks, upsilon
from .discrete import (
    LinearShift,
    christoffel_relations,
    darboux_miwa_consistency,
    darboux_step,
    discrete_zs_check,
    miwa_identity_report,
    product_formula_reconstruct,
)
from .exceptions import ConsistencyError, DomainError, MeasureConfigError, QuasiDefinitenessError
from .gauss_borel import block_lu, hermitian_duality_residual, nested_consistency, quasi_definiteness_scan, schur_residual
from .kernels import (
    CDKernel,
    cd_formula_residuals,
    kernel_cross_relations,
    projector_residuals,
    psd_check,
    reproducing_check,
)
from .measure import MatrixMeasure
from .operators import (
    closed_form_residuals,
    dressed_catalog,
    power_residuals,
    recursion_residuals,
    szego_recursion_check,
)
from .polynomials import (
    biorthogonality_check,
    dual_route_residual,
    families_from_measure,
    gram_schmidt_szego,
    hermitian_pairing_residual,
    norm_integral_residuals,
    quasi_orthogonality_residual,
    second_kind_residuals,
    szego_dual_route_residual,
    szego_from_molpuc,
    verblunsky_extract,
    verblunsky_relations,
)
from .report import Report
from .toda import (
    FlowAxis,
    FlowConfig,
    FlowTrajectory,
    bilinear_sweep,
    flow_integrate,
    rk4_convergence_ratio,
    toeplitz_fd_check,
    total_flow_residual,
    wave_lax_checks,
    zakharov_shabat_check,
)
from .utils import DEFAULT_SEED, VERBOSE_LVL, cpu_count, sample_pairs, sample_points, tqdm_joblib

logger = logging.getLogger(__name__)

SUITE_TOL = {
    "structure": 1e-12,
    "factorization": 1e-11,
    "biorthogonality": 1e-10,
    "recursion": 1e-9,
    "closed-forms": 1e-9,
    "cd": 1e-9,
    "kernels-cross": 1e-9,
    "secondkind": 1e-9,
    "flow": 5e-7,
    "bilinear": 1e-9,
    "darboux": 1e-9,
    "miwa": 1e-9,
    "products": 1e-7,
}
SUITES = tuple(SUITE_TOL)
# names used on the command line for the same suites
SUITE_ALIASES = {"appendixB": "closed-forms", "elteorema": "products"}
TRAJECTORY_TOL = 1e-7
RK4_MIN_RATIO = 15.0
DARBOUX_D = 0.3
MIWA_W = 0.4
PRODUCT_LEVELS = 3
HERMITIAN_CHECK_TOL = 1e-12
SUITE_ERRORS = (QuasiDefinitenessError, ConsistencyError, DomainError, np.linalg.LinAlgError)


class Molpuc:
    """Core MOLPUC class: one measure at a fixed truncation, with its polynomials, operators and checks."""

    def __init__(
        self,
        measure: Union[MatrixMeasure, str, dict] = "herm2",
        blocks: int = 12,
        tol: float = None,
        seed: int = DEFAULT_SEED,
        log_level: int = logging.ERROR,
        log_path: str = ".",
        n_jobs: int = None,
    ) -> None:
        """Constructor to instantiate a new Molpuc object.

        Args:
            measure (Union[MatrixMeasure, str, dict], optional): A measure, a bundled measure name, a path to a
                measure file, its JSON text or a configuration dictionary. Defaults to "herm2".
            blocks (int, optional): Truncation size N of the moment matrices. Defaults to 12.
            tol (float, optional): Overrides the per-suite tolerances when given.
            seed (int, optional): Seed of every sample set. Defaults to 42.
            log_level (int, optional): Set the logging level. Defaults to logging.ERROR.
            log_path (str, optional): The folder path where the log is stored.
            n_jobs (int, optional): Worker threads for suite runs. Defaults to the cpu count.
        """
        package_logger = logging.getLogger(__package__)
        if package_logger.hasHandlers():
            package_logger.handlers.clear()
        file_handler = logging.FileHandler(filename=f"{log_path}/molpuc.log")
        logging.addLevelName(VERBOSE_LVL, "VERBOSE")
        stdout_handler = logging.StreamHandler(sys.stdout)
        formatter = logging.Formatter(
            "%(asctime)s.%(msecs)03d %(name)s:%(levelname)s %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        stdout_handler.setFormatter(formatter)
        file_handler.setFormatter(formatter)
        package_logger.addHandler(stdout_handler)
        package_logger.addHandler(file_handler)
        package_logger.setLevel(log_level)

        if blocks < 4:
            raise MeasureConfigError(f"At least 4 blocks are needed for interior checks, got {blocks}.")
        self.measure = MatrixMeasure.from_object(measure)
        self.blocks = int(blocks)
        self.tol = tol
        self.seed = int(seed)
        self.n_jobs = cpu_count(n_jobs)
        logger.log(VERBOSE_LVL, f"Loaded {self.measure} at N={self.blocks}")

    def __repr__(self):
        """Object representation to list all available methods."""
        names = [n for n in dir(Molpuc) if callable(getattr(Molpuc, n)) and not n.startswith("_")]
        docs = [(getattr(Molpuc, n).__doc__ or "").split("\n")[0] for n in names]
        return "Molpuc object \nAvailable methods:\n" + tabulate(
            pd.DataFrame([names, docs]).T.set_index(0),
            tablefmt="psql",
        )

    @property
    def m(self) -> int:
        """Block size of the measure."""
        return self.measure.m

    @property
    def fingerprint(self) -> str:
        """sha256 of the measure configuration."""
        return self.measure.fingerprint()

    @cached_property
    def is_hermitian(self) -> bool:
        """Whether the measure is Hermitian and positive definite on the circle."""
        return self.measure.hermitian_residual() < HERMITIAN_CHECK_TOL and self.measure.is_positive_definite()

    @cached_property
    def _built(self) -> dict:
        return families_from_measure(self.measure, self.blocks)

    @cached_property
    def _table(self):
        return verblunsky_extract(self._built["fact_l"], self._built["fact_r"], self._built["families"])

    @cached_property
    def _szego(self):
        return szego_from_molpuc(self._built["families"])

    @cached_property
    def _ops(self):
        return dressed_catalog(self._built["fact_l"], self._built["fact_r"])

    def _tol(self, suite: str) -> float:
        return self.tol if self.tol is not None else SUITE_TOL[suite]

    def _report(self, check: str, residuals: Dict[str, float], tol: float = None) -> Report:
        tol = tol if tol is not None else self._tol(check)
        report = Report.from_residuals(check, self.fingerprint, self.blocks, tol, residuals, self.seed)
        failure = report.first_failure()
        if failure:
            logger.error(
                f"Suite {check} failed at {failure['id']} ({failure['anchor']!r}) with residual {failure['residual']:.3e}"
            )
        else:
            logger.log(VERBOSE_LVL, f"Suite {check} passed, max residual {report.max_residual:.3e}")
        return report

    def moments(self, n_max: int = None) -> pd.DataFrame:
        """Moments c_n for |n| <= n_max in long format.

        Args:
            n_max (int, optional): Largest |n|. Defaults to what N blocks require.

        Returns:
            pandas.DataFrame: columns n, row, col, re, im.
        """
        mom = self._built["moments"] if n_max is None else self.measure.moments(n_max)
        rows = []
        for n in range(-mom.n_max, mom.n_max + 1):
            c = mom[n]
            for i in range(self.m):
                for j in range(self.m):
                    rows.append({"n": n, "row": i, "col": j, "re": float(c[i, j].real), "im": float(c[i, j].imag)})
        return pd.DataFrame(rows)

    def factorize(self) -> pd.DataFrame:
        """Quasi-norm blocks, their condition numbers and the quasi-definiteness scan for both moment matrices.

        Returns:
            pandas.DataFrame: one row per side and level.
        """
        frames = []
        for side, key, g in (("L", "fact_l", "g_L"), ("R", "fact_r", "g_R")):
            df = self._built[key].to_frame()
            scan = quasi_definiteness_scan(self._built[g]).assign(level=lambda x: x["level"] - 1)
            df = df.merge(scan, on="level")
            df.insert(0, "side", side)
            frames.append(df)
        return pd.concat(frames, ignore_index=True)

    def polys(self) -> dict:
        """Coefficients of the four MOLPUC families as a JSON-ready dictionary."""
        return self._built["families"].to_dict()

    def verblunsky(self) -> pd.DataFrame:
        """Verblunsky coefficients and quasi-norms per index."""
        return self._table.to_frame()

    def verify(self, suite: str) -> Report:
        """Run one verification suite.

        Args:
            suite (str): One of the names in SUITES or an alias from SUITE_ALIASES.

        Returns:
            Report: the suite report, named after the canonical suite. Numerical breakdowns are reported as failed
                items rather than raised.
        """
        suite = SUITE_ALIASES.get(suite, suite)
        if suite not in SUITE_TOL:
            raise ValueError(f"Unknown suite {suite}, expected one of {SUITES}.")
        runner = getattr(self, f"_suite_{suite.replace('-', '_')}")
        try:
            return self._report(suite, runner())
        except SUITE_ERRORS as e:
            logger.error(f"Suite {suite} aborted: {e}")
            return self._report(suite, {f"error: {e}": float("nan")})

    def verify_all(self, suites: List[str] = None, show_progress: bool = True) -> List[Report]:
        """Run several suites in a thread pool.

        Args:
            suites (List[str], optional): Suite names. Defaults to all of them.
            show_progress (bool, optional): Display a progress bar. Defaults to True.

        Returns:
            List[Report]: reports in the order of `suites`.
        """
        suites = [SUITE_ALIASES.get(s, s) for s in suites] if suites else list(SUITES)
        try:
            # shared state is built once before the workers start
            for attr in ("_built", "_table", "_szego", "_ops", "is_hermitian"):
                getattr(self, attr)
        except SUITE_ERRORS as e:
            logger.error(f"Could not prepare {self.measure}: {e}")
            return [self._report(s, {f"error: {e}": float("nan")}) for s in suites]
        with tqdm_joblib(tqdm(desc="Suites", total=len(suites), disable=not show_progress)):
            reports = Parallel(n_jobs=self.n_jobs, prefer="threads")(delayed(self.verify)(s) for s in suites)
        return list(reports)

    def flow(
        self, axis: Union[str, FlowAxis] = "total:L1", t_end: float = 0.3, steps: int = 100, compare_oracle: bool = True
    ) -> Tuple[FlowTrajectory, Report]:
        """Integrate the Toeplitz lattice with RK4 and compare the endpoint with the refactorized measure.

        Args:
            axis (Union[str, FlowAxis], optional): Axis like "L:1:0" or "total:R2". Defaults to "total:L1".
            t_end (float, optional): Final time. Defaults to 0.3.
            steps (int, optional): RK4 steps. Defaults to 100.
            compare_oracle (bool, optional): Compute the endpoint gap. Defaults to True.

        Returns:
            Tuple[FlowTrajectory, Report]: trajectory and its oracle-gap report.
        """
        axis = axis if isinstance(axis, FlowAxis) else FlowAxis.from_string(axis)
        config = FlowConfig(axis, float(t_end), int(steps))
        traj = flow_integrate(self.measure, config.axis, config.t_end, config.steps, self.blocks, compare_oracle=compare_oracle)
        residuals = {}
        if traj.truncated:
            residuals[f"truncated@{axis.label}"] = float("nan")
        elif compare_oracle:
            residuals[f"oracle_gap@{axis.label}"] = ([len(traj.ts) - 1], traj.oracle_gap)
        tol = self.tol if self.tol is not None else TRAJECTORY_TOL
        return traj, self._report("flow-trajectory", residuals, tol)

    def _suite_structure(self) -> Dict[str, float]:
        N, m = self.blocks, self.m
        return structural_checks(self._built["g_L"], self._built["g_R"], upsilon(N, m), eta(N, m))

    def _suite_factorization(self) -> Dict[str, float]:
        b = self._built
        out = {
            "reconstruction_L": b["fact_l"].reconstruction_residual(b["g_L"]),
            "reconstruction_R": b["fact_r"].reconstruction_residual(b["g_R"]),
            "schur_L": schur_residual(b["fact_l"], b["g_L"]),
            "schur_R": schur_residual(b["fact_r"], b["g_R"]),
        }
        small = self.blocks - 2
        out["nested_L"] = nested_consistency(block_lu(b["g_L"].leading(small), "L"), b["fact_l"])
        out["nested_R"] = nested_consistency(block_lu(b["g_R"].leading(small), "R"), b["fact_r"])
        if self.is_hermitian:
            out["hermitian_duality"] = hermitian_duality_residual(b["fact_l"], b["fact_r"])
        return out

    def _suite_biorthogonality(self) -> Dict[str, float]:
        b, fam = self._built, self._built["families"]
        out = {
            "biorthogonality": biorthogonality_check(fam, self.measure),
            "quasi_orthogonality": quasi_orthogonality_residual(fam, self.measure),
            "szego_dual_route": szego_dual_route_residual(self._szego, b["moments"]),
            "norm_integrals": norm_integral_residuals(self._szego, self.measure, self._table),
        }
        zs = sample_points(10, self.seed)
        out.update({f"dual_route_{k}": v for k, v in dual_route_residual(fam, b["g_L"], b["g_R"], zs).items()})
        if self.m == 1:
            oracle = gram_schmidt_szego(self.measure, self.blocks - 1)
            for tag in ("P1L", "P1R"):
                gap = 0.0
                for n, coeffs in enumerate(oracle):
                    poly = getattr(self._szego, tag)[n]
                    mine = np.array([poly.coefficient(k)[0, 0] for k in range(n + 1)])
                    gap = max(gap, float(np.abs(mine - coeffs).max()))
                out[f"gram_schmidt_{tag}"] = gap
        return out

    def _suite_recursion(self) -> Dict[str, float]:
        zs = sample_points(10, self.seed)
        out = recursion_residuals(self._built["families"], self._ops, self._table, zs)
        out.update(szego_recursion_check(self._szego, self._table, zs))
        out.update(verblunsky_relations(self._table))
        if self.is_hermitian:
            out["hermitian_pairing"] = hermitian_pairing_residual(self._table)
        return out

    def _suite_closed_forms(self) -> Dict[str, float]:
        out = closed_form_residuals(self._ops, self._table)
        out.update(power_residuals(self._ops))
        return out

    def _levels(self) -> range:
        return range(1, self.blocks - 2)

    def _suite_cd(self) -> Dict[str, float]:
        fam = self._built["families"]
        pairs = sample_pairs(20, self.seed)
        out = cd_formula_residuals(fam, self._table, self._szego, self._ops, pairs, self._levels())
        for side in ("L", "R"):
            for l in (1, self.blocks // 2):
                out[f"reproducing_{side}[{l}]"] = reproducing_check(CDKernel(fam, side, l), self.measure, pairs[:5])
        out.update(projector_residuals(fam, self.measure, min(3, self.blocks), self.seed))
        if self.is_hermitian:
            # negative eigenvalues of K(z, z) count as a residual
            out["psd_KL"] = max(0.0, -psd_check(fam, self.blocks // 2))
        return out

    def _suite_kernels_cross(self) -> Dict[str, float]:
        return kernel_cross_relations(self._built["families"], self._table, sample_pairs(20, self.seed), self._levels())

    def _suite_secondkind(self) -> Dict[str, float]:
        return second_kind_residuals(self._built["families"], self.measure)

    def _suite_flow(self) -> Dict[str, float]:
        N, m = self.blocks, self.m
        axes = [FlowAxis(side, j) for side in ("L", "R") for j in (1, 2)]
        if m > 1:
            axes += [FlowAxis(side, j, 0) for side in ("L", "R") for j in (1, 2)]
        out = {f"toeplitz_fd@{axis.label}": toeplitz_fd_check(self.measure, axis, N) for axis in axes}
        for side in ("L", "R"):
            for j in (1, 2):
                out[f"total_vs_partials@{side}{j}"] = total_flow_residual(self._table, side, j)
        traj = flow_integrate(self.measure, FlowAxis("L", 1), 0.3, 100, N)
        out["rk4_oracle_gap@total:L1"] = float("nan") if traj.truncated else traj.oracle_gap
        ratio = rk4_convergence_ratio(self.measure, FlowAxis("L", 1), N)
        logger.log(VERBOSE_LVL, f"RK4 gap ratio on halving the step: {ratio:.2f}")
        # fourth order needs the gap to drop at least RK4_MIN_RATIO times
        out["rk4_ratio_shortfall@total:L1"] = float("nan") if np.isnan(ratio) else max(0.0, RK4_MIN_RATIO - ratio)
        for axis in (FlowAxis("L", 1), FlowAxis("R", 1), FlowAxis("R", 2)):
            out.update({f"{k}@{axis.label}": v for k, v in wave_lax_checks(self.measure, axis, N).items()})
        for first, second in ((FlowAxis("L", 1), FlowAxis("R", 1)), (FlowAxis("L", 1), FlowAxis("L", 2))):
            zs = zakharov_shabat_check(self.measure, first, second, N)
            out.update({f"{k}@{first.label}/{second.label}": v for k, v in zs.items()})
        return out

    def _suite_bilinear(self) -> Dict[str, float]:
        return bilinear_sweep(self.measure, self.blocks)

    def _shifts(self) -> List[LinearShift]:
        shifts = [LinearShift(side, sign, DARBOUX_D) for side in ("L", "R") for sign in (1, -1)]
        if self.m > 1:
            d = np.linspace(DARBOUX_D, -DARBOUX_D / 2, self.m)
            shifts += [LinearShift("L", 1, d), LinearShift("R", -1, d)]
        return shifts

    def _suite_darboux(self) -> Dict[str, float]:
        out = {}
        for k, shift in enumerate(self._shifts()):
            step = darboux_step(self.measure, shift, self.blocks)
            out.update({f"{name}@{shift.label}#{k}": val for name, val in step.residuals.items()})
        zs = discrete_zs_check(self.measure, LinearShift("L", 1, DARBOUX_D), LinearShift("R", -1, -DARBOUX_D), self.blocks)
        out.update(zs)
        out["miwa_equals_darboux"] = darboux_miwa_consistency(self.measure, MIWA_W, self.blocks)
        return out

    def _suite_miwa(self) -> Dict[str, float]:
        pairs = sample_pairs(8, self.seed)
        levels = range(0, (self.blocks - 2) // 2)
        out = miwa_identity_report(self.measure, MIWA_W, self.blocks, pairs, levels)
        if self.m > 1:
            w = np.linspace(MIWA_W, -MIWA_W / 2, self.m)
            out.update({f"{k}@diagonal": v for k, v in miwa_identity_report(self.measure, w, self.blocks, pairs, levels).items()})
        out.update(christoffel_relations(self.measure, MIWA_W, self.blocks, range(0, self.blocks // 2)))
        return out

    def _suite_products(self) -> Dict[str, float]:
        zs = sample_points(8, self.seed, radii=(0.8, 1.25))
        result = product_formula_reconstruct(self.measure, zs, PRODUCT_LEVELS)
        if result["skipped"]:
            logger.log(VERBOSE_LVL, f"Product formulas skipped {len(result['skipped'])} samples")
        if not result["residuals"]:
            return {"no_admissible_sample": float("nan")}
        return result["residuals"]
