"""Continuous Toda-type flows: deformed measures, Toeplitz lattice equations, wave matrices and bilinear identities."""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import pyarrow as pa
from pyarrow import csv as pa_csv
from scipy.linalg import expm

from .cmv import block_diag_lift, block_part, interior, upsilon_power
from .exceptions import MeasureConfigError, QuasiDefinitenessError
from .gauss_borel import Factorization
from .measure import DeformedMeasure, MatrixMeasure
from .operators import dress
from .polynomials import VerblunskyTable, families_from_measure, verblunsky_extract
from .utils import VERBOSE_LVL, get_default_fs, max_abs, relative_residual, trapezoid_nodes

logger = logging.getLogger(__name__)

FD_STEP = 1e-4
FD_MARGIN = 4
ORACLE_MARGIN = 4
RK4_ROUNDOFF = 1e-10
# generic side letter accepted on the command line
SIDE_ALIASES = {"H": "L"}


def _vec(value, m: int) -> np.ndarray:
    arr = np.asarray(value, dtype=complex)
    return np.full(m, complex(arr)) if arr.ndim == 0 else arr.reshape(m)


@dataclass(frozen=True)
class FlowAxis:
    """One flow direction: side L or R, j in {1, 2}, and a diagonal index a or None for the total flow."""

    side: str
    j: int
    a: Optional[int] = None

    def __post_init__(self) -> None:
        if self.side not in ("L", "R") or self.j not in (1, 2):
            raise MeasureConfigError(f"Unsupported flow axis side={self.side} j={self.j}; only j in (1, 2) is available.")

    @property
    def is_total(self) -> bool:
        """Whether this is the total flow ∂_{H,j}."""
        return self.a is None

    @property
    def label(self) -> str:
        """Compact label, e.g. L:1:0 or total:L1."""
        return f"total:{self.side}{self.j}" if self.is_total else f"{self.side}:{self.j}:{self.a}"

    def E(self, m: int) -> np.ndarray:
        """E_aa, or I for the total flow."""
        if self.is_total:
            return np.eye(m, dtype=complex)
        if not 0 <= self.a < m:
            raise MeasureConfigError(f"Flow index a={self.a} out of range for block size {m}.")
        out = np.zeros((m, m), dtype=complex)
        out[self.a, self.a] = 1.0
        return out

    @staticmethod
    def from_string(text: str) -> "FlowAxis":
        """Parse "L:1:0" (partial) or "total:L1" (total).

        The generic side letter H stands for L, so "total:H1" is the total flow ∂_{L,1}.
        """
        try:
            if text.startswith("total:"):
                body = text.split(":", 1)[1]
                return FlowAxis(SIDE_ALIASES.get(body[0], body[0]), int(body[1:]))
            side, j, a = text.split(":")
            return FlowAxis(SIDE_ALIASES.get(side, side), int(j), int(a))
        except (ValueError, IndexError) as e:
            raise MeasureConfigError(f"Cannot parse flow axis {text!r}, expected side:j:a or total:Hj.") from e

    @staticmethod
    def from_dict(config: dict) -> "FlowAxis":
        """Parse {"side": "L|R", "j": 1|2, "a": int|"total"}."""
        try:
            a = config.get("a", "total")
            return FlowAxis(config["side"], int(config["j"]), None if a == "total" else int(a))
        except (KeyError, TypeError, ValueError) as e:
            raise MeasureConfigError(f"Invalid flow axis configuration: {e}") from e


@dataclass(frozen=True)
class FlowTimes:
    """Diagonal deformation times t^L_1, t^L_2, t^R_1, t^R_2 stored as length-m vectors."""

    tL1: np.ndarray
    tL2: np.ndarray
    tR1: np.ndarray
    tR2: np.ndarray

    @staticmethod
    def zeros(m: int) -> "FlowTimes":
        """All times zero."""
        return FlowTimes(*(np.zeros(m, dtype=complex) for _ in range(4)))

    @staticmethod
    def from_values(m: int, tL1=0.0, tL2=0.0, tR1=0.0, tR2=0.0) -> "FlowTimes":
        """Times from scalars or diagonal vectors."""
        return FlowTimes(_vec(tL1, m), _vec(tL2, m), _vec(tR1, m), _vec(tR2, m))

    @property
    def m(self) -> int:
        """Block size."""
        return self.tL1.shape[0]

    @property
    def left(self) -> Tuple[np.ndarray, np.ndarray]:
        """(t^L_1, t^L_2)."""
        return self.tL1, self.tL2

    @property
    def right(self) -> Tuple[np.ndarray, np.ndarray]:
        """(t^R_1, t^R_2)."""
        return self.tR1, self.tR2

    def __repr__(self) -> str:
        return f"FlowTimes(tL1={self.tL1}, tL2={self.tL2}, tR1={self.tR1}, tR2={self.tR2})"

    def max_abs(self) -> float:
        """Largest |t| entry."""
        return float(max(np.abs(v).max() for v in (self.tL1, self.tL2, self.tR1, self.tR2)))

    def is_zero(self) -> bool:
        """Whether all times vanish."""
        return self.max_abs() == 0.0

    def is_hermitian_compatible(self, tol: float = 1e-14) -> bool:
        """t^L_1 = conj(t^R_2) and t^L_2 = conj(t^R_1), which keeps a Hermitian weight Hermitian."""
        return bool(np.abs(self.tL1 - self.tR2.conj()).max() <= tol and np.abs(self.tL2 - self.tR1.conj()).max() <= tol)

    def along(self, axis: FlowAxis, t: complex) -> "FlowTimes":
        """Times shifted by t·E on the given axis."""
        shift = t * np.diag(axis.E(self.m))
        name = f"t{axis.side}{axis.j}"
        values = {k: getattr(self, k).copy() for k in ("tL1", "tL2", "tR1", "tR2")}
        values[name] = values[name] + shift
        return FlowTimes(**values)

    def distance(self, other: "FlowTimes") -> float:
        """Largest entrywise difference to another set of times."""
        return float(max(np.abs(getattr(self, k) - getattr(other, k)).max() for k in ("tL1", "tL2", "tR1", "tR2")))

    def exponent(self, side: str, z: complex) -> np.ndarray:
        """Diagonal of θ_H(z) = t^H_1 z^{-1} + t^H_2 z."""
        t1, t2 = self.left if side == "L" else self.right
        return t1 / z + t2 * z

    def to_dict(self) -> dict:
        """JSON-friendly dictionary of [re, im] pairs."""
        return {k: [[float(x.real), float(x.imag)] for x in getattr(self, k)] for k in ("tL1", "tL2", "tR1", "tR2")}

    @staticmethod
    def from_dict(config: dict, m: int) -> "FlowTimes":
        """Inverse of to_dict; missing keys default to zero, scalars broadcast to the diagonal."""
        values = {}
        for k in ("tL1", "tL2", "tR1", "tR2"):
            raw = config.get(k, 0.0)
            if isinstance(raw, list) and raw and isinstance(raw[0], list):
                raw = [complex(re, im) for re, im in raw]
            values[k] = _vec(raw, m)
        return FlowTimes(**values)


@dataclass
class FlowConfig:
    """Flow run settings: axis, final time and number of RK4 steps."""

    axis: FlowAxis
    t_end: float
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise MeasureConfigError(f"Number of steps must be at least 1, got {self.steps}.")


def load_flow_config(source: Union[str, dict], fs=None) -> FlowConfig:
    """Flow configuration from a dictionary, a JSON string or a file path.

    Args:
        source: {"axis": {...}, "t_end": float, "steps": int}, its JSON text or a path to it.
        fs (fsspec.filesystem, optional): Filesystem for paths.

    Returns:
        FlowConfig: the configuration.
    """
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except ValueError:
            fs = fs if fs else get_default_fs()
            if not fs.exists(source):
                raise MeasureConfigError(f"Flow config file {source} does not exist.")
            with fs.open(source, "r") as f:
                source = json.load(f)
    try:
        return FlowConfig(FlowAxis.from_dict(source["axis"]), float(source["t_end"]), int(source["steps"]))
    except (KeyError, TypeError, ValueError) as e:
        logger.error(f"Invalid flow configuration: {e}")
        raise MeasureConfigError(f"Invalid flow configuration: {e}") from e


def deform_measure(measure: MatrixMeasure, times: FlowTimes) -> Union[MatrixMeasure, DeformedMeasure]:
    """exp(θ_L(z)) dμ exp(θ_R(z)); the measure itself when all times vanish."""
    if times.is_zero():
        return measure
    base = measure.base if isinstance(measure, DeformedMeasure) else measure
    return DeformedMeasure(base, times)


def oracle_factorizations(measure: MatrixMeasure, times: FlowTimes, N: int) -> Tuple[Factorization, Factorization]:
    """Left and right factorizations of the deformed moment matrices."""
    built = families_from_measure(deform_measure(measure, times), N)
    return built["fact_l"], built["fact_r"]


def oracle_table(measure: MatrixMeasure, times: FlowTimes, N: int) -> VerblunskyTable:
    """Verblunsky table of the refactorized deformed measure."""
    fact_l, fact_r = oracle_factorizations(measure, times, N)
    return verblunsky_extract(fact_l, fact_r)


def _pad(arr: np.ndarray, n: int) -> np.ndarray:
    return arr[n] if n < arr.shape[0] else np.zeros_like(arr[0])


def toeplitz_rhs(table: VerblunskyTable, axis: FlowAxis) -> VerblunskyTable:
    """Time derivatives of the Verblunsky matrices and quasi-norms along one flow.

    Left flows evolve (c, d) and one quasi-norm directly, right flows evolve (a, b); the other quasi-norm
    follows by the product rule on h_n = h_{n-1}(I - ·) (resp. (I - ·)h_{n-1}) and the remaining pair on
    a = h^L c (h^R)^{-1}, b = h^R d (h^L)^{-1} (resp. c = (h^L)^{-1} a h^R, d = (h^R)^{-1} b h^L).
    The boundary entries at index 0 are the constant I; entries past the table end are zero.

    Args:
        table (VerblunskyTable): Current state.
        axis (FlowAxis): Flow direction.

    Returns:
        VerblunskyTable: derivatives, same layout.
    """
    N, m = table.N, table.m
    E = axis.E(m)
    a, b, c, d, hL, hR = table.a, table.b, table.c, table.d, table.hL, table.hR
    inv = np.linalg.inv
    da, db, dc, dd, dhL, dhR = (np.zeros_like(a) for _ in range(6))
    key = (axis.side, axis.j)
    if key == ("L", 1):
        for n in range(1, N):
            dc[n] = -c[n - 1] @ inv(hR[n - 1]) @ E @ hR[n]
            dd[n] = inv(hR[n - 1]) @ E @ hR[n] @ _pad(d, n + 1)
        for n in range(N):
            dhL[n] = -a[n] @ E @ _pad(b, n + 1) @ hL[n]
        _chain_right(dhR, dhL[0], hR, d, c, dd, dc)
    elif key == ("L", 2):
        for n in range(1, N):
            dc[n] = inv(hL[n - 1]) @ E @ hL[n] @ _pad(c, n + 1)
            dd[n] = -d[n - 1] @ inv(hL[n - 1]) @ E @ hL[n]
        for n in range(N):
            dhR[n] = -b[n] @ E @ _pad(a, n + 1) @ hR[n]
        _chain_right(dhL, dhR[0], hL, c, d, dc, dd)
    elif key == ("R", 1):
        for n in range(1, N):
            da[n] = -hL[n] @ E @ inv(hL[n - 1]) @ a[n - 1]
            db[n] = _pad(b, n + 1) @ hL[n] @ E @ inv(hL[n - 1])
        for n in range(N):
            dhR[n] = -_pad(b, n + 1) @ hL[n] @ E @ c[n]
        _chain_left(dhL, dhR[0], hL, a, b, da, db)
    else:
        for n in range(1, N):
            da[n] = _pad(a, n + 1) @ hR[n] @ E @ inv(hR[n - 1])
            db[n] = -hR[n] @ E @ inv(hR[n - 1]) @ b[n - 1]
        for n in range(N):
            dhL[n] = -hL[n] @ _pad(c, n + 1) @ E @ d[n]
        _chain_left(dhR, dhL[0], hR, b, a, db, da)
    for n in range(1, N):
        if axis.side == "L":
            hRi = inv(hR[n])
            da[n] = (dhL[n] @ c[n] + hL[n] @ dc[n] - hL[n] @ c[n] @ hRi @ dhR[n]) @ hRi
            hLi = inv(hL[n])
            db[n] = (dhR[n] @ d[n] + hR[n] @ dd[n] - hR[n] @ d[n] @ hLi @ dhL[n]) @ hLi
        else:
            hLi = inv(hL[n])
            dc[n] = hLi @ (da[n] @ hR[n] + a[n] @ dhR[n] - dhL[n] @ hLi @ a[n] @ hR[n])
            hRi = inv(hR[n])
            dd[n] = hRi @ (db[n] @ hL[n] + b[n] @ dhL[n] - dhR[n] @ hRi @ b[n] @ hL[n])
    return VerblunskyTable(da, db, dc, dd, dhL, dhR)


def _chain_right(dh: np.ndarray, dh0: np.ndarray, h: np.ndarray, x: np.ndarray, y: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> None:
    """Derivative of h_n = h_{n-1}(I - x_n y_n) given h'_0."""
    eye = np.eye(h.shape[1])
    dh[0] = dh0
    for n in range(1, h.shape[0]):
        dh[n] = dh[n - 1] @ (eye - x[n] @ y[n]) - h[n - 1] @ (dx[n] @ y[n] + x[n] @ dy[n])


def _chain_left(dh: np.ndarray, dh0: np.ndarray, h: np.ndarray, x: np.ndarray, y: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> None:
    """Derivative of h_n = (I - x_n y_n) h_{n-1} given h'_0."""
    eye = np.eye(h.shape[1])
    dh[0] = dh0
    for n in range(1, h.shape[0]):
        dh[n] = (eye - x[n] @ y[n]) @ dh[n - 1] - (dx[n] @ y[n] + x[n] @ dy[n]) @ h[n - 1]


def total_flow_residual(table: VerblunskyTable, side: str, j: int) -> float:
    """|toeplitz_rhs(total) - Σ_a toeplitz_rhs(partial a)|."""
    total = toeplitz_rhs(table, FlowAxis(side, j)).stack()
    partial = sum(toeplitz_rhs(table, FlowAxis(side, j, a)).stack() for a in range(table.m))
    return max_abs(total - partial) / max(max_abs(total), 1.0)


def _table_gap(x: VerblunskyTable, y: VerblunskyTable, upto: int) -> float:
    xs, ys = x.stack()[:, :upto], y.stack()[:, :upto]
    return max_abs(xs - ys) / max(max_abs(ys), 1.0)


def toeplitz_fd_check(measure: MatrixMeasure, axis: FlowAxis, N: int, h: float = FD_STEP, times: FlowTimes = None) -> float:
    """Toeplitz lattice right-hand side against the central difference of refactorized deformed measures.

    Compared on indices below N - 2, where truncation does not reach.
    """
    times = times if times else FlowTimes.zeros(measure.m)
    plus = oracle_table(measure, times.along(axis, h), N).stack()
    minus = oracle_table(measure, times.along(axis, -h), N).stack()
    fd = (plus - minus) / (2.0 * h)
    rhs = toeplitz_rhs(oracle_table(measure, times, N), axis).stack()
    upto = max(N - 2, 1)
    residual = max_abs(fd[:, :upto] - rhs[:, :upto])
    logger.log(VERBOSE_LVL, f"Toeplitz RHS vs finite differences on {axis.label}: {residual:.3e}")
    return float(residual)


def rk4_step(table: VerblunskyTable, axis: FlowAxis, dt: float) -> VerblunskyTable:
    """One classical Runge-Kutta step on the stacked (6, N, m, m) state."""
    y = table.stack()

    def f(state):
        return toeplitz_rhs(VerblunskyTable.from_stack(state), axis).stack()

    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return VerblunskyTable.from_stack(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


@dataclass
class FlowState:
    """Snapshot of a flow: times, deformed measure, Verblunsky data and how the data was obtained."""

    times: FlowTimes
    measure: Union[MatrixMeasure, DeformedMeasure]
    table: VerblunskyTable
    provenance: str = "refactorized"


@dataclass
class FlowTrajectory:
    """RK4 trajectory of Verblunsky tables along one axis."""

    axis: FlowAxis
    ts: List[float] = field(default_factory=list)
    tables: List[VerblunskyTable] = field(default_factory=list)
    oracle_gap: Optional[float] = None
    truncated: bool = False

    @property
    def final(self) -> VerblunskyTable:
        """Last table."""
        return self.tables[-1]

    def to_frame(self) -> pd.DataFrame:
        """Long format with columns t, l, component, value (component like "a[0,1].re")."""
        rows = []
        for t, table in zip(self.ts, self.tables):
            for name in VerblunskyTable.FIELDS:
                arr = getattr(table, name)
                for l in range(table.N):
                    for i in range(table.m):
                        for j in range(table.m):
                            v = arr[l, i, j]
                            rows.append({"t": t, "l": l, "component": f"{name}[{i},{j}].re", "value": float(v.real)})
                            rows.append({"t": t, "l": l, "component": f"{name}[{i},{j}].im", "value": float(v.imag)})
        return pd.DataFrame(rows)

    def to_csv(self, path: str, fs=None) -> None:
        """Write the long-format trajectory as CSV."""
        fs = fs if fs else get_default_fs()
        table = pa.Table.from_pandas(self.to_frame(), preserve_index=False)
        with fs.open(path, "wb") as f:
            pa_csv.write_csv(table, f)
        logger.log(VERBOSE_LVL, f"Trajectory written to {path}")


def flow_integrate(
    measure: MatrixMeasure,
    axis: FlowAxis,
    t_end: float,
    steps: int,
    N: int,
    compare_oracle: bool = True,
    times: FlowTimes = None,
) -> FlowTrajectory:
    """Integrate the Toeplitz lattice with fixed-step RK4 from the refactorized table at `times`.

    Args:
        measure (MatrixMeasure): Undeformed measure.
        axis (FlowAxis): Flow direction.
        t_end (float): Final time offset.
        steps (int): Number of RK4 steps.
        N (int): Number of blocks.
        compare_oracle (bool, optional): Compare the endpoint with the refactorized deformed measure.
        times (FlowTimes, optional): Start times. Defaults to zero.

    Returns:
        FlowTrajectory: trajectory; truncated when the state blows up or the oracle loses quasi-definiteness.
    """
    if steps < 1:
        raise ValueError(f"Number of steps must be at least 1, got {steps}.")
    times = times if times else FlowTimes.zeros(measure.m)
    table = oracle_table(measure, times, N)
    traj = FlowTrajectory(axis, [0.0], [table])
    dt = t_end / steps
    for k in range(steps):
        table = rk4_step(table, axis, dt)
        if not np.all(np.isfinite(table.stack())):
            logger.error(f"Flow {axis.label} diverged at step {k + 1}")
            traj.truncated = True
            break
        traj.ts.append((k + 1) * dt)
        traj.tables.append(table)
    if compare_oracle and not traj.truncated:
        try:
            oracle = oracle_table(measure, times.along(axis, t_end), N)
        except QuasiDefinitenessError as e:
            logger.error(f"Oracle factorization failed at t={t_end}: {e}")
            traj.truncated = True
            return traj
        traj.oracle_gap = _table_gap(traj.final, oracle, max(N - ORACLE_MARGIN, 1))
        logger.log(VERBOSE_LVL, f"Flow {axis.label} to t={t_end} in {steps} steps, oracle gap {traj.oracle_gap:.3e}")
    return traj


def _rk4_endpoint(table: VerblunskyTable, axis: FlowAxis, t_end: float, steps: int) -> np.ndarray:
    dt = t_end / steps
    for _ in range(steps):
        table = rk4_step(table, axis, dt)
    return table.stack()


def rk4_convergence_ratio(
    measure: MatrixMeasure, axis: FlowAxis, N: int, t_end: float = 0.3, steps: Tuple[int, int] = (3, 6), reference_factor: int = 16
) -> float:
    """Ratio of endpoint errors when the step count doubles; fourth order gives about 16.

    Errors are taken against a run with reference_factor times the fine step count on the same truncated
    lattice. Returns inf when the coarse run already sits at round-off and nan when a run diverges.
    """
    start = oracle_table(measure, FlowTimes.zeros(measure.m), N)
    reference = _rk4_endpoint(start, axis, t_end, steps[1] * reference_factor)
    coarse = max_abs(_rk4_endpoint(start, axis, t_end, steps[0]) - reference)
    fine = max_abs(_rk4_endpoint(start, axis, t_end, steps[1]) - reference)
    if not np.isfinite(coarse + fine + max_abs(reference)):
        return float("nan")
    if coarse <= RK4_ROUNDOFF * max(max_abs(reference), 1.0):
        return float("inf")
    return float(coarse / max(fine, 1e-300))


def _axis_operators(axis: FlowAxis, N: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """(X, Y) with ∂g^L = ÊX g^L, ∂g^R = ÊY g^R for left flows and ∂g^L = g^L ÊX, ∂g^R = g^R ÊY for right ones."""
    p = -1 if axis.j == 1 else 1
    return upsilon_power(N, p, m).data, upsilon_power(N, -p, m).data


def generators(fact_l: Factorization, fact_r: Factorization, axis: FlowAxis) -> Dict[str, np.ndarray]:
    """Flow generators B acting on the left and right wave matrices.

    Left flows: B_L = (S1 Ê X S1^{-1})_+, B_R = -(Z2^{-1} Ê Y Z2)_+.
    Right flows: B_L = -(S2 Ê X S2^{-1})_-, B_R = (Z1^{-1} Ê Y Z1)_-.
    X is Υ^{-1} for j = 1 and Υ for j = 2, Y is its inverse; "+" keeps the diagonal, "-" is strictly lower.
    """
    m, N = fact_l.m, fact_l.N
    X, Y = _axis_operators(axis, N, m)
    Ehat = block_diag_lift(axis.E(m), N)
    if axis.side == "L":
        left = block_part(fact_l.S1 @ Ehat @ X @ fact_l.lower, m, "upper")
        right = -block_part(fact_r.Z2_inv @ Ehat @ Y @ fact_r.Z2, m, "upper")
    else:
        left = -block_part(fact_l.S2 @ Ehat @ X @ fact_l.S2_inv, m, "strict_lower")
        right = block_part(fact_r.upper @ Ehat @ Y @ fact_r.Z1, m, "strict_lower")
    return {"L": left, "R": right}


def wave_matrices(fact_l: Factorization, fact_r: Factorization, times: FlowTimes) -> Dict[str, np.ndarray]:
    """W₁^L, W₂^L, W₁^R, W₂^R at the given times.

    With A_H = T^H_1 Υ^{-1} + T^H_2 Υ the deformed moment matrices are e^{A_L} g^L e^{A_R} and
    e^{ηA_Lη} g^R e^{ηA_Rη}, so W₁^L = S1 e^{A_L}, W₂^L = S2 e^{-A_R}, W₂^R = e^{-ηA_Lη} Z2, W₁^R = e^{ηA_Rη} Z1.
    """
    m, N = fact_l.m, fact_l.N
    ups, ups_inv = upsilon_power(N, 1, m).data, upsilon_power(N, -1, m).data
    TL1, TL2 = block_diag_lift(np.diag(times.tL1), N), block_diag_lift(np.diag(times.tL2), N)
    TR1, TR2 = block_diag_lift(np.diag(times.tR1), N), block_diag_lift(np.diag(times.tR2), N)
    return {
        "W1L": fact_l.S1 @ expm(TL1 @ ups_inv + TL2 @ ups),
        "W2L": fact_l.S2 @ expm(-(TR1 @ ups_inv + TR2 @ ups)),
        "W2R": expm(-(TL1 @ ups + TL2 @ ups_inv)) @ fact_r.Z2,
        "W1R": expm(TR1 @ ups + TR2 @ ups_inv) @ fact_r.Z1,
    }


def _dressed(fact_l: Factorization, fact_r: Factorization) -> Dict[str, np.ndarray]:
    return {
        "JL": dress(fact_l, fact_r, "JL").data,
        "JR": dress(fact_l, fact_r, "JR").data,
        "C[0]": dress(fact_l, fact_r, "C", 0).data,
        "C[-1]": dress(fact_l, fact_r, "C", -1).data,
    }


def wave_lax_checks(measure: MatrixMeasure, axis: FlowAxis, N: int, times: FlowTimes = None, h: float = FD_STEP) -> Dict[str, float]:
    """Central-difference residuals of the wave-matrix linear systems, Lax equations and C_[p] evolution.

    ∂W^L = B_L W^L, ∂W^R = W^R B_R, ∂J^L = [B_L, J^L], ∂J^R = [J^R, B_R], ∂C_[p] = -B_R C_[p] - C_[p] B_L.
    """
    times = times if times else FlowTimes.zeros(measure.m)
    m = measure.m
    t_plus, t_minus = times.along(axis, h), times.along(axis, -h)
    f0, fp, fm = (oracle_factorizations(measure, t, N) for t in (times, t_plus, t_minus))
    B = generators(*f0, axis)
    W0, Wp, Wm = wave_matrices(*f0, times), wave_matrices(*fp, t_plus), wave_matrices(*fm, t_minus)
    D0, Dp, Dm = _dressed(*f0), _dressed(*fp), _dressed(*fm)
    out = {}

    def gap(dx, rhs):
        return relative_residual(interior(dx, m, FD_MARGIN), interior(rhs, m, FD_MARGIN))

    for name in ("W1L", "W2L"):
        out[f"wave_{name}"] = gap((Wp[name] - Wm[name]) / (2 * h), B["L"] @ W0[name])
    for name in ("W1R", "W2R"):
        out[f"wave_{name}"] = gap((Wp[name] - Wm[name]) / (2 * h), W0[name] @ B["R"])
    dJL = (Dp["JL"] - Dm["JL"]) / (2 * h)
    out["lax_JL"] = gap(dJL, B["L"] @ D0["JL"] - D0["JL"] @ B["L"])
    dJR = (Dp["JR"] - Dm["JR"]) / (2 * h)
    out["lax_JR"] = gap(dJR, D0["JR"] @ B["R"] - B["R"] @ D0["JR"])
    for p in ("C[0]", "C[-1]"):
        dC = (Dp[p] - Dm[p]) / (2 * h)
        out[f"evolution_{p}"] = gap(dC, -B["R"] @ D0[p] - D0[p] @ B["L"])
    logger.log(VERBOSE_LVL, f"Wave/Lax residuals on {axis.label}: {out}")
    return out


def zakharov_shabat_check(measure: MatrixMeasure, first: FlowAxis, second: FlowAxis, N: int, h: float = FD_STEP) -> Dict[str, float]:
    """Compatibility of two flows: ∂_b B_a - ∂_a B_b ± [B_a, B_b] = 0 (+ for the left family, - for the right)."""
    m = measure.m
    t0 = FlowTimes.zeros(m)
    B_a, B_b = generators(*oracle_factorizations(measure, t0, N), first), generators(*oracle_factorizations(measure, t0, N), second)

    def derivative(axis_moved, axis_gen):
        plus = generators(*oracle_factorizations(measure, t0.along(axis_moved, h), N), axis_gen)
        minus = generators(*oracle_factorizations(measure, t0.along(axis_moved, -h), N), axis_gen)
        return {k: (plus[k] - minus[k]) / (2 * h) for k in ("L", "R")}

    db_Ba = derivative(second, first)
    da_Bb = derivative(first, second)
    out = {}
    for side, sign in (("L", 1.0), ("R", -1.0)):
        comm = B_a[side] @ B_b[side] - B_b[side] @ B_a[side]
        res = db_Ba[side] - da_Bb[side] + sign * comm
        scale = max(max_abs(interior(B_a[side], m, FD_MARGIN)), max_abs(interior(B_b[side], m, FD_MARGIN)), 1.0)
        out[f"zs_{side}"] = max_abs(interior(res, m, FD_MARGIN)) / scale
    return out


def _contour_mean(values: np.ndarray) -> np.ndarray:
    return values.mean(axis=0)


def bilinear_check(
    measure: MatrixMeasure, times: FlowTimes, times_tilde: FlowTimes, N: int, l: int, k: int, n_nodes: int = 512
) -> Dict[str, float]:
    """Two-contour bilinear identities between families at times t and t̃.

    Left: ∮_{|z|=0.8} φ₁^L(t)(l)(z) e^{θ_L(t)-θ_L(t̃)} z^{-1} F_{t̃}(z) φ₂^L(t̃)(k)(1/z̄)† dz/(2πi) equals the
    |z|=1.25 integral of φ₁^L(t)(l) z^{-1} F_t e^{-(θ_R(t)-θ_R(t̃))} φ₂^L(t̃)(k)(1/z̄)†; the right families
    satisfy the mirrored identity. At t = t̃ the common value is δ_{lk} I / 2π.

    Returns:
        Dict[str, float]: left and right residuals, and for t = t̃ the deviation from δ/2π.
    """
    mu_t, mu_tt = deform_measure(measure, times), deform_measure(measure, times_tilde)
    fam_t = families_from_measure(mu_t, N)["families"]
    fam_tt = families_from_measure(mu_tt, N)["families"]
    out: Dict[str, float] = {}
    values = {}
    for radius, tag in ((0.8, "inner"), (1.25, "outer")):
        _, zs = trapezoid_nodes(n_nodes, radius)
        left, right = [], []
        for z in zs:
            dL = np.diag(np.exp(times.exponent("L", z) - times_tilde.exponent("L", z)))
            dR = np.diag(np.exp(times.exponent("R", z) - times_tilde.exponent("R", z)))
            zr = 1.0 / np.conj(z)
            p1L, p2L = fam_t.phi1L[l](z), fam_tt.phi2L[k](zr).conj().T
            p1R, p2R = fam_t.phi1R[l](z), fam_tt.phi2R[k](zr).conj().T
            if tag == "inner":
                left.append(p1L @ dL @ mu_tt.fourier_series(z) @ p2L)
                right.append(p2R @ np.linalg.inv(dL) @ mu_t.fourier_series(z) @ p1R)
            else:
                left.append(p1L @ mu_t.fourier_series(z) @ np.linalg.inv(dR) @ p2L)
                right.append(p2R @ mu_tt.fourier_series(z) @ dR @ p1R)
        values[tag] = (_contour_mean(np.stack(left)), _contour_mean(np.stack(right)))
    out["bilinear_L"] = relative_residual(values["inner"][0], values["outer"][0])
    out["bilinear_R"] = relative_residual(values["inner"][1], values["outer"][1])
    if times.distance(times_tilde) == 0.0:
        target = (1.0 if l == k else 0.0) * np.eye(measure.m) / (2.0 * np.pi)
        out["equal_times_L"] = relative_residual(values["inner"][0], target)
        out["equal_times_R"] = relative_residual(values["inner"][1], target)
    return out


def bilinear_sweep(
    measure: MatrixMeasure, N: int, deltas: Sequence[float] = (0.0, 1e-2), pairs: Sequence[Tuple[int, int]] = None
) -> Dict[str, float]:
    """bilinear_check for each axis and offset t̃ - t, over a few (l, k) index pairs."""
    m = measure.m
    pairs = pairs if pairs else [(0, 0), (1, 1), (1, 2), (2, 1)]
    t0 = FlowTimes.zeros(m)
    out: Dict[str, float] = {}
    for axis in (FlowAxis("L", 1), FlowAxis("L", 2), FlowAxis("R", 1), FlowAxis("R", 2)):
        for delta in deltas:
            tt = t0.along(axis, delta)
            for l, k in pairs:
                for key, val in bilinear_check(measure, t0, tt, N, l, k).items():
                    name = f"{key}@{axis.label}"
                    out[name] = max(out.get(name, 0.0), val)
    return out
