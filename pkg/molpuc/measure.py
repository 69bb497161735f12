"""Matrix measures on the unit circle and their trigonometric moments."""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import fsspec
import numpy as np

from .exceptions import DomainError, InsufficientMomentsError, MeasureConfigError
from .utils import VERBOSE_LVL, _is_json, as_diagonal, decode_matrix, encode_matrix, fingerprint, get_default_fs

logger = logging.getLogger(__name__)

KINDS = ("trig_poly", "moment_list")
BUNDLED = ("lebesgue", "bernstein_szego", "herm2", "nonherm2")
HERMITIAN_TOL = 1e-13
PD_GRID = 2048


@dataclass(frozen=True)
class MomentSet:
    """Moments c_{-n_max}, ..., c_{n_max} of a matrix measure."""

    m: int
    n_max: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.shape != (2 * self.n_max + 1, self.m, self.m):
            raise ValueError(f"Moment array has shape {self.data.shape}, expected {(2 * self.n_max + 1, self.m, self.m)}.")

    def __getitem__(self, n: int) -> np.ndarray:
        if abs(n) > self.n_max:
            raise InsufficientMomentsError(f"Moment c_{n} requested but only |n| <= {self.n_max} are available.")
        return self.data[n + self.n_max]

    def hermitian_residual(self) -> float:
        """Max elementwise deviation from c_{-n} = c_n†, scaled by max |c|."""
        flipped = np.conj(np.transpose(self.data[::-1], (0, 2, 1)))
        scale = max(np.abs(self.data).max(), 1.0)
        return float(np.abs(self.data - flipped).max() / scale)


class MatrixMeasure:
    """An m×m matrix weight on the unit circle given by trigonometric coefficients or by explicit moments."""

    def __init__(
        self,
        m: int,
        kind: str,
        coeffs: Dict[int, np.ndarray],
        hermitian: bool = False,
        name: str = None,
    ) -> None:
        """Constructor to instantiate a new MatrixMeasure.

        Args:
            m (int): Block size.
            kind (str): "trig_poly" (coeffs are the Fourier coefficients W_n of w(θ) = Σ W_n e^{inθ})
                or "moment_list" (coeffs are the moments c_n).
            coeffs (Dict[int, np.ndarray]): Map from integer n to an m×m complex matrix.
            hermitian (bool, optional): Declares W_{-n} = W_n†, checked here. Defaults to False.
            name (str, optional): Label used in reports. Defaults to None.
        """
        if not isinstance(m, (int, np.integer)) or m < 1:
            raise MeasureConfigError(f"Block size must be a positive integer, got {m}.")
        if kind not in KINDS:
            raise MeasureConfigError(f"Unrecognised measure kind {kind}, expected one of {KINDS}.")
        if not coeffs:
            raise MeasureConfigError("A measure needs at least one coefficient.")
        self.m = int(m)
        self.kind = kind
        self.hermitian = bool(hermitian)
        self.name = name
        self.coeffs: Dict[int, np.ndarray] = {}
        for n, c in coeffs.items():
            c = np.asarray(c, dtype=complex)
            if c.ndim == 0:
                c = c * np.eye(self.m, dtype=complex)
            if c.shape != (self.m, self.m):
                raise MeasureConfigError(f"Coefficient {n} has shape {c.shape}, expected {(self.m, self.m)}.")
            self.coeffs[int(n)] = c
        if kind == "moment_list":
            missing = [n for n in range(-self.bandwidth, self.bandwidth + 1) if n not in self.coeffs]
            if missing:
                raise MeasureConfigError(f"Moment list is not contiguous, missing indices {missing}.")
        if self.hermitian:
            dev = self.hermitian_residual()
            if dev > HERMITIAN_TOL:
                raise MeasureConfigError(f"Measure declared hermitian but max |W_-n - W_n†| is {dev:.3e}.")

    def __repr__(self) -> str:
        return f"MatrixMeasure(name={self.name!r}, m={self.m}, kind={self.kind!r}, bandwidth={self.bandwidth}, hermitian={self.hermitian})"

    @property
    def bandwidth(self) -> int:
        """Largest |n| with a stored coefficient."""
        return max(abs(n) for n in self.coeffs)

    def hermitian_residual(self) -> float:
        """Max elementwise deviation from W_{-n} = W_n†, scaled by max |W|."""
        zero = np.zeros((self.m, self.m), dtype=complex)
        scale = max(max(np.abs(c).max() for c in self.coeffs.values()), 1.0)
        dev = 0.0
        for n, c in self.coeffs.items():
            dev = max(dev, np.abs(self.coeffs.get(-n, zero) - c.conj().T).max())
        return float(dev / scale)

    def coefficient(self, n: int) -> np.ndarray:
        """Stored coefficient of index n (zero outside the support of a trig_poly)."""
        if n in self.coeffs:
            return self.coeffs[n]
        if self.kind == "moment_list":
            raise InsufficientMomentsError(f"Moment c_{n} requested but only |n| <= {self.bandwidth} are stored.")
        return np.zeros((self.m, self.m), dtype=complex)

    def moments(self, n_max: int) -> MomentSet:
        """Moments c_{-n_max..n_max} read off exactly.

        Args:
            n_max (int): Largest |n| required.

        Returns:
            MomentSet: the moments.
        """
        if n_max < 0:
            raise ValueError("n_max must be non-negative.")
        data = np.stack([self.coefficient(n) for n in range(-n_max, n_max + 1)])
        return MomentSet(self.m, n_max, data)

    def weight(self, theta: Union[float, np.ndarray]) -> np.ndarray:
        """Pointwise weight w(θ) = Σ W_n e^{inθ}; for moment lists the truncated Fourier sum.

        Args:
            theta: Angle or array of angles.

        Returns:
            np.ndarray: Array of shape (len(theta), m, m).
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.zeros((theta.shape[0], self.m, self.m), dtype=complex)
        for n in sorted(self.coeffs):
            out += np.exp(1j * n * theta)[:, None, None] * self.coeffs[n]
        return out

    def fourier_series(self, z: complex, dagger: bool = False) -> np.ndarray:
        """F_μ(z) = Σ c_n z^n, or Σ c_n† z^n when dagger is set.

        Args:
            z (complex): Evaluation point, nonzero.
            dagger (bool, optional): Use the conjugated coefficients. Defaults to False.

        Returns:
            np.ndarray: m×m matrix.
        """
        if z == 0:
            raise DomainError("The Fourier series of the measure is not defined at z = 0.")
        out = np.zeros((self.m, self.m), dtype=complex)
        for n in sorted(self.coeffs):
            c = self.coeffs[n].conj().T if dagger else self.coeffs[n]
            out += c * z**n
        return out

    def is_positive_definite(self, n_points: int = PD_GRID) -> bool:
        """Check min eigenvalue of the Hermitian weight on a uniform grid."""
        if not self.hermitian:
            return False
        theta = 2.0 * np.pi * np.arange(n_points) / n_points
        w = self.weight(theta)
        w = 0.5 * (w + np.conj(np.transpose(w, (0, 2, 1))))
        return bool(np.linalg.eigvalsh(w).min() > 0.0)

    def multiply_linear(self, d, side: str = "L", sign: int = 1) -> "MatrixMeasure":
        """Measure multiplied by the linear factor (I - d z^{±1}).

        Left: (I - d z^s) dμ, right: dμ (I - d z^s). Coefficients update as W'_n = W_n - d W_{n-s}
        (resp. W_n - W_{n-s} d); moment lists lose one index at the truncation edge.

        Args:
            d: Scalar, diagonal entries, or m×m matrix.
            side (str, optional): "L" or "R". Defaults to "L".
            sign (int, optional): +1 or -1. Defaults to 1.

        Returns:
            MatrixMeasure: the transformed measure.
        """
        if side not in ("L", "R") or sign not in (1, -1):
            raise ValueError(f"Unsupported linear factor side={side} sign={sign}.")
        dm = as_diagonal(d, self.m)
        K = self.bandwidth
        if self.kind == "trig_poly":
            support = range(-K - 1, K + 2)
        else:
            support = range(-K + 1, K)
        new = {}
        for n in support:
            c = self.coeffs.get(n, np.zeros((self.m, self.m), dtype=complex))
            prev = self.coeffs.get(n - sign, np.zeros((self.m, self.m), dtype=complex))
            new[n] = c - (dm @ prev if side == "L" else prev @ dm)
        if self.kind == "trig_poly":
            new = {n: c for n, c in new.items() if np.abs(c).max() > 0.0 or n == 0}
        label = f"{self.name or 'measure'}*(I-dz^{sign:+d}){side}"
        return MatrixMeasure(self.m, self.kind, new, hermitian=False, name=label)

    def to_dict(self) -> dict:
        """Configuration dictionary in the measure file format."""
        return {
            "m": self.m,
            "kind": self.kind,
            "hermitian": self.hermitian,
            "coeffs": {str(n): encode_matrix(self.coeffs[n]) for n in sorted(self.coeffs)},
        }

    def fingerprint(self) -> str:
        """sha256 of the canonical configuration."""
        return fingerprint(self.to_dict())

    @staticmethod
    def from_dict(config: dict, name: str = None) -> "MatrixMeasure":
        """Create a measure from a configuration dictionary.

        Args:
            config (dict): {"m": int, "kind": ..., "hermitian": bool, "coeffs": {"<n>": [[[re, im], ...], ...]}}.
            name (str, optional): Label used in reports.

        Returns:
            MatrixMeasure: the measure.
        """
        try:
            m = config["m"]
            kind = config["kind"]
            coeffs = {int(n): decode_matrix(c) for n, c in config["coeffs"].items()}
        except (KeyError, TypeError, ValueError) as e:
            logger.error(f"Invalid measure configuration: {e}")
            raise MeasureConfigError(f"Invalid measure configuration: {e}") from e
        return MatrixMeasure(m, kind, coeffs, hermitian=config.get("hermitian", False), name=name or config.get("name"))

    @staticmethod
    def from_file(file_path: str, fs=None) -> "MatrixMeasure":
        """Create a measure from a JSON file.

        Args:
            file_path (str): Path (absolute or relative) to the measure file.
            fs (fsspec.filesystem): Filesystem to use.

        Returns:
            MatrixMeasure: the measure.
        """
        fs = fs if fs else get_default_fs()
        if not fs.exists(file_path):
            msg = f"Measure file {file_path} does not exist."
            logger.error(msg)
            raise MeasureConfigError(msg)
        logger.log(VERBOSE_LVL, f"Found measure file at {file_path}")
        if fs.size(file_path) == 0:
            msg = f"{file_path} is an empty file, make sure to add the measure configuration to it."
            logger.error(msg)
            raise MeasureConfigError(msg)
        try:
            with fs.open(file_path, "r") as f:
                data = json.load(f)
        except ValueError as e:
            logger.error(e)
            raise MeasureConfigError(f"Could not parse {file_path}: {e}") from e
        return MatrixMeasure.from_dict(data, name=Path(file_path).stem)

    @staticmethod
    def from_object(measure_source: Union["MatrixMeasure", str, dict]) -> "MatrixMeasure":
        """Utility function that will determine how to create a measure based on data passed.

        Args:
            measure_source: A measure, a bundled measure name, a JSON string, a file path or a dictionary.

        Raises:
            MeasureConfigError: Exception raised when the source is not one of the supported types.

        Returns:
            MatrixMeasure: the measure.
        """
        if isinstance(measure_source, (MatrixMeasure, DeformedMeasure)):
            return measure_source
        if isinstance(measure_source, dict):
            return MatrixMeasure.from_dict(measure_source)
        if isinstance(measure_source, str):
            if measure_source in BUNDLED:
                return bundled_measure(measure_source)
            if _is_json(measure_source):
                return MatrixMeasure.from_dict(json.loads(measure_source))
            return MatrixMeasure.from_file(measure_source)

        raise MeasureConfigError(f"Could not resolve the measure provided: {measure_source}")


class DeformedMeasure:
    """Measure deformed by diagonal exponential factors exp(θ_L(z)) dμ exp(θ_R(z)).

    θ_H(z) = t^H_1 z^{-1} + t^H_2 z, following the CMV order χ^{(1)} = z^{-1}, χ^{(2)} = z.
    Moments are computed by FFT on a power-of-two grid sized to the base bandwidth plus a padding
    that covers the exponential tails.
    """

    kind = "deformed"

    def __init__(self, base: MatrixMeasure, times, pad: int = None) -> None:
        """Constructor.

        Args:
            base (MatrixMeasure): Undeformed measure.
            times (FlowTimes): Diagonal deformation times.
            pad (int, optional): Extra Fourier modes kept for the exponentials. Defaults to an adaptive value >= 64.
        """
        self.base = base
        self.times = times
        self.m = base.m
        self.name = f"{base.name or 'measure'}@t"
        scale = max(1.0, times.max_abs())
        self.pad = pad if pad else max(64, int(np.ceil(8 * scale)) + 32)
        self.hermitian = base.hermitian and times.is_hermitian_compatible()

    def __repr__(self) -> str:
        return f"DeformedMeasure(base={self.base.name!r}, times={self.times})"

    @property
    def bandwidth(self) -> int:
        """Effective bandwidth used for quadrature sizing."""
        return self.base.bandwidth + self.pad

    def _left(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_1d(z)
        return np.exp(np.outer(1.0 / z, self.times.left[0]) + np.outer(z, self.times.left[1]))

    def _right(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_1d(z)
        return np.exp(np.outer(1.0 / z, self.times.right[0]) + np.outer(z, self.times.right[1]))

    def weight(self, theta: Union[float, np.ndarray]) -> np.ndarray:
        """Pointwise deformed weight on the unit circle."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        z = np.exp(1j * theta)
        return self._left(z)[:, :, None] * self.base.weight(theta) * self._right(z)[:, None, :]

    def fourier_series(self, z: complex, dagger: bool = False) -> np.ndarray:
        """Analytic continuation e^{θ_L(z)} F(z) e^{θ_R(z)} of the deformed Fourier series."""
        if z == 0:
            raise DomainError("The Fourier series of the measure is not defined at z = 0.")
        if dagger:
            # Σ c_n(t)† z^n is the series of the conjugated weight
            zc = np.conj(z)
            return self.fourier_series(zc).conj().T
        left = self._left(np.array([z]))[0]
        right = self._right(np.array([z]))[0]
        return left[:, None] * self.base.fourier_series(z) * right[None, :]

    def moments(self, n_max: int) -> MomentSet:
        """Moments c_n(t) by FFT of the deformed weight."""
        n_nodes = 64
        while n_nodes < 2 * (n_max + self.bandwidth) + 1:
            n_nodes *= 2
        theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        w = self.weight(theta)
        # c_n = (1/M) Σ_k w(θ_k) e^{-inθ_k}
        spectrum = np.fft.fft(w, axis=0) / n_nodes
        idx = np.arange(-n_max, n_max + 1) % n_nodes
        logger.log(VERBOSE_LVL, f"Deformed moments up to {n_max} from {n_nodes} nodes")
        return MomentSet(self.m, n_max, spectrum[idx])

    def is_positive_definite(self, n_points: int = PD_GRID) -> bool:
        """Positive definiteness is only asserted for undeformed Hermitian bases."""
        return self.hermitian and self.base.is_positive_definite(n_points)

    def fingerprint(self) -> str:
        """sha256 of the base configuration and times."""
        return fingerprint({"base": self.base.to_dict(), "times": self.times.to_dict()})


def compute_moments(measure: Union[MatrixMeasure, DeformedMeasure], n_max: int) -> MomentSet:
    """Moments c_n = (1/2π) ∫ e^{-inθ} dμ(θ) for |n| <= n_max.

    Args:
        measure: Matrix measure.
        n_max (int): Largest |n|.

    Returns:
        MomentSet: the moments.
    """
    return measure.moments(n_max)


def quadrature_moments(measure: Union[MatrixMeasure, DeformedMeasure], n_max: int, n_nodes: int = None) -> MomentSet:
    """Moments by the trapezoid rule on M uniform nodes, M = 4(K + n_max) + 1 by default.

    Args:
        measure: Matrix measure.
        n_max (int): Largest |n|.
        n_nodes (int, optional): Node count M.

    Returns:
        MomentSet: the moments.
    """
    n_nodes = n_nodes if n_nodes else 4 * (measure.bandwidth + n_max) + 1
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    w = measure.weight(theta)
    ns = np.arange(-n_max, n_max + 1)
    phases = np.exp(-1j * np.outer(ns, theta)) / n_nodes
    return MomentSet(measure.m, n_max, np.einsum("nk,kab->nab", phases, w))


def fourier_series_eval(measure: Union[MatrixMeasure, DeformedMeasure], z: complex) -> np.ndarray:
    """F_μ(z) = Σ c_n z^n.

    Args:
        measure: Matrix measure.
        z (complex): Nonzero evaluation point.

    Returns:
        np.ndarray: m×m matrix.
    """
    return measure.fourier_series(z)


def bundled_measure(name: str) -> MatrixMeasure:
    """Load one of the bundled example measures by name.

    Args:
        name (str): One of "lebesgue", "bernstein_szego", "herm2", "nonherm2".

    Raises:
        MeasureConfigError: Unknown name, or a Hermitian measure whose weight is not positive definite.

    Returns:
        MatrixMeasure: the measure.
    """
    if name not in BUNDLED:
        raise MeasureConfigError(f"Unknown bundled measure {name}, expected one of {BUNDLED}.")
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", f"{name}.json")
    measure = MatrixMeasure.from_file(path, fs=fsspec.filesystem("file"))
    check_bundled(measure)
    return measure


def check_bundled(measure: MatrixMeasure) -> None:
    """Hermitian bundled measures must have a positive definite weight on the grid."""
    if not measure.hermitian:
        logger.log(VERBOSE_LVL, f"{measure.name} is not Hermitian, positive definiteness not checked")
        return
    if not measure.is_positive_definite():
        raise MeasureConfigError(f"Bundled measure {measure.name} is declared Hermitian but its weight is not positive definite.")
    logger.log(VERBOSE_LVL, f"{measure.name} weight is positive definite on {PD_GRID} nodes")
