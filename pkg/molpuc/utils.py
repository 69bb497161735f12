"""MOLPUC utilities."""

import contextlib
import hashlib
import json
import logging
import multiprocessing as mp
import os
from typing import Iterable, List, Sequence, Tuple, Union

import fsspec
import joblib
import numpy as np

logger = logging.getLogger(__name__)
VERBOSE_LVL = 25
DEFAULT_THREAD_POOL_SIZE = 5
DEFAULT_SEED = 42
SAMPLE_RADII = (0.8, 1.0, 1.25)


@contextlib.contextmanager
def tqdm_joblib(tqdm_object):
    """Progress bar sensitive to exceptions during the batch processing.

    Args:
        tqdm_object (tqdm.tqdm): tqdm object.

    Yields: tqdm.tqdm object

    """

    class TqdmBatchCompletionCallback(joblib.parallel.BatchCompletionCallBack):
        """Tqdm execution wrapper."""

        def __call__(self, *args, **kwargs):
            tqdm_object.update(n=self.batch_size)
            return super().__call__(*args, **kwargs)

    old_batch_callback = joblib.parallel.BatchCompletionCallBack
    joblib.parallel.BatchCompletionCallBack = TqdmBatchCompletionCallback
    try:
        yield tqdm_object
    finally:
        joblib.parallel.BatchCompletionCallBack = old_batch_callback
        tqdm_object.close()


def cpu_count(thread_pool_size: int = None) -> int:
    """Determine the number of cpus/threads for parallelization.

    Args:
        thread_pool_size: override argument for number of cpus/threads.

    Returns: number of cpus/threads to use.

    """
    if os.environ.get("NUM_THREADS") is not None:
        return int(os.environ["NUM_THREADS"])
    if thread_pool_size:
        return thread_pool_size
    else:
        if mp.cpu_count():
            thread_pool_size = mp.cpu_count()
        else:
            thread_pool_size = DEFAULT_THREAD_POOL_SIZE
    return thread_pool_size


def get_default_fs():
    """Retrieve default filesystem.

    Returns: filesystem

    """
    protocol = "file" if "FS_PROTOCOL" not in os.environ.keys() else os.environ["FS_PROTOCOL"]
    return fsspec.filesystem(protocol)


def _is_json(data: str) -> bool:
    """Test whether the content of a string is a JSON object.

    Args:
        data (str): The content to evaluate.

    Returns:
        bool: True if the content of data is JSON, False otherwise.
    """
    try:
        json.loads(data)
    except ValueError:
        return False
    return True


def encode_matrix(a: np.ndarray) -> list:
    """Serialize a complex matrix row-major as nested [re, im] pairs.

    Args:
        a (np.ndarray): Complex matrix.

    Returns:
        list: Nested list with shape rows x cols x 2.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def decode_matrix(obj: Union[list, float, int]) -> np.ndarray:
    """Inverse of encode_matrix.

    Scalars and flat [re, im] pairs are accepted for m=1 measures.

    Args:
        obj: Nested list of [re, im] pairs, a single pair, or a real number.

    Returns:
        np.ndarray: Complex matrix.
    """
    if isinstance(obj, (int, float)):
        return np.array([[complex(obj)]])
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == 2:
        return np.array([[complex(arr[0], arr[1])]])
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError(f"Cannot decode matrix with shape {arr.shape}, expected rows x cols x 2.")
    return arr[..., 0] + 1j * arr[..., 1]


def fingerprint(config: dict) -> str:
    """Stable sha256 of a JSON-serializable configuration.

    Args:
        config (dict): Configuration.

    Returns:
        str: Hex digest.
    """
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def trapezoid_nodes(n_nodes: int, radius: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform nodes for the trapezoid rule on the circle |z| = radius.

    Args:
        n_nodes (int): Number of nodes M.
        radius (float, optional): Circle radius. Defaults to 1.0.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Angles on [0, 2π) and the points radius·e^{iθ}.
    """
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    return theta, radius * np.exp(1j * theta)


def quadrature_size(bandwidth: int, minimum: int = 64) -> int:
    """Power-of-two node count that integrates trigonometric polynomials of the given bandwidth exactly.

    Args:
        bandwidth (int): Largest |power| present in the integrand.
        minimum (int, optional): Lower bound on the node count. Defaults to 64.

    Returns:
        int: Node count.
    """
    size = minimum
    while size <= 2 * bandwidth + 1:
        size *= 2
    return size


def relative_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Residual ||lhs - rhs|| scaled by max(||lhs||, ||rhs||, 1).

    Args:
        lhs (np.ndarray): Left hand side.
        rhs (np.ndarray): Right hand side.

    Returns:
        float: Scaled residual.
    """
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1.0)
    return float(np.linalg.norm(lhs - rhs) / scale)


def sample_points(n: int, seed: int = DEFAULT_SEED, radii: Sequence[float] = SAMPLE_RADII) -> np.ndarray:
    """Seeded sample points with radii drawn from a fixed set and uniform angles.

    Args:
        n (int): Number of points.
        seed (int, optional): RNG seed. Defaults to 42.
        radii (Sequence[float], optional): Admissible radii. Defaults to (0.8, 1.0, 1.25).

    Returns:
        np.ndarray: Complex sample points.
    """
    rng = np.random.default_rng(seed)
    r = rng.choice(np.asarray(radii, dtype=float), size=n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return r * np.exp(1j * theta)


def sample_pairs(
    n: int, seed: int = DEFAULT_SEED, radii: Sequence[float] = SAMPLE_RADII, min_gap: float = 1e-6
) -> List[Tuple[complex, complex]]:
    """Seeded pairs (z, z') with |1 - conj(z) z'| bounded away from zero.

    Pairs too close to the diagonal singularity are rejected and redrawn.

    Args:
        n (int): Number of pairs.
        seed (int, optional): RNG seed. Defaults to 42.
        radii (Sequence[float], optional): Admissible radii. Defaults to (0.8, 1.0, 1.25).
        min_gap (float, optional): Rejection threshold for |1 - conj(z) z'|. Defaults to 1e-6.

    Returns:
        List[Tuple[complex, complex]]: Sample pairs.
    """
    rng = np.random.default_rng(seed)
    radii = np.asarray(radii, dtype=float)
    pairs: List[Tuple[complex, complex]] = []
    while len(pairs) < n:
        z, zp = (rng.choice(radii) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi)) for _ in range(2))
        if abs(1.0 - np.conj(z) * zp) < min_gap:
            continue
        pairs.append((complex(z), complex(zp)))
    return pairs


def as_diagonal(value: Union[complex, Iterable, np.ndarray], m: int) -> np.ndarray:
    """Coerce a scalar, a vector of diagonal entries, or a matrix into an m×m complex matrix.

    Args:
        value: Scalar, length-m sequence, or m×m matrix.
        m (int): Block size.

    Returns:
        np.ndarray: m×m complex matrix.
    """
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return complex(arr) * np.eye(m, dtype=complex)
    if arr.ndim == 1:
        if arr.shape[0] != m:
            raise ValueError(f"Expected {m} diagonal entries, got {arr.shape[0]}.")
        return np.diag(arr)
    if arr.shape != (m, m):
        raise ValueError(f"Expected a {m}x{m} matrix, got {arr.shape}.")
    return arr


def max_abs(a: np.ndarray) -> float:
    """Max |entry| of an array, 0.0 when empty."""
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0
