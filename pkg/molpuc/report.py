"""Verification reports."""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
from tabulate import tabulate

from .utils import DEFAULT_SEED, VERBOSE_LVL, get_default_fs

logger = logging.getLogger(__name__)

ITEM_COLUMNS = ["id", "indices", "residual", "anchor"]
FORMATS = ("json", "csv")

ResidualValue = Union[float, Tuple[Sequence[int], float]]


def _load_anchors() -> Dict[str, Dict[str, str]]:
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "anchors.json")
    with open(path, encoding="utf-8") as f:
        return json.load(f)


ANCHORS = _load_anchors()


def anchor_for(check: str, item_id: str) -> str:
    """Anchor phrase of the identity an item checks.

    The longest prefix of the item id listed for the suite wins; the empty prefix is the suite default.

    Args:
        check (str): Suite name.
        item_id (str): Item id.

    Returns:
        str: the anchor, empty for suites without one.
    """
    table = ANCHORS.get(check, {})
    matches = [prefix for prefix in table if item_id.startswith(prefix)]
    return table[max(matches, key=len)] if matches else ""


def _clean(residual) -> float:
    # NaN means the item could not be evaluated and counts as a failure.
    value = float(residual)
    return math.inf if math.isnan(value) else value


@dataclass
class Report:
    """Outcome of one verification suite.

    The report passes iff its largest residual is strictly below the tolerance.
    Items are kept in insertion order and only ever appended.
    """

    check: str
    measure: str
    blocks: int
    tol: float
    seed: int = DEFAULT_SEED
    items: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=ITEM_COLUMNS))

    @staticmethod
    def from_residuals(
        check: str,
        measure: str,
        blocks: int,
        tol: float,
        residuals: Dict[str, ResidualValue],
        seed: int = DEFAULT_SEED,
    ) -> "Report":
        """Build a report from a mapping of identity id to residual.

        Args:
            check (str): Suite name.
            measure (str): Measure fingerprint.
            blocks (int): Truncation size N.
            tol (float): Pass threshold.
            residuals (Dict[str, ResidualValue]): Residual per identity, or an (indices, residual) pair.
            seed (int, optional): RNG seed used for the samples. Defaults to 42.

        Returns:
            Report: the report.
        """
        report = Report(check, measure, blocks, tol, seed)
        for key, value in residuals.items():
            if isinstance(value, tuple):
                report.add(key, value[1], value[0])
            else:
                report.add(key, value)
        return report

    def add(self, item_id: str, residual: float, indices: Sequence[int] = (), anchor: str = None) -> None:
        """Append an item, its anchor looked up from the suite and id unless given."""
        anchor = anchor if anchor is not None else anchor_for(self.check, item_id)
        row = pd.DataFrame([[item_id, [int(i) for i in indices], _clean(residual), anchor]], columns=ITEM_COLUMNS)
        self.items = row if self.items.empty else pd.concat([self.items, row], ignore_index=True)

    def extend(self, other: "Report", prefix: str = "") -> None:
        """Append the items of another report, ids optionally prefixed."""
        for _, row in other.items.iterrows():
            self.add(f"{prefix}{row['id']}", row["residual"], row["indices"], row["anchor"])

    @property
    def max_residual(self) -> float:
        """Largest residual, 0.0 for an empty report."""
        return float(self.items["residual"].max()) if len(self.items) else 0.0

    @property
    def passed(self) -> bool:
        """max_residual < tol."""
        return self.max_residual < self.tol

    def first_failure(self) -> Optional[dict]:
        """First item at or above the tolerance, None when the report passes."""
        failing = self.items[self.items["residual"] >= self.tol]
        if failing.empty:
            return None
        row = failing.iloc[0]
        return {
            "id": row["id"],
            "indices": list(row["indices"]),
            "residual": float(row["residual"]),
            "anchor": row["anchor"],
        }

    def to_dict(self) -> dict:
        """JSON-ready dictionary with the documented schema plus the seed."""
        return {
            "check": self.check,
            "measure": self.measure,
            "blocks": int(self.blocks),
            "tol": float(self.tol),
            "seed": int(self.seed),
            "max_residual": _json_float(self.max_residual),
            "pass": bool(self.passed),
            "items": [
                {"id": r["id"], "indices": list(r["indices"]), "residual": _json_float(r["residual"]), "anchor": r["anchor"]}
                for _, r in self.items.iterrows()
            ],
        }

    def to_json(self) -> str:
        """Deterministic JSON text."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_frame(self) -> pd.DataFrame:
        """Items with the report header repeated on every row."""
        df = self.items.copy()
        df["indices"] = df["indices"].map(lambda ix: ",".join(str(i) for i in ix))
        df.insert(0, "check", self.check)
        df["tol"] = self.tol
        df["pass"] = df["residual"] < self.tol
        return df

    def write(self, out_dir: str, fmt: str = "json", fs=None) -> str:
        """Write the report as {out_dir}/{check}.{fmt}.

        Args:
            out_dir (str): Output folder, created if missing.
            fmt (str, optional): "json" or "csv". Defaults to "json".
            fs (fsspec.filesystem, optional): Filesystem. Defaults to the FS_PROTOCOL default.

        Returns:
            str: the path written.
        """
        if fmt not in FORMATS:
            raise ValueError(f"Unsupported report format {fmt}, expected one of {FORMATS}.")
        fs = fs if fs else get_default_fs()
        fs.mkdirs(out_dir, exist_ok=True)
        path = f"{out_dir}/{self.check}.{fmt}"
        with fs.open(path, "w", encoding="utf-8") as f:
            if fmt == "json":
                f.write(self.to_json())
            else:
                f.write(self.to_frame().to_csv(index=False))
        logger.log(VERBOSE_LVL, f"Report {self.check} written to {path}")
        return path

    def summary(self) -> str:
        """One-row table for the terminal."""
        return summary_table([self])

    def __repr__(self) -> str:
        return f"Report({self.check}, items={len(self.items)}, max_residual={self.max_residual:.3e}, pass={self.passed})"


def _json_float(value: float):
    # json has no infinity; unevaluable items are written as null.
    return None if math.isinf(value) else float(value)


def summary_table(reports: List[Report]) -> str:
    """psql table with one line per report."""
    rows = []
    for r in reports:
        failure = r.first_failure()
        rows.append([r.check, len(r.items), f"{r.max_residual:.3e}", r.tol, "PASS" if r.passed else "FAIL",
                     failure["id"] if failure else "", failure["anchor"] if failure else ""])
    headers = ["check", "items", "max_residual", "tol", "verdict", "first failure", "anchor"]
    return tabulate(rows, headers=headers, tablefmt="psql")
