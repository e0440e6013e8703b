"""
Writers for report.json, report.csv, error.json and field dumps
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np

from ..core.errors import HomogError
from ..models.fields import FlowField, GridFunction
from ..models.report import CSV_COLUMNS, RateReport

logger = logging.getLogger(__name__)


def _default(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def write_json(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_default)
        f.write("\n")
    logger.info("wrote %s", path)
    return path


def write_csv(path: Path, header: List[str], rows: Iterable[List[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    logger.info("wrote %s", path)
    return path


def write_rate_report(report: RateReport, out_dir: Path) -> Dict[str, Path]:
    """report.json (with metadata) and report.csv (bitwise reproducible columns)"""
    out_dir = Path(out_dir)
    return {
        "json": write_json(out_dir / "report.json", report.to_dict()),
        "csv": write_csv(out_dir / "report.csv", list(CSV_COLUMNS),
                         (r.csv_row() for r in report.rows)),
    }


def write_error(error: HomogError, out_dir: Path) -> Path:
    return write_json(Path(out_dir) / "error.json", error.to_dict())


def _field_rows(f: GridFunction) -> List[List[float]]:
    nodes = f.mesh.node_coordinates(f.order)
    return np.hstack([nodes, f.values.T]).tolist()


def dump_field(f: GridFunction, path: Path, name: str) -> Dict[str, Path]:
    """Nodal values as name.csv plus a name.json sidecar describing the space"""
    path = Path(path)
    d = f.mesh.dim
    header = [f"x{k + 1}" for k in range(d)] + [f"{name}{c}" for c in range(f.n_components)]
    meta = {
        "name": name,
        "space": f.space_tag.value,
        "n": f.mesh.n,
        "origin": f.mesh.origin,
        "length": f.mesh.length,
        "columns": header,
    }
    return {
        "csv": write_csv(path / f"{name}.csv", header, _field_rows(f)),
        "json": write_json(path / f"{name}.json", meta),
    }


def dump_flow(flow: FlowField, path: Path, prefix: str) -> List[Path]:
    written = []
    for name, f in ((f"{prefix}_u", flow.u), (f"{prefix}_p", flow.p)):
        written.extend(dump_field(f, path, name).values())
    return written
