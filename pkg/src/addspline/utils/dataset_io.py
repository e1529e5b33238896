"""
Reading and writing datasets, MSE curves and slope tables as CSV/JSON.
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from src.addspline.exceptions import DatasetError
from src.addspline.models.experiment import MseCurve, MsePoint, SlopeFit
from src.addspline.models.scenario import Dataset
from src.addspline.utils.logger import logger

PathLike = Union[str, Path]

DATASET_COLUMNS = ("x", "z", "y")
MSE_COLUMNS = ("estimator", "n", "mse", "stderr", "replicates")
SLOPE_COLUMNS = ("estimator", "slope", "intercept", "theoretical_slope", "n_min")


def format_float(value: float) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(value))


def sidecar_path(csv_path: PathLike) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    """Write a JSON document with sorted keys so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise OSError(f"Could not write {path}: {e}") from e
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"JSON file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DatasetError(f"Invalid JSON in {path}: {e}") from e


def write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV file with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    except OSError as e:
        raise OSError(f"Could not write {path}: {e}") from e
    return path


def read_columns(path: PathLike, required: Sequence[str]) -> Dict[str, List[str]]:
    """
    Read a headed CSV file into columns of raw strings.

    Raises:
        FileNotFoundError: If the file doesn't exist
        DatasetError: If the file is empty or a required column is missing
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if not reader.fieldnames:
                raise DatasetError(f"{path} is empty")
            header = [name.strip() for name in reader.fieldnames]
            for column in required:
                if column not in header:
                    raise DatasetError(f"{path} is missing required column '{column}'")
            columns: Dict[str, List[str]] = {name: [] for name in header}
            for row in reader:
                if not any((value or "").strip() for value in row.values()):
                    continue
                for raw_name, value in row.items():
                    if raw_name is None:
                        raise DatasetError(f"{path} line {reader.line_num}: too many fields")
                    columns[raw_name.strip()].append((value or "").strip())
    except UnicodeDecodeError:
        raise DatasetError(f"{path} is not a valid UTF-8 encoded CSV file")
    except csv.Error as e:
        raise DatasetError(f"Invalid CSV format in {path}: {e}")
    return columns


def _floats(path: PathLike, name: str, raw: List[str]) -> np.ndarray:
    try:
        values = np.array([float(v) for v in raw], dtype=float)
    except ValueError as e:
        raise DatasetError(f"{path}: column '{name}' contains a non-numeric value ({e})")
    if not np.all(np.isfinite(values)):
        raise DatasetError(f"{path}: column '{name}' contains non-finite values")
    return values


def read_dataset(path: PathLike) -> Dataset:
    """
    Read an x,z,y CSV file and its optional JSON sidecar.

    Returns:
        Dataset (seed -1 and scenario_ref "external" when no sidecar exists)
    """
    columns = read_columns(path, DATASET_COLUMNS)
    x, z, y = (_floats(path, name, columns[name]) for name in DATASET_COLUMNS)
    if len(y) < 2:
        raise DatasetError(f"{path} needs at least 2 observations, found {len(y)}")
    metadata: Dict[str, Any] = {}
    seed, scenario_ref = -1, "external"
    sidecar = sidecar_path(path)
    if sidecar.exists():
        metadata = read_json(sidecar)
        seed = int(metadata.pop("seed", seed))
        scenario_ref = str(metadata.pop("scenario_ref", scenario_ref))
        metadata.pop("n", None)
    logger.info(f"Read {len(y)} observations from {path}")
    return Dataset(x=x, z=z, y=y, seed=seed, scenario_ref=scenario_ref, metadata=metadata)


def write_dataset(dataset: Dataset, path: PathLike) -> Path:
    """Write the dataset as x,z,y CSV plus a JSON sidecar with its metadata."""
    path = write_rows(path, DATASET_COLUMNS, zip(dataset.x, dataset.z, dataset.y))
    write_json(sidecar_path(path), dataset.to_dict())
    logger.info(f"Wrote {dataset.n} observations to {path}")
    return path


def write_mse_csv(curves: Sequence[MseCurve], path: PathLike) -> Path:
    rows = (
        (curve.estimator_id, p.n, p.mse_mean, p.mse_stderr, p.replicates)
        for curve in curves for p in curve.points
    )
    return write_rows(path, MSE_COLUMNS, rows)


def read_mse_csv(path: PathLike) -> List[MseCurve]:
    """Parse an MSE CSV back into curves, in order of first appearance."""
    columns = read_columns(path, MSE_COLUMNS)
    points: Dict[str, List[MsePoint]] = {}
    try:
        for estimator, n, mse, stderr, replicates in zip(*(columns[c] for c in MSE_COLUMNS)):
            points.setdefault(estimator, []).append(
                MsePoint(int(n), float(mse), float(stderr), int(replicates))
            )
    except ValueError as e:
        raise DatasetError(f"{path}: malformed MSE row ({e})")
    return [MseCurve(estimator, sorted(pts, key=lambda p: p.n)) for estimator, pts in points.items()]


def write_slopes_csv(slopes: Sequence[SlopeFit], path: PathLike) -> Path:
    rows = (
        (s.estimator_id, s.slope, s.intercept, s.theoretical_slope, s.n_min)
        for s in slopes
    )
    return write_rows(path, SLOPE_COLUMNS, rows)
