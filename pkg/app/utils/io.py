import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel

from app.models.analysis import Marginal, PhaseSpaceDistribution
from app.models.classical import EnsembleResult
from app.utils.errors import AnalysisError

SNAPSHOT_COLUMNS = ["snapshot_index", "t", "x_m", "p_over_momega_m", "trajectory_index"]


def format_float(value: float) -> str:
    """64비트 부동소수점의 왕복 가능한 최단 10진 표현"""
    return repr(float(value))


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"JSON으로 직렬화할 수 없는 타입: {type(obj).__name__}")


class ArtifactWriter:
    """출력 디렉토리에 결과 파일을 기록하는 클래스"""

    def __init__(self, output_dir: Path):
        """
        Args:
            output_dir: 출력 디렉토리 (없으면 생성)
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[str] = []

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _record(self, path: Path) -> Path:
        self.written.append(path.name)
        logger.debug(f"파일 저장: {path}")
        return path

    def write_json(self, name: str, data: Any) -> Path:
        """JSON 저장 (키 정렬, 유한하지 않은 값은 null)"""
        path = self.path(name)
        payload = _sanitize(json.loads(json.dumps(data, default=_to_jsonable)))
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True, default=_to_jsonable)
            f.write("\n")
        return self._record(path)

    def write_columns(self, name: str, columns: Mapping[str, Sequence[float]]) -> Path:
        """같은 길이의 열들을 CSV로 저장합니다."""
        path = self.path(name)
        header = list(columns)
        rows = zip(*(np.asarray(columns[key]).ravel() for key in header))
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format_cell(v) for v in row])
        return self._record(path)

    def write_snapshots(self, name: str, result: EnsembleResult) -> Path:
        """스냅샷 점구름 CSV (snapshot_index, t, x_m, p_over_momega_m, trajectory_index)"""
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SNAPSHOT_COLUMNS)
            for k, (t, points, ids) in enumerate(
                zip(result.snapshot_times, result.snapshots, result.snapshot_trajectories)
            ):
                for (x, p), idx in zip(points, ids):
                    writer.writerow([k, format_float(t), format_float(x), format_float(p), int(idx)])
        return self._record(path)

    def write_density(self, name: str, d: PhaseSpaceDistribution) -> Path:
        xc, pc = np.meshgrid(d.x_centers, d.p_centers, indexing="ij")
        return self.write_columns(name, {"x_m": xc, "p_over_momega_m": pc, "density": d.density})

    def write_marginal(self, name: str, m: Marginal) -> Path:
        return self.write_columns(name, {"x_m": m.x, "density": m.density})

    def write_matrix(self, name: str, matrix: np.ndarray, header: Dict[str, Any]) -> Path:
        """행 우선 float64 이진 행렬 + JSON 헤더 (name.json)"""
        path = self.path(name)
        data = np.ascontiguousarray(matrix, dtype="<f8")
        data.tofile(path)
        meta = dict(header)
        meta.update({"shape": list(data.shape), "dtype": "float64", "order": "row-major", "byteorder": "little"})
        self.write_json(path.stem + ".json", meta)
        return self._record(path)

    def write_gnuplot_grid(self, name: str, x: np.ndarray, y: np.ndarray, values: np.ndarray) -> Path:
        """gnuplot splot용 'x y 값' 열, x 행마다 빈 줄"""
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            f.write("# x y value\n")
            for i, xv in enumerate(x):
                for j, yv in enumerate(y):
                    f.write(f"{format_float(xv)} {format_float(yv)} {format_float(values[i, j])}\n")
                f.write("\n")
        return self._record(path)

    def write_gnuplot_columns(self, name: str, columns: Mapping[str, Sequence[float]]) -> Path:
        path = self.path(name)
        header = list(columns)
        with open(path, "w", encoding="utf-8") as f:
            f.write("# " + " ".join(header) + "\n")
            for row in zip(*(np.asarray(columns[key]).ravel() for key in header)):
                f.write(" ".join(format_float(v) for v in row) + "\n")
        return self._record(path)


def _sanitize(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_sanitize(v) for v in obj]
    return obj


def _format_cell(value: Any) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def _read_rows(path: Path) -> Tuple[List[str], List[List[str]]]:
    path = Path(path)
    if not path.exists():
        raise AnalysisError(f"입력 파일이 없습니다: {path}", operation="read_input")
    with open(path, encoding="utf-8", newline="") as f:
        rows = [row for row in csv.reader(f) if row and not row[0].startswith("#")]
    if not rows:
        raise AnalysisError(f"입력 파일이 비어 있습니다: {path}", operation="read_input")
    try:
        float(rows[0][0])
        return [], rows
    except ValueError:
        return [c.strip() for c in rows[0]], rows[1:]


def read_trace_csv(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """(t, x) 시계열 CSV를 읽습니다. 헤더 행은 선택."""
    header, rows = _read_rows(path)
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise AnalysisError(f"(t, x) 두 열이 필요합니다: {path}", operation="read_input")
    if header and "t" in header and "x" in header:
        return data[:, header.index("t")], data[:, header.index("x")]
    return data[:, 0], data[:, 1]


def read_snapshots_csv(path: Path) -> Dict[int, Tuple[float, np.ndarray]]:
    """스냅샷 CSV → {snapshot_index: (t, (n, 2) 점 배열)}"""
    header, rows = _read_rows(path)
    if header[: len(SNAPSHOT_COLUMNS)] != SNAPSHOT_COLUMNS:
        raise AnalysisError(f"스냅샷 CSV 헤더가 아닙니다: {path}", operation="read_input")
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise AnalysisError(f"스냅샷 CSV에 데이터 행이 없습니다: {path}", operation="read_input")
    snapshots = {}
    for k in np.unique(data[:, 0]).astype(int):
        sel = data[:, 0] == k
        snapshots[int(k)] = (float(data[sel, 1][0]), data[sel][:, 2:4].copy())
    return snapshots


def is_snapshot_csv(path: Path) -> bool:
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    return first.split(",")[: len(SNAPSHOT_COLUMNS)] == SNAPSHOT_COLUMNS


def sample_rate_of(times: np.ndarray) -> float:
    """등간격 시계열의 샘플링 주파수"""
    steps = np.diff(times)
    if steps.size == 0 or np.any(steps <= 0):
        raise AnalysisError("시각이 증가하지 않습니다", operation="read_input")
    dt = float(np.median(steps))
    if np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise AnalysisError("시계열이 등간격이 아닙니다", operation="read_input")
    return 1.0 / dt

