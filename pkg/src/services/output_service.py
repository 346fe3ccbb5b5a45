"""Artifact writing: CSV and JSON files with a reproducibility header."""
import csv
import io
import json
import math
import os
import tempfile
from typing import Any, Dict, Iterable, List, Sequence

from src import __version__


def _clean(value: Any) -> Any:
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and callable(value.item):  # numpy scalars
        return _clean(value.item())
    return value


def _write_atomic(path: str, text: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.splitext(path)[1])
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return path


def save_json(path: str, result: Any, config: Dict[str, Any]) -> str:
    payload = {"version": __version__, "config": _clean(config), "result": _clean(result)}
    return _write_atomic(path, json.dumps(payload, indent=2) + "\n")


def save_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]], config: Dict[str, Any]) -> str:
    """CSV with '#' comment lines carrying the version and resolved config."""
    buffer = io.StringIO()
    buffer.write(f"# version: {__version__}\n")
    buffer.write(f"# config: {json.dumps(_clean(config), sort_keys=True)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return _write_atomic(path, buffer.getvalue())


def load_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def load_csv(path: str) -> List[List[str]]:
    """Rows of a CSV artifact, header first, comment lines skipped."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return [row for row in csv.reader(line for line in f if not line.startswith("#"))]
