"""Writer for CSV and JSON result files."""
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from zenoifm.utils import format_float

logger = logging.getLogger(__name__)


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def _jsonable(value: Any) -> Any:
    """Plain Python types for json.dumps; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class OutputWriter:
    """
    Collects the files of one scenario run and writes them together.

    Nothing touches the output directory until commit(); each file is then written to
    a temporary file in the same directory and renamed into place.
    """

    def __init__(self, out_dir: Path, config_hash: str, seed: int):
        self.out_dir = Path(out_dir)
        self.config_hash = config_hash
        self.seed = seed
        self._staged: Dict[str, str] = {}

    @property
    def header_comment(self) -> str:
        return f"# seed={self.seed} config_sha256={self.config_hash}"

    @property
    def staged(self) -> List[str]:
        return list(self._staged)

    def add_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        lines = [self.header_comment, ",".join(header)]
        width = len(header)
        for row in rows:
            row = list(row)
            if len(row) != width:
                raise ValueError(f"{name}: row has {len(row)} cells, header has {width}")
            lines.append(",".join(_cell(value) for value in row))
        self._staged[name] = "\n".join(lines) + "\n"

    def add_json(self, name: str, payload: Dict[str, Any]) -> None:
        body = dict(payload)
        body["seed"] = self.seed
        body["config_hash"] = self.config_hash
        self._staged[name] = json.dumps(_jsonable(body), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def commit(self) -> List[Path]:
        """
        Write every staged file; returns the final paths.

        All temporary files are written before the first rename. If anything fails,
        the temporaries and any targets already renamed by this commit are removed.
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        pending: List[tuple[str, Path]] = []
        written: List[Path] = []
        try:
            for name, text in self._staged.items():
                fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.", suffix=".tmp")
                pending.append((tmp, self.out_dir / name))
                with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                    handle.write(text)
            for tmp, target in pending:
                os.replace(tmp, target)
                written.append(target)
        except BaseException:
            for tmp, _ in pending:
                if os.path.exists(tmp):
                    os.unlink(tmp)
            for target in written:
                target.unlink(missing_ok=True)
            logger.error("Commit to %s failed; no result files left behind", self.out_dir)
            raise
        for target in written:
            logger.info("Wrote %s", target)
        self._staged.clear()
        return written
