"""Parameter checkpoints: name -> shape -> row-major values in one ``.npz`` file."""

from __future__ import annotations

import zipfile
from pathlib import Path

import numpy as np

from ..errors import DataError

FORMAT_VERSION = 1
_HEADER = "__format_version__"


def write_npz(path, arrays: dict[str, np.ndarray]) -> Path:
    """``np.savez`` layout with fixed member timestamps, so equal arrays give equal bytes."""
    path = Path(path)
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, np.asanyarray(arr), allow_pickle=False)
    return path


def save_checkpoint(path, arrays: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {name: np.ascontiguousarray(a) for name, a in arrays.items()}
    if _HEADER in payload:
        raise ValueError(f"{_HEADER} is reserved")
    payload[_HEADER] = np.array(FORMAT_VERSION)
    return write_npz(path, payload)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with np.load(Path(path), allow_pickle=False) as z:
        if _HEADER not in z.files:
            raise DataError(f"{path}: not a checkpoint (no format header)")
        version = int(z[_HEADER])
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: checkpoint format {version}, expected {FORMAT_VERSION}")
        return {k: z[k] for k in z.files if k != _HEADER}
