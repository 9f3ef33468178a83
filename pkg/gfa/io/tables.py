"""
CSV ingestion and emission for ensembles and fields

Matrices are stored with rows = cross-section index k and columns =
replicates or time, comma-separated, no header unless requested.
"""
import logging
import re
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from gfa.config import settings
from gfa.errors import ParseError

logger = logging.getLogger(__name__)

_LINE_IN_MESSAGE = re.compile(r"line (\d+)")


def read_matrix(path: Union[str, Path], header: bool = False) -> np.ndarray:
    """
    Read a numeric CSV matrix

    Args:
        path: CSV file
        header: skip a header row

    Returns:
        float matrix, rows as in the file

    Raises:
        ParseError: empty file, ragged rows or non-numeric cells, with the
            1-based row and column of the first offender
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path} not found")
    offset = 2 if header else 1
    try:
        df = pd.read_csv(path, header=0 if header else None, float_precision="round_trip",
                         skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path} is empty")
    except pd.errors.ParserError as e:
        match = _LINE_IN_MESSAGE.search(str(e))
        raise ParseError(f"ragged row in {path.name}: {e}", row=int(match.group(1)) if match else None)
    if df.empty:
        raise ParseError(f"{path} contains no data rows")

    numeric = df.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        cell = df.iat[r, c]
        reason = "missing value (ragged row)" if pd.isna(cell) else f"non-numeric cell '{cell}'"
        raise ParseError(reason, row=int(r) + offset, column=int(c) + 1)

    data = numeric.to_numpy(dtype=float)
    logger.debug("read %s: %d x %d", path, *data.shape)
    return data


def write_matrix(path: Union[str, Path], data: np.ndarray, header: bool = False,
                 columns: Optional[list] = None) -> Path:
    """Write a matrix with full round-trip precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.size == 0:
        path.write_text("")
        return path
    frame = pd.DataFrame(data, columns=columns or [f"c{j + 1}" for j in range(data.shape[1])])
    frame.to_csv(path, header=header, index=False, float_format=f"%.{settings.CSV_DIGITS}g")
    return path


def write_frame(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=f"%.{settings.CSV_DIGITS}g")
    return path
