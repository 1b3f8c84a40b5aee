"""Text formats for matrices, datasets, and fit reports.

Matrix text format: optional comment lines starting with ``#``; one matrix
row per line with entries separated by commas or whitespace, in decimal or
scientific notation.  All writers emit full-precision values (``repr`` of
the float, which round-trips exactly).

Vector datasets are N-by-p matrices, one observation per row.  Matrix
datasets carry a header line ``N p q`` followed by N blocks of p rows by
q columns, blocks separated by a blank line.
"""

from __future__ import annotations

import numpy as np

from .errors import MatrixFormatError
from .matsl import MatslSample
from .mvsl import MvslSample


def _tokenized_lines(text: str) -> list[list[str]]:
    """Non-empty data lines as token lists; comments stripped, blanks dropped."""
    rows = []
    for line in text.splitlines():
        data = line.split("#", 1)[0].replace(",", " ").strip()
        if data:
            rows.append(data.split())
    return rows


def _rows_to_array(rows: list[list[str]], source: str) -> np.ndarray:
    if not rows:
        raise MatrixFormatError(f"{source}: no data rows found")
    width = len(rows[0])
    values = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise MatrixFormatError(
                f"{source}: row {i + 1} has {len(row)} entries, expected {width}"
            )
        try:
            values.append([float(tok) for tok in row])
        except ValueError as exc:
            raise MatrixFormatError(f"{source}: row {i + 1}: {exc}") from exc
    m = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise MatrixFormatError(f"{source}: non-finite entries are not allowed")
    return m


def parse_matrix(text: str, source: str = "matrix") -> np.ndarray:
    return _rows_to_array(_tokenized_lines(text), source)


def read_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix(fh.read(), source=str(path))


def format_matrix(m: np.ndarray, comment: str | None = None) -> str:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.extend(" ".join(repr(float(v)) for v in row) for row in m)
    return "\n".join(lines) + "\n"


def write_matrix(path, m: np.ndarray, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix(m, comment))


def read_vector_dataset(path) -> MvslSample:
    """Read an N-by-p dataset (one observation per row)."""
    return MvslSample(read_matrix(path))


def write_vector_dataset(path, data: MvslSample, comment: str | None = None) -> None:
    write_matrix(path, data.observations, comment)


def parse_matrix_dataset(text: str, source: str = "dataset") -> MatslSample:
    rows = _tokenized_lines(text)
    if not rows:
        raise MatrixFormatError(f"{source}: empty dataset")
    header = rows[0]
    if len(header) != 3:
        raise MatrixFormatError(
            f"{source}: expected header 'N p q', got {' '.join(header)!r}"
        )
    try:
        n, p, q = (int(tok) for tok in header)
    except ValueError as exc:
        raise MatrixFormatError(f"{source}: malformed header: {exc}") from exc
    if n < 1 or p < 1 or q < 1:
        raise MatrixFormatError(f"{source}: header values must be positive")
    body = rows[1:]
    if len(body) != n * p:
        raise MatrixFormatError(
            f"{source}: expected {n * p} data rows for N={n}, p={p}, got {len(body)}"
        )
    flat = _rows_to_array(body, source)
    if flat.shape[1] != q:
        raise MatrixFormatError(
            f"{source}: rows have {flat.shape[1]} entries, header says q={q}"
        )
    return MatslSample(flat.reshape(n, p, q))


def read_matrix_dataset(path) -> MatslSample:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix_dataset(fh.read(), source=str(path))


def format_matrix_dataset(data: MatslSample, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"{data.n} {data.p} {data.q}")
    for block in data.observations:
        for row in block:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def write_matrix_dataset(path, data: MatslSample, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix_dataset(data, comment))
