"""Synthetic instance generation and matrix file formats.

Generators are deterministic functions of their parameters and seed.
File support covers MatrixMarket (array and coordinate, real general),
dense CSV, and the tab-separated MovieLens ratings format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InvalidParameterError, ObservedMask, as_matrix

__all__ = [
    "ParseError",
    "gen_lowrank",
    "add_noise_snr",
    "sample_mask",
    "MovielensData",
    "read_movielens",
    "read_matrix",
    "write_matrix",
    "write_mask_coordinate",
]

MM_HEADER_COORD = "%%MatrixMarket matrix coordinate real general"
MM_HEADER_ARRAY = "%%MatrixMarket matrix array real general"

# Above this entry count completion data stays as triples, never densified.
DENSIFY_LIMIT = 10_000_000


class ParseError(ValueError):
    """Malformed input file; carries the offending location."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


def gen_lowrank(m: int, n: int, r: int, dist: str, seed: int) -> np.ndarray:
    """Rank-r product of random factors: Gaussian or uniform nonnegative."""
    if r < 1 or r > min(m, n):
        raise InvalidParameterError("need 1 <= r <= min(m, n)")
    rng = np.random.default_rng(seed)
    if dist == "gaussian":
        u0 = rng.standard_normal((m, r))
        v0 = rng.standard_normal((n, r))
    elif dist == "uniform01":
        u0 = rng.uniform(0.0, 1.0, (m, r))
        v0 = rng.uniform(0.0, 1.0, (n, r))
    else:
        raise InvalidParameterError(f"unknown distribution {dist!r}")
    return u0 @ v0.T


def add_noise_snr(x0, snr_db: float, seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise with variance ||X0||_F^2 / (m n 10^(snr/10))."""
    x0 = as_matrix(x0, "x0")
    if math.isinf(snr_db) and snr_db > 0:
        return x0.copy()
    m, n = x0.shape
    sigma2 = float(np.sum(x0 * x0)) / (m * n * 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return x0 + rng.standard_normal((m, n)) * math.sqrt(sigma2)


def sample_mask(m: int, n: int, card: int, seed: int) -> ObservedMask:
    """Uniformly random set of exactly ``card`` distinct observed entries."""
    if card < 1 or card > m * n:
        raise InvalidParameterError("need 1 <= card <= m*n")
    rng = np.random.default_rng(seed)
    flat = rng.choice(m * n, size=card, replace=False)
    ri, ci = np.divmod(np.sort(flat), n)
    return ObservedMask(m, n, ri, ci)


@dataclass(frozen=True)
class MovielensData:
    """Parsed ratings: dense matrix (or triples for very large grids),
    observed mask, and the count of duplicate (user, item) lines."""

    y: np.ndarray | list
    mask: ObservedMask
    duplicates: int


def read_movielens(path) -> MovielensData:
    """Parse tab-separated ``user  item  rating  timestamp`` lines.

    1-indexed ids map to 0-indexed rows/cols; on duplicate (user, item)
    pairs the last rating wins.  Timestamps are discarded.
    """
    entries: dict[tuple[int, int], float] = {}
    duplicates = 0
    n_lines = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            n_lines += 1
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(
                    f"expected 4 tab-separated fields, got {len(parts)}", path, lineno
                )
            try:
                user, item, rating = int(parts[0]), int(parts[1]), int(parts[2])
                int(parts[3])
            except ValueError:
                raise ParseError("non-integer field", path, lineno) from None
            if not 1 <= rating <= 5:
                raise ParseError(f"rating {rating} outside 1..5", path, lineno)
            if user < 1 or item < 1:
                raise ParseError("user/item ids must be >= 1", path, lineno)
            key = (user - 1, item - 1)
            if key in entries:
                duplicates += 1
            entries[key] = float(rating)
    if not entries:
        raise ParseError("no rating entries found", path)
    rows = max(k[0] for k in entries) + 1
    cols = max(k[1] for k in entries) + 1
    pairs = sorted(entries)
    mask = ObservedMask.from_pairs(rows, cols, pairs)
    if rows * cols <= DENSIFY_LIMIT:
        y = np.zeros((rows, cols))
        for (i, j), val in entries.items():
            y[i, j] = val
    else:
        y = [(i, j, entries[(i, j)]) for (i, j) in pairs]
    return MovielensData(y=y, mask=mask, duplicates=duplicates)


def _read_tokens(path):
    with open(path) as fh:
        lines = fh.readlines()
    return lines


def _parse_float(tok: str, path, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"non-numeric token {tok!r}", path, lineno) from None


def _read_mm(path):
    lines = _read_tokens(path)
    if not lines:
        raise ParseError("empty file", path)
    header = lines[0].strip()
    if header == MM_HEADER_COORD:
        coordinate = True
    elif header == MM_HEADER_ARRAY:
        coordinate = False
    else:
        raise ParseError(f"unsupported MatrixMarket header {header!r}", path, 1)
    body = [
        (i + 1, ln.strip())
        for i, ln in enumerate(lines[1:], start=1)
        if ln.strip() and not ln.lstrip().startswith("%")
    ]
    if not body:
        raise ParseError("missing size line", path)
    size_line_no, size_line = body[0]
    size_tokens = size_line.split()
    if coordinate:
        if len(size_tokens) != 3:
            raise ParseError("coordinate size line needs rows cols nnz", path, size_line_no + 1)
        rows, cols, nnz = (int(t) for t in size_tokens)
        out = np.zeros((rows, cols))
        data = body[1:]
        if len(data) != nnz:
            raise ParseError(f"expected {nnz} entries, found {len(data)}", path)
        for lineno, entry in data:
            toks = entry.split()
            if len(toks) != 3:
                raise ParseError("coordinate entry needs i j value", path, lineno + 1)
            i, j = int(toks[0]), int(toks[1])
            val = _parse_float(toks[2], path, lineno + 1)
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise ParseError(f"index ({i}, {j}) out of bounds", path, lineno + 1)
            out[i - 1, j - 1] = val
        return out
    if len(size_tokens) != 2:
        raise ParseError("array size line needs rows cols", path, size_line_no + 1)
    rows, cols = (int(t) for t in size_tokens)
    values = []
    for lineno, entry in body[1:]:
        for tok in entry.split():
            values.append(_parse_float(tok, path, lineno + 1))
    if len(values) != rows * cols:
        raise ParseError(f"expected {rows * cols} values, found {len(values)}", path)
    # MatrixMarket array format is column-major.
    return np.array(values).reshape((cols, rows)).T


def _read_csv(path):
    rows = []
    width = None
    lines = _read_tokens(path)
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        toks = line.split(",")
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise ParseError(f"ragged row ({len(toks)} vs {width} columns)", path, lineno)
        rows.append([_parse_float(t, path, lineno) for t in toks])
    if not rows:
        raise ParseError("empty file", path)
    return np.array(rows)


def read_coordinate(path) -> tuple[np.ndarray, ObservedMask]:
    """Read a MatrixMarket coordinate file as (dense matrix, observed mask).

    The listed entries define the observation set; everything else is 0.
    """
    lines = _read_tokens(path)
    if not lines or lines[0].strip() != MM_HEADER_COORD:
        raise ParseError("expected a MatrixMarket coordinate header", path, 1)
    y = _read_mm(path)
    pairs = []
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    for entry in body[1:]:
        toks = entry.split()
        pairs.append((int(toks[0]) - 1, int(toks[1]) - 1))
    mask = ObservedMask.from_pairs(y.shape[0], y.shape[1], sorted(set(pairs)))
    return y, mask


def read_matrix(path, fmt: str) -> np.ndarray:
    """Read a dense matrix from a MatrixMarket (``mm``) or ``csv`` file."""
    if fmt == "mm":
        out = _read_mm(path)
    elif fmt == "csv":
        out = _read_csv(path)
    else:
        raise InvalidParameterError(f"unknown format {fmt!r}")
    if not np.all(np.isfinite(out)):
        raise ParseError("file contains non-finite values", path)
    return out


def write_matrix(path, a, fmt: str) -> None:
    """Write a dense matrix with full round-trip precision."""
    a = as_matrix(a)
    rows, cols = a.shape
    if fmt == "mm":
        with open(path, "w") as fh:
            fh.write(MM_HEADER_ARRAY + "\n")
            fh.write(f"{rows} {cols}\n")
            for j in range(cols):
                for i in range(rows):
                    fh.write(f"{a[i, j]:.17g}\n")
    elif fmt == "csv":
        with open(path, "w") as fh:
            for i in range(rows):
                fh.write(",".join(f"{x:.17g}" for x in a[i]) + "\n")
    else:
        raise InvalidParameterError(f"unknown format {fmt!r}")


def write_mask_coordinate(path, y, mask: ObservedMask) -> None:
    """Write observed entries as a MatrixMarket coordinate file."""
    y = as_matrix(y, "y")
    with open(path, "w") as fh:
        fh.write(MM_HEADER_COORD + "\n")
        fh.write(f"{mask.rows} {mask.cols} {mask.card}\n")
        for i, j in zip(mask.row_idx, mask.col_idx):
            fh.write(f"{i + 1} {j + 1} {y[i, j]:.17g}\n")
