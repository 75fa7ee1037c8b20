"""Dense matrix text files and problem files built from them.

A matrix block is a header line ``rows cols`` followed by ``rows * cols``
whitespace-separated reals in row-major order (line breaks anywhere).  A
problem file holds two matrix blocks, the data matrix and then the target as
a ``rows 1`` block, followed by a parameters block::

    # comment lines start with '#'
    3 2
    1.0 0.0
    0.0 1.0
    1.0 1.0
    3 1
    1.0 2.0 3.0
    params
    lambda 0.1

For a Lasso file the matrix is ``A`` (``n x m``) and the target ``b``; for a
ridge file they are ``X`` (``m`` samples as rows) and ``y``.  Values are
written with :func:`repr` so that files round-trip exactly.
"""

from __future__ import annotations

from typing import Dict, Iterator, Tuple

import numpy as np

from .errors import StructuralError

__all__ = ["read_matrix_text", "write_matrix_text", "read_problem_file", "write_problem_file"]

_PARAMS = "params"


def _tokens(text: str) -> Iterator[Tuple[int, str]]:
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for tok in line.split():
            yield lineno, tok


class _Reader:
    def __init__(self, text: str, source: str):
        self.toks = list(_tokens(text))
        self.pos = 0
        self.source = source

    def error(self, msg: str) -> StructuralError:
        line = self.toks[min(self.pos, len(self.toks) - 1)][0] if self.toks else 0
        return StructuralError(f"{self.source}:{line}: {msg}")

    def peek(self):
        return self.toks[self.pos][1] if self.pos < len(self.toks) else None

    def take(self, what: str) -> str:
        if self.pos >= len(self.toks):
            raise self.error(f"unexpected end of input, expected {what}")
        tok = self.toks[self.pos][1]
        self.pos += 1
        return tok

    def integer(self, what: str) -> int:
        tok = self.take(what)
        try:
            val = int(tok)
        except ValueError:
            raise self.error(f"expected integer {what}, got {tok!r}") from None
        if val < 1:
            raise self.error(f"{what} must be positive, got {val}")
        return val

    def matrix(self) -> np.ndarray:
        rows = self.integer("row count")
        cols = self.integer("column count")
        vals = np.empty(rows * cols)
        for j in range(vals.size):
            tok = self.take(f"entry {j + 1} of {rows * cols}")
            try:
                vals[j] = float(tok)
            except ValueError:
                raise self.error(f"expected a real number, got {tok!r}") from None
        if not np.all(np.isfinite(vals)):
            raise self.error("matrix entries must be finite")
        return vals.reshape(rows, cols)


def read_matrix_text(text: str, source: str = "<string>") -> np.ndarray:
    """Parse exactly one matrix block."""
    r = _Reader(text, source)
    M = r.matrix()
    if r.peek() is not None:
        raise r.error(f"trailing data after the matrix: {r.peek()!r}")
    return M


def _matrix_lines(M: np.ndarray):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    yield f"{M.shape[0]} {M.shape[1]}"
    for row in M:
        yield " ".join(repr(float(v)) for v in row)


def write_matrix_text(M) -> str:
    return "\n".join(_matrix_lines(M)) + "\n"


def read_problem_file(path) -> Tuple[np.ndarray, np.ndarray, Dict[str, float]]:
    """Return ``(matrix, target, params)`` from a problem file."""
    with open(path) as fh:
        r = _Reader(fh.read(), str(path))
    M = r.matrix()
    t = r.matrix()
    if t.shape[1] != 1:
        raise r.error(f"target must be a single column, got shape {t.shape}")
    if t.shape[0] != M.shape[0]:
        raise r.error(f"target has {t.shape[0]} rows, matrix has {M.shape[0]}")
    params: Dict[str, float] = {}
    if r.peek() is not None:
        if r.take("params") != _PARAMS:
            raise r.error("expected the 'params' block after the target")
        while r.peek() is not None:
            key = r.take("parameter name")
            tok = r.take(f"value of {key}")
            if key in params:
                raise r.error(f"duplicate parameter {key!r}")
            try:
                params[key] = float(tok)
            except ValueError:
                raise r.error(f"parameter {key!r}: expected a real, got {tok!r}") from None
    return M, t[:, 0], params


def write_problem_file(path, M, target, params: Dict[str, float]) -> None:
    lines = list(_matrix_lines(M))
    lines += list(_matrix_lines(np.asarray(target, dtype=float).reshape(-1, 1)))
    lines.append(_PARAMS)
    lines += [f"{k} {float(v)!r}" for k, v in params.items()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
