"""Matrix Market and plain-text vector exchange."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .assembly import is_symmetric


def write_matrix(path, mat, symmetric=None) -> Path:
    """Write ``mat`` in coordinate real format.

    ``symmetric=None`` picks the ``symmetric`` qualifier when ``mat`` passes
    the exact symmetry check.
    """
    path = Path(path)
    if path.suffix != ".mtx":
        path = path.with_name(path.name + ".mtx")
    mat = sp.csr_matrix(mat)
    if symmetric is None:
        symmetric = is_symmetric(mat)
    # mmwrite on a file name fails silently for a missing directory; an open
    # handle makes the OS report it
    try:
        with open(path, "wb") as fh:
            scipy.io.mmwrite(fh, mat, symmetry="symmetric" if symmetric else "general")
    except OSError as exc:
        raise OSError(f"cannot write matrix to {path}: {exc.strerror or exc}") from exc
    return path


def read_matrix(path) -> sp.csr_matrix:
    mat = sp.csr_matrix(scipy.io.mmread(str(path)))
    mat.sort_indices()
    return mat


def matrix_symmetry(path) -> str:
    """The symmetry qualifier recorded in a Matrix Market header."""
    return scipy.io.mminfo(str(path))[5]


def write_vector(path, vec) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for v in np.asarray(vec, dtype=float).tolist():
            fh.write(f"{v!r}\n")
    return path


def read_vector(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()])
