"""On-disk formats: dense CSV/binary matrices, Matrix Market operators,
IDX image files, problem description files, and JSON reports.
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import FormatError
from .linalg import SparseSymOperator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "save_dense_csv",
    "load_dense_csv",
    "save_dense_binary",
    "load_dense_binary",
    "load_dense",
    "save_operator_mm",
    "load_operator_mm",
    "load_idx",
    "load_problem_file",
    "write_json",
]

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def save_dense_csv(path, m):
    """Headerless CSV, one matrix row per line."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_dense_csv(path):
    try:
        out = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as err:
        raise FormatError(f"{path}: not a dense CSV matrix ({err})") from err
    if out.size == 0:
        raise FormatError(f"{path}: empty CSV matrix")
    return out


def save_dense_binary(path, m):
    """Little-endian float64 payload after an 8-byte (rows, cols) int32 header."""
    m = np.ascontiguousarray(np.atleast_2d(np.asarray(m, dtype=np.float64)))
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", m.shape[0], m.shape[1]))
        fh.write(m.astype("<f8").tobytes())


def load_dense_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated binary matrix header")
    rows, cols = struct.unpack("<ii", raw[:8])
    if rows < 0 or cols < 0:
        raise FormatError(f"{path}: negative dimensions in header")
    expected = 8 + rows * cols * 8
    if len(raw) != expected:
        raise FormatError(f"{path}: payload size mismatch ({len(raw)} != {expected})")
    data = np.frombuffer(raw[8:], dtype="<f8")
    return data.reshape(rows, cols).astype(np.float64)


def load_dense(path):
    """Dispatch on extension: .csv -> CSV, anything else -> binary."""
    path = str(path)
    if path.endswith(".csv"):
        return load_dense_csv(path)
    return load_dense_binary(path)


def save_operator_mm(path, op):
    """Matrix Market coordinate file of the sparse part (symmetric storage)."""
    matrix = op.matrix if isinstance(op, SparseSymOperator) else sp.csr_matrix(op)
    scipy.io.mmwrite(str(path), matrix.tocoo(), symmetry="symmetric")


def load_operator_mm(path):
    try:
        m = scipy.io.mmread(str(path))
    except Exception as err:
        raise FormatError(f"{path}: not a Matrix Market file ({err})") from err
    if m.shape[0] != m.shape[1]:
        raise FormatError(f"{path}: operator must be square, got {m.shape}")
    return SparseSymOperator(sp.csr_matrix(m))


def load_idx(path):
    """Read an IDX file: images become a scaled (count, pixels) matrix.

    The images magic (0x00000803) yields float rows in [0, 1]; the labels
    magic (0x00000801) yields an integer vector. Anything else, or a size
    mismatch, raises FormatError.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: missing IDX magic number")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic == _IDX_IMAGES_MAGIC:
        if len(raw) < 16:
            raise FormatError(f"{path}: truncated IDX image header")
        count, rows, cols = struct.unpack(">iii", raw[4:16])
        expected = 16 + count * rows * cols
        if len(raw) != expected:
            raise FormatError(f"{path}: IDX payload size mismatch")
        data = np.frombuffer(raw[16:], dtype=np.uint8)
        return data.reshape(count, rows * cols).astype(np.float64) / 255.0
    if magic == _IDX_LABELS_MAGIC:
        if len(raw) < 8:
            raise FormatError(f"{path}: truncated IDX label header")
        (count,) = struct.unpack(">i", raw[4:8])
        if len(raw) != 8 + count:
            raise FormatError(f"{path}: IDX payload size mismatch")
        return np.frombuffer(raw[8:], dtype=np.uint8).astype(int)
    raise FormatError(f"{path}: unknown IDX magic 0x{magic:08x}")


def load_problem_file(path):
    """Problem description: a TOML file naming the matrix files and options.

    Required keys: ``a`` (Matrix Market), ``b`` and ``c`` (CSV or binary),
    ``r``. Optional ``[options]`` table carries solver settings. Relative
    paths resolve against the TOML file's directory. Returns
    (QuadraticProblem, options_dict).
    """
    from .model import problem_from_arrays

    path = Path(path)
    try:
        spec = tomllib.loads(path.read_text())
    except Exception as err:
        raise FormatError(f"{path}: invalid problem file ({err})") from err
    for key in ("a", "b", "c", "r"):
        if key not in spec:
            raise FormatError(f"{path}: missing required key {key!r}")
    base = path.parent

    def _resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    a_op = load_operator_mm(_resolve(spec["a"]))
    b = load_dense(_resolve(spec["b"]))
    c = load_dense(_resolve(spec["c"]))
    r = int(spec["r"])
    if b.shape != (a_op.n, r):
        raise FormatError(f"{path}: B must be ({a_op.n}, {r}), got {b.shape}")
    if c.shape != (r, r):
        raise FormatError(f"{path}: C must be ({r}, {r}), got {c.shape}")
    problem = problem_from_arrays(a_op, b, c)
    options = dict(spec.get("options", {}))
    return problem, options


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
