"""File formats: matrices, GLCMs, manifests, traces, surfaces, labels.

Everything is delimited text except the optional binary surface format.
All run artifacts embed the configuration hash and seed on comment lines
so stored results can be traced back to their settings.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .lattice import LATTICE_MODES

SURFACE_MAGIC = b"GLCMSURF"


def config_hash(items: dict) -> str:
    """Short stable hash of a flat key-value configuration."""
    canon = "\n".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def read_matrix(path) -> np.ndarray:
    """Whitespace-delimited numeric matrix; '#' starts a comment."""
    arr = np.loadtxt(path, comments="#", ndmin=2)
    return arr


def write_matrix(path, matrix: np.ndarray, header: str | None = None) -> None:
    matrix = np.asarray(matrix)
    fmt = "%d" if np.issubdtype(matrix.dtype, np.integer) else "%.17g"
    np.savetxt(path, matrix, fmt=fmt, delimiter="\t", header=header or "", comments="# ")


def write_glcm(path, counts: np.ndarray) -> None:
    """GLCM file: a header line with K, then K rows of exact integers."""
    counts = np.asarray(counts, dtype=np.int64)
    K = counts.shape[0]
    with open(path, "w") as fh:
        fh.write(f"{K}\n")
        for row in counts:
            fh.write("\t".join(str(int(v)) for v in row) + "\n")


def read_glcm(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    K = int(lines[0].split()[0])
    rows = [[int(v) for v in ln.split()] for ln in lines[1 : K + 1]]
    counts = np.asarray(rows, dtype=np.int64)
    if counts.shape != (K, K):
        raise ValueError(f"GLCM file {path}: expected {K}x{K} counts")
    return counts


def write_manifest(path, entries, K: int, lattice_mode: str) -> None:
    """Cohort manifest: K and lattice header pairs, then one row per
    subject: id, matrix path, optional true label."""
    with open(path, "w") as fh:
        fh.write(f"K\t{K}\n")
        fh.write(f"lattice\t{lattice_mode}\n")
        fh.write("subject\tpath\tlabel\n")
        for entry in entries:
            sid, mpath = entry[0], entry[1]
            label = entry[2] if len(entry) > 2 and entry[2] is not None else ""
            fh.write(f"{sid}\t{mpath}\t{label}\n")


def read_manifest(path):
    """Parse a cohort manifest; returns (entries, K, lattice_mode) with
    entries = list of (subject_id, matrix_path, label_or_None)."""
    path = Path(path)
    K = None
    mode = None
    entries = []
    in_rows = False
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if not in_rows:
                if parts[0] == "K":
                    K = int(parts[1])
                    continue
                if parts[0] == "lattice":
                    mode = parts[1]
                    continue
                if parts[0] == "subject":
                    in_rows = True
                    continue
                raise ValueError(f"manifest {path}: unexpected line {line!r}")
            sid = parts[0]
            mpath = parts[1]
            label = int(parts[2]) if len(parts) > 2 and parts[2] != "" else None
            entries.append((sid, mpath, label))
    if K is None or mode is None:
        raise ValueError(f"manifest {path}: missing K or lattice header")
    if mode not in LATTICE_MODES:
        raise ValueError(f"manifest {path}: unknown lattice mode {mode!r}")
    ids = [e[0] for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError(f"manifest {path}: duplicate subject ids")
    if not entries:
        raise ValueError(f"manifest {path}: no subjects")
    return entries, K, mode


def write_labels(path, subject_ids, labels, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write("subject\tlabel\n")
        for sid, lab in zip(subject_ids, labels):
            fh.write(f"{sid}\t{int(lab)}\n")


def read_labels(path):
    """Returns (subject_ids, labels array)."""
    ids, labels = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("subject"):
                continue
            sid, lab = line.split("\t")
            ids.append(sid)
            labels.append(int(lab))
    if not ids:
        raise ValueError(f"label file {path} is empty")
    return ids, np.asarray(labels, dtype=np.int64)


def write_trace(path, trace, meta: dict) -> None:
    """Scalar chain parameters, one row per post-burn-in iteration."""
    p = trace.beta.shape[1]
    cols = [f"beta_{k}" for k in range(p)] + ["tau2", "sigma2", "rho", "nu", "n_clusters"]
    data = np.column_stack(
        [trace.beta]
        + [trace.tau2, trace.sigma2, trace.rho, trace.nu, trace.n_clusters.astype(float)]
    )
    with open(path, "w") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write("iteration\t" + "\t".join(cols) + "\n")
        for i, row in enumerate(data):
            fh.write(str(i) + "\t" + "\t".join(f"{v:.17g}" for v in row) + "\n")


def write_surfaces_text(path, surfaces: np.ndarray, subject_ids, meta: dict) -> None:
    with open(path, "w") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        for sid, row in zip(subject_ids, surfaces):
            fh.write(sid + "\t" + "\t".join(f"{v:.17g}" for v in row) + "\n")


def read_surfaces_text(path):
    ids, rows = [], []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    return ids, np.asarray(rows)


def write_surfaces_binary(path, surfaces: np.ndarray, meta: dict) -> None:
    """Binary surface layout (little-endian): 8-byte magic 'GLCMSURF',
    uint64 T, uint64 n, 12-byte ascii config hash, uint64 seed, then
    T*n float64 values row-major."""
    surfaces = np.ascontiguousarray(surfaces, dtype="<f8")
    T, n = surfaces.shape
    chash = str(meta.get("config_hash", ""))[:12].ljust(12).encode()
    seed = int(meta.get("seed", 0))
    with open(path, "wb") as fh:
        fh.write(SURFACE_MAGIC)
        fh.write(struct.pack("<QQ", T, n))
        fh.write(chash)
        fh.write(struct.pack("<Q", seed))
        fh.write(surfaces.tobytes())


def read_surfaces_binary(path):
    """Returns (surfaces, meta) for the binary layout above."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SURFACE_MAGIC:
            raise ValueError(f"{path}: not a surface file")
        T, n = struct.unpack("<QQ", fh.read(16))
        chash = fh.read(12).decode().strip()
        (seed,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(8 * T * n), dtype="<f8").reshape(T, n)
    return data.copy(), {"config_hash": chash, "seed": seed}


def write_keyvalues(path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={v}\n")


def read_keyvalues(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
