"""File formats: JSON realization container, tangential data CSV/JSON, pencil dumps.

Dense matrices are row-major nested lists; complex entries are ``[re, im]``
pairs. Sparse matrices are written as MatrixMarket coordinate files next to
the JSON file and referenced by relative path.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import ValidationError
from .loewner import LoewnerPencil
from .lti import DescriptorRealization, PHRealization, _is_identity
from .tangential import LeftData, RightData

FLOAT_FMT = "%.17g"


# --------------------------------------------------------------------------
# matrices


def encode_matrix(X, name: str = "", sparse_dir: Path | None = None, prefix: str = ""):
    """JSON-ready form of ``X``; sparse input goes to ``<sparse_dir>/<prefix><name>.mtx``."""
    if sp.issparse(X):
        if sparse_dir is None:
            X = X.toarray()
        else:
            sparse_dir.mkdir(parents=True, exist_ok=True)
            fname = f"{prefix}{name}.mtx"
            scipy.io.mmwrite(str(sparse_dir / fname), sp.coo_matrix(X), precision=17)
            return {"mtx": fname, "shape": list(X.shape)}
    X = np.atleast_2d(np.asarray(X))
    if np.iscomplexobj(X):
        return [[[float(v.real), float(v.imag)] for v in row] for row in X]
    return [[float(v) for v in row] for row in X]


def decode_matrix(obj, base: Path | None = None):
    if isinstance(obj, dict):
        if "mtx" not in obj:
            raise ValidationError("matrix object must carry an 'mtx' path")
        path = Path(obj["mtx"])
        if not path.is_absolute() and base is not None:
            path = base / path
        return sp.csr_matrix(scipy.io.mmread(str(path)))
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 3 and arr.shape[2] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 1 and arr.size == 0:
        return arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValidationError(f"cannot decode matrix of shape {arr.shape}")
    return arr


# --------------------------------------------------------------------------
# realizations


def realization_to_dict(real, sparse_dir: Path | None = None, prefix: str = "") -> dict:
    if isinstance(real, PHRealization):
        names = ["J", "R", "G", "P", "N", "S", "M", "Q"]
        doc = {"kind": "ph", "n": real.n, "m": real.m}
    elif isinstance(real, DescriptorRealization):
        standard = _is_identity(real.E)
        names = ["A", "B", "C", "D"] + ([] if standard else ["E"])
        doc = {"kind": "standard" if standard else "descriptor", "n": real.n, "m": real.m, "p": real.p}
    else:
        raise ValidationError(f"unsupported realization type {type(real).__name__}")
    doc["matrices"] = {k: encode_matrix(getattr(real, k), k, sparse_dir, prefix) for k in names}
    return doc


def realization_from_dict(doc: dict, base: Path | None = None):
    kind = doc.get("kind")
    mats = {k: decode_matrix(v, base) for k, v in doc.get("matrices", {}).items()}
    n = doc.get("n")
    if n == 0:
        m, p = doc.get("m", 0), doc.get("p", doc.get("m", 0))
        if kind == "ph":
            mats.update(J=np.zeros((0, 0)), R=np.zeros((0, 0)), G=np.zeros((0, m)), P=np.zeros((0, m)),
                        M=np.zeros((0, 0)), Q=np.zeros((0, 0)))
        else:
            mats.update(A=np.zeros((0, 0)), B=np.zeros((0, m)), C=np.zeros((p, 0)))
            if "E" in mats:
                mats["E"] = np.zeros((0, 0))
    if kind == "ph":
        return PHRealization(**mats)
    if kind in ("standard", "descriptor"):
        if kind == "descriptor" and "E" not in mats:
            raise ValidationError("descriptor realization needs E")
        return DescriptorRealization(**mats)
    raise ValidationError(f"unknown realization kind {kind!r}")


def write_realization(path, real) -> Path:
    """Write the JSON container; sparse matrices go next to it as MatrixMarket."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = realization_to_dict(real, path.parent, prefix=path.stem + "_")
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def read_realization(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read realization {path}: {exc}") from exc
    return realization_from_dict(doc, path.parent)


# --------------------------------------------------------------------------
# tangential data


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_tangential_csv(path, right: RightData, left: LeftData) -> Path:
    """CSV rows ``side, omega, dir_re.., dir_im.., resp_re.., resp_im..``.

    Points must lie on the imaginary axis (``omega = Im point``); use the
    JSON form for general complex points.
    """
    pts = np.concatenate([right.points, left.points])
    if np.any(np.abs(pts.real) > 0):
        raise ValidationError("CSV format holds imaginary-axis points only; use JSON")
    m = right.R.shape[0]
    p = right.W.shape[0]
    if left.L.shape[1] != p or left.V.shape[1] != m or m != p:
        raise ValidationError("CSV format needs square data (directions and responses of equal length)")
    head = (["side", "omega"] + [f"dir_re{i + 1}" for i in range(m)] + [f"dir_im{i + 1}" for i in range(m)]
            + [f"resp_re{i + 1}" for i in range(m)] + [f"resp_im{i + 1}" for i in range(m)])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for j in range(right.k):
            d, r = right.R[:, j], right.W[:, j]
            w.writerow(["R", _fmt(right.points[j].imag)] + [_fmt(x) for x in
                       (*d.real, *d.imag, *r.real, *r.imag)])
        for i in range(left.q):
            d, r = left.L[i], left.V[i]
            w.writerow(["L", _fmt(left.points[i].imag)] + [_fmt(x) for x in
                       (*d.real, *d.imag, *r.real, *r.imag)])
    return path


def read_tangential_csv(path) -> tuple[RightData, LeftData]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0][:2] != ["side", "omega"]:
        raise ValidationError(f"{path}: missing header")
    m = (len(rows[0]) - 2) // 4
    if m < 1 or len(rows[0]) != 2 + 4 * m:
        raise ValidationError(f"{path}: malformed header")
    sides = {"R": ([], [], []), "L": ([], [], [])}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if row[0] not in sides or len(row) != len(rows[0]):
            raise ValidationError(f"{path}:{lineno}: malformed row")
        try:
            vals = np.array([float(x) for x in row[1:]])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        om, rest = vals[0], vals[1:].reshape(4, m)
        pts, dirs, resp = sides[row[0]]
        pts.append(1j * om)
        dirs.append(rest[0] + 1j * rest[1])
        resp.append(rest[2] + 1j * rest[3])
    (rp, rd, rr), (lp, ld, lr) = sides["R"], sides["L"]
    if not rp or not lp:
        raise ValidationError(f"{path}: need both left and right rows")
    return (RightData(np.array(rp), np.array(rd).T, np.array(rr).T),
            LeftData(np.array(lp), np.array(ld), np.array(lr)))


def tangential_to_dict(right: RightData, left: LeftData) -> dict:
    def pts(x):
        return [[float(v.real), float(v.imag)] for v in x]
    return {
        "right": {"points": pts(right.points), "R": encode_matrix(right.R), "W": encode_matrix(right.W)},
        "left": {"points": pts(left.points), "L": encode_matrix(left.L), "V": encode_matrix(left.V)},
    }


def tangential_from_dict(doc: dict) -> tuple[RightData, LeftData]:
    try:
        r, l = doc["right"], doc["left"]

        def pts(x):
            a = np.asarray(x, dtype=float).reshape(-1, 2)
            return a[:, 0] + 1j * a[:, 1]
        return (RightData(pts(r["points"]), decode_matrix(r["R"]), decode_matrix(r["W"])),
                LeftData(pts(l["points"]), decode_matrix(l["L"]), decode_matrix(l["V"])))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed tangential JSON: {exc}") from exc


def write_tangential(path, right: RightData, left: LeftData) -> Path:
    """CSV or JSON depending on the suffix."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(tangential_to_dict(right, left), indent=1) + "\n")
        return path
    return write_tangential_csv(path, right, left)


def read_tangential(path) -> tuple[RightData, LeftData]:
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read {path}: {exc}") from exc
        return tangential_from_dict(doc)
    return read_tangential_csv(path)


def data_hash(right: RightData, left: LeftData) -> str:
    """SHA-256 of the raw data arrays (order-sensitive)."""
    h = hashlib.sha256()
    for X in (right.points, right.R, right.W, left.points, left.L, left.V):
        h.update(np.ascontiguousarray(X, dtype=complex).tobytes())
    return h.hexdigest()


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# pencils, spectra, zeros


def write_pencil(path, pencil: LoewnerPencil, source_hash: str | None = None) -> Path:
    doc = {
        "LL": encode_matrix(pencil.LL), "sLL": encode_matrix(pencil.sLL),
        "V": encode_matrix(pencil.V), "W": encode_matrix(pencil.W),
        "realified": bool(pencil.realified), "data_hash": source_hash,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def write_rows(path, header: list[str], rows) -> Path:
    """Deterministic CSV writer; floats use 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def write_singular_values(path, sv) -> Path:
    return write_rows(path, ["index", "sigma"], ((i + 1, float(s)) for i, s in enumerate(sv)))


def write_json(path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return encode_matrix(obj) if obj.ndim == 2 else [_json_default(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
