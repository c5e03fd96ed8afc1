"""End-to-end runs: FOM, sampling, identification, comparison and CSV exports."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import io
from .errors import PHLoewnerError, ValidationError
from .lti import DescriptorRealization, PHRealization, frequency_response, ph_to_descriptor
from .passive import IdentificationResult, identify_ph, spectral_zeros
from .tangential import SamplingPlan, tangential_from_samples
from .wave2d import FEMatrices, WaveParams, assemble, far_channel, mesh_lshape, sample_fom

log = logging.getLogger(__name__)

SISO_TOL = 1e-2
MIMO_TOL = 5e-2
AXIS_BANDS = (1e-9, 1e-10)
ZOOM_BAND = 1e-6
ZERO_TAGS = ("loewner", "loewner-shifted", "ph-loewner")
FIGURES = ("freq-response", "spectral-zeros", "zoom")
FEM_FILES = {"M_q": "M_q", "M_p": "M_p", "M_eps": "M_eps", "M_bnd": "M_bnd", "G": "G_mat", "B": "B_mat"}
ERROR_NOTE = ("relative deviation per channel: |H_model(iw) - H_data(iw)| / max over the grid of "
              "|H_data|; max and mean are taken over the sampling grid")


def _annotate(stage: str, exc: PHLoewnerError) -> PHLoewnerError:
    return exc.with_stage(f"{stage}: {exc.stage}" if exc.stage else stage)


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Everything that determines a run; echoed to ``config.json``.

    ``channels`` are 0-based boundary indices. ``fom`` is ``"generate"``
    (L-shaped wave model from ``h``, ``rho``, ``eps``, ``tensor``) or the
    path of a FOM manifest or realization JSON file.
    """

    fom: str = "generate"
    h: float = 0.0625
    rho: float = 1.0
    eps: float = 3.0
    tensor: str = "iso:1"
    omega_min_exp: float = -1.0
    omega_max_exp: float = 3.5
    n_points: int = 300
    shift: float = 1.0
    order: str | int = "auto"
    stabilize: str = "nehari"
    feedthrough: str = "auto"
    channels: list = field(default_factory=lambda: [0])
    direction_policy: str = "block"
    partition_policy: str = "alternate"
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.order, str) and self.order != "auto":
            try:
                self.order = int(self.order)
            except ValueError:
                raise ValidationError(f"order must be 'auto' or an integer, got {self.order!r}") from None
        if self.stabilize not in ("nehari", "reflect", "off"):
            raise ValidationError(f"unknown stabilization mode {self.stabilize!r}")
        if self.n_points < 2 or self.omega_max_exp <= self.omega_min_exp:
            raise ValidationError("sampling grid needs at least two increasing points")
        self.channels = [int(c) for c in self.channels]
        if not self.channels:
            raise ValidationError("need at least one channel")
        if self.threads < 1:
            raise ValidationError("threads must be positive")

    @property
    def omega_grid(self) -> np.ndarray:
        return np.logspace(self.omega_min_exp, self.omega_max_exp, self.n_points)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def echo(self, path) -> Path:
        return io.write_json(path, self.to_dict())


def load_config_file(path) -> dict:
    """Read a JSON or TOML config file into a dict."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(raw.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"invalid TOML in {path}: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}") from exc


# --------------------------------------------------------------------------
# FOM


def parse_tensor(spec: str) -> np.ndarray:
    """``iso:<value>`` or a file holding a symmetric 2x2 matrix (JSON or whitespace text)."""
    if spec.startswith("iso:"):
        try:
            return float(spec[4:]) * np.eye(2)
        except ValueError:
            raise ValidationError(f"bad tensor spec {spec!r}") from None
    path = Path(spec)
    try:
        T = np.array(json.loads(path.read_text())) if path.suffix == ".json" else np.loadtxt(path)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read tensor file {spec}: {exc}") from exc
    if np.shape(T) != (2, 2):
        raise ValidationError("tensor file must hold a 2x2 matrix")
    return np.asarray(T, dtype=float)


def generate_fom(h: float, rho: float = 1.0, eps: float = 1e-3, tensor="iso:1") -> FEMatrices:
    T = parse_tensor(tensor) if isinstance(tensor, str) else np.asarray(tensor, dtype=float)
    return assemble(mesh_lshape(h), WaveParams(rho=rho, T_tensor=T, eps=eps))


def write_fom(fem: FEMatrices, prefix) -> Path:
    """MatrixMarket files for the FE matrices plus ``<prefix>manifest.json``."""
    prefix = str(prefix)
    base = Path(prefix + "manifest.json")
    base.parent.mkdir(parents=True, exist_ok=True)
    files = {}
    for key, attr in FEM_FILES.items():
        fname = Path(prefix + key + ".mtx")
        scipy.io.mmwrite(str(fname), sp.coo_matrix(getattr(fem, attr)), precision=17)
        files[key] = fname.name
    manifest = {
        "kind": "wave-fom",
        "dimensions": {"N_q": fem.N_q, "N_p": fem.N_p, "N_bnd": fem.N_bnd, "n": fem.n},
        "files": files,
        "boundary_ordering": "counterclockwise from the origin; channel k is boundary vertex k",
    }
    if fem.mesh is not None:
        manifest["boundary_vertices"] = fem.mesh.vertices[fem.mesh.boundary_vertices].tolist()
        manifest["far_channel"] = far_channel(fem)
        manifest["domain"] = fem.mesh.domain_tag
        manifest["n_triangles"] = fem.mesh.n_triangles
    if fem.params is not None:
        p = fem.params
        manifest["parameters"] = {"rho": np.asarray(p.rho).tolist(), "eps": np.asarray(p.eps).tolist(),
                                  "T_tensor": np.asarray(p.T_tensor).tolist()}
    return io.write_json(base, manifest)


def load_fom(path) -> FEMatrices | DescriptorRealization | PHRealization:
    """Load a FOM manifest (``kind = wave-fom``) or a realization JSON container."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read FOM {path}: {exc}") from exc
    if doc.get("kind") != "wave-fom":
        return io.realization_from_dict(doc, path.parent)
    try:
        mats = {attr: sp.csr_matrix(scipy.io.mmread(str(path.parent / doc["files"][key])))
                for key, attr in FEM_FILES.items()}
    except (KeyError, OSError, ValueError) as exc:
        raise ValidationError(f"incomplete FOM manifest {path}: {exc}") from exc
    return FEMatrices(**mats)


def sample_model(fom, omega_grid, channels, threads: int = 1) -> np.ndarray:
    """Transfer samples ``(N, c, c)`` restricted to the channel set."""
    ch = list(channels)
    if isinstance(fom, FEMatrices):
        return np.array([s.value for s in sample_fom(fom, omega_grid, ch, threads)])
    m = fom.m
    if min(ch) < 0 or max(ch) >= m:
        raise ValidationError(f"channel index out of range [0, {m})")
    H = frequency_response(fom, 1j * np.asarray(omega_grid))
    return H[:, ch][:, :, ch]


# --------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonReport:
    """Frequency responses, spectral-zero sets and channel errors of one run.

    ``data``, ``loewner`` and ``ph`` have shape ``(N, c, c)`` over ``omega``.
    Errors are keyed by channel pairs ``(i, j)`` in global (0-based) indices;
    see :data:`ERROR_NOTE` for the definition.
    """

    omega: np.ndarray
    channels: list
    data: np.ndarray
    loewner: np.ndarray
    ph: np.ndarray
    zeros: dict
    n_fom: int
    order: int
    loewner_order: int
    tolerance: float
    errors: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.errors:
            self.errors = channel_errors(self.data, self.ph, self.channels)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a in self.channels for b in self.channels]

    def degraded(self) -> dict:
        return {k: v["max"] > self.tolerance for k, v in self.errors.items()}

    def summary(self) -> dict:
        flags = self.degraded()
        return {
            "n_fom": self.n_fom, "order": self.order, "loewner_order": self.loewner_order,
            "channels": list(self.channels), "tolerance": self.tolerance, "error_definition": ERROR_NOTE,
            "errors": [{"output": a, "input": b, "max": e["max"], "mean": e["mean"],
                        "loewner_max": e.get("loewner_max"), "degraded": bool(flags[(a, b)])}
                       for (a, b), e in sorted(self.errors.items())],
            "zero_counts": {t: int(z.size) for t, z in sorted(self.zeros.items())},
            "near_axis_counts": near_axis_counts(self.zeros),
        }

    def to_dict(self) -> dict:
        enc = io.encode_matrix
        return {
            "omega": self.omega.tolist(), "channels": list(self.channels),
            "data": [enc(x) for x in self.data], "loewner": [enc(x) for x in self.loewner],
            "ph": [enc(x) for x in self.ph],
            "zeros": {t: [[float(z.real), float(z.imag)] for z in v] for t, v in self.zeros.items()},
            "n_fom": self.n_fom, "order": self.order, "loewner_order": self.loewner_order,
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ComparisonReport":
        def stack(key):
            return np.array([io.decode_matrix(x) for x in doc[key]], dtype=complex)

        def pts(v):
            a = np.asarray(v, dtype=float).reshape(-1, 2)
            return a[:, 0] + 1j * a[:, 1]
        try:
            return cls(np.asarray(doc["omega"], dtype=float), list(doc["channels"]), stack("data"),
                       stack("loewner"), stack("ph"), {t: pts(v) for t, v in doc["zeros"].items()},
                       int(doc["n_fom"]), int(doc["order"]), int(doc["loewner_order"]),
                       float(doc["tolerance"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed report: {exc}") from exc


def channel_errors(data: np.ndarray, model: np.ndarray, channels, reference: np.ndarray | None = None) -> dict:
    """Max and mean relative deviation per channel pair."""
    out = {}
    for i, a in enumerate(channels):
        for j, b in enumerate(channels):
            ref = np.abs(data[:, i, j]).max()
            dev = np.abs(model[:, i, j] - data[:, i, j]) / max(ref, np.finfo(float).tiny)
            e = {"max": float(dev.max()), "mean": float(dev.mean())}
            if reference is not None:
                e["loewner_max"] = float((np.abs(reference[:, i, j] - data[:, i, j])
                                          / max(ref, np.finfo(float).tiny)).max())
            out[(a, b)] = e
    return out


def near_axis_counts(zeros: dict, bands=AXIS_BANDS) -> dict:
    return {t: {f"{b:.0e}": int(np.sum(np.abs(z.real) <= b)) for b in bands} for t, z in sorted(zeros.items())}


def _all_zeros(sys: DescriptorRealization) -> np.ndarray:
    """Every finite spectral zero (both half-planes), without consistency checks."""
    try:
        return spectral_zeros(sys, check=False).all_zeros
    except (PHLoewnerError, np.linalg.LinAlgError) as exc:
        log.warning("spectral zeros unavailable: %s", exc)
        return np.zeros(0, complex)


def _sorted(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return z[np.lexsort((z.imag, z.real))]


def loewner_model(result: IdentificationResult) -> DescriptorRealization:
    """The reduced Loewner interpolant of the original (unshifted) data."""
    return dataclasses.replace(result.reduced, D=np.asarray(result.reduced.D) - result.shift)


def compare(omega, channels, data, result: IdentificationResult, n_fom: int) -> ComparisonReport:
    """Evaluate the Loewner and pH-Loewner models on the grid and collect the zero sets."""
    pts = 1j * np.asarray(omega)
    loewner = loewner_model(result)
    H_l = frequency_response(loewner, pts)
    H_ph = frequency_response(result.ph, pts)
    zeros = {
        "loewner": _sorted(_all_zeros(loewner)),
        "loewner-shifted": _sorted(result.zeros.all_zeros),
        "ph-loewner": _sorted(_all_zeros(ph_to_descriptor(result.ph))),
    }
    tol = SISO_TOL if len(channels) == 1 else MIMO_TOL
    rep = ComparisonReport(np.asarray(omega, dtype=float), list(channels), data, H_l, H_ph, zeros,
                           n_fom, result.order, result.order_report.r if result.order_report else result.order,
                           tol, diagnostics=result.diagnostics)
    rep.errors = channel_errors(data, H_ph, channels, H_l)
    return rep


# --------------------------------------------------------------------------
# exports


def _tag(a: int, b: int) -> str:
    return f"{a}_{b}"


def export_figures(report: ComparisonReport, which, out_dir) -> list[Path]:
    """Write plot-ready CSVs. ``which`` is a name or a list of names from :data:`FIGURES`."""
    which = [which] if isinstance(which, str) else list(which)
    bad = set(which) - set(FIGURES)
    if bad:
        raise ValidationError(f"unknown figure(s) {sorted(bad)}; choose from {FIGURES}")
    out = Path(out_dir)
    paths = []
    idx = {c: k for k, c in enumerate(report.channels)}
    if "freq-response" in which:
        head, phead = ["omega"], ["omega"]
        for a, b in report.pairs:
            head += [f"mag_data_{_tag(a, b)}", f"mag_loewner_{_tag(a, b)}", f"mag_ph_loewner_{_tag(a, b)}"]
            phead += [f"phase_data_{_tag(a, b)}", f"phase_loewner_{_tag(a, b)}", f"phase_ph_loewner_{_tag(a, b)}"]
        rows, prows = [], []
        for k, w in enumerate(report.omega):
            row, prow = [float(w)], [float(w)]
            for a, b in report.pairs:
                vals = [X[k, idx[a], idx[b]] for X in (report.data, report.loewner, report.ph)]
                row += [float(abs(v)) for v in vals]
                prow += [float(np.angle(v)) for v in vals]
            rows.append(row)
            prows.append(prow)
        paths.append(io.write_rows(out / "freq_response.csv", head, rows))
        paths.append(io.write_rows(out / "phase_response.csv", phead, prows))
        erows = [[a, b, e["max"], e["mean"], e.get("loewner_max", float("nan")), int(report.degraded()[(a, b)])]
                 for (a, b), e in sorted(report.errors.items())]
        p = out / "errors.csv"
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w") as fh:
            fh.write(f"# {ERROR_NOTE}; degraded means max > {report.tolerance:g}\n")
        with p.open("a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["output", "input", "max_rel", "mean_rel", "loewner_max_rel", "degraded"])
            for r in erows:
                w.writerow([io._fmt(x) if isinstance(x, float) else x for x in r])
        paths.append(p)
    if "spectral-zeros" in which:
        rows = [[float(z.real), float(z.imag), t] for t in ZERO_TAGS for z in report.zeros.get(t, [])]
        paths.append(io.write_rows(out / "spectral_zeros.csv", ["re", "im", "model"], rows))
        counts = near_axis_counts(report.zeros)
        brows = [[t, f"{b:.0e}", counts[t][f"{b:.0e}"]] for t in ZERO_TAGS if t in counts for b in AXIS_BANDS]
        paths.append(io.write_rows(out / "spectral_zero_bands.csv", ["model", "band", "count"], brows))
    if "zoom" in which:
        rows = [[float(z.real), float(z.imag), t] for t in ZERO_TAGS for z in report.zeros.get(t, [])
                if abs(z.real) <= ZOOM_BAND]
        paths.append(io.write_rows(out / "spectral_zeros_zoom.csv", ["re", "im", "model"], rows))
    return paths


def write_report(report: ComparisonReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    return [io.write_json(out / "report.json", report.to_dict()),
            io.write_json(out / "summary.json", report.summary())]


def read_report(path) -> ComparisonReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read report {path}: {exc}") from exc
    return ComparisonReport.from_dict(doc)


def _diag_doc(result: IdentificationResult) -> dict:
    d = dict(result.diagnostics)
    d["zeros_retained"] = result.zeros.zeros
    d["min_re_retained"] = float(result.zeros.zeros.real.min()) if result.zeros.zeros.size else None
    return d


# --------------------------------------------------------------------------
# driver


def run_pipeline(config: RunConfig) -> ComparisonReport:
    """Generate or load the FOM, sample, identify, compare and write all artifacts."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.echo(out / "config.json")
    try:
        if config.fom == "generate":
            fom = generate_fom(config.h, config.rho, config.eps, config.tensor)
            write_fom(fom, out / "fom_")
        else:
            fom = load_fom(config.fom)
    except PHLoewnerError as exc:
        raise _annotate("generate-fom", exc)
    n_fom = fom.n
    omega = config.omega_grid
    try:
        data = sample_model(fom, omega, config.channels, config.threads)
        plan = SamplingPlan(omega, config.direction_policy, config.partition_policy, config.seed)
        right, left = tangential_from_samples(omega, data, plan)
        io.write_tangential(out / "data.csv", right, left)
    except PHLoewnerError as exc:
        raise _annotate("sample", exc)
    try:
        result = identify_ph(right, left, shift=config.shift, order=config.order,
                             stabilize=config.stabilize, feedthrough=config.feedthrough)
    except PHLoewnerError as exc:
        raise _annotate("identify", exc)
    try:
        io.write_realization(out / "loewner.json", loewner_model(result))
        io.write_realization(out / "ph.json", result.ph)
        io.write_json(out / "diagnostics.json", _diag_doc(result))
        report = compare(omega, config.channels, data, result, n_fom)
        write_report(report, out)
        export_figures(report, FIGURES, out)
    except PHLoewnerError as exc:
        raise _annotate("compare", exc)
    return report

