"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 numerical failure. Errors are
reported on standard error with the failing stage in brackets. Channels on
the command line are 1-based; config files use the 0-based indices of
:class:`~phloewner.pipeline.RunConfig`.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import PHLoewnerError, ValidationError
from .lti import eval_transfer, spectral_density
from .passive import identify_ph
from .pipeline import (FIGURES, RunConfig, export_figures, generate_fom, load_config_file, load_fom,
                       loewner_model, read_report, run_pipeline, sample_model, write_fom)
from .stable import p_infinity
from .tangential import SamplingPlan, tangential_from_samples

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
DEFAULTS = RunConfig()


def _channels(text: str) -> list[int]:
    try:
        ch = [int(c) - 1 for c in text.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"channels must be comma-separated integers, got {text!r}") from None
    if not ch or min(ch) < 0:
        raise argparse.ArgumentTypeError("channels are 1-based positive integers")
    return ch


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must be LO:HI, got {text!r}") from None
    return lo, hi


def _order(text: str):
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("order must be 'auto' or an integer") from None


def _shift(text: str):
    """Scalar, ``none`` (no shift), or a file with a square matrix (JSON or whitespace text)."""
    if text.lower() == "none":
        return 0.0
    try:
        return float(text)
    except ValueError:
        pass
    path = Path(text)
    try:
        return np.atleast_2d(json.loads(path.read_text()) if path.suffix == ".json" else np.loadtxt(path))
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read shift matrix {text}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON or TOML file with RunConfig fields")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random direction policies")
    common.add_argument("--threads", type=int, help="worker threads for frequency sampling")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="phloewner", parents=[common],
                                     description="Passive port-Hamiltonian identification from frequency data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-fom", parents=[common], help="assemble the L-shaped wave model")
    p.add_argument("--h", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--tensor", help="file with a 2x2 matrix or iso:<value>")
    p.add_argument("--out-prefix", help="prefix of the MatrixMarket files and manifest")

    p = sub.add_parser("sample", parents=[common], help="sample a FOM into tangential data")
    p.add_argument("--fom", required=True, help="FOM manifest or realization JSON")
    p.add_argument("--channels", type=_channels, help="1-based channel list, e.g. 1,2,89")
    p.add_argument("--grid", nargs=3, type=float, metavar=("LO_EXP", "HI_EXP", "NUM"),
                   help="log-spaced grid 10^LO_EXP .. 10^HI_EXP with NUM points")
    p.add_argument("--policy", choices=["cycled-identity", "random-unit", "block"])
    p.add_argument("--partition", choices=["alternate", "split-half"])
    p.add_argument("--out", help="tangential data file (.csv or .json)")

    p = sub.add_parser("identify", parents=[common], help="identify a passive pH model")
    p.add_argument("--data", required=True, help="tangential data file (.csv or .json)")
    p.add_argument("--shift", type=_shift, help="feedthrough shift: scalar, none or matrix file")
    p.add_argument("--order", type=_order, help="'auto' or the reduction order")
    p.add_argument("--stabilize", choices=["nehari", "reflect", "off"])
    p.add_argument("--feedthrough", choices=["auto", "pencil", "zero"])
    p.add_argument("--out", help="output pH realization JSON")

    p = sub.add_parser("project-stable", parents=[common], help="stable projection of a realization")
    p.add_argument("--in", dest="input", required=True, help="realization JSON")
    p.add_argument("--mode", choices=["nehari", "reflect", "off"])
    p.add_argument("--band", type=_band, help="LO:HI frequency band for the error estimate")
    p.add_argument("--out", help="projected realization JSON")
    p.add_argument("--report", help="report JSON")

    p = sub.add_parser("compare", parents=[common], help="tangential errors of models against data")
    p.add_argument("--data", required=True, help="tangential data file")
    p.add_argument("--model", action="append", required=True, help="realization JSON (repeatable)")
    p.add_argument("--out", help="per-sample error CSV")

    p = sub.add_parser("export", parents=[common], help="plot-ready CSVs from a run report")
    p.add_argument("--report", required=True, help="run directory or report.json")
    p.add_argument("--which", help=f"comma-separated subset of {','.join(FIGURES)}")

    p = sub.add_parser("run", parents=[common], help="full pipeline")
    p.add_argument("--fom", help="'generate' or a FOM manifest / realization JSON")
    p.add_argument("--h", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--channels", type=_channels, help="1-based channel list")
    p.add_argument("--grid", nargs=3, type=float, metavar=("LO_EXP", "HI_EXP", "NUM"))
    p.add_argument("--shift", type=float)
    p.add_argument("--order", type=_order)
    p.add_argument("--stabilize", choices=["nehari", "reflect", "off"])
    p.add_argument("--policy", choices=["cycled-identity", "random-unit", "block"])
    return parser


def _settings(args) -> dict:
    """Config file values overridden by explicit flags (``None`` means not given)."""
    cfg = DEFAULTS.to_dict()
    if getattr(args, "config", None):
        doc = load_config_file(args.config)
        RunConfig.from_dict({**cfg, **doc})  # validates keys and values
        cfg.update(doc)
    for key in ("out_dir", "seed", "threads"):
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    flags = {"h": "h", "rho": "rho", "eps": "eps", "tensor": "tensor", "channels": "channels",
             "shift": "shift", "order": "order", "stabilize": "stabilize", "policy": "direction_policy",
             "partition": "partition_policy", "fom": "fom"}
    for flag, key in flags.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    grid = getattr(args, "grid", None)
    if grid is not None:
        if grid[2] != int(grid[2]):
            raise ValidationError("grid point count must be an integer")
        cfg["omega_min_exp"], cfg["omega_max_exp"], cfg["n_points"] = grid[0], grid[1], int(grid[2])
    return cfg


def cmd_generate_fom(args, cfg) -> None:
    fem = generate_fom(cfg["h"], cfg["rho"], cfg["eps"], cfg["tensor"])
    prefix = args.out_prefix or str(Path(cfg["out_dir"]) / "fom_")
    path = write_fom(fem, prefix)
    print(f"wrote {path} (n={fem.n}, boundary channels={fem.N_bnd})")


def cmd_sample(args, cfg) -> None:
    fom = load_fom(args.fom)
    omega = np.logspace(cfg["omega_min_exp"], cfg["omega_max_exp"], cfg["n_points"])
    data = sample_model(fom, omega, cfg["channels"], cfg["threads"])
    plan = SamplingPlan(omega, cfg["direction_policy"], cfg["partition_policy"], cfg["seed"])
    right, left = tangential_from_samples(omega, data, plan)
    out = io.write_tangential(args.out or Path(cfg["out_dir"]) / "data.csv", right, left)
    print(f"wrote {out} ({right.k} right, {left.q} left samples)")


def _zero_rows(result):
    """``(Re, Im, |Phi(xi) x| / |D + D^T|)`` for the retained zeros of the shifted model."""
    sys_p = result.projection.projected
    D = np.asarray(sys_p.D)
    scale = max(np.linalg.norm(D + D.T, 2), np.finfo(float).tiny)
    rows = []
    if result.zeros is None:
        return rows
    for z, x in zip(result.zeros.zeros, result.zeros.directions.T):
        res = np.linalg.norm(spectral_density(sys_p, z) @ x) / (scale * np.linalg.norm(x))
        rows.append([float(z.real), float(z.imag), float(res)])
    return rows


def cmd_identify(args, cfg) -> None:
    right, left = io.read_tangential(args.data)
    ft = {"zero": None, None: cfg["feedthrough"]}.get(args.feedthrough, args.feedthrough)
    result = identify_ph(right, left, shift=cfg["shift"], order=cfg["order"], stabilize=cfg["stabilize"],
                         feedthrough=ft)
    out = Path(args.out or Path(cfg["out_dir"]) / "ph.json")
    stem = out.with_suffix("")
    io.write_realization(out, result.ph)
    io.write_realization(Path(f"{stem}_loewner.json"), loewner_model(result))
    if result.passive_pencil is not None:
        io.write_pencil(Path(f"{stem}_pencil.json"), result.passive_pencil, io.file_hash(args.data))
    if result.order_report is not None:
        io.write_singular_values(Path(f"{stem}_singular_values.csv"), result.order_report.singular_values)
    io.write_rows(Path(f"{stem}_zeros.csv"), ["re", "im", "direction_residual"], _zero_rows(result))
    diag = dict(result.diagnostics, order=result.order, data_hash=io.file_hash(args.data))
    io.write_json(Path(f"{stem}_diagnostics.json"), diag)
    print(f"wrote {out} (order {result.order}, projection error {result.projection.achieved_error:.3e})")


def cmd_project_stable(args, cfg) -> None:
    real = io.read_realization(args.input)
    res = p_infinity(real, args.mode or cfg["stabilize"], args.band)
    out = Path(args.out or Path(cfg["out_dir"]) / "projected.json")
    io.write_realization(out, res.projected)
    report = {"mode": res.mode, "achieved_error": res.achieved_error, "hankel_bound": res.hankel_bound,
              "eigenvalues_before": res.eig_before, "eigenvalues_after": res.eig_after}
    rpath = io.write_json(args.report or out.with_name(out.stem + "_report.json"), report)
    print(f"wrote {out} and {rpath} (error {res.achieved_error:.3e})")


def cmd_compare(args, cfg) -> None:
    right, left = io.read_tangential(args.data)
    models = [io.read_realization(p) for p in args.model]
    ref = max(np.abs(right.W).max(), np.abs(left.V).max())
    head = ["side", "omega"] + [f"rel_dev_{Path(p).stem}" for p in args.model]
    rows = []
    for j in range(right.k):
        s = right.points[j]
        rows.append(["R", float(s.imag)] + [float(np.linalg.norm(eval_transfer(M, s) @ right.R[:, j]
                                                                  - right.W[:, j]) / ref) for M in models])
    for i in range(left.q):
        s = left.points[i]
        rows.append(["L", float(s.imag)] + [float(np.linalg.norm(left.L[i] @ eval_transfer(M, s)
                                                                  - left.V[i]) / ref) for M in models])
    out = io.write_rows(args.out or Path(cfg["out_dir"]) / "compare.csv", head, rows)
    for k, p in enumerate(args.model):
        col = np.array([r[2 + k] for r in rows])
        print(f"{p}: max relative deviation {col.max():.3e}, mean {col.mean():.3e}")
    print(f"wrote {out}")


def cmd_export(args, cfg) -> None:
    report = read_report(args.report)
    which = [w.strip() for w in args.which.split(",")] if args.which else list(FIGURES)
    for p in export_figures(report, which, cfg["out_dir"]):
        print(f"wrote {p}")


def cmd_run(args, cfg) -> None:
    report = run_pipeline(RunConfig.from_dict(cfg))
    for e in report.summary()["errors"]:
        flag = " DEGRADED" if e["degraded"] else ""
        print(f"channel ({e['output'] + 1},{e['input'] + 1}): max {e['max']:.3e} mean {e['mean']:.3e}{flag}")
    print(f"n_fom={report.n_fom} order={report.order}; outputs in {cfg['out_dir']}")


COMMANDS = {"generate-fom": cmd_generate_fom, "sample": cmd_sample, "identify": cmd_identify,
            "project-stable": cmd_project_stable, "compare": cmd_compare, "export": cmd_export,
            "run": cmd_run}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _settings(args)
        COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"phloewner: validation error [{exc.stage or args.command}]: {exc.args[0] if exc.args else exc}",
              file=sys.stderr)
        return EXIT_VALIDATION
    except PHLoewnerError as exc:
        print(f"phloewner: numerical failure [{exc.stage or args.command}]: {exc.args[0] if exc.args else exc}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
