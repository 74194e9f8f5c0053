"""Command-line entry point: ``tangentllg <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .mesh import MeshError, audit_mesh, build_box_mesh, load_mesh_native

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("tangentllg")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tangentllg", description="Tangent-plane finite-element LLG integrators")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("run", help="simulate and write CSV/VTK output")
    s.add_argument("config")
    s.add_argument("--strict", action="store_true", help="treat regime warnings as errors")
    s = sub.add_parser("check-mesh", help="audit a mesh for the non-obtuse stiffness condition")
    s.add_argument("mesh", help="native mesh file or box:NX,NY,NZ[:LX,LY,LZ]")
    s = sub.add_parser("macrospin", help="compare a uniform run to the analytic macrospin solution")
    s.add_argument("config")
    s = sub.add_parser("convergence", help="observed order of convergence in tau")
    s.add_argument("config")
    s = sub.add_parser("demag-test", help="volume-averaged stray field of a uniformly magnetized box")
    s.add_argument("config")
    return p


def _load_mesh_arg(arg: str):
    if arg.startswith("box:"):
        parts = arg[4:].split(":")
        shape = [int(x) for x in parts[0].split(",")]
        lengths = [float(x) for x in parts[1].split(",")] if len(parts) > 1 else [1.0, 1.0, 1.0]
        return build_box_mesh(*shape, lengths=lengths)
    return load_mesh_native(arg)


def cmd_check_mesh(args) -> int:
    try:
        mesh = _load_mesh_arg(args.mesh)
    except (MeshError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = audit_mesh(mesh)
    print(f"vertices: {mesh.num_vertices}  tets: {mesh.num_tets}  h: {mesh.h:.6g}")
    print(report.summary())
    return EXIT_OK if report.satisfies_condition else EXIT_VERIFY


def cmd_run(args) -> int:
    from .output import write_csv, write_vtk
    from .scheme import run

    cfg = parse_config(args.config, strict=True if args.strict else None)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    mesh = cfg.mesh.build()
    model = cfg.build_model(mesh)
    m0 = cfg.initial.build(mesh)
    result = run(cfg.scheme, m0, model, stride=cfg.output.stride)

    comments = [f"variant = {cfg.scheme.variant}", f"tau = {cfg.scheme.tau!r}", f"steps = {cfg.scheme.num_steps}"]
    if cfg.initial.kind == "random":
        comments.append(f"seed = {cfg.initial.seed}")
    if cfg.output.csv is not None:
        write_csv(cfg.output.csv, result.records, comments)
    if cfg.output.vtk_dir is not None:
        out = Path(cfg.output.vtk_dir)
        out.mkdir(parents=True, exist_ok=True)
        for n, t, m in result.snapshots:
            write_vtk(out / f"m_{n:06d}.vtk", mesh, {"m": m}, title=f"step {n} t {t!r}")
    last = result.records[-1]
    print(f"steps: {cfg.scheme.num_steps}  final t: {last.t:.6g}  final energy: {last.energy.total:.10g}")
    return EXIT_OK


def _macrospin_setup(cfg):
    errors = []
    if cfg.initial.kind != "uniform":
        errors.append("macrospin comparison needs [initial] kind = uniform")
    if cfg.material.Q != 0:
        errors.append("macrospin comparison needs Q = 0 (constant field)")
    if cfg.stray.mode != "none":
        errors.append("macrospin comparison needs [stray] mode = none")
    if errors:
        raise ConfigError(errors)
    return cfg.initial.m / np.linalg.norm(cfg.initial.m)


def cmd_macrospin(args) -> int:
    from .diagnostics import macrospin_reference
    from .scheme import run

    cfg = parse_config(args.config)
    m_init = _macrospin_setup(cfg)
    mesh = cfg.mesh.build()
    model = cfg.build_model(mesh)
    result = run(cfg.scheme, np.tile(m_init, (mesh.num_vertices, 1)), model, keep_all=True)
    p = cfg.material
    worst = 0.0
    for n, m in enumerate(result.ms):
        ref = macrospin_reference(p.alpha, p.H_ext, m_init, n * cfg.scheme.tau)
        worst = max(worst, float(np.linalg.norm(m - ref, axis=1).max()))
    ref_T = macrospin_reference(p.alpha, p.H_ext, m_init, cfg.scheme.num_steps * cfg.scheme.tau)
    final = float(np.linalg.norm(result.m - ref_T, axis=1).max())
    tol = cfg.checks["macrospin_tol"]
    print(f"variant: {cfg.scheme.variant}  tau: {cfg.scheme.tau:.6g}  steps: {cfg.scheme.num_steps}")
    print(f"max nodal error (all steps): {worst:.6e}")
    print(f"max nodal error at T: {final:.6e}  (tolerance {tol:.3e})")
    return EXIT_OK if worst <= tol else EXIT_VERIFY


def cmd_convergence(args) -> int:
    from .diagnostics import convergence_study, format_convergence, macrospin_reference

    cfg = parse_config(args.config)
    taus = cfg.checks["taus"]
    if not taus:
        raise ConfigError(["[convergence] taus is required"])
    mesh = cfg.mesh.build()
    model = cfg.build_model(mesh)
    reference = None
    if cfg.checks["reference"] == "analytic":
        m_init = _macrospin_setup(cfg)
        m0 = np.tile(m_init, (mesh.num_vertices, 1))
        ref = macrospin_reference(cfg.material.alpha, cfg.material.H_ext, m_init, cfg.scheme.T_final)
        reference = np.tile(ref, (mesh.num_vertices, 1))
    else:
        m0 = cfg.initial.build(mesh)
    try:
        rows = convergence_study(model, m0, cfg.scheme, taus, reference=reference, norm=cfg.checks["norm"])
    except ValueError as exc:
        raise ConfigError([f"[convergence] {exc}"]) from None
    print(format_convergence(rows))
    orders = [r.order for r in rows if r.order is not None]
    lo, hi = cfg.checks["min_order"], cfg.checks["max_order"]
    ok = all((lo is None or o >= lo) and (hi is None or o <= hi) for o in orders)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_demag(args) -> int:
    from .field import FieldModel, StrayFieldBackend

    cfg = parse_config(args.config)
    if cfg.mesh.kind != "box":
        raise ConfigError(["demag-test needs a box mesh"])
    stray = cfg.stray if cfg.stray.mode == "truncated_fem" else replace(cfg.stray, mode="truncated_fem")
    if len(set(cfg.mesh.lengths)) != 1:
        print("warning: box is not a cube; the -m/3 target only holds for cubes", file=sys.stderr)
    mesh = cfg.mesh.build()
    model = FieldModel(mesh, cfg.material, StrayFieldBackend(stray.mode, stray.padding_factor, stray.tolerance))
    direction = cfg.initial.m / np.linalg.norm(cfg.initial.m) if cfg.initial.kind == "uniform" else np.array([0.0, 0.0, 1.0])
    m = np.tile(direction, (mesh.num_vertices, 1))
    H = model.stray_field(m)
    avg = (model.V[:, None] * H).sum(axis=0) / model.V.sum()
    target = -direction / 3.0
    tol = cfg.checks["demag_tol"]
    dev = np.abs(avg - target)
    print(f"m direction: {direction}")
    print(f"padded mesh: {model.stray_solver.padded.num_vertices} vertices")
    print(f"volume-averaged H_d: {avg}")
    print(f"target -m/3: {target}")
    print(f"max component deviation: {dev.max():.4e} (tolerance {tol:.3g} * |m|/3 = {tol / 3:.4e})")
    return EXIT_OK if dev.max() <= tol / 3.0 else EXIT_VERIFY


COMMANDS = {
    "run": cmd_run,
    "check-mesh": cmd_check_mesh,
    "macrospin": cmd_macrospin,
    "convergence": cmd_convergence,
    "demag-test": cmd_demag,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, MeshError) else EXIT_RUNTIME
    except Exception as exc:  # any solver/step failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
