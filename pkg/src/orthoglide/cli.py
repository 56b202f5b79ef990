"""Command-line front end.

Exit codes: 0 success, 1 invalid parameters or model, 2 kinematic failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import __version__
from .analysis import analyze
from .design import DesignError, load_design, save_design, size_joint_limits, size_metrics
from .kinematics import (
    AmbiguousAssemblyError,
    KinematicsError,
    NoAssemblyError,
    UnreachableError,
    forward_kinematics,
    inverse_kinematics,
)
from .model import GeometryParseError, canonical_orthoglide, geometry_from_dict, parse_document, validate
from .workspace import (
    LABEL_NAMES,
    QUANTITIES,
    GridSpec,
    PointPredicate,
    compute_octree,
    cross_section,
    default_root_box,
    field_values,
    reason_list,
    t_connected,
)

EXIT_OK, EXIT_USAGE, EXIT_KINEMATIC, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def fmt(v) -> str:
    """12 significant digits, spelled so a YAML reader sees a float."""
    v = float(v)
    if math.isnan(v):
        return ".nan"
    if math.isinf(v):
        return ".inf" if v > 0 else "-.inf"
    s = f"{v:.12g}"
    mant, _, exp = s.partition("e")
    if exp and "." not in mant:
        s = f"{mant}.0e{exp}"
    elif not exp and "." not in s and "n" not in s:
        s += ".0"
    return s


def emit(doc, indent: int = 0) -> str:
    """Small block-style YAML writer with fixed float formatting."""
    pad = "  " * indent
    lines = []
    for key, val in doc.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(emit(val, indent + 1))
        elif isinstance(val, (list, tuple, np.ndarray)):
            if len(val) and isinstance(val[0], (list, tuple, np.ndarray)):
                lines.append(f"{pad}{key}:")
                lines.extend(f"{pad}  - [{', '.join(_scalar(x) for x in row)}]" for row in val)
            else:
                lines.append(f"{pad}{key}: [{', '.join(_scalar(x) for x in val)}]")
        else:
            lines.append(f"{pad}{key}: {_scalar(val)}")
    return "\n".join(lines)


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def _vector(text: str, name: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"--{name}: expected three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"--{name}: expected three finite comma-separated numbers, got {text!r}")
    return vals


def _pair(text: str, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(Fraction(t.strip())) for t in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--{name}: expected two comma-separated numbers, got {text!r}") from None
    return lo, hi


def _branch(text: str):
    signs = [t.strip() for t in text.split(",")]
    if len(signs) != 3 or any(s not in ("+", "-", "+1", "-1", "1") for s in signs):
        raise UsageError(f"--branch: expected three signs like -,-,-; got {text!r}")
    return tuple(-1 if s.startswith("-") else 1 for s in signs)


def load_model(args):
    if args.model is None:
        return canonical_orthoglide(args.leg_length)
    try:
        with open(args.model, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read model file {args.model}: {exc.strerror}") from None
    doc = parse_document(text)
    if isinstance(doc, dict) and "design_result" in doc:
        _, geom = load_design(text)
        if geom is None:
            raise GeometryParseError("model", "design file carries no embedded model")
        return geom
    return geometry_from_dict(doc)


def write_output(args, text: str) -> None:
    """Write to ``--out`` atomically, or to stdout."""
    if args.out in (None, "-"):
        sys.stdout.write(text)
        return
    target = os.path.abspath(args.out)
    fd, tmp = tempfile.mkstemp(prefix=".orthoglide-", dir=os.path.dirname(target))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _state_doc(state, geom) -> dict:
    return {
        "p": state.p,
        "rho": state.rho,
        "b": state.b,
        "c": state.c,
        "branch": list(state.branch),
        "closure_residual": np.abs(state.strut_lengths - geom.leg_length),
        "within_joint_limits": state.within_limits,
    }


def _render(doc: dict, fmt_name: str) -> str:
    if fmt_name == "text":
        return emit(doc) + "\n"
    flat = {}
    for key, val in doc.items():
        if isinstance(val, (list, tuple, np.ndarray)):
            for k, x in enumerate(np.ravel(np.asarray(val, dtype=float))):
                flat[f"{key}_{k}"] = _scalar(x)
        else:
            flat[key] = _scalar(val)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(flat.keys())
    w.writerow(flat.values())
    return buf.getvalue()


# --- subcommands -----------------------------------------------------------------

def cmd_validate(args, geom):
    problems = validate(geom)
    text = f"valid: {_scalar(not problems)}\n"
    text += "violations:\n" + "".join(f'  - "{p}"\n' for p in problems) if problems else "violations: []\n"
    write_output(args, text)
    return EXIT_OK if not problems else EXIT_USAGE


def cmd_ik(args, geom):
    state = inverse_kinematics(geom, _vector(args.point, "point"), _branch(args.branch))
    write_output(args, _render(_state_doc(state, geom), args.format))
    return EXIT_OK


def cmd_fk(args, geom):
    hint = _vector(args.hint, "hint") if args.hint else None
    state = forward_kinematics(geom, _vector(args.rho, "rho"), hint)
    write_output(args, _render(_state_doc(state, geom), args.format))
    return EXIT_OK


def cmd_analyze(args, geom):
    state = inverse_kinematics(geom, _vector(args.point, "point"), _branch(args.branch))
    doc = {"p": state.p, "rho": state.rho}
    doc.update(analyze(geom, state).as_dict())
    if args.format == "csv":
        # the csv row carries scalars and 3-vectors only
        doc.pop("ellipsoid")
        doc = {k: ([math.nan] * 3 if v is None else v) for k, v in doc.items()}
    write_output(args, _render(doc, args.format))
    return EXIT_OK


def _predicate(args, geom):
    lo, hi = _pair(args.psi, "psi")
    return PointPredicate(geom, require_joint_limits=not args.no_joint_limits,
                          psi_bounds=(lo, hi), threads=args.threads)


def _box(args, geom):
    center, half = default_root_box(geom)
    if getattr(args, "design", None):
        try:
            with open(args.design, encoding="utf-8") as fh:
                res, _ = load_design(fh.read())
        except OSError as exc:
            raise OSError(f"cannot read design file {args.design}: {exc.strerror}") from None
        center, half = np.array(res.center), res.half_side
    if args.center:
        center = np.array(_vector(args.center, "center"))
    if args.half_side is not None:
        half = args.half_side
    return center, half


def cmd_map(args, geom):
    center, half = _box(args, geom)
    plane = None
    if args.plane:
        name, _, off = args.plane.partition("=")
        if name not in ("x", "y", "z") or not off:
            raise UsageError(f"--plane: expected e.g. z=0, got {args.plane!r}")
        plane = (name, float(off))
    grid = GridSpec(tuple(float(v) for v in center), float(half), args.grid, plane)
    pred = _predicate(args, geom)
    pts = grid.points()
    vals = field_values(geom, args.quantity, pts)
    feas = pred(pts)
    buf = io.StringIO()
    buf.write("x,y,z,value,feasible\n")
    for (x, y, z), v, f in zip(pts, vals, feas):
        buf.write(f"{fmt(x)},{fmt(y)},{fmt(z)},{fmt(v)},{int(f)}\n")
    write_output(args, buf.getvalue())
    fv = vals[feas]
    sys.stderr.write(
        f"map {args.quantity}: {len(pts)} points, {int(feas.sum())} feasible"
        + (f", feasible range [{fmt(np.nanmin(fv))}, {fmt(np.nanmax(fv))}]\n" if fv.size else "\n"))
    return EXIT_OK


def cmd_section(args, geom):
    pred = _predicate(args, geom)
    root = default_root_box(geom)
    sec = cross_section(pred, args.axis, args.offset, args.resolution, root)
    pts = sec.points()
    feas = sec.feasible.ravel()
    codes = sec.reasons.ravel()
    buf = io.StringIO()
    buf.write("x,y,z,feasible,reasons\n")
    for (x, y, z), f, c in zip(pts, feas, codes):
        buf.write(f"{fmt(x)},{fmt(y)},{fmt(z)},{int(f)},{'|'.join(reason_list(int(c)))}\n")
    write_output(args, buf.getvalue())
    sys.stderr.write(f"section {args.axis}={fmt(args.offset)}: area {fmt(sec.area)}\n")
    return EXIT_OK


def cmd_workspace(args, geom):
    pred = _predicate(args, geom)
    root = default_root_box(geom)
    if args.half_side is not None:
        root = (root[0], args.half_side)
    octree = compute_octree(pred, root, args.depth)
    conn = t_connected(octree)
    centers = octree.cell_centers()
    halves = octree.cell_half_sides()
    keep = octree.label != 0 if not args.all_cells else np.ones(len(halves), bool)
    buf = io.StringIO()
    buf.write("x_center,y_center,z_center,half_side,label\n")
    for (x, y, z), h, lab in zip(centers[keep], halves[keep], octree.label[keep]):
        buf.write(f"{fmt(x)},{fmt(y)},{fmt(z)},{fmt(h)},{LABEL_NAMES[int(lab)]}\n")
    write_output(args, buf.getvalue())
    summary = {
        "schema": 1,
        "workspace_summary": {
            "root_box": {"center": octree.center, "half_side": octree.half_side},
            "max_depth": octree.max_depth,
            "psi_bounds": list(pred.psi_bounds),
            "volume_lower": octree.volume_lower,
            "volume_upper": octree.volume_upper,
            "cells": octree.counts(),
            "connected": conn.connected,
            "component_count": conn.component_count,
            "largest_component_volume": conn.largest_component_volume,
        },
    }
    text = emit(summary) + "\n"
    if args.summary:
        sub = argparse.Namespace(out=args.summary)
        write_output(sub, text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def cmd_design(args, geom):
    lo, hi = _pair(args.psi, "psi")
    res = size_joint_limits(geom, (lo, hi), args.grid)
    write_output(args, save_design(res, geom))
    m = size_metrics(geom, res)
    sys.stderr.write(
        f"certified cube half-side {fmt(res.half_side)}, psi range [{fmt(res.psi_extremes[0])}, "
        f"{fmt(res.psi_extremes[1])}], volume ratio {fmt(m['volume_ratio'])}\n")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "ik": cmd_ik,
    "fk": cmd_fk,
    "analyze": cmd_analyze,
    "map": cmd_map,
    "section": cmd_section,
    "workspace": cmd_workspace,
    "design": cmd_design,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p, suppress: bool) -> None:
    def d(value):
        return argparse.SUPPRESS if suppress else value
    p.add_argument("--model", default=d(None), help="model or design file (YAML); default: canonical machine")
    p.add_argument("--leg-length", type=float, default=d(1.0),
                   help="strut length of the canonical machine when --model is absent")
    p.add_argument("--out", default=d(None), help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "text"), default=d("text"))
    p.add_argument("--threads", type=int, default=d(1))


def build_parser() -> argparse.ArgumentParser:
    # global flags may appear before or after the subcommand
    common = _Parser(add_help=False)
    _add_common(common, suppress=True)

    parser = _Parser(prog="orthoglide", description="Orthoglide kinematics and workspace analysis.")
    _add_common(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"orthoglide {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[common], help="check model invariants")

    p = sub.add_parser("ik", parents=[common], help="inverse kinematics at a point")
    p.add_argument("--point", required=True)
    p.add_argument("--branch", default="-,-,-")

    p = sub.add_parser("fk", parents=[common], help="forward kinematics for joint positions")
    p.add_argument("--rho", required=True)
    p.add_argument("--hint")

    p = sub.add_parser("analyze", parents=[common], help="conditioning and singularity report at a point")
    p.add_argument("--point", required=True)
    p.add_argument("--branch", default="-,-,-")

    def feas(q):
        q.add_argument("--psi", default="1/3,3", help="amplification bounds lo,hi (fractions allowed, default 1/3,3)")
        q.add_argument("--no-joint-limits", action="store_true")

    p = sub.add_parser("map", parents=[common], help="scalar field on a grid (CSV)")
    p.add_argument("--quantity", choices=QUANTITIES, required=True)
    p.add_argument("--grid", type=int, default=33, help="nodes per axis")
    p.add_argument("--center")
    p.add_argument("--half-side", type=float)
    p.add_argument("--design", help="use the certified cube of this design file as the grid box")
    p.add_argument("--plane", help="restrict to one plane, e.g. z=0")
    feas(p)

    p = sub.add_parser("section", parents=[common], help="feasibility on a plane (CSV)")
    p.add_argument("--axis", choices=("x", "y", "z"), default="z")
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--resolution", type=int, default=128)
    feas(p)

    p = sub.add_parser("workspace", parents=[common], help="octree workspace (voxel CSV + summary)")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--half-side", type=float, help="root box half-side (default 1.5 L)")
    p.add_argument("--summary", help="write the summary here instead of stderr")
    p.add_argument("--all-cells", action="store_true", help="also list outside cells")
    feas(p)

    p = sub.add_parser("design", parents=[common], help="size joint limits for a psi bound")
    p.add_argument("--psi", default="1/3,3")
    p.add_argument("--grid", type=int, default=21)
    return parser


def summary_line(args) -> str:
    params = {k: v for k, v in sorted(vars(args).items()) if k != "command" and v not in (None, False)}
    listed = " ".join(f"{k}={v}" for k, v in params.items())
    return f"# orthoglide {__version__} numpy {np.__version__} {args.command} {listed}\n"


_VECTOR_FLAGS = ("--point", "--rho", "--hint", "--center", "--psi", "--branch")


def _join_vector_args(argv):
    """Turn ``--rho -1,-1,-1`` into ``--rho=-1,-1,-1`` so argparse keeps the value."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VECTOR_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_vector_args(argv))
        if args.threads < 1:
            parser.error("--threads must be >= 1")
    except SystemExit as exc:
        # --help / --version exit 0, parse errors exit with EXIT_USAGE
        return int(exc.code or 0)
    sys.stderr.write(summary_line(args))
    try:
        geom = load_model(args)
        return COMMANDS[args.command](args, geom)
    except (UnreachableError, NoAssemblyError, AmbiguousAssemblyError, KinematicsError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_KINEMATIC
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except (UsageError, GeometryParseError, DesignError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
