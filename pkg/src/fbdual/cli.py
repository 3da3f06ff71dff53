"""Command-line entry point: ``fbdual {mesh gen, verify, simulate, decompose, report}``.

Exit codes: 0 success, 1 a check or simulation failed, 2 usage error,
3 numerical or I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import dec, dualpair, euler, mesh as meshmod, phase
from .catalog import make_catalog

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("fbdual")


class UsageError(Exception):
    pass


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


# ---------------------------------------------------------------------------
# mesh gen


def build_mesh(spec: dict) -> meshmod.Mesh:
    shape = spec.get("shape")
    if shape == "square":
        return meshmod.build_square(int(spec.get("n", 1)), float(spec.get("side", 1.0)))
    if shape == "disk":
        return meshmod.build_disk(int(spec.get("nr", 4)), int(spec.get("na", 16)),
                                  float(spec.get("radius", 1.0)))
    if shape == "annulus":
        return meshmod.build_annulus(int(spec.get("nr", 1)), int(spec.get("na", 8)),
                                     float(spec.get("rin", 0.5)), float(spec.get("rout", 1.0)))
    raise UsageError(f"unknown shape {shape!r}")


def mesh_summary(m: meshmod.Mesh) -> dict:
    return {"vertices": m.n_vertices, "triangles": m.n_triangles, "edges": m.n_edges,
            "boundary_loops": len(m.boundary_loops), "total_area": m.total_area(),
            "euler_characteristic": m.euler_characteristic()}


def cmd_mesh_gen(args) -> int:
    spec = {"shape": args.shape, "n": args.n, "side": args.side, "nr": args.nr, "na": args.na,
            "radius": args.radius, "rin": args.rin, "rout": args.rout}
    try:
        m = build_mesh(spec)
    except (ValueError, meshmod.MeshError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.output) if args.output else Path(args.out_dir) / f"{args.shape}.json"
    meshmod.save_mesh(m, out)
    s = mesh_summary(m)
    _say(args, f"wrote {out}: V={s['vertices']} T={s['triangles']} boundary loops={s['boundary_loops']} "
               f"area={s['total_area']:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _load_or_default(path) -> meshmod.Mesh:
    return meshmod.load_mesh(path) if path else meshmod.build_square(1)


def _scalar_function(m: meshmod.Mesh, positions, name: str) -> np.ndarray:
    if name == "coord-x":
        return positions[:, 0].copy()
    if name == "coord-y":
        return positions[:, 1].copy()
    raise UsageError(f"unknown function {name!r}; use coord-x or coord-y")


def _w_basis(m: meshmod.Mesh, kind: str, degree: int):
    if kind == "full":
        return phase.w_basis_full(m)
    return phase.w_basis_streams(m, make_catalog("trig", degree).fields[2:])


def cmd_verify(args) -> int:
    m = _load_or_default(args.mesh)
    suites = ("weak", "strong", "witness") if args.suite == "all" else (args.suite,)
    catalog = make_catalog(args.family, args.degree)
    w_basis = _w_basis(m, args.w_basis, args.degree)
    reports, rows, ok = [], [], True
    for k in range(args.points):
        seed = args.seed + k
        z = phase.random_phase_point(m, seed)
        for suite in suites:
            label = f"{suite}:seed={seed}"
            if suite == "weak":
                kw = {} if args.tol is None else {"tol": args.tol, "fd_tol": args.tol}
                rep = dualpair.check_weak_dual_pair(z, catalog, w_basis, **kw)
                d, passed = rep.to_dict(), rep.ok
                rows.append(rep.csv_row(label))
            elif suite == "strong":
                kw = {} if args.tol is None else {"tol": args.tol}
                rep = dualpair.check_pi_R_dual_pair(z, catalog, w_basis, **kw)
                d, passed = rep.to_dict(), rep.ok
                rows.append(rep.csv_row(label))
            else:
                h = _scalar_function(m, z.positions, args.h)
                kw = {} if args.tol is None else {"tj_tol": args.tol}
                rep = dualpair.nontransitivity_witness(z, h, args.family, range(1, args.degree + 1), **kw)
                d, passed = rep.to_dict(), rep.ok
                rows.append({"label": label, "kind": "witness", "ok": int(passed),
                             "tj_r_norm": repr(rep.tj_r_norm), "residual_floor": repr(rep.floor),
                             "witness_norm": repr(rep.witness_norm),
                             "lift_constant": repr(rep.lift_constant)})
            d["label"] = label
            reports.append(d)
            ok &= passed
            _say(args, f"{label}: {'pass' if passed else 'FAIL'}")
    out = Path(args.out_dir)
    _dump_json({"mesh": args.mesh, "suite": args.suite, "seed": args.seed, "points": args.points,
                "catalog": catalog.to_dict(), "w_basis": args.w_basis, "ok": ok, "reports": reports},
               out / "verify_report.json")
    (out / "verify_summary.csv").write_text(dualpair.write_csv(rows))
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# simulate


def _svg_frame(state: euler.FluidState, diag: euler.Diagnostics, k: int, extent: float) -> str:
    size = 400
    scale = size / (2.2 * extent)

    def xy(p):
        return f"{size / 2 + scale * p[0]:.3f},{size / 2 - scale * p[1]:.3f}"

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 40}">',
             '<rect width="100%" height="100%" fill="white"/>']
    for loop in state.mesh.boundary_loops:
        pts = " ".join(xy(p) for p in state.emb.positions[loop])
        parts.append(f'<polygon points="{pts}" fill="#dde8f5" stroke="#224" stroke-width="1.5"/>')
    vmax = max(diag.max_speed, 1e-300)
    for s in state.mesh.boundary_vertices:
        p = state.emb.positions[s]
        q = p + 0.1 * extent * state.velocity[s] / vmax
        parts.append(f'<line x1="{xy(p).split(",")[0]}" y1="{xy(p).split(",")[1]}" '
                     f'x2="{xy(q).split(",")[0]}" y2="{xy(q).split(",")[1]}" stroke="#b22" stroke-width="1"/>')
    parts.append(f'<text x="8" y="{size + 16}" font-family="monospace" font-size="12">step {k}  '
                 f't={state.time:.4f}  E={diag.energy:.6e}  area={diag.volume:.8f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_simulate(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    try:
        config = euler.RunConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if isinstance(config.mesh, dict):
        m = build_mesh(config.mesh)
    elif config.mesh:
        p = Path(config.mesh)
        if not p.is_absolute() and not p.exists():
            p = Path(args.config).parent / p
        m = meshmod.load_mesh(p)
    else:
        raise UsageError("run config names no mesh")
    out = Path(args.out_dir)
    frames = out / "frames" if args.svg_every else None
    if frames:
        frames.mkdir(parents=True, exist_ok=True)
    extent = float(np.abs(m.layout).max()) if m.layout is not None else 1.0

    def callback(k, state, diag):
        if frames and k % args.svg_every == 0:
            (frames / f"frame_{k:05d}.svg").write_text(_svg_frame(state, diag, k, extent))

    state = euler.initial_state(m, config)
    _dump_json(config.to_dict(), out / "run_config.json")
    try:
        final, rows = euler.run(state, config.dt, config.steps, config.volume_correction, callback)
    except (euler.StepRejected, euler.InversionError) as exc:
        print(f"simulation failed at step {exc.step_index}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    euler.write_trajectory(rows, out / "trajectory.csv")
    if rows:
        last = rows[-1]
        _say(args, f"completed {config.steps} steps to t={last['time']:.6g}: "
                   f"max|v|={last['max_speed']:.3e} energy={last['energy']:.6e} volume={last['volume']:.10f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# decompose


def _load_field(m: meshmod.Mesh, args) -> np.ndarray:
    x = m.layout
    if args.kind == "rotation":
        return np.stack([-x[:, 1], x[:, 0]], axis=1)
    if args.kind == "constant":
        return np.tile([1.0, 0.0], (m.n_vertices, 1))
    if not args.field:
        raise UsageError("give --field FILE or --kind rotation|constant")
    try:
        data = json.loads(Path(args.field).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"field file is not valid JSON: {exc}") from exc
    arr = np.asarray(data["field"] if isinstance(data, dict) else data, dtype=float)
    if arr.shape != (m.n_vertices, 2):
        raise UsageError(f"field has shape {arr.shape}, mesh needs ({m.n_vertices}, 2)")
    return arr


def cmd_decompose(args) -> int:
    m = _load_or_default(args.mesh)
    u = _load_field(m, args)
    split = euler.connection_split(phase.VolEmbedding.identity(m), u)
    d = split.to_dict()
    mass = m.vertex_mass
    d["norms"] = {
        "field": float(np.sqrt(np.sum(mass[:, None] * u * u))),
        "tangent_part": float(np.sqrt(np.sum(mass[:, None] * split.u_par ** 2))),
        "gradient_part": float(np.sqrt(np.sum(mass[:, None] * split.grad_part ** 2))),
        "reconstruction_error": float(np.abs(split.reconstruct() - u).max()),
    }
    _dump_json(d, Path(args.out_dir) / "decompose.json")
    n = d["norms"]
    _say(args, f"|u|={n['field']:.6e} tangent={n['tangent_part']:.6e} gradient={n['gradient_part']:.6e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    rows, keys = [], ["source"]
    for path in args.inputs:
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                r = {"source": str(path), **r}
                keys.extend(k for k in r if k not in keys)
                rows.append(r)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n", restval="")
    writer.writeheader()
    writer.writerows(rows)
    out = Path(args.output) if args.output else Path(args.out_dir) / "report.csv"
    out.write_text(buf.getvalue())
    _say(args, f"merged {len(rows)} rows from {len(args.inputs)} files into {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="override the main check tolerance")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for random phase points")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default: .)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="fbdual", parents=[common],
                                     description="Free-boundary fluid dual-pair laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    mesh_p = sub.add_parser("mesh", help="mesh utilities")
    mesh_sub = mesh_p.add_subparsers(dest="mesh_command", required=True)
    gen = mesh_sub.add_parser("gen", parents=[common], help="generate a fixture mesh")
    gen.add_argument("--shape", choices=("square", "disk", "annulus"), required=True)
    gen.add_argument("--n", type=int, default=1)
    gen.add_argument("--side", type=float, default=1.0)
    gen.add_argument("--nr", type=int, default=4)
    gen.add_argument("--na", type=int, default=16)
    gen.add_argument("--radius", type=float, default=1.0)
    gen.add_argument("--rin", type=float, default=0.5)
    gen.add_argument("--rout", type=float, default=1.0)
    gen.add_argument("-o", "--output")
    gen.set_defaults(func=cmd_mesh_gen)

    ver = sub.add_parser("verify", parents=[common], help="dual-pair checks at random phase points")
    ver.add_argument("--mesh", help="mesh JSON (default: two-triangle unit square)")
    ver.add_argument("--suite", choices=("weak", "strong", "witness", "all"), default="weak")
    ver.add_argument("--degree", type=int, default=4)
    ver.add_argument("--family", choices=("trig", "poly"), default="trig")
    ver.add_argument("--points", type=int, default=1)
    ver.add_argument("--w-basis", choices=("full", "streams"), default="full")
    ver.add_argument("--h", default="coord-x", help="witness function: coord-x or coord-y")
    ver.set_defaults(func=cmd_verify)

    sim = sub.add_parser("simulate", parents=[common], help="run a free-boundary Euler simulation")
    sim.add_argument("config", help="run config JSON")
    sim.add_argument("--svg-every", type=int, default=0, help="write an SVG frame every k steps")
    sim.set_defaults(func=cmd_simulate)

    decp = sub.add_parser("decompose", parents=[common], help="Helmholtz / connection split of a field")
    decp.add_argument("--mesh", help="mesh JSON (default: two-triangle unit square)")
    decp.add_argument("--field", help='JSON file {"field": [[ux, uy], ...]}')
    decp.add_argument("--kind", choices=("rotation", "constant"))
    decp.set_defaults(func=cmd_decompose)

    rep = sub.add_parser("report", parents=[common], help="merge CSV files")
    rep.add_argument("inputs", nargs="+")
    rep.add_argument("-o", "--output")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    for name, default in (("tol", None), ("seed", 0), ("out_dir", "."), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dec.SolverError, dec.DegenerateTriangleError, phase.ConstraintError, phase.RegimeError,
            sla.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, meshmod.MeshError) as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
