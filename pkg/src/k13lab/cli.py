"""Command-line front end: reproducible runs, manifests, figures.

Subcommands: blowup | minimize | verify {q-bounds, pi-bounds, poincare,
gradient} | boundary-gen | decay | residual.  Every successful run writes
delimited outputs plus a ``run.json`` manifest (command, merged options,
version, input hashes, wall clock, output list).  Exit codes: 0 success,
1 validation failure (bad arguments, failed numeric caps), 2 internal error.

Option precedence is flags over ``--config`` JSON over built-in defaults.
Numeric outputs are bit-identical for any ``--threads`` value; the manifest
itself carries wall-clock and the thread echo, so it is the one file
excluded from that contract.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, figures
from .analysis import (
    decay_scan, poincare_experiment, random_graph_suite,
    verify_projection_bounds, verify_rotation_bounds,
)
from .constructions import (
    BlowupParams, closed_form_blowup_energy, equator_pattern,
    equator_rotation_trace, genus_boundary_field, oldano_barbero_field,
    vortex_trace,
)
from .energy import full_energy
from .fields import (
    EnergyParams, field_from_csv, field_to_csv, field_to_vtk, make_field,
)
from .geometry import build_box_domain, build_graph_domain, make_graph_fn
from .optimizer import (
    MinimizeOptions, boundary_alignment, euler_lagrange_residual,
    gradient_check, minimize_reduced_energy,
)


class CliError(ValueError):
    """Bad invocation or failed validation; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad args; the contract wants 1 with usage text
    def error(self, message):
        raise CliError(f"{message}\n{self.format_usage().rstrip()}")


# ---------------------------------------------------------------------------
# small parsing helpers (all accept both CLI strings and config-file values)

def _floats(v) -> list:
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x != ""]


def _centers3(v) -> np.ndarray:
    if isinstance(v, (list, tuple)):
        out = [[float(c) for c in row] for row in v]
    else:
        out = [[float(c) for c in part.split(",")]
               for part in str(v).split(";") if part]
    arr = np.asarray(out, float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise CliError("centers must be 'x,y,z;x,y,z;...' triples")
    return arr


def _graph_from_spec(spec: str):
    kind, _, rest = str(spec).partition(":")
    if kind == "flat":
        return make_graph_fn("flat")
    if kind == "paraboloid":
        return make_graph_fn("paraboloid", a=float(rest))
    if kind == "sinusoid":
        a, _, om = rest.partition(":")
        return make_graph_fn("sinusoid", a=float(a), omega=float(om))
    raise CliError(f"unknown graph spec {spec!r} "
                   "(flat | paraboloid:a | sinusoid:a:omega)")


def _trace_field(spec: str, dom):
    """Initial/boundary field from a trace spec; returns (field, input files)."""
    kind, _, rest = str(spec).partition(":")
    if kind == "equator":
        return equator_rotation_trace(dom, float(rest or 1.0)), []
    if kind == "vortex":
        centers, orients = [], []
        for part in rest.split(";"):
            cx, cy, o = part.split(",")
            centers.append((float(cx), float(cy)))
            orients.append(int(o))
        return vortex_trace(dom, centers, orients), []
    if kind == "fixed":
        if not rest:
            raise CliError("fixed trace needs a CSV path: fixed:<file>")
        return field_from_csv(dom, rest), [rest]
    raise CliError(f"unknown trace spec {spec!r} "
                   "(equator:alpha | vortex:x,y,o;... | fixed:<file>)")


def _np_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON-serializable: {type(o).__name__}")


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_np_default)
        f.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# subcommand handlers: each returns (output names, input files, exit code)

def _cmd_blowup(args, outdir: Path, pool):
    eps_list = _floats(args.eps)
    if not eps_list:
        raise CliError("--eps needs at least one value")
    params = EnergyParams(K=args.K, K13=args.K13)
    hx = args.l / 4.0 if args.hx is None else float(args.hx)
    rows = []
    for eps in eps_list:
        bp = BlowupParams(rho0=args.rho0, eps=eps, l=args.l, d=args.d)
        hz = eps * eps / 4.0
        dom = build_box_domain(args.l, args.d, hx, hz=hz)
        fld = oldano_barbero_field(dom, bp)
        rep = full_energy(fld, params, depth=args.depth)
        cf = closed_form_blowup_energy(bp, args.K, args.K13)
        denom = abs(cf) if cf != 0.0 else 1.0
        rows.append({"eps": eps, "hx": hx, "hz": hz, "numeric": rep.total,
                     "dirichlet": rep.dirichlet, "surface": rep.surface,
                     "closed_form": cf,
                     "rel_err": abs(rep.total - cf) / denom})
    with open(outdir / "blowup.csv", "w") as f:
        cols = ["eps", "hx", "hz", "numeric", "dirichlet", "surface",
                "closed_form", "rel_err"]
        f.write(",".join(cols) + "\n")
        for r in rows:
            f.write(",".join(repr(float(r[c])) for c in cols) + "\n")
    _write_json(outdir / "blowup.json",
                {"K": args.K, "K13": args.K13, "rho0": args.rho0,
                 "l": args.l, "d": args.d, "depth": args.depth,
                 "results": rows})
    figures.blowup_figure(outdir / "blowup.png", [r["eps"] for r in rows],
                          [r["numeric"] for r in rows],
                          [r["closed_form"] for r in rows])
    return ["blowup.csv", "blowup.json", "blowup.png"], [], 0


def _cmd_minimize(args, outdir: Path, pool):
    graph = _graph_from_spec(args.graph)
    dom = build_graph_domain(graph, args.h)
    init, inputs = _trace_field(args.trace, dom)
    mode = args.mode
    if mode is None:
        mode = "fixed-trace" if str(args.trace).startswith("fixed:") \
            else "tangential-free"
    args.mode = mode   # manifest echoes the resolved mode
    params = EnergyParams(K=args.K, K13=args.K13)
    opts = MinimizeOptions(max_iters=args.max_iters, step0=args.step0,
                           grad_tol=args.grad_tol, energy_tol=args.energy_tol,
                           boundary_mode=mode)
    fld, trace = minimize_reduced_energy(init, params, opts)

    field_to_csv(fld, outdir / "field.csv")
    field_to_vtk(fld, outdir / "field.vtk")
    with open(outdir / "trace.csv", "w") as f:
        f.write("iter,energy,grad_norm,unit_violation,tangency_violation,"
                "step,backtracks\n")
        for i, e in enumerate(trace.energies):
            step = repr(float(trace.steps[i - 1])) if i > 0 else ""
            bt = str(int(trace.backtracks[i - 1])) if i > 0 else ""
            f.write(f"{i},{float(e)!r},{float(trace.grad_norms[i])!r},"
                    f"{float(trace.unit_violations[i])!r},"
                    f"{float(trace.tangency_violations[i])!r},{step},{bt}\n")
    _write_json(outdir / "minimize.json",
                {"graph": args.graph, "h": args.h, "K": args.K,
                 "K13": args.K13, "boundary_mode": mode,
                 "n_nodes": dom.n_nodes,
                 "initial_energy": trace.energies[0],
                 "final_energy": trace.energies[-1],
                 "iterations": trace.iterations,
                 "converged": trace.converged, "reason": trace.reason,
                 "final_grad_norm": trace.grad_norms[-1],
                 "max_unit_violation": max(trace.unit_violations),
                 "max_tangency_violation": max(trace.tangency_violations)})
    figures.trace_figure(outdir / "trace.png", trace)
    return (["field.csv", "field.vtk", "trace.csv", "minimize.json",
             "trace.png"], inputs, 0)


def _verify_outputs(outdir: Path, stem: str, reports) -> tuple:
    _write_json(outdir / f"{stem}.json",
                {"reports": [r.to_dict() for r in reports],
                 "all_satisfied": all(r.satisfied for r in reports)})
    figures.bounds_figure(outdir / f"{stem}.png", reports)
    code = 0 if all(r.satisfied for r in reports) else 1
    return [f"{stem}.json", f"{stem}.png"], code


def _cmd_verify(args, outdir: Path, pool):
    if args.check == "q-bounds":
        graphs = random_graph_suite(args.graphs, seed=args.seed)
        reports = verify_rotation_bounds(graphs,
                                         samples_per_graph=args.samples,
                                         seed=args.seed, pool=pool)
        outs, code = _verify_outputs(outdir, "qbounds", reports)
        return outs, [], code
    if args.check == "pi-bounds":
        reports = verify_projection_bounds(n_fd=args.samples_fd,
                                           n_triples=args.samples_cross,
                                           seed=args.seed, pool=pool)
        outs, code = _verify_outputs(outdir, "pibounds", reports)
        return outs, [], code
    if args.check == "poincare":
        graphs = random_graph_suite(args.graphs, seed=args.seed, lip_max=0.5)
        report = poincare_experiment(graphs, fields_per_graph=args.fields,
                                     h=args.h, seed=args.seed, pool=pool)
        outs, code = _verify_outputs(outdir, "poincare", [report])
        return outs, [], code
    if args.check == "gradient":
        graph = _graph_from_spec(args.graph)
        dom = build_graph_domain(graph, args.h)
        fld = equator_rotation_trace(dom, args.alpha)
        params = EnergyParams(K=args.K, K13=args.K13)
        err = gradient_check(fld, params, n_probes=args.probes,
                             step=args.step, seed=args.seed,
                             boundary_mode=args.mode)
        _write_json(outdir / "gradient.json",
                    {"graph": args.graph, "h": args.h, "K": args.K,
                     "K13": args.K13, "alpha": args.alpha,
                     "probes": args.probes, "fd_step": args.step,
                     "max_rel_error": err, "tol": args.tol,
                     "satisfied": bool(err <= args.tol)})
        return ["gradient.json"], [], 0 if err <= args.tol else 1
    raise CliError("verify needs one of: q-bounds, pi-bounds, poincare, "
                   "gradient")


def _cmd_boundary_gen(args, outdir: Path, pool):
    data = genus_boundary_field(args.genus, n_u=args.nu, n_v=args.nv)
    stem = f"boundary_g{args.genus}"
    data.to_csv(outdir / f"{stem}.csv")
    ok = data.ledger_sum() == data.chi
    _write_json(outdir / f"{stem}.json",
                {"genus": args.genus, "chi": data.chi,
                 "ledger_sum": data.ledger_sum(),
                 "ledger_matches_chi": ok,
                 "tangency_violation": data.tangency_violation(),
                 "n_nodes": len(data.positions),
                 "vortices": [{"center": list(v.center), "chart": v.chart,
                               "chart_sign": v.chart_sign,
                               "winding": v.winding}
                              for v in data.vortices],
                 "meta": data.meta})
    figures.ledger_figure(outdir / f"{stem}.png", data)
    return ([f"{stem}.csv", f"{stem}.json", f"{stem}.png"], [],
            0 if ok else 1)


def _cmd_decay(args, outdir: Path, pool):
    graph = _graph_from_spec(args.graph)
    dom = build_graph_domain(graph, args.h)
    if args.field is not None:
        fld, inputs = field_from_csv(dom, args.field), [args.field]
    else:
        fld, inputs = _trace_field(args.trace, dom)
    if args.minimize:
        params = EnergyParams(K=args.K, K13=args.K13)
        opts = MinimizeOptions(max_iters=args.max_iters,
                               grad_tol=args.grad_tol)
        fld, _ = minimize_reduced_energy(fld, params, opts)
    centers = _centers3(args.centers)
    results = decay_scan(fld, centers, R=args.radius, levels=args.levels)
    with open(outdir / "decay.csv", "w") as f:
        f.write("cx,cy,cz,r,clip_integral,exponent,residual\n")
        for c, res in zip(centers, results):
            for r, v in zip(res.profile.radii, res.profile.values):
                f.write(",".join(repr(float(x)) for x in
                                 (c[0], c[1], c[2], r, v,
                                  res.exponent, res.residual)) + "\n")
    _write_json(outdir / "decay.json",
                {"graph": args.graph, "h": args.h, "radius": args.radius,
                 "levels": args.levels, "minimized": bool(args.minimize),
                 "results": [{"center": list(c),
                              "radii": res.profile.radii,
                              "values": res.profile.values,
                              "exponent": res.exponent,
                              "residual": res.residual}
                             for c, res in zip(centers, results)]})
    figures.decay_figure(outdir / "decay.png", results)
    return ["decay.csv", "decay.json", "decay.png"], inputs, 0


def _cmd_residual(args, outdir: Path, pool):
    inputs = []
    if args.box is not None:
        spec = _floats(args.box)
        if len(spec) != 4:
            raise CliError("--box needs 'l,d,hx,hz'")
        l, d, hx, hz = spec
        dom = build_box_domain(l, d, hx, hz=hz)
        alpha = args.alpha
        fld = make_field(dom, lambda c: equator_pattern(c[:, :2], alpha))
    else:
        graph = _graph_from_spec(args.graph)
        dom = build_graph_domain(graph, args.h)
        if args.field is not None:
            fld, inputs = field_from_csv(dom, args.field), [args.field]
        else:
            fld, inputs = _trace_field(args.trace, dom)
    rep = euler_lagrange_residual(fld)
    align = boundary_alignment(fld)
    with open(outdir / "residual.csv", "w") as f:
        f.write("node,rx,ry,rz,norm\n")
        for nid, r in zip(rep.node_ids, rep.residuals):
            f.write(f"{int(nid)},{float(r[0])!r},{float(r[1])!r},"
                    f"{float(r[2])!r},{repr(float(np.linalg.norm(r)))}\n")
    _write_json(outdir / "residual.json",
                {"max_norm": rep.max_norm, "l2_norm": rep.l2_norm,
                 "spacing": rep.spacing, "n_interior": len(rep.node_ids),
                 "alignment_max": (float(np.max(align)) if len(align)
                                   else None)})
    outs = ["residual.csv", "residual.json"]
    if len(align):
        figures.alignment_figure(outdir / "residual.png", align,
                                 residual_max=rep.max_norm)
        outs.append("residual.png")
    return outs, inputs, 0


# ---------------------------------------------------------------------------
# parser construction and the run() entry point

def _build_parser(suppress: bool = False):
    sup = argparse.SUPPRESS

    def dflt(v):
        return sup if suppress else v

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=dflt(None),
                        help="JSON file of option defaults")
    common.add_argument("--out", default=dflt("."), help="output directory")
    common.add_argument("--threads", type=int, default=dflt(1),
                        help="worker cap; 1 is the reference path")
    common.add_argument("--seed", type=int, default=dflt(0))

    p = _Parser(prog="k13lab",
                description="Numerical laboratory for sphere-valued maps "
                            "with a boundary flux term.")
    p.add_argument("--version", action="version",
                   version=f"k13lab {__version__}")
    sub = p.add_subparsers(dest="command", metavar="subcommand")

    b = sub.add_parser("blowup", parents=[common],
                       help="boundary-layer family vs its closed-form energy")
    b.add_argument("--rho0", type=float, default=dflt(np.pi / 4.0))
    b.add_argument("--eps", default=dflt("0.2,0.1,0.05"),
                   help="comma-separated layer scales")
    b.add_argument("--K", type=float, default=dflt(1.0))
    b.add_argument("--K13", type=float, default=dflt(1.0))
    b.add_argument("--l", type=float, default=dflt(1.0))
    b.add_argument("--d", type=float, default=dflt(1.0))
    b.add_argument("--depth", type=int, default=dflt(3),
                   help="one-sided stencil depth for the flux term")
    b.add_argument("--hx", type=float, default=dflt(None),
                   help="lateral spacing (default l/4; field is z-only)")

    m = sub.add_parser("minimize", parents=[common],
                       help="projected line-search descent of the reduced "
                            "energy")
    m.add_argument("--graph", default=dflt("flat"))
    m.add_argument("--h", type=float, default=dflt(0.125))
    m.add_argument("--K", type=float, default=dflt(1.0))
    m.add_argument("--K13", type=float, default=dflt(0.0))
    m.add_argument("--trace", default=dflt("equator:1.0"),
                   help="equator:alpha | vortex:x,y,o;... | fixed:<file>")
    m.add_argument("--mode", choices=["tangential-free", "fixed-trace"],
                   default=dflt(None))
    m.add_argument("--max-iters", type=int, default=dflt(500))
    m.add_argument("--step0", type=float, default=dflt(1.0))
    m.add_argument("--grad-tol", type=float, default=dflt(1e-8))
    m.add_argument("--energy-tol", type=float, default=dflt(0.0))

    v = sub.add_parser("verify", help="certify the quantitative bounds")
    vs = v.add_subparsers(dest="check", metavar="check")
    vq = vs.add_parser("q-bounds", parents=[common],
                       help="rotation-field estimates on random graphs")
    vq.add_argument("--graphs", type=int, default=dflt(100))
    vq.add_argument("--samples", type=int, default=dflt(1000))
    vp = vs.add_parser("pi-bounds", parents=[common],
                       help="tangent-line projection derivative estimates")
    vp.add_argument("--samples-fd", type=int, default=dflt(1000))
    vp.add_argument("--samples-cross", type=int, default=dflt(10000))
    vo = vs.add_parser("poincare", parents=[common],
                       help="mean-deviation vs gradient ratio stability")
    vo.add_argument("--graphs", type=int, default=dflt(20))
    vo.add_argument("--fields", type=int, default=dflt(5))
    vo.add_argument("--h", type=float, default=dflt(0.125))
    vg = vs.add_parser("gradient", parents=[common],
                       help="analytic gradient against finite differences")
    vg.add_argument("--graph", default=dflt("flat"))
    vg.add_argument("--h", type=float, default=dflt(0.125))
    vg.add_argument("--K", type=float, default=dflt(1.0))
    vg.add_argument("--K13", type=float, default=dflt(1.0))
    vg.add_argument("--alpha", type=float, default=dflt(1.0))
    vg.add_argument("--probes", type=int, default=dflt(8))
    vg.add_argument("--step", type=float, default=dflt(1e-5))
    vg.add_argument("--tol", type=float, default=dflt(1e-5))
    vg.add_argument("--mode", choices=["tangential-free", "fixed-trace"],
                    default=dflt("tangential-free"))

    g = sub.add_parser("boundary-gen", parents=[common],
                       help="tangent boundary data on a closed genus-k "
                            "surface with its winding ledger")
    g.add_argument("--genus", type=int, default=dflt(0), choices=[0, 1, 2])
    g.add_argument("--nu", type=int, default=dflt(96),
                   help="samples along the first chart coordinate")
    g.add_argument("--nv", type=int, default=dflt(48),
                   help="samples along the second chart coordinate")

    d = sub.add_parser("decay", parents=[common],
                       help="clipped-energy decay exponents around centers")
    d.add_argument("--graph", default=dflt("flat"))
    d.add_argument("--h", type=float, default=dflt(0.03125))
    d.add_argument("--K", type=float, default=dflt(1.0))
    d.add_argument("--K13", type=float, default=dflt(0.0))
    d.add_argument("--field", default=dflt(None), help="nodal CSV to load")
    d.add_argument("--trace", default=dflt("equator:1.0"))
    d.add_argument("--minimize", action="store_true",
                   default=dflt(False))
    d.add_argument("--max-iters", type=int, default=dflt(500))
    d.add_argument("--grad-tol", type=float, default=dflt(1e-8))
    d.add_argument("--centers", default=dflt("0.0,0.0,-0.5"),
                   help="'x,y,z;x,y,z;...' clip centers")
    d.add_argument("--radius", type=float, default=dflt(0.5))
    d.add_argument("--levels", type=int, default=dflt(4))

    r = sub.add_parser("residual", parents=[common],
                       help="interior critical-point residual and boundary "
                            "alignment")
    r.add_argument("--box", default=dflt(None),
                   help="'l,d,hx,hz' box domain with the horizontal "
                        "rotating pattern")
    r.add_argument("--alpha", type=float, default=dflt(1.0))
    r.add_argument("--graph", default=dflt("flat"))
    r.add_argument("--h", type=float, default=dflt(0.0625))
    r.add_argument("--field", default=dflt(None))
    r.add_argument("--trace", default=dflt("equator:1.0"))

    return p


_HANDLERS = {
    "blowup": _cmd_blowup,
    "minimize": _cmd_minimize,
    "verify": _cmd_verify,
    "boundary-gen": _cmd_boundary_gen,
    "decay": _cmd_decay,
    "residual": _cmd_residual,
}


def _parse_merged(argv) -> argparse.Namespace:
    base = _build_parser().parse_args(argv)
    if base.command is None:
        raise CliError("a subcommand is required\n"
                       + _build_parser().format_usage().rstrip())
    if base.command == "verify" and getattr(base, "check", None) is None:
        raise CliError("verify needs one of: q-bounds, pi-bounds, poincare, "
                       "gradient")
    cfg_path = getattr(base, "config", None)
    if cfg_path is None:
        return base
    try:
        with open(cfg_path) as f:
            cfg = json.load(f)
    except OSError as e:
        raise CliError(f"cannot read config {cfg_path}: {e}")
    except json.JSONDecodeError as e:
        raise CliError(f"config {cfg_path} is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise CliError(f"config {cfg_path} must hold a JSON object")
    known = set(vars(base))
    banned = {"command", "check", "config"}
    bad = sorted((set(cfg) - known) | (set(cfg) & banned))
    if bad:
        raise CliError(f"config keys not valid for this subcommand: {bad}")
    explicit = vars(_build_parser(suppress=True).parse_args(argv))
    merged = dict(vars(base))
    merged.update(cfg)
    merged.update(explicit)
    return argparse.Namespace(**merged)


def run(argv=None) -> int:
    """Execute one subcommand; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    try:
        args = _parse_merged(argv)
        if args.threads < 1:
            raise CliError("--threads must be at least 1")
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        pool = (ThreadPoolExecutor(max_workers=args.threads)
                if args.threads > 1 else None)
        try:
            outputs, inputs, code = _HANDLERS[args.command](args, outdir,
                                                            pool)
        finally:
            if pool is not None:
                pool.shutdown()
        if getattr(args, "config", None):
            inputs = [args.config] + list(inputs)
        manifest = {
            "command": args.command + (f" {args.check}"
                                       if args.command == "verify" else ""),
            "options": {k: v for k, v in sorted(vars(args).items())
                        if k not in ("command", "check")},
            "version": __version__,
            "inputs": {str(p): _sha256(p) for p in inputs},
            "wall_clock_s": round(time.perf_counter() - t0, 3),
            "outputs": sorted(outputs),
        }
        _write_json(outdir / "run.json", manifest)
        return code
    except CliError as e:
        print(f"k13lab: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"k13lab: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - contract: internal errors exit 2
        print(f"k13lab: internal error: {type(e).__name__}: {e}",
              file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
