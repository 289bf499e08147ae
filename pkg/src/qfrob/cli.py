"""Command line front end: ``qfrob <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 spec/parse error, 3 numerical
failure, 4 property violation.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from .calculus import bracket_batch, jacobian_batch
from .catalog import catalog_entries, load_catalog, load_spec
from .chart import ChartConfig, build_chart, trace_slice, write_slice_csv
from .errors import NumericalError, PropertyViolation, QfrobError, SpecError
from .fields import VectorField, parse_field
from .flow import (
    FlowMap,
    commutation_defect,
    flow_jacobian_batch,
    liouville_check,
    mollification_stability,
    qc_growth_profile,
    trajectory,
)
from .grids import box_grid
from .planefield import PlaneField, involutivity_residual
from .report import AnalysisReport, dumps, write_csv
from .seminorms import (
    SamplingConfig,
    chain_verdict,
    estimate_lipschitz,
    estimate_q,
    estimate_sf_esssup,
    estimate_zygmund,
    geometric_radii,
)

EXIT_OK, EXIT_USAGE, EXIT_SPEC, EXIT_NUMERIC, EXIT_PROPERTY = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from exc


# ------------------------------------------------------------------ inputs

def _load_input(args, want: str):
    given = [a for a in ("catalog", "spec", "field") if getattr(args, a, None) is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --catalog, --spec, --field")
    if args.catalog is not None:
        obj, source = load_catalog(args.catalog), {"catalog": args.catalog}
    elif args.spec is not None:
        obj, source = load_spec(args.spec), {"spec": str(args.spec)}
    else:
        if args.dim is None:
            raise UsageError("--field needs --dim")
        obj, source = parse_field(args.field, args.dim), {"field": args.field, "dim": args.dim}
    if want == "field" and not isinstance(obj, VectorField):
        raise SpecError("this command needs a vector field, not a plane field")
    if want == "plane" and not isinstance(obj, PlaneField):
        raise SpecError("this command needs a plane field (frame)")
    return obj, source


def _load_other(text: str, n: int) -> VectorField:
    try:
        obj = load_catalog(text)
    except SpecError:
        obj = parse_field(text, n)
    if not isinstance(obj, VectorField) or obj.n != n:
        raise SpecError(f"--other must be a vector field in R^{n}")
    return obj


def _grid(domain, per_axis: int, scale: float, margin: float = 0.0):
    c = 0.5 * (domain.lo_array + domain.hi_array)
    half = 0.5 * scale * domain.widths - margin
    if np.any(half < 0):
        raise SpecError("grid region is empty")
    return box_grid(c - half, c + half, per_axis)


def _pairs(obj, args):
    """Field pairs to compare: all frame pairs of a plane field, or (field, --other)."""
    if isinstance(obj, PlaneField):
        return [(f"X{i + 1}", f"X{j + 1}", obj.frame[i], obj.frame[j])
                for i, j in itertools.combinations(range(obj.k), 2)]
    if args.other is None:
        raise UsageError("a vector field input needs --other")
    return [("X", "Y", obj, _load_other(args.other, obj.n))]


def _flowmap(f, args) -> FlowMap:
    return FlowMap(f, rtol=args.rel_tol, atol=args.abs_tol, max_step=args.max_step)


# ---------------------------------------------------------------- commands

def cmd_catalog(args, rep):
    rep.results["entries"] = catalog_entries()
    for e in rep.results["entries"]:
        print(f"{e['name']:18s} {e['kind']:6s} {e['description']}")
    return EXIT_OK


def cmd_seminorm(args, rep):
    f, src = _load_input(args, "field")
    rep.provenance.update(src)
    radii = geometric_radii(f.domain, args.radii)
    cfg = SamplingConfig(args.base_points, args.pairs, radii, args.seed, args.refine_steps, args.threads)
    rep.config["sampling"] = cfg.to_dict()
    q, z, l = estimate_q(f, cfg), estimate_zygmund(f, cfg), estimate_lipschitz(f, cfg)
    sf = estimate_sf_esssup(f, cfg, args.fd_step)
    verdict = chain_verdict(z.value, q.value, l.value)
    rep.results.update({
        "field": f.describe(),
        "Q": q.to_dict(), "Zygmund": z.to_dict(), "Lipschitz": l.to_dict(), "Sf": sf.to_dict(),
        "chain": verdict,
    })
    print(f"Q={q.value:.6g} Z={z.value:.6g} L={l.value:.6g} |Sf|={sf.value:.6g} chain {verdict['verdict']}")
    return EXIT_OK if verdict["verdict"] == "PASS" else EXIT_PROPERTY


def cmd_bracket(args, rep):
    obj, src = _load_input(args, "any")
    rep.provenance.update(src)
    P = _grid(obj.domain, args.grid, args.grid_scale, margin=1e-4 * max(1.0, float(np.max(np.abs(obj.domain.hi_array)))))
    n = obj.n
    rows, summary = [], []
    for a, b, X, Y in _pairs(obj, args):
        br, ok = bracket_batch(X, Y, P, args.fd_step)
        for p, v, good in zip(P, br, ok):
            rows.append([a, b, *p.tolist(), *(v.tolist() if good else [float("nan")] * n)])
        norms = np.linalg.norm(br[ok], axis=1)
        summary.append({"pair": [a, b], "max_norm": float(norms.max()) if norms.size else 0.0,
                        "points": len(P), "skipped": int((~ok).sum())})
        print(f"[{a},{b}] max |bracket| = {summary[-1]['max_norm']:.6g}")
    csv_path = write_csv(Path(args.out_dir) / "bracket.csv",
                         ["X", "Y", *[f"x{i + 1}" for i in range(n)], *[f"b{i + 1}" for i in range(n)]], rows)
    rep.results.update({"pairs": summary, "csv": csv_path.name})
    return EXIT_OK


def cmd_involutivity(args, rep):
    E, src = _load_input(args, "plane")
    rep.provenance.update(src)
    P = _grid(E.domain, args.grid, args.grid_scale, margin=1e-4)
    r = involutivity_residual(E, P, args.fd_step)
    rep.results.update({"plane": E.describe(), "residual": r})
    print(f"residual max={r['max']:.6g} p99={r['p99']:.6g} involutive={r['involutive']}")
    return EXIT_OK if r["involutive"] else EXIT_PROPERTY


def cmd_flow(args, rep):
    f, src = _load_input(args, "field")
    rep.provenance.update(src)
    x0 = np.array(args.x0 if args.x0 is not None else np.zeros(f.n), dtype=float)
    if x0.size != f.n:
        raise UsageError(f"--x0 needs {f.n} coordinates")
    times, pts = trajectory(_flowmap(f, args), x0, args.time)
    path = write_csv(Path(args.out_dir) / "trajectory.csv", ["t", *[f"x{i + 1}" for i in range(f.n)]],
                     [[t, *p] for t, p in zip(times, pts)])
    rep.results.update({"x0": x0, "time": args.time, "endpoint": pts[-1], "steps": len(times) - 1,
                        "csv": path.name})
    print(f"x({args.time:g}) = {pts[-1].tolist()} after {len(times) - 1} steps")
    return EXIT_OK


def cmd_distortion(args, rep):
    f, src = _load_input(args, "field")
    rep.provenance.update(src)
    F = _flowmap(f, args)
    P = _grid(f.domain, args.grid, args.grid_scale)
    times = args.times
    h = args.fd_step or 1e-5
    if args.div_bound is None:
        J, _, ok = jacobian_batch(f, _grid(f.domain, args.grid, args.grid_scale, margin=1e-3), None)
        div_bound = float(np.max(np.abs(np.trace(J[ok], axis1=1, axis2=2))))
    else:
        div_bound = args.div_bound
    prof = qc_growth_profile(F, P, times, h)
    lv = liouville_check(F, P, times, div_bound, h=h)
    lip_ok = True
    for t in times:
        for r in flow_jacobian_batch(F, P, t, h):
            if not r.singular and r.opnorm > r.K_estimate ** (1 / f.n) * abs(r.det) ** (1 / f.n) * (1 + 1e-6):
                lip_ok = False
    rep.results.update({"profile": prof, "liouville": lv, "lipschitz_bound_holds": lip_ok})
    print(f"fitted c={prof['c']:.6g} (residual {prof['residual']:.3g}); Liouville "
          f"{'PASS' if lv['passed'] else 'FAIL'} with div bound {div_bound:.6g}")
    return EXIT_OK if lv["passed"] and lip_ok else EXIT_PROPERTY


def cmd_commute(args, rep):
    obj, src = _load_input(args, "any")
    rep.provenance.update(src)
    P = _grid(obj.domain, args.grid, args.grid_scale)
    out = []
    for a, b, X, Y in _pairs(obj, args):
        d = commutation_defect(_flowmap(X, args), _flowmap(Y, args), P, args.s, args.t)
        out.append({"pair": [a, b], "s": args.s, "t": args.t, "defect": d})
        print(f"[{a},{b}] defect at s={args.s:g}, t={args.t:g}: {d:.6g}")
    rep.results["defects"] = out
    return EXIT_OK


def cmd_mollify(args, rep):
    f, src = _load_input(args, "field")
    rep.provenance.update(src)
    eps = sorted(args.eps, reverse=True)
    P = _grid(f.domain, args.grid, args.grid_scale)
    seq = mollification_stability(f, eps, P, args.time, args.rel_tol, args.abs_tol, args.max_step)
    dec = all(b[1] < a[1] for a, b in zip(seq, seq[1:]))
    rep.results.update({"sequence": seq, "strictly_decreasing": dec})
    for e, err in seq:
        print(f"eps={e:g} error={err:.6g}")
    return EXIT_OK


def cmd_chart(args, rep):
    E, src = _load_input(args, "plane")
    rep.provenance.update(src)
    p = np.array(args.point if args.point is not None else 0.5 * (E.domain.lo_array + E.domain.hi_array))
    if p.size != E.n:
        raise UsageError(f"--point needs {E.n} coordinates")
    cfg = ChartConfig(eps0=args.eps0, rtol=min(args.rel_tol, 1e-10), atol=args.abs_tol,
                      max_step=args.max_step, fd_step=args.fd_step)
    C = build_chart(E, p, cfg)
    m = E.n - E.k
    # slice parameters along the diagonal of the normal cube, inside (-eps, eps)
    cs = np.linspace(-0.5, 0.5, args.slices) * C.eps if args.slices > 1 else np.zeros(1)
    slices = []
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, c in enumerate(cs):
        M = trace_slice(C, np.full(m, c), args.resolution)
        path = write_slice_csv(M, out / f"slice_{i}.csv")
        slices.append({"c": M.c, "csv": path.name, "max_residual": float(M.residual.max())})
    scfg = SamplingConfig(args.base_points, args.pairs, geometric_radii(E.domain, args.radii),
                          args.seed, args.refine_steps, args.threads)
    lifted = []
    for i, X in enumerate(C.fields):
        lifted.append({"index": i + 1, "Q": estimate_q(X, scfg).value, "Lipschitz": estimate_lipschitz(X, scfg).value})
    meta = {**C.to_dict(), "slices": slices, "lifted_seminorms": lifted, "sampling": scfg.to_dict()}
    (out / "chart.json").write_text(dumps(meta) + "\n")
    rep.results.update({"chart": meta, "metadata": "chart.json"})
    print(f"chart at p={p.tolist()} eps={C.eps:.6g}; {len(slices)} slices written to {out}")
    return EXIT_OK


COMMANDS = {
    "seminorm": (cmd_seminorm, "Q, Zygmund, Lipschitz and |Sf| estimates with the chain check"),
    "bracket": (cmd_bracket, "Lie bracket table on a grid"),
    "involutivity": (cmd_involutivity, "involutivity residual of a plane field"),
    "flow": (cmd_flow, "trajectory CSV of one flow line"),
    "distortion": (cmd_distortion, "quasiconformal distortion and Liouville bounds"),
    "commute": (cmd_commute, "flow commutation defect"),
    "mollify": (cmd_mollify, "flow error of mollified fields"),
    "chart": (cmd_chart, "Frobenius chart metadata and slice meshes"),
    "catalog": (cmd_catalog, "list built-in examples"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rel-tol", type=float, default=1e-9, help="integrator relative tolerance")
    g.add_argument("--abs-tol", type=float, default=1e-12, help="integrator absolute tolerance")
    g.add_argument("--max-step", type=float, default=0.1)
    g.add_argument("--fd-step", type=float, default=None, help="finite-difference step (default scale-aware)")
    g.add_argument("--grid", type=int, default=5, help="grid points per axis")
    g.add_argument("--grid-scale", type=float, default=0.5, help="grid box as a fraction of the domain box")
    g.add_argument("--out-dir", default="qfrob-out")
    g.add_argument("--threads", type=int, default=1)
    src = common.add_argument_group("input")
    src.add_argument("--catalog")
    src.add_argument("--spec")
    src.add_argument("--field")
    src.add_argument("--dim", type=int)

    parser = _Parser(prog="qfrob", description="Q-vector fields, flows and Frobenius charts.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ps = {name: sub.add_parser(name, parents=[common], help=h) for name, (_, h) in COMMANDS.items()}

    for name in ("seminorm", "chart"):
        ps[name].add_argument("--base-points", type=int, default=200 if name == "seminorm" else 40)
        ps[name].add_argument("--pairs", type=int, default=400 if name == "seminorm" else 40)
        ps[name].add_argument("--radii", type=int, default=8)
        ps[name].add_argument("--refine-steps", type=int, default=20)
    for name in ("bracket", "commute"):
        ps[name].add_argument("--other", help="second field: catalog name or expression")
    ps["flow"].add_argument("--x0", type=_floats)
    ps["flow"].add_argument("--time", type=float, default=1.0)
    ps["distortion"].add_argument("--times", type=_floats, default=[0.5, 1.0, 2.0])
    ps["distortion"].add_argument("--div-bound", type=float)
    ps["commute"].add_argument("--s", type=float, default=0.3)
    ps["commute"].add_argument("--t", type=float, default=0.3)
    ps["mollify"].add_argument("--eps", type=_floats, default=[0.2, 0.1, 0.05, 0.025])
    ps["mollify"].add_argument("--time", type=float, default=1.0)
    ps["chart"].add_argument("--point", type=_floats)
    ps["chart"].add_argument("--eps0", type=float, default=0.3)
    ps["chart"].add_argument("--slices", type=int, default=3)
    ps["chart"].add_argument("--resolution", type=int, default=33)
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out_dir")}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fn, _ = COMMANDS[args.command]
    rep = AnalysisReport(command=["qfrob", *argv], config=_config(args))
    try:
        code = fn(args, rep)
    except UsageError as exc:
        print(f"qfrob: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"qfrob: spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except NumericalError as exc:
        print(f"qfrob: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PropertyViolation as exc:
        print(f"qfrob: property violation: {exc}", file=sys.stderr)
        code = EXIT_PROPERTY
        rep.results["violation"] = str(exc)
    except QfrobError as exc:  # pragma: no cover - every subclass is handled above
        print(f"qfrob: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    rep.results["exit_code"] = code
    path = rep.finish().write(Path(args.out_dir) / f"{args.command}_report.json")
    print(f"report: {path}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
