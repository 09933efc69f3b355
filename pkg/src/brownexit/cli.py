"""``brownexit`` command-line front end.

Every subcommand writes its artifacts into ``--out``.  CSV files start with
``# key=value`` header lines echoing every setting that influences the
numbers; JSON files are sorted and validated against the shipped report
schema.  The worker count is deliberately absent from both, so outputs are
byte-identical across ``--workers``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import conformal as cf
from . import demo
from .errors import BrownexitError, NotInUpperHalfPlane, PointOutsideDomain, SpecError
from .estimators import estimate_moment, hill_tail_index, moment_sweep
from .geometry import DEFAULT_CAP, domain_from_dict
from .gluing import GlueProblem, glue
from .plcheck import function_from_dict, harmonic_measure_halfplane, harmonic_measure_mc, verify_pl
from .sampler import SamplerConfig, sample_exits

SCHEMA_VERSION = "1.0"
STATUS_OK, STATUS_FAILED, STATUS_INVALID, STATUS_BUDGET = 0, 1, 2, 3
_START_CANDIDATES = (0j, 1 + 0j, 1j, -1 + 0j, -1j, 0.5 + 0j, 2 + 0j, 1 + 1j, -2 + 0j, 10 + 0j)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(message)


def _point(text: str) -> complex:
    try:
        parts = [float(v) for v in text.replace(" ", "").split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad point {text!r}") from exc
    if len(parts) == 1:
        return complex(parts[0], 0.0)
    if len(parts) != 2 or not all(math.isfinite(v) for v in parts):
        raise argparse.ArgumentTypeError(f"point must be 're,im', got {text!r}")
    return complex(*parts)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--samples", type=_positive_int, default=100_000)
    g.add_argument("--workers", type=_positive_int, default=1)
    g.add_argument("--eps-shell", type=float, default=1e-6)
    g.add_argument("--max-steps", type=_positive_int, default=10_000_000)
    g.add_argument("--cap", type=float, default=1e6, help="modulus cap for escaping paths")
    g.add_argument("--out", default=".", help="output directory")
    g.add_argument("--format", choices=("csv", "json"), default="csv")

    p = _Parser(prog="brownexit", description="Brownian exit-time moments and related certificates.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("moment", parents=[common], help="single moment estimate")
    s.add_argument("--domain", required=True)
    s.add_argument("--start", type=_point)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--dump-samples", action="store_true")

    s = sub.add_parser("sweep", parents=[common], help="moments over a p grid")
    s.add_argument("--domain", required=True)
    s.add_argument("--start", type=_point)
    s.add_argument("--p-grid", type=_floats, required=True)

    s = sub.add_parser("tail", parents=[common], help="Hill tail index of the exit time")
    s.add_argument("--domain", required=True)
    s.add_argument("--start", type=_point)
    s.add_argument("--k", type=int)

    s = sub.add_parser("hardy", parents=[common], help="Hardy norm of a conformal map")
    s.add_argument("--map", required=True)
    s.add_argument("--two-p", type=float, required=True)
    s.add_argument("--b", type=_point, default=0j, help="basepoint in the unit disk")
    s.add_argument("--tol", type=float, default=1e-6)

    s = sub.add_parser("glue", parents=[common], help="gluing certificate for V union W")
    s.add_argument("--v", required=True)
    s.add_argument("--w", required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--grid-n", type=_positive_int, default=16)
    s.add_argument("--budget", type=_positive_int, default=10_000, help="paths per grid point")
    s.add_argument("--boundary-cap", type=float, default=DEFAULT_CAP)
    s.add_argument("--refine", action="store_true")

    s = sub.add_parser("harmonic", parents=[common], help="half-plane harmonic measure, formula vs MC")
    s.add_argument("--points", default=None, help="semicolon-separated 're,im' points")

    s = sub.add_parser("plcheck", parents=[common], help="Phragmen-Lindelof check")
    s.add_argument("--function", required=True)
    s.add_argument("--domain", required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--n-boundary", type=_positive_int, default=4096)
    s.add_argument("--n-interior", type=_positive_int, default=20_000)
    s.add_argument("--radius", type=float, default=1e3, help="truncation radius for samples")
    s.add_argument("--tol", type=float, default=1e-3)

    s = sub.add_parser("demo", parents=[common], help="reproduce the acceptance checks")
    s.add_argument("--criteria", default=None, help="comma-separated criterion numbers")
    return p


def _config(args) -> SamplerConfig:
    if not args.eps_shell > 0 or not args.cap > 0:
        raise SpecError("--eps-shell and --cap must be positive")
    return SamplerConfig(eps_shell=args.eps_shell, max_steps=args.max_steps, modulus_cap=args.cap)


def _run_config(args) -> dict:
    return {"seed": args.seed, "samples": args.samples, "eps_shell": args.eps_shell,
            "max_steps": args.max_steps, "cap": args.cap}


def _header(args, **extra) -> dict:
    h = {"command": args.command, "schema_version": SCHEMA_VERSION, **_run_config(args)}
    h.update(extra)
    return h


def _default_start(domain) -> complex:
    for z in _START_CANDIDATES:
        if domain.contains(z):
            return z
    raise SpecError("no default start point lies in the domain; pass --start")


def _compact(obj) -> str:
    return json.dumps(demo._plain(obj), sort_keys=True, separators=(",", ":"))


def _write_csv(path: Path, header: dict, columns: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in header.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in r])


def _schema(name: str = "report"):
    text = resources.files("brownexit").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


def validate_report(record: dict) -> None:
    jsonschema.validate(record, _schema())


def _load_spec(path, kind: str):
    """Read a domain/map/function spec file, validate it against its schema, and build it."""
    data = _read_json(path)
    try:
        jsonschema.validate(data, _schema(kind))
    except jsonschema.ValidationError as exc:
        raise SpecError(f"{path}: {exc.message}") from exc
    build = {"domain": domain_from_dict, "map": cf.map_from_dict, "function": function_from_dict}[kind]
    return build(data)


def _write_json(path: Path, args, command: str, body: dict) -> dict:
    record = {"schema_version": SCHEMA_VERSION, "command": command, "config": _run_config(args)}
    record.update(demo._plain(body))
    validate_report(record)
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
    return record


def _moment_dict(e) -> dict:
    return {"p": e.p, "n": e.n, "mean": e.mean, "std_err": e.std_err, "ci95": list(e.ci95),
            "censored": e.censored, "divergent_flag": e.divergent_flag, "tail_index": e.tail_index}


_MOMENT_COLUMNS = ["p", "mean", "std_err", "ci_lo", "ci_hi", "censored", "divergent_flag"]


def _domain_run(args):
    domain = _load_spec(args.domain, "domain")
    start = args.start if args.start is not None else _default_start(domain)
    return domain, start


def cmd_moment(args, out: Path) -> int:
    domain, start = _domain_run(args)
    b = sample_exits(domain, start, args.samples, _config(args), args.seed, workers=args.workers)
    e = estimate_moment(b, args.p, rng=args.seed)
    hdr = _header(args, domain=_compact(domain.to_dict()), start=_compact(start), p=args.p)
    if args.format == "json":
        _write_json(out / "moment.json", args, "moment",
                    {"domain": domain.to_dict(), "start": start, "estimate": _moment_dict(e)})
    else:
        _write_csv(out / "moment.csv", hdr, _MOMENT_COLUMNS, [e.row()])
    if args.dump_samples:
        b.write_csv(out / "samples.csv")
    return STATUS_OK


def cmd_sweep(args, out: Path) -> int:
    domain, start = _domain_run(args)
    s = moment_sweep(domain, start, args.p_grid, args.samples, _config(args), args.seed,
                     workers=args.workers)
    tail = None if s.tail is None else {"k": s.tail.k, "index": s.tail.index, "ci95": list(s.tail.ci95)}
    if args.format == "json":
        _write_json(out / "sweep.json", args, "sweep",
                    {"domain": domain.to_dict(), "start": start, "tail": tail,
                     "estimates": [_moment_dict(e) for e in s], "first_flagged": s.first_flagged})
    else:
        s.write_csv(out / "sweep.csv", _header(
            args, domain=_compact(domain.to_dict()), start=_compact(start),
            p_grid=_compact(args.p_grid), tail_index=None if tail is None else repr(tail["index"]),
            first_flagged=s.first_flagged))
    return STATUS_OK


def cmd_tail(args, out: Path) -> int:
    domain, start = _domain_run(args)
    b = sample_exits(domain, start, args.samples, _config(args), args.seed, workers=args.workers)
    t = hill_tail_index(b, k=args.k, rng=args.seed)
    if args.format == "json":
        _write_json(out / "tail.json", args, "tail",
                    {"domain": domain.to_dict(), "start": start, "k": t.k, "index": t.index,
                     "ci95": list(t.ci95), "raw_index": t.raw_index, "censored": b.n_censored,
                     "censored_in_top": t.censored_in_top})
    else:
        _write_csv(out / "tail.csv", _header(args, domain=_compact(domain.to_dict()), start=_compact(start)),
                   ["k", "index", "ci_lo", "ci_hi", "raw_index", "censored", "censored_in_top"],
                   [[t.k, t.index, t.ci95[0], t.ci95[1], t.raw_index, b.n_censored, t.censored_in_top]])
    return STATUS_OK


def cmd_hardy(args, out: Path) -> int:
    f = _load_spec(args.map, "map")
    if args.two_p <= 0:
        raise SpecError("--two-p must be positive")
    res = cf.hardy_norm_at(f, args.two_p, args.b, tol=args.tol)
    trace = out / "radial_trace.csv"
    _write_csv(trace, _header(args, map=_compact(f.to_dict()), two_p=args.two_p, b=_compact(args.b)),
               ["k", "r", "mean"], [[int(k), float(r), float(m)] for k, r, m in res.radial_trace])
    body = res.to_dict()
    body.update(map=f.to_dict(), radial_trace_path=trace.name)
    _write_json(out / "hardy.json", args, "hardy", body)
    return STATUS_OK


def cmd_glue(args, out: Path) -> int:
    V = _load_spec(args.v, "domain")
    W = _load_spec(args.w, "domain")
    prob = GlueProblem(V, W, args.p, grid_n=args.grid_n, budget=args.budget, cap=args.boundary_cap,
                       config=_config(args), seed=args.seed)
    rep = glue(prob, refine=args.refine)
    grid = out / "glue_grid.csv"
    rep.write_grid_csv(grid)
    _write_json(out / "glue.json", args, "glue",
                {"V": V.to_dict(), "W": W.to_dict(), "grid_n": args.grid_n, "budget": args.budget,
                 "report": rep.to_dict(), "grid_path": grid.name})
    return STATUS_OK


def cmd_harmonic(args, out: Path) -> int:
    if args.points:
        try:
            pts = [_point(t) for t in args.points.split(";") if t.strip()]
        except argparse.ArgumentTypeError as exc:
            raise SpecError(str(exc)) from exc
    else:
        pts = list(demo.HARMONIC_POINTS)
    cfg = _config(args)
    rows = []
    for i, a in enumerate(pts):
        formula = harmonic_measure_halfplane(a)
        mc, se = harmonic_measure_mc(a, args.samples, cfg, args.seed + i, workers=args.workers)
        rows.append({"a": [a.real, a.imag], "formula": formula, "mc": mc, "std_err": se})
    if args.format == "json":
        _write_json(out / "harmonic.json", args, "harmonic", {"rows": rows})
    else:
        _write_csv(out / "harmonic.csv", _header(args), ["a_re", "a_im", "formula", "mc", "std_err", "abs_diff"],
                   [[r["a"][0], r["a"][1], r["formula"], r["mc"], r["std_err"], abs(r["formula"] - r["mc"])]
                    for r in rows])
    return STATUS_OK


def cmd_plcheck(args, out: Path) -> int:
    f = _load_spec(args.function, "function")
    domain = _load_spec(args.domain, "domain")
    v = verify_pl(f, domain, args.p, tol=args.tol, n_boundary=args.n_boundary,
                  n_interior=args.n_interior, cap=args.radius, eps=args.eps_shell, seed=args.seed)
    _write_json(out / "plcheck.json", args, "plcheck",
                {"function": f.to_dict(), "domain": domain.to_dict(), "p": args.p, "verdict": v.to_dict()})
    return STATUS_OK


def cmd_demo(args, out: Path) -> int:
    numbers = None
    if args.criteria:
        try:
            numbers = sorted({int(x) for x in args.criteria.split(",") if x.strip()})
        except ValueError as exc:
            raise SpecError(f"bad --criteria {args.criteria!r}") from exc
        if any(n not in demo.CRITERIA for n in numbers):
            raise SpecError(f"criteria must be in 1..{len(demo.CRITERIA)}")
    results = demo.run(numbers, seed=args.seed, echo=print)
    if args.format == "json":
        _write_json(out / "demo.json", args, "demo", {"criteria": [r.to_dict() for r in results]})
    else:
        _write_csv(out / "demo.csv", _header(args), ["number", "name", "passed", "details"],
                   [[r.number, r.name, int(r.passed), _compact(r.details)] for r in results])
    return STATUS_OK if all(r.passed for r in results) else STATUS_FAILED


COMMANDS = {"moment": cmd_moment, "sweep": cmd_sweep, "tail": cmd_tail, "hardy": cmd_hardy,
            "glue": cmd_glue, "harmonic": cmd_harmonic, "plcheck": cmd_plcheck, "demo": cmd_demo}


def _error_record(out: Path | None, args, exc: Exception, status: int) -> None:
    code = getattr(exc, "code", type(exc).__name__)
    print(f"brownexit: error [{code}]: {exc}", file=sys.stderr)
    if out is None or args is None:
        return
    record = {"schema_version": SCHEMA_VERSION, "command": "error", "config": _run_config(args),
              "error": str(code), "message": str(exc), "exit_status": status,
              "failed_command": args.command}
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
    except OSError:
        pass


def main(argv=None) -> int:
    parser = build_parser()
    args = out = None
    try:
        args = parser.parse_args(argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except (SpecError, PointOutsideDomain, NotInUpperHalfPlane) as exc:
        _error_record(out, args, exc, STATUS_INVALID)
        return STATUS_INVALID
    except (BrownexitError, ValueError) as exc:
        _error_record(out, args, exc, STATUS_BUDGET)
        return STATUS_BUDGET


if __name__ == "__main__":
    sys.exit(main())
