"""Command-line interface: every computation behind a subcommand, with CSV
datasets and JSON run-manifest sidecars.

Determinism contract: identical invocations produce byte-identical CSV and
manifest files, independent of worker count. Floats are serialized with
shortest round-trip precision; CSV is UTF-8 with LF line endings and a schema
comment in row 1. Wall time is printed to stderr, never into the manifest.

Exit codes: 0 ok, 2 usage, 3 convergence failure, 4 resource guard.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .continuum import QuadratureConfig, dr_bracket, renyi_constant_with_error, solve_coverage
from .densities import (
    WORKERS_ENV,
    density,
    density_table,
    profile,
    resolve_workers,
    sweep,
)
from .errors import ConvergenceError, ResourceLimitError
from .recursion import exact_gap_expectation
from .simulator import estimate_gap_expectation

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_RESOURCE = 4

SCHEMA_VERSION = "latticepark.v1"


@dataclass(frozen=True)
class RunManifest:
    """Sidecar emitted next to every dataset.

    ``wall_time`` is always serialized as null: re-running an invocation must
    reproduce the sidecar byte for byte, and timing is the one thing that
    never would. The measured time goes to stderr instead.
    """

    command: str
    parameters: dict
    tool_version: str
    eps_used: float | None
    certificates: list[dict]
    wall_time: float | None = None

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "parameters": self.parameters,
            "tool_version": self.tool_version,
            "wall_time": None,
            "eps_used": self.eps_used,
            "certificates": self.certificates,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _fmt(value) -> str:
    """Shortest round-trip serialization; empty string for missing values."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, name: str, header: list[str], rows: list[list]) -> None:
    lines = [f"# schema={SCHEMA_VERSION}.{name}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_manifest(
    out_path: Path,
    command: str,
    parameters: dict,
    eps_used: float | None,
    certificates: list[dict],
) -> None:
    manifest = RunManifest(
        command=command,
        parameters=parameters,
        tool_version=__version__,
        eps_used=eps_used,
        certificates=certificates,
    )
    sidecar = out_path.with_name(out_path.name + ".manifest.json")
    sidecar.write_text(manifest.to_json(), encoding="utf-8", newline="\n")


def _report_cert(rep) -> dict:
    return {"n_stop": rep.n_stop, "p": rep.p, "bound": rep.bound}


def _cmd_density(args) -> int:
    if args.all == (args.r is not None):
        raise ValueError("give exactly one of --r or --all")
    out = Path(args.out)
    rows = []
    certs = []
    if args.all:
        table, rep = density_table(
            args.k,
            args.eps,
            max_table_k=args.max_table_k,
            step_budget=args.step_budget,
            return_certificate=True,
        )
        certs.append({"k": args.k, "r": "all", **_report_cert(rep)})
        for j, r in enumerate(table.r_values):
            rows.append(
                [
                    args.k,
                    int(r),
                    (r - args.k) / args.k,
                    table.d[j],
                    table.scaled[j],
                    table.cumulative[j],
                ]
            )
    else:
        d, rep = density(
            args.k,
            args.r,
            args.eps,
            step_budget=args.step_budget,
            return_certificate=True,
        )
        certs.append({"k": args.k, "r": args.r, **_report_cert(rep)})
        rows.append(
            [args.k, args.r, (args.r - args.k) / args.k, d, args.k * d, None]
        )
    _write_csv(out, "density", ["k", "r", "t", "D", "kD", "cumulative"], rows)
    _write_manifest(
        out,
        "density",
        {
            "k": args.k,
            "r": args.r,
            "all": args.all,
            "eps": args.eps,
            "max_table_k": args.max_table_k,
            "step_budget": args.step_budget,
        },
        args.eps,
        certs,
    )
    return EXIT_OK


def parse_k_set(text: str) -> list[int]:
    """Either '2^a..2^b' (octave range) or an explicit comma list."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = _parse_power(lo_s), _parse_power(hi_s)
        if lo > hi:
            raise ValueError(f"empty k range {text!r}")
        out = []
        k = lo
        while k <= hi:
            out.append(k)
            k *= 2
        return out
    ks = [int(part) for part in text.split(",") if part.strip()]
    if not ks:
        raise ValueError("empty k list")
    return ks


def _parse_power(text: str) -> int:
    text = text.strip()
    if text.startswith("2^"):
        return 2 ** int(text[2:])
    return int(text)


def _cmd_sweep(args) -> int:
    ks = parse_k_set(args.k_set)
    out = Path(args.out)
    m, m_err = renyi_constant_with_error(QuadratureConfig(abs_tol=1e-10))
    errors: dict[int, str] = {}
    cert_list: list[dict] = []
    points = sweep(
        ks,
        args.eps,
        m=m,
        workers=resolve_workers(None),
        errors_out=errors,
        certificates_out=cert_list,
    )
    by_k = {p.k: p for p in points}
    rows = []
    for k in ks:
        if k in by_k:
            p = by_k[k]
            rows.append([k, p.kDkk, p.kDk2k, p.filling, p.gap_to_m, None])
        else:
            rows.append([k, None, None, None, None, errors.get(k, "failed")])
    _write_csv(
        out, "sweep", ["k", "kDkk", "kDk2k", "Dk", "Dk_minus_m", "error"], rows
    )
    _write_manifest(
        out,
        "sweep",
        {"k_set": args.k_set, "eps": args.eps, "m": m, "m_err": m_err},
        args.eps,
        cert_list,
    )
    if len(points) >= 3:
        # report (never assert) the apparent decay rate of D(k) - m
        xs = [math.log(p.k) for p in points if p.gap_to_m > 0]
        ys = [math.log(p.gap_to_m) for p in points if p.gap_to_m > 0]
        if len(xs) >= 3:
            slope = _fit_slope(xs, ys)
            print(
                f"[latticepark] fitted decay: D(k) - m ~ k^{slope:.3f} "
                f"(reported, not asserted)",
                file=sys.stderr,
            )
    if not points:
        raise ConvergenceError("every sweep point failed")
    return EXIT_OK


def _fit_slope(xs: list[float], ys: list[float]) -> float:
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = sum((x - mx) ** 2 for x in xs)
    return num / den


def _cmd_profile(args) -> int:
    if args.points < 2:
        raise ValueError(f"--points must be >= 2, got {args.points}")
    out = Path(args.out)
    grid = [i / (args.points - 1) for i in range(args.points)]
    samples = profile(args.k, grid, args.eps, max_table_k=args.max_table_k)
    rows = [[s.t, s.d, s.F, s.Fprime] for s in samples]
    _write_csv(out, "profile", ["t", "D", "F", "Fprime"], rows)
    _write_manifest(
        out,
        "profile",
        {
            "k": args.k,
            "points": args.points,
            "eps": args.eps,
            "max_table_k": args.max_table_k,
        },
        args.eps,
        [],
    )
    return EXIT_OK


def _cmd_renyi_m(args) -> int:
    if args.tol <= 0:
        raise ValueError(f"--tol must be positive, got {args.tol}")
    m, err = renyi_constant_with_error(QuadratureConfig(abs_tol=args.tol))
    print(f"m = {m!r} (error estimate {err:.3e}, tolerance {args.tol:g})")
    return EXIT_OK


def _parse_step(text: str) -> float:
    """Grid steps may be given as floats or as fractions like 1/256."""
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _cmd_coverage(args) -> int:
    out = Path(args.out)
    h = _parse_step(args.h)
    grid = solve_coverage(args.xmax, h)
    m, m_err = renyi_constant_with_error(QuadratureConfig(abs_tol=1e-10))
    rows = []
    for i, mx in enumerate(grid.values):
        x = i * grid.h
        dev = mx - (m * x + m - 1.0)
        on_integer = abs(x - round(x)) < 1e-9
        if on_integer and x + 1.0 <= grid.x_max + 1e-12:
            lo, hi = dr_bracket(grid, round(x))
        else:
            lo, hi = None, None
        rows.append([x, mx, dev, lo, hi])
    _write_csv(
        out,
        "coverage",
        ["x", "M", "M_minus_asymptote", "bracket_lo", "bracket_hi"],
        rows,
    )
    _write_manifest(
        out,
        "coverage",
        {"xmax": args.xmax, "h": args.h, "m": m, "m_err": m_err},
        None,
        [],
    )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.trials < 1:
        raise ValueError(f"--trials must be >= 1, got {args.trials}")
    out = Path(args.out)
    est = estimate_gap_expectation(args.n, args.k, args.trials, args.seed)
    rows = []
    for j, r in enumerate(est.r_values):
        exact = exact_gap_expectation(args.n, args.k, r)
        mean = est.counts[j]
        se = est.stderr[j] if est.stderr is not None else None
        if se is None:
            z = None
        elif se > 0:
            z = (mean - exact) / se
        else:
            z = 0.0 if mean == exact else math.inf
        rows.append([r, mean, se, exact, z])
    _write_csv(out, "simulate", ["r", "mean", "stderr", "exact", "z"], rows)
    _write_manifest(
        out,
        "simulate",
        {"n": args.n, "k": args.k, "trials": args.trials, "seed": args.seed},
        None,
        [],
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="latticepark",
        description=(
            "Gap densities of the symmetric lattice parking process: exact "
            "recursions, continuum reference, simulation oracle. Worker count "
            f"can be overridden with the {WORKERS_ENV} env var."
        ),
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("density", help="densities D(k, r), single r or full table")
    d.add_argument("--k", type=int, required=True)
    d.add_argument("--r", type=int, default=None)
    d.add_argument("--all", action="store_true", help="full table r = k..2k")
    d.add_argument("--eps", type=float, default=1e-12)
    d.add_argument("--max-table-k", type=int, default=2**14)
    d.add_argument(
        "--step-budget", type=int, default=None,
        help="cap on recursion steps before reporting convergence failure",
    )
    d.add_argument("--out", required=True)
    d.set_defaults(func=_cmd_density)

    s = sub.add_parser("sweep", help="endpoint densities and D(k) over a k set")
    s.add_argument(
        "--k-set", required=True, help="'2^a..2^b' or explicit list '1,2,4'"
    )
    s.add_argument("--eps", type=float, default=1e-10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_sweep)

    f = sub.add_parser("profile", help="distribution profile F, F' at finite k")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--points", type=int, default=256)
    f.add_argument("--eps", type=float, default=1e-10)
    f.add_argument("--max-table-k", type=int, default=2**14)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_profile)

    r = sub.add_parser("renyi-m", help="print the continuum filling constant")
    r.add_argument("--tol", type=float, default=1e-9)
    r.set_defaults(func=_cmd_renyi_m)

    c = sub.add_parser("coverage", help="continuum coverage curve M(x)")
    c.add_argument("--xmax", type=float, default=20.0)
    c.add_argument("--h", default="1/256", help="grid step, float or '1/N'")
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_coverage)

    m = sub.add_parser("simulate", help="Monte Carlo vs exact gap expectations")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--k", type=int, required=True)
    m.add_argument("--trials", type=int, default=10000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_simulate)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        rc = args.func(args)
    except ValueError as exc:
        print(f"latticepark: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"latticepark: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ResourceLimitError as exc:
        print(f"latticepark: resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    print(
        f"[latticepark] {args.command} finished in "
        f"{time.perf_counter() - start:.2f}s",
        file=sys.stderr,
    )
    return rc


if __name__ == "__main__":
    sys.exit(main())
