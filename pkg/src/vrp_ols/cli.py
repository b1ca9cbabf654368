"""Command-line interface: ``vrp-ols {decompose,check,plan,simulate,search}``.

Problem files are JSON::

    {
      "design": [[1, 0.62], [1, 1.24], ...]      # or "intercept_line": [0.62, 1.24, ...]
      "noise": {"diagonal": [...]}               # or {"full": [[...], ...]}
      "next": {"h": 1.96, "variance": 0.28}      # or {"row": [...], ...}, optional "cross_cov"
    }

A ``full`` noise block of size ``n + 1`` may carry the new observation's
variance and covariances instead of ``next.variance``/``next.cross_cov``.
Reports are JSON with matrices stored as ``{"rows", "cols", "data"}``
(row-major, 12 significant digits). Exit codes: 0 ok, 2 unreadable input,
3 numeric or validation failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .decomposition import decompose, decompose_correlated, partial_sum_verdict
from .errors import ProblemFileError, ValidationError
from .model import AugmentedProblem, augment, line_design, validate_design, validate_noise
from .planner import DEFAULT_GRID, admissible_next_line
from .simulate import SearchConfig, monte_carlo, search_counterexamples
from .straightline import CONDITIONS, check_conditions, leverage_line, summarize

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4
SIG_DIGITS = 12


# --------------------------------------------------------------------------
# problem files
# --------------------------------------------------------------------------


@dataclass
class ProblemSpec:
    rows: np.ndarray
    line_h: np.ndarray | None
    noise: dict | None
    next_row: np.ndarray | None = None
    next_variance: float | None = None
    cross_cov: np.ndarray | None = None

    @property
    def is_line(self) -> bool:
        return self.line_h is not None

    @property
    def next_h(self) -> float | None:
        return None if self.next_row is None or not self.is_line else float(self.next_row[1])

    def design(self):
        return validate_design(self.rows)

    def augmented(self) -> AugmentedProblem:
        if self.next_row is None:
            raise ProblemFileError("this command needs a 'next' observation", "next")
        if self.noise is None:
            raise ProblemFileError("this command needs a 'noise' block", "noise")
        if self.next_variance is None:
            raise ProblemFileError("missing variance of the next observation", "next.variance")
        return AugmentedProblem.build(self.rows, self.next_row, self.noise, self.next_variance, self.cross_cov)


def _floats(value, where: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError("expected numbers", where) from None
    if arr.ndim != ndim:
        raise ProblemFileError(f"expected a {ndim}-d array of numbers", where)
    return arr


def read_csv_design(path) -> list[list[float]]:
    """One column per parameter, one row per observation; a non-numeric
    first line is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                rows.append([float(c) for c in rec])
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise ProblemFileError(f"non-numeric value on line {lineno}", str(path)) from None
    if not rows:
        raise ProblemFileError("no data rows", str(path))
    return rows


def parse_problem(data: dict, csv_rows=None) -> ProblemSpec:
    if not isinstance(data, dict):
        raise ProblemFileError("top level must be an object")
    line_h = None
    if csv_rows is not None:
        rows = _floats(csv_rows, "csv", 2)
    elif "intercept_line" in data:
        line_h = _floats(data["intercept_line"], "intercept_line", 1)
        rows = np.column_stack([np.ones_like(line_h), line_h])
    elif "design" in data:
        rows = _floats(data["design"], "design", 2)
    else:
        raise ProblemFileError("need 'design' or 'intercept_line'", "design")
    if rows.size == 0:
        raise ProblemFileError("design is empty", "design")
    if line_h is None and rows.shape[1] == 2 and np.all(rows[:, 0] == 1.0):
        line_h = rows[:, 1].copy()
    n = rows.shape[0]

    noise = data.get("noise")
    if noise is not None:
        if not isinstance(noise, dict) or len(noise) != 1 or next(iter(noise)) not in ("diagonal", "full"):
            raise ProblemFileError("must be {'diagonal': [...]} or {'full': [[...]]}", "noise")
        kind = next(iter(noise))
        noise = {kind: _floats(noise[kind], f"noise.{kind}", 1 if kind == "diagonal" else 2)}

    spec = ProblemSpec(rows, line_h, noise)
    nxt = data.get("next")
    if nxt is not None:
        if not isinstance(nxt, dict):
            raise ProblemFileError("must be an object", "next")
        if "row" in nxt:
            spec.next_row = _floats(nxt["row"], "next.row", 1)
        elif "h" in nxt:
            spec.next_row = np.array([1.0, float(nxt["h"])])
        else:
            raise ProblemFileError("need 'row' or 'h'", "next")
        if spec.next_row.size != rows.shape[1]:
            raise ProblemFileError(f"has {spec.next_row.size} entries, design has {rows.shape[1]}", "next.row")
        if "variance" in nxt:
            spec.next_variance = float(nxt["variance"])
        if "cross_cov" in nxt:
            spec.cross_cov = _floats(nxt["cross_cov"], "next.cross_cov", 1)

    if noise is not None:
        kind, values = next(iter(noise.items()))
        size = values.shape[0]
        if size == n + 1 and spec.next_row is not None and spec.next_variance is None:
            spec.next_variance = float(values[n] if kind == "diagonal" else values[n, n])
            if kind == "full":
                cross = values[:n, n]
                spec.cross_cov = cross if np.any(cross) else None
                spec.noise = {"full": values[:n, :n]}
            else:
                spec.noise = {"diagonal": values[:n]}
        elif size != n:
            raise ProblemFileError(f"covers {size} observations, design has {n}", f"noise.{kind}")
    return spec


def load_problem(path, csv_path=None) -> ProblemSpec:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ProblemFileError(str(exc), str(path)) from None
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
    return parse_problem(data, read_csv_design(csv_path) if csv_path else None)


def problem_to_dict(spec: ProblemSpec) -> dict:
    """Serialize back to the problem-file layout (floats keep full precision)."""
    out: dict = {}
    if spec.is_line:
        out["intercept_line"] = spec.line_h.tolist()
    else:
        out["design"] = spec.rows.tolist()
    if spec.noise is not None:
        kind, values = next(iter(spec.noise.items()))
        out["noise"] = {kind: np.asarray(values).tolist()}
    if spec.next_row is not None:
        nxt: dict = {"h": spec.next_h} if spec.is_line else {"row": spec.next_row.tolist()}
        if spec.next_variance is not None:
            nxt["variance"] = spec.next_variance
        if spec.cross_cov is not None:
            nxt["cross_cov"] = spec.cross_cov.tolist()
        out["next"] = nxt
    return out


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def _num(x) -> float | None:
    if x is None:
        return None
    x = float(x)
    if not np.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def encode_matrix(m) -> dict:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    return {"rows": a.shape[0], "cols": a.shape[1], "data": [[_num(v) for v in row] for row in a]}


def _is_matrix(obj) -> bool:
    return isinstance(obj, dict) and set(obj) == {"rows", "cols", "data"}


def decode_report(obj):
    """Parse a report (text or loaded JSON), turning matrices into arrays."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    return _decode(obj)


def _decode(obj):
    if _is_matrix(obj):
        return np.array(obj["data"], dtype=float).reshape(obj["rows"], obj["cols"])
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def make_report(command: str, args: dict, inputs, results: dict) -> dict:
    return {
        "tool": "vrp-ols",
        "version": __version__,
        "command": {"name": command, "args": args},
        "inputs_digest": _digest(inputs),
        "results": results,
        "meta": {"generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")},
    }


def _verdict_dict(v) -> dict:
    return {
        "holds": v.holds,
        "per_coordinate": list(v.per_coordinate),
        "witness_m": list(v.witness),
        "worst_margin": _num(v.worst_margin),
        "partial_sums": encode_matrix(v.partial_sums),
    }


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_decompose(spec: ProblemSpec, correlated: bool = False) -> dict:
    p = spec.augmented()
    use_corr = correlated or not p.is_diagonal or p.cross_cov is not None
    dec = decompose_correlated(p) if use_corr else decompose(p)
    res = {
        "correlated": use_corr,
        "v00": encode_matrix(dec.v00),
        "v11": encode_matrix(dec.v11),
        "v00_minus_v11": encode_matrix(dec.reduction),
        "w": encode_matrix(dec.w),
        "w11": encode_matrix(dec.w11),
        "leverage": _num(dec.d_lev),
        "q": _num(dec.q),
        "next_variance": _num(dec.next_variance),
        "residual": _num(dec.residual),
        "variance_reduced": dec.vrp_holds,
        "partial_sum_criterion": _verdict_dict(partial_sum_verdict(p.base, p.next_row)),
    }
    if dec.w22 is not None:
        res["w22"] = encode_matrix(dec.w22)
        res["w22_closed_form_defect"] = _num(dec.w22_defect)
    return res


def _supplied_weights(spec: ProblemSpec):
    if spec.noise is None or "diagonal" not in spec.noise or spec.next_variance is None or spec.cross_cov is not None:
        return None
    return np.asarray(spec.noise["diagonal"]) - spec.next_variance


def cmd_check(spec: ProblemSpec) -> dict:
    if spec.next_row is None:
        raise ProblemFileError("check needs a 'next' observation", "next")
    res: dict = {}
    if spec.is_line:
        h, x = spec.line_h, spec.next_h
        leverage_line(h, x)  # raises DegenerateDesign before any rank failure
        rep = check_conditions(h, x, _supplied_weights(spec))
        conds = {}
        for name in CONDITIONS:
            vals = rep.values[name]
            w = rep.witnesses[name]
            conds[name] = {
                "holds": rep.verdicts[name],
                "witness": None if w is None else {"family": w[0], "m": w[1]},
                "values": None if vals is None else encode_matrix(vals),
            }
        al = rep.alphas
        res["line"] = {
            "tier": rep.tier,
            "conditions": conds,
            "failing": rep.failing(),
            "q": _num(al.q),
            "a": [_num(getattr(al, f"a{i}")) for i in range(1, 7)],
            "alpha": [_num(getattr(al, f"alpha{i}")) for i in range(1, 6)],
            "roots": None if rep.roots is None else {
                k: _num(getattr(rep.roots, k)) for k in ("r11", "r12", "r21", "r22", "delta1", "delta2")
            },
            "root_error": rep.root_error,
            "supplied_w11_diag": None if rep.supplied is None else [_num(v) for v in rep.supplied],
            "supplied_nonnegative": rep.supplied_ok,
        }
    d = spec.design()
    augment(d, spec.next_row)
    res["partial_sum_criterion"] = _verdict_dict(partial_sum_verdict(d, spec.next_row))
    return res


def _parse_interval(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise ProblemFileError(f"expected lo:hi, got {text!r}", "--search") from None
    return lo, hi


def cmd_plan(spec: ProblemSpec, search=None, grid: int = DEFAULT_GRID, queries=()) -> dict:
    if not spec.is_line:
        raise ProblemFileError("plan needs a straight-line problem", "intercept_line")
    h = spec.line_h
    summarize(h)
    if search is None:
        span = float(h.max() - h.min()) or 1.0
        search = (float(h.min()) - span, float(h.max()) + span)
    lo, hi = search
    if queries:
        lo, hi = min(lo, *queries), max(hi, *queries)
    region = admissible_next_line(h, (lo, hi), grid)
    return {
        "search_domain": [_num(lo), _num(hi)],
        "grid": grid,
        "intervals": [[_num(a), _num(b)] for a, b in region.intervals],
        "boundary_points": [_num(b) for b in region.boundary_points],
        "polynomials_checked": region.polynomials_checked,
        "queries": [
            {"h_next": _num(x), "verdict": "admissible" if region.contains(x) else "inadmissible"}
            for x in queries
        ],
    }


def cmd_simulate(spec: ProblemSpec, beta=None, reps: int = 100_000, seed: int = 0) -> dict:
    if reps < 1000:
        raise ValueError("--reps must be at least 1000")
    if spec.noise is None:
        raise ProblemFileError("simulate needs a 'noise' block", "noise")
    if spec.next_row is not None and spec.next_variance is not None:
        p = spec.augmented()
        design, noise = p.design, p.joint_noise()
    else:
        design, noise = spec.design(), validate_noise(spec.noise, spec.rows.shape[0])
    beta = np.zeros(design.k) if beta is None else np.asarray(beta, dtype=float)
    r = monte_carlo(design, noise, beta, reps, seed)
    return {
        "reps": r.reps,
        "seed": r.seed,
        "empirical_cov": encode_matrix(r.empirical_cov),
        "analytic_cov": encode_matrix(r.analytic_cov),
        "max_abs_dev": _num(r.max_abs_dev),
        "max_rel_dev": _num(r.max_rel_dev),
        "diag_z": [_num(z) for z in r.diag_z],
    }


def cmd_search(cfg: SearchConfig) -> dict:
    records = search_counterexamples(cfg)
    counts = {"monotone-h-violated": 0, "other": 0}
    for r in records:
        counts[r.category] += 1
    return {
        "config": {
            "n": cfg.n, "n_max": cfg.n_max, "k": cfg.k, "trials": cfg.trials,
            "seed": cfg.seed, "mode": cfg.mode, "inject_probe": cfg.inject_probe,
        },
        "total": len(records),
        "counts": counts,
        "records": [
            {
                "trial": r.trial,
                "design": encode_matrix(r.design),
                "variances": [_num(v) for v in r.variances],
                "diag_reduction": [_num(v) for v in r.diag_reduction],
                "violating": list(r.violating),
                "category": r.category,
            }
            for r in records
        ],
    }


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vrp-ols", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_problem(p):
        p.add_argument("problem", help="problem file (JSON)")
        p.add_argument("--csv", help="read the design block from this CSV instead")
        p.add_argument("-o", "--out", help="write the report here instead of stdout")
        return p

    p = with_problem(sub.add_parser("decompose", help="covariance decomposition for one added observation"))
    p.add_argument("--correlated", action="store_true", help="use the correlated decomposition")
    with_problem(sub.add_parser("check", help="variance-reduction criteria for one added observation"))
    p = with_problem(sub.add_parser("plan", help="admissible next design points for a straight line"))
    p.add_argument("--search", type=str, help="scan interval lo:hi")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--query", type=float, action="append", default=[], help="report membership of this h_next")
    p = with_problem(sub.add_parser("simulate", help="Monte Carlo check of the analytic covariance"))
    p.add_argument("--beta", type=str, help="comma-separated coefficients (default zeros)")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("search", help="random search for designs losing the variance reduction")
    p.add_argument("--n", type=int, default=3, help="base observations (minimum when --n-max is given)")
    p.add_argument("--n-max", type=int)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["increasing", "unrestricted", "two-point"], default="unrestricted")
    p.add_argument("--inject-probe", action="store_true", help="also test the known counterexample design")
    p.add_argument("-o", "--out")
    return parser


def run(argv=None) -> tuple[int, dict | None]:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "search":
            cfg = SearchConfig(
                n=args.n, n_max=args.n_max, k=args.k, trials=args.trials,
                seed=args.seed, mode=args.mode, inject_probe=args.inject_probe,
            )
            inputs = vars(args) | {"out": None}
            results = cmd_search(cfg)
            cmd_args = {k: v for k, v in vars(args).items() if k not in ("command", "out")}
        else:
            spec = load_problem(args.problem, args.csv)
            inputs = problem_to_dict(spec)
            cmd_args = {k: v for k, v in vars(args).items() if k not in ("command", "out", "problem", "csv")}
            if args.command == "decompose":
                results = cmd_decompose(spec, args.correlated)
            elif args.command == "check":
                results = cmd_check(spec)
            elif args.command == "plan":
                search = _parse_interval(args.search) if args.search else None
                results = cmd_plan(spec, search, args.grid, tuple(args.query))
            else:
                beta = None
                if args.beta:
                    try:
                        beta = [float(t) for t in args.beta.split(",")]
                    except ValueError:
                        raise ProblemFileError("expected comma-separated numbers", "--beta") from None
                results = cmd_simulate(spec, beta, args.reps, args.seed)
    except ProblemFileError as exc:
        print(f"vrp-ols: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE, None
    except (ValidationError, ValueError) as exc:
        print(f"vrp-ols: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, None
    except Exception as exc:  # noqa: BLE001
        print(f"vrp-ols: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL, None

    report = make_report(args.command, cmd_args, inputs, results)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK, report


def main(argv=None) -> int:
    try:
        return run(argv)[0]
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
