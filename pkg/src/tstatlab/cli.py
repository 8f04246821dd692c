"""Command-line front end.

Every command writes one CSV or JSON document (to ``--out`` or stdout) and
prints a one-line summary. Exit status: 0 on success, 2 on invalid input,
3 when exact enumeration would exceed its budget.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .classify import classify_grid, convergence_experiment, moment_via_survival
from . import dist as dm
from . import exact as ex
from . import geom
from . import mc
from .common import INFINITE, BudgetExceeded, DivergentTarget, SpecError
from .selfnorm import ustar_threshold

SCHEMA_VERSION = 1
STOCHASTIC = {"simulate", "convergence", "neardeg", "subgaussian", "tail", "identity"}


def load_schema() -> dict:
    text = resources.files("tstatlab").joinpath(f"schemas/output-v{SCHEMA_VERSION}.json")
    return json.loads(text.read_text(encoding="utf-8"))


SCHEMA = load_schema()


# ---------------------------------------------------------------------------
# Input parsing
# ---------------------------------------------------------------------------

def parse_dist_file(path: str | os.PathLike) -> dm.Distribution:
    """Read a distribution description from a JSON file (or an inline JSON object)."""
    text = str(path)
    if text.lstrip().startswith("{"):
        raw = text
    else:
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecError(f"cannot read distribution file {path}: {exc.strerror}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed distribution JSON: {exc.msg} at line {exc.lineno}") from exc
    try:
        return dm.from_dict(data)
    except SpecError:
        raise
    except (TypeError, ValueError) as exc:
        raise SpecError(str(exc)) from exc


def parse_grid(text: str, kind: Callable = float) -> list:
    """"0.1,0.3,0.5" or an inclusive integer range "2..6"."""
    text = text.strip()
    if ".." in text and kind is int:
        lo, hi = text.split("..", 1)
        vals = list(range(int(lo), int(hi) + 1))
    else:
        vals = [kind(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise SpecError(f"empty grid {text!r}")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise SpecError(f"grid {text!r} must be strictly increasing")
    return vals


def _ints(text: str) -> list[int]:
    return parse_grid(text, int)


def _floats(text: str) -> list[float]:
    return parse_grid(text, float)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if v is INFINITE:
        return "Infinite"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if v is INFINITE:
        return "Infinite"
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else ("Infinite" if v > 0 else repr(v))
    if hasattr(v, "value") and not isinstance(v, (int, str)):
        return v.value
    return v


def render_csv(command: str, rows: Sequence[dict]) -> str:
    cols = SCHEMA["commands"][command]["csv_columns"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def render_json(command: str, payload: dict) -> str:
    doc = {"schema": f"tstatlab/{command}/v{SCHEMA_VERSION}", "command": command}
    doc.update(payload)
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Commands: each returns (rows, extra JSON payload, summary line)
# ---------------------------------------------------------------------------

def _n_values(args) -> list[int]:
    if args.n_grid is not None:
        return args.n_grid
    if args.n is not None:
        return [args.n]
    raise SpecError("one of --n or --n-grid is required")


def _r_values(args) -> list[float]:
    if args.r_grid is not None:
        return args.r_grid
    if args.r is not None:
        return [args.r]
    raise SpecError("one of --r or --r-grid is required")


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise SpecError(f"--{name.replace('_', '-')} is required for {args.command}")


def cmd_simulate(args):
    _need(args, "n", "count")
    b = mc.simulate_tstat(args.dist, args.n, args.count, args.seed, threads=args.threads)
    rows = [{"index": i, "n": s.n, "sum": s.sum, "vnorm": s.vnorm, "sigma_hat": s.sigma_hat,
             "t": s.t, "ustar": s.ustar, "degenerate_all_equal": s.degenerate_all_equal,
             "degenerate_all_zero": s.degenerate_all_zero} for i, s in enumerate(b)]
    summary = (f"simulate: {len(b)} samples of size {args.n}, "
               f"mean |t| = {float(np.mean(np.abs(b.t))):.6g}")
    return rows, {"rows": rows}, summary


def cmd_moments(args):
    rows = []
    mode = args.mode or "auto"
    if mode not in ("auto", "exact", "mc"):
        raise SpecError(f"unknown moments mode {mode!r}")
    for n in _n_values(args):
        use_exact = mode == "exact" or (mode == "auto" and args.dist.is_finite_discrete)
        batch = None
        for r in _r_values(args):
            if use_exact:
                res = ex.exact_tmoment(args.dist, n, r, threads=args.threads)
                rows.append({"n": n, "r": r, "method": "exact", "value": res.value,
                             "std_error": 0.0, "divergence_flag": False,
                             "tuple_count": res.tuple_count})
            else:
                _need(args, "count", "seed")
                if batch is None:
                    batch = mc.simulate_tstat(args.dist, n, args.count, [args.seed, n],
                                              threads=args.threads)
                est = mc.estimate_moment(batch, r)
                # the same moment from the survival curve of U* on the same samples
                via = moment_via_survival(mc.survival_curve(batch, n), n, r)
                rows.append({"n": n, "r": r, "method": "mc", "value": est.value,
                             "std_error": est.std_error, "divergence_flag": est.divergence_flag,
                             "survival_value": via.value,
                             "survival_truncated": via.truncated_probability})
    flagged = sum(bool(r["divergence_flag"]) for r in rows)
    return rows, {"rows": rows}, f"moments: {len(rows)} cells, {flagged} flagged divergent"


def cmd_conditions(args):
    delta = args.delta if args.delta is not None else 1.0
    rows = []
    for n in _n_values(args):
        for r in _r_values(args):
            rows.append({"n": n, "r": r, "delta": delta,
                         "cond_i": ex.exact_tmoment(args.dist, n, r, threads=args.threads).value,
                         "cond_ii": ex.exact_condition_ii(args.dist, n, r).value,
                         "cond_iii": ex.exact_condition_iii(args.dist, n, r).value,
                         "r_n_delta": ex.exact_R_n_delta(args.dist, n, r, delta).value})
    return rows, {"rows": rows}, f"conditions: {len(rows)} cells, all exact"


def cmd_classify(args):
    kw = {"h_grid": args.h_grid} if args.h_grid else {}
    grid = classify_grid(args.dist, _n_values(args), _r_values(args), **kw)
    verdicts = [v.to_dict() for v in grid.values()]
    rows = [{"n": v.n, "r": v.r, "verdict": v.verdict.value, "r_star_low": v.r_star_low,
             "r_star_high": v.r_star_high, "rules": ";".join(e.rule for e in v.evidence),
             "citations": ";".join(v.citations)} for v in grid.values()]
    parts = [f"(n={v.n}, r={v.r:g}) {v.verdict.value} [{'; '.join(v.citations)}]"
             for v in grid.values()]
    return rows, {"verdicts": verdicts}, "classify: " + ", ".join(parts)


def cmd_concentration(args):
    h_grid = args.h_grid or list(dm.DEFAULT_H_GRID)
    prof = dm.concentration_profile(args.dist, h_grid)
    rows = [{"h": h, "q": q, "Q": Q} for h, q, Q in zip(prof.h_grid, prof.q_values,
                                                         prof.Q_values)]
    extra = {"rows": rows, "fitted_lambda_q": prof.fitted_lambda_q,
             "fitted_lambda_Q": prof.fitted_lambda_Q, "fit_diagnostics": prof.fit_diagnostics,
             "exact": prof.exact}
    lam = prof.fitted_lambda_q
    return rows, extra, (f"concentration: {len(rows)} h values, fitted lambda(q) = "
                         f"{'n/a' if lam is None else f'{lam:.4g}'}")


def cmd_geometry(args):
    h_grid = args.h_grid or [0.1, 0.3, 0.5, 0.7, 0.9]
    mode = args.mode or "lemma1"
    c2 = args.c2 if args.c2 is not None else 1.0
    rows = []
    for n in _n_values(args):
        for h in h_grid:
            if mode == "lemma1":
                rep = geom.lemma1_verify(n, h)
            elif mode == "lemma2":
                rep = geom.lemma2_verify(n, h, c2)
            elif mode == "interior":
                ok = geom.interior_stationarity_check(n, h, c2)
                rep = geom.lemma2_verify(n, h, c2)
                rows.append({"n": n, "h": h, "mode": "interior", "numeric": rep.numeric_extremum,
                             "analytic": rep.analytic_extremum, "gap": rep.gap, "pass": ok})
                continue
            else:
                raise SpecError(f"unknown geometry mode {mode!r}")
            rows.append({"n": n, "h": h, "mode": rep.mode.value, "numeric": rep.numeric_extremum,
                         "analytic": rep.analytic_extremum, "gap": rep.gap, "pass": rep.passed})
    passed = sum(bool(r["pass"]) for r in rows)
    worst = max(r["gap"] for r in rows)
    return rows, {"rows": rows}, f"geometry {mode}: {passed}/{len(rows)} pass, max gap {worst:.3g}"


def cmd_convergence(args):
    _need(args, "r", "n_grid", "count")
    tab = convergence_experiment(args.dist, args.r, args.n_grid, args.count, args.seed,
                                    threads=args.threads)
    rows = [{"n": row.n, "estimate": row.estimate, "std_error": row.std_error,
             "limit": tab.limit} for row in tab.rows]
    extra = {"rows": rows, "limit": tab.limit,
             "max_top_quartile_deviation": tab.max_top_quartile_deviation}
    return rows, extra, (f"convergence: limit {tab.limit:.6g}, max deviation over top quartile "
                         f"{tab.max_top_quartile_deviation:.4g}")


def cmd_neardeg(args):
    _need(args, "n", "h_grid", "count")
    pts = mc.near_degeneracy_probe(args.dist, args.n, args.h_grid, args.count, args.seed,
                                   stratified=args.stratified, threads=args.threads)
    rows = [{"h": p.h, "estimate": p.estimate, "ci_low": p.ci_low, "ci_high": p.ci_high,
             "std_error": p.std_error, "hits": p.hits} for p in pts]
    slope = None
    if len(pts) >= 4 and all(p.estimate > 0 for p in pts):
        slope = dm.fit_lambda([p.h for p in pts], [p.estimate for p in pts]).slope
    return rows, {"rows": rows, "fitted_slope": slope}, (
        f"neardeg: {len(rows)} h values, log-log slope "
        f"{'n/a' if slope is None else f'{slope:.4g}'}")


def cmd_subgaussian(args):
    _need(args, "n_grid", "count")
    t_grid = args.t_grid or [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]
    res = mc.subgaussian_probe(args.dist, args.n_grid, t_grid, args.count, args.seed,
                               threads=args.threads)
    rows = [{"n": n, "t": t, "mgf": res.mgf[i, j], "std_error": res.std_error[i, j]}
            for i, n in enumerate(res.n_list) for j, t in enumerate(res.t_grid)]
    extra = {"rows": rows, "fitted_C": res.fitted_C, "envelope_C": res.envelope_C,
             "envelope_C_all": res.envelope_C_all, "stability": res.stability()}
    return rows, extra, (f"subgaussian: envelope C = {res.envelope_C_all:.4g}, "
                         f"fitted C spread {res.stability():.3g}")


def cmd_tail(args):
    _need(args, "count")
    rows = []
    for n in _n_values(args):
        b = mc.simulate_tstat(args.dist, n, args.count, [args.seed, n], threads=args.threads)
        for method in mc.TailMethod:
            est = mc.estimate_tail_index(b.t, args.k, method)
            rows.append({"n": n, "method": method.value, "index": est.index,
                         "ci_low": est.ci_low, "ci_high": est.ci_high, "k": est.k})
    return rows, {"rows": rows}, "tail: " + ", ".join(
        f"n={r['n']} {r['method']} {r['index']:.4g}" for r in rows)


def cmd_identity(args):
    _need(args, "count")
    x_grid = args.x_grid or [0.0, 0.1, 1.0, 10.0, 100.0]
    rows = []
    for n in _n_values(args):
        b = mc.simulate_tstat(args.dist, n, args.count, [args.seed, n], threads=args.threads)
        for x in x_grid:
            bad = int(np.count_nonzero((b.t_sq > x) != (b.ustar > ustar_threshold(n, x))))
            rows.append({"n": n, "x": x, "samples": len(b), "violations": bad})
    total = sum(r["violations"] for r in rows)
    return rows, {"rows": rows}, f"identity: {total} violations in {len(rows)} cells"


COMMANDS = {
    "simulate": cmd_simulate, "moments": cmd_moments, "conditions": cmd_conditions,
    "classify": cmd_classify, "concentration": cmd_concentration, "geometry": cmd_geometry,
    "convergence": cmd_convergence, "neardeg": cmd_neardeg, "subgaussian": cmd_subgaussian,
    "tail": cmd_tail, "identity": cmd_identity,
}
NEEDS_DIST = set(COMMANDS) - {"geometry"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dist", help="distribution: JSON file path or inline JSON object")
    common.add_argument("--n", type=int, help="sample size")
    common.add_argument("--n-grid", type=_ints, help="sample sizes, e.g. 2..6 or 10,20,50")
    common.add_argument("--r", type=float, help="moment order")
    common.add_argument("--r-grid", type=_floats, help="moment orders, comma separated")
    common.add_argument("--h-grid", type=_floats, help="h values, comma separated")
    common.add_argument("--t-grid", type=_floats, help="MGF arguments, comma separated")
    common.add_argument("--x-grid", type=_floats, help="thresholds for the identity check")
    common.add_argument("--count", type=int, help="Monte Carlo sample count")
    common.add_argument("--seed", type=int, help="RNG seed (required for stochastic commands)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $TSTATLAB_THREADS or 1)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--mode", help="geometry: lemma1|lemma2|interior; moments: auto|exact|mc")
    common.add_argument("--c2", type=float, help="box constant for the upper geometric bound")
    common.add_argument("--delta", type=float, help="upper h limit for R_{n,delta}")
    common.add_argument("--k", type=int, help="order statistics for the tail index")
    common.add_argument("--stratified", action="store_true",
                        help="neardeg: condition on X_1 and sample inside its window")

    parser = argparse.ArgumentParser(
        prog="tstatlab",
        description="Moments, tails and finiteness of Student's t-statistic.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "per-sample statistics T_n, U* and degeneracy flags",
        "moments": "E|T_n|^r, exact for finite discrete laws, else Monte Carlo",
        "conditions": "exact equivalent finiteness conditions and R_{n,delta}",
        "classify": "finite / infinite / indeterminate verdicts with evidence",
        "concentration": "concentration functions q(h), Q(h) and fitted exponents",
        "geometry": "numeric checks of the two geometric bounds on n - u_n",
        "convergence": "E|T_n|^r along an n grid against the normal limit",
        "neardeg": "P(n - U* < h^2) for an h grid",
        "subgaussian": "empirical E exp(t S_n/V_n) and fitted constants",
        "tail": "Hill and log-log tail index estimates of |T_n|",
        "identity": "count violations of T^2 > x <=> U* > nx/(n+x-1)",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in NEEDS_DIST:
            if args.dist is None:
                raise SpecError(f"--dist is required for {args.command}")
            args.dist = parse_dist_file(args.dist)
        if args.command in STOCHASTIC and args.seed is None:
            raise SpecError(f"--seed is required for {args.command}")
        rows, extra, summary = COMMANDS[args.command](args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SpecError, DivergentTarget, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    config = {k: v for k, v in vars(args).items()
              if k not in ("out", "dist", "threads") and v is not None}
    if args.command in NEEDS_DIST:
        config["dist"] = args.dist.to_dict()
    if args.format == "json":
        text = render_json(args.command, {"config": config, **extra})
    else:
        text = render_csv(args.command, rows)
    if args.out:
        write_atomic(args.out, text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
