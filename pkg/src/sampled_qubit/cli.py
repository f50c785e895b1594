"""Command-line front end: ``design``, ``simulate``, ``montecarlo``, ``certify``.

Exit codes: 0 success (certification passed), 2 certification failed,
1 any error including usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bloch import UnphysicalStateError, monitor_arrays
from .config import ConfigError, dump_scenario, load_document, load_scenario, physical_period
from .design import DesignError, design_table
from .sampled_loop import certify_bound, default_workers, monte_carlo, run_protocol
from .uncertainty import SearchBudgetExceeded

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
TRAJECTORY_HEADER = ("t", "x", "y", "z", "p_fail", "coherence", "purity", "phase_flag")


class _Parser(argparse.ArgumentParser):
    # exit 2 is reserved for a failed certification
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def fmt(v) -> str:
    return "" if v is None else f"{v:.9g}"


def _round(obj):
    """Round every float in a JSON tree to 9 significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(_round(obj), indent=2) + "\n"


def _csv_pairs(obj, prefix="") -> list:
    rows = []
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_csv_pairs(v, key + "."))
        else:
            rows.append((key, fmt(v) if isinstance(v, float) else ("" if v is None else str(v))))
    return rows


def _as_csv(obj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("key", "value"))
    w.writerows(_csv_pairs(obj))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# design

_DESIGN_KEYS = ("p0", "eps", "gamma0", "gamma", "cbar", "pbar", "beta")
_DESIGN_DEFAULTS = {"p0": 0.01, "gamma0": 0.9, "gamma": 0.1, "cbar": 0.95, "pbar": 0.95, "beta": None}


def _design_params(args) -> tuple[dict, Optional[dict]]:
    params = dict(_DESIGN_DEFAULTS)
    physical = None
    if args.config:
        doc = load_document(args.config)
        unknown = set(doc) - set(_DESIGN_KEYS) - {"physical_unit_rad_per_s"}
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {sorted(unknown)}")
        physical = doc.get("physical_unit_rad_per_s")
        if physical is not None:
            bad = set(physical) - {"eps", "gamma0", "gamma"}
            if bad or not isinstance(physical, dict):
                raise ConfigError(f"physical_unit_rad_per_s: unknown keys {sorted(bad)}")
        params.update({k: doc[k] for k in _DESIGN_KEYS if k in doc})
    for k in _DESIGN_KEYS:
        v = getattr(args, k)
        if v is not None:
            params[k] = v
    if params.get("eps") is None:
        raise ConfigError("eps is required (--eps or config key)")
    return params, physical


def design_report(params: dict, physical: Optional[dict] = None) -> dict:
    table = design_table(params["p0"], params["eps"], params["gamma0"], params["gamma"], params["cbar"],
                         params["pbar"], beta=params.get("beta"), physical=physical)
    rows = []
    for r in table["periods"]:
        rows.append({
            "formula": r.formula_id.value,
            "period": r.period,
            "rounded": None if r.period is None else round(r.period, 4),
            "seconds": r.seconds,
            "note": r.note,
        })
    out = {"parameters": table["parameters"], "periods": rows}
    if "alpha_bounds" in table:
        out["alpha_bounds"] = table["alpha_bounds"]
    if physical:
        out["physical_unit_rad_per_s"] = physical
    return out


def _design_text(rep: dict) -> str:
    lines = ["parameters: " + ", ".join(f"{k}={fmt(v)}" for k, v in rep["parameters"].items())]
    lines.append(f"{'formula':<15}{'period':>16}{'4 dp':>10}{'seconds':>18}  note")
    for r in rep["periods"]:
        per = fmt(r["period"]) if r["period"] is not None else "-"
        rnd = f"{r['rounded']:.4f}" if r["rounded"] is not None else "-"
        sec = fmt(r["seconds"]) if r["seconds"] is not None else ""
        lines.append(f"{r['formula']:<15}{per:>16}{rnd:>10}{sec:>18}  {r['note']}")
    if "alpha_bounds" in rep:
        ab = rep["alpha_bounds"]
        lines.append(f"alpha bounds (beta={fmt(rep['parameters'].get('beta'))}): "
                     f"closed <= {fmt(ab['closed'])}, amplitude <= {fmt(ab['amplitude'])}")
    return "\n".join(lines) + "\n"


def cmd_design(args) -> int:
    params, physical = _design_params(args)
    rep = design_report(params, physical)
    rep["parameters"]["beta"] = params.get("beta")
    if args.format == "json":
        text = _json(rep)
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("formula", "period", "rounded", "seconds", "note"))
        for r in rep["periods"]:
            rnd = "" if r["rounded"] is None else f"{r['rounded']:.4f}"
            w.writerow((r["formula"], fmt(r["period"]), rnd, fmt(r["seconds"]), r["note"]))
        text = buf.getvalue()
    else:
        text = _design_text(rep)
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def trajectory_rows(sc, report) -> list:
    """Rows ``(t, x, y, z, flag)`` for a run kept with trajectories.

    Each sampling instant contributes its pre-measurement state flagged
    ``sample``; the post-measurement state starts the next segment.
    """
    rows = []
    if report.periods and sc.measure_at_start:
        s = sc.initial
        rows.append((0.0, s.x, s.y, s.z, "sample"))
    for p in report.periods:
        for j, (phase, tr) in enumerate(p.segments):
            start = 0 if j == 0 else 1
            for k in range(start, len(tr.times) - 1):
                rows.append((tr.times[k], *tr.states[k], phase))
            if j == len(p.segments) - 1:
                rows.append((tr.times[-1], *tr.states[-1], "sample"))
            else:
                rows.append((tr.times[-1], *tr.states[-1], phase))
    return rows


def cmd_simulate(args) -> int:
    sc, doc = load_scenario(args.config)
    rep = run_protocol(sc, args.seed, keep_trajectories=True)
    rows = trajectory_rows(sc, rep)
    mon = monitor_arrays(np.array([r[1:4] for r in rows]).reshape(-1, 3))
    out = args.out or doc.get("output", {}).get("trajectory")
    if args.format == "json":
        data = [dict(zip(TRAJECTORY_HEADER, (r[0], r[1], r[2], r[3], float(mon["p_fail"][i]),
                                              float(mon["coherence"][i]), float(mon["purity"][i]), r[4])))
                for i, r in enumerate(rows)]
        text = _json({"columns": list(TRAJECTORY_HEADER), "rows": data})
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for i, r in enumerate(rows):
            w.writerow((fmt(r[0]), fmt(r[1]), fmt(r[2]), fmt(r[3]), fmt(mon["p_fail"][i]),
                        fmt(mon["coherence"][i]), fmt(mon["purity"][i]), r[4]))
        text = buf.getvalue()
    _emit(text, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# montecarlo / certify


def cmd_montecarlo(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    sc, doc = load_scenario(args.config)
    workers = args.workers if args.workers is not None else default_workers()
    rep = monte_carlo(sc, args.trials, args.seed, workers)
    rep = {"seed": args.seed, "period": sc.plan.period, "formula": sc.plan.formula_id.value, **rep}
    sec = physical_period(doc, sc)
    if sec is not None:
        rep["period_seconds"] = sec
    out = args.out or doc.get("output", {}).get("report")
    _emit(_as_csv(rep) if args.format == "csv" else _json(rep), out)
    return EXIT_OK


def cmd_certify(args) -> int:
    sc, doc = load_scenario(args.config)
    cert = certify_bound(sc, args.grid, args.levels, args.max_evaluations)
    rep = {
        "passed": cert.passed,
        "formula": sc.plan.formula_id.value,
        "period": sc.plan.period,
        "objective": cert.objective,
        "worst": cert.worst,
        "target": cert.target,
        "slack": 1e-4,
        "checks": [{k: c[k] for k in ("passed", "worst", "target", "horizon")} for c in cert.checks],
    }
    if not cert.passed:
        wpath = args.witness or str(Path(args.config).with_suffix("")) + ".witness.yaml"
        dump_scenario(cert.witness(sc), wpath)
        rep["witness"] = wpath
    out = args.out or doc.get("output", {}).get("report")
    if args.format == "csv":
        flat = {k: v for k, v in rep.items() if k != "checks"}
        for i, c in enumerate(rep["checks"]):
            flat[f"check{i}"] = c
        text = _as_csv(flat)
    else:
        text = _json(rep)
    _emit(text, out)
    return EXIT_OK if cert.passed else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sampled-qubit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="print the sampling-period table")
    d.add_argument("--config", help="YAML file with design parameters")
    for k in _DESIGN_KEYS:
        d.add_argument(f"--{k}", type=float)
    d.add_argument("--format", choices=("text", "csv", "json"), default="text")
    d.add_argument("--out")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="export one protocol run as a trajectory")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("montecarlo", help="aggregate statistics over many runs")
    m.add_argument("--config", required=True)
    m.add_argument("--trials", type=int, required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--workers", type=int)
    m.add_argument("--format", choices=("csv", "json"), default="json")
    m.add_argument("--out")
    m.set_defaults(func=cmd_montecarlo)

    c = sub.add_parser("certify", help="adversarial search over one period")
    c.add_argument("--config", required=True)
    c.add_argument("--grid", type=int, default=8)
    c.add_argument("--levels", type=int, default=8)
    c.add_argument("--max-evaluations", type=int, default=1_000_000)
    c.add_argument("--witness", help="where to write the replayable witness on failure")
    c.add_argument("--format", choices=("csv", "json"), default="json")
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors and --help; returned so library callers get a code
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    try:
        return args.func(args)
    except (ConfigError, DesignError, SearchBudgetExceeded, UnphysicalStateError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
