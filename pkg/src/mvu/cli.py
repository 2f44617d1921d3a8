"""Command-line front end: optimize, experiment, curves, serve.

Exit codes: 0 success, 2 configuration/range problems (the message names the
offending path), 3 when a quadratic form is not positive definite.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, experiment_config, optimize_document, parse_run_config
from .core import NotPositiveDefiniteError
from .factors import a_factor_curve, corr_ratio_curve
from .simulator import run_experiment, run_robustness

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_POSITIVE_DEFINITE = 3


def _load_config(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except OSError as exc:
        raise ConfigError(path, f"cannot read config: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc}") from None
    return parse_run_config(document)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt_row(cells, widths) -> str:
    return "  ".join(str(c).rjust(w) for c, w in zip(cells, widths))


def _render_optimize_human(doc: dict) -> str:
    names = doc["assets"]
    lines = ["Adjustment factors", "  asset        A    B row"]
    for i, name in enumerate(names):
        b_row = "  ".join(f"{v:8.2f}" for v in doc["b"][i])
        lines.append(f"  {name:<10} {doc['a'][i]:5.2f} {b_row}")
    lines.append("")
    lines.append("Allocation            adjusted                 naive")
    lines.append("  asset        fraction    c-units      fraction    c-units")
    for i, name in enumerate(names):
        lines.append(
            f"  {name:<10} {doc['adjusted']['fractions'][i]:10.4f} "
            f"{doc['adjusted']['c_units'][i]:10.4f}    "
            f"{doc['naive']['fractions'][i]:10.4f} {doc['naive']['c_units'][i]:10.4f}"
        )
    for label in ("adjusted", "naive"):
        alloc = doc[label]
        lines.append(
            f"  [{label}] riskless fraction {alloc['riskless_fraction']:.4f}, "
            f"q-value {alloc['q_value']:.6f}, du-coefficient {alloc['du_coefficient']:.6f}"
        )
    return "\n".join(lines) + "\n"


def _render_experiment_human(doc: dict) -> str:
    lines = [
        f"steps {doc['steps']}, seed {doc['seed']}, dt {doc['dt']}, x {doc['x']}",
        "  account     sharpe        mean       stdev  log wealth",
    ]
    for label in ("naive", "better", "true"):
        acct = doc["accounts"][label]
        sharpe = "      n/a" if acct["sharpe"] is None else f"{acct['sharpe']:9.4f}"
        lines.append(
            f"  {label:<8} {sharpe} {acct['mean']:11.6f} "
            f"{acct['stdev']:11.6f} {acct['log_final_wealth']:11.2f}"
        )
    a = ", ".join(f"{v:.4f}" for v in doc["a"])
    b = "; ".join(", ".join(f"{v:.4f}" for v in row) for row in doc["b"])
    lines.append(f"  A = [{a}]  B = [{b}]")
    return "\n".join(lines) + "\n"


def _render_trials_human(trials: list[dict]) -> str:
    lines = ["  trial   seed  status                  naive   better     true"]
    for t in trials:
        if t["status"] == "ok":
            acc = t["report"]["accounts"]
            tail = f"{acc['naive']['sharpe']:8.4f} {acc['better']['sharpe']:8.4f} {acc['true']['sharpe']:8.4f}"
        else:
            tail = "-"
        lines.append(f"  {t['index']:5d} {t['seed']:6d}  {t['status']:<22} {tail}")
    return "\n".join(lines) + "\n"


def _cmd_optimize(args) -> int:
    rc = _load_config(args.config)
    doc = optimize_document(rc)
    if args.format == "json":
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        _emit(_render_optimize_human(doc), args.out)
    return EXIT_OK


def _write_series(path: str, report_doc: dict, reports) -> None:
    # One row per step: the three accounts' log returns.
    lines = ["step,naive,better,true"]
    naive, better, true = reports
    for i in range(len(naive.log_returns)):
        lines.append(
            f"{i},{naive.log_returns[i]:.10g},{better.log_returns[i]:.10g},"
            f"{true.log_returns[i]:.10g}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _cmd_experiment(args) -> int:
    rc = _load_config(args.config)
    cfg = experiment_config(rc, steps=args.steps, seed=args.seed,
                            factor_noise=args.factor_noise)
    if args.trials is not None:
        trials = run_robustness(cfg, args.trials, cfg.factor_noise)
        docs = [
            {
                "index": t.index,
                "seed": t.seed,
                "status": t.status,
                "report": t.report.to_document() if t.report else None,
            }
            for t in trials
        ]
        if args.format == "json":
            _emit(json.dumps({"trials": docs}, indent=2) + "\n", args.out)
        else:
            _emit(_render_trials_human(docs), args.out)
        return EXIT_OK

    report = run_experiment(cfg)
    doc = report.to_document()
    if args.series:
        _write_series(args.series, doc, report.accounts())
    if args.format == "json":
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        _emit(_render_experiment_human(doc), args.out)
    return EXIT_OK


def _cmd_curves(args) -> int:
    try:
        if args.kind == "a-factor":
            rows = a_factor_curve(args.min, args.max, args.points)
            header = "sigma,a_factor"
        else:
            rows = corr_ratio_curve(args.min, args.max, args.points,
                                    n_exp=args.n_exp, sign=args.sign)
            header = "rho_mean,ratio"
    except ValueError as exc:
        raise ConfigError("range", str(exc)) from None
    body = "\n".join(f"{x:.10g},{y:.10g}" for x, y in rows)
    _emit(header + "\n" + body + "\n", args.out)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(allow_cors=args.allow_cors), host=args.bind, port=args.port,
                log_level="warning")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvu",
        description="Mean-variance portfolio construction under parameter uncertainty",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="uncertainty-adjusted weights from a config file")
    p_opt.add_argument("--config", required=True, help="path to a JSON run configuration")
    p_opt.add_argument("--format", choices=("human", "json"), default="human")
    p_opt.add_argument("--out", default=None, help="write output to this path instead of stdout")
    p_opt.set_defaults(func=_cmd_optimize)

    p_exp = sub.add_parser("experiment", help="run the three-account simulation")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--steps", type=int, default=None, help="override configured step count")
    p_exp.add_argument("--seed", type=int, default=None, help="override configured seed")
    p_exp.add_argument("--trials", type=int, default=None,
                       help="run this many perturbed-factor trials instead of one experiment")
    p_exp.add_argument("--factor-noise", type=float, default=None, dest="factor_noise",
                       help="lognormal width of the factor perturbation")
    p_exp.add_argument("--series", default=None, help="write per-step log returns as CSV here")
    p_exp.add_argument("--format", choices=("human", "json"), default="human")
    p_exp.add_argument("--out", default=None)
    p_exp.set_defaults(func=_cmd_experiment)

    p_cur = sub.add_parser("curves", help="emit diagnostic curve tables as CSV")
    p_cur.add_argument("--kind", choices=("a-factor", "corr-ratio"), required=True)
    p_cur.add_argument("--min", type=float, required=True,
                       help="sigma lower bound (a-factor) or alpha lower bound (corr-ratio)")
    p_cur.add_argument("--max", type=float, required=True)
    p_cur.add_argument("--points", type=int, required=True)
    p_cur.add_argument("--n-exp", type=int, default=3, dest="n_exp",
                       help="odd skew exponent for corr-ratio sweeps")
    p_cur.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p_cur.add_argument("--out", default=None)
    p_cur.set_defaults(func=_cmd_curves)

    p_srv = sub.add_parser("serve", help="run the JSON-over-HTTP service")
    p_srv.add_argument("--bind", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--allow-cors", action="store_true", dest="allow_cors",
                       help="send permissive cross-origin headers (local UI development)")
    p_srv.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotPositiveDefiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_POSITIVE_DEFINITE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
