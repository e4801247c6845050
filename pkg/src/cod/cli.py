"""Umbrella command line: synthesis, training, evaluation, export, serving.

`--db demo` selects the bundled catalog everywhere a catalog is needed;
any other value is read as a disease JSONL path.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict

from .belief import BayesConfig, BeliefBackendConfig, LlmConfig, make_backend
from .datagen import Discarded, build_cod_record, export_training_set
from .demo import demo_disease_db
from .engine import Diagnose, Session, SessionConfig
from .knowledge import (
    DiseaseDB,
    load_cases,
    load_disease_db,
    save_cases,
    synthesize_cases,
)
from .llm import API_KEY_ENV, ENDPOINT_ENV
from .retriever import TrainConfig, eval_retriever, load_model, save_model, train_retriever
from .simeval import DEFAULT_SEEDS, run_benchmark, sweep_tau, threshold_curve

log = logging.getLogger("cod")


def _load_db(spec: str) -> DiseaseDB:
    if spec == "demo":
        return demo_disease_db()
    return load_disease_db(spec)


def _backend_config(kind: str) -> BeliefBackendConfig:
    if kind == "bayes":
        return BeliefBackendConfig(kind="bayes")
    if kind == "llm":
        endpoint = os.environ.get(ENDPOINT_ENV, "")
        if not endpoint:
            raise SystemExit(f"error: llm backend needs {ENDPOINT_ENV} set")
        llm = LlmConfig(endpoint=endpoint, api_key=os.environ.get(API_KEY_ENV))
        return BeliefBackendConfig(kind="llm", llm=llm)
    raise SystemExit(f"error: unknown backend {kind!r}")


def _session_config(args: argparse.Namespace) -> SessionConfig:
    return SessionConfig(
        tau=args.tau, max_rounds=args.max_rounds, k=args.k,
        entropy_mode=args.entropy_mode)


def _ensure_model(db: DiseaseDB, args: argparse.Namespace):
    if getattr(args, "model", None):
        return load_model(args.model, db)
    log.warning("no --model given; training a fresh retriever on synthesized "
                "cases (per-disease 5, seed 1)")
    cases = synthesize_cases(db, per_disease=5, seed=1)
    return train_retriever(db, cases, TrainConfig()).model


def _parse_seeds(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _parse_taus(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _add_session_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", default="bayes", choices=("bayes", "llm"))
    parser.add_argument("--tau", type=float, default=0.5)
    parser.add_argument("--max-rounds", type=int, default=5)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--entropy-mode", default="present-only",
                        choices=("present-only", "expected"))


def cmd_synth(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    cases = synthesize_cases(db, per_disease=args.per_disease, seed=args.seed)
    save_cases(cases, args.out)
    print(f"wrote {len(cases)} cases to {args.out}")
    return 0


def cmd_train_retriever(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    cases = load_cases(args.cases, db)
    config = TrainConfig(dim=args.dim, epochs=args.epochs,
                         learning_rate=args.lr, seed=args.seed)
    result = train_retriever(db, cases, config)
    save_model(result.model, args.out)
    print(f"trained on {len(cases)} cases: loss "
          f"{result.loss_history[0]:.4f} -> {result.final_loss:.4f}")
    print(f"wrote model to {args.out}")
    return 0


def cmd_eval_retriever(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    model = load_model(args.model, db)
    cases = load_cases(args.cases, db)
    report = eval_retriever(model, cases)
    print(f"cases      {report.n_cases}")
    print(f"MRR@100    {report.mrr_at_100:.4f}")
    for k in sorted(report.recall_at):
        print(f"Recall@{k:<4} {report.recall_at[k]:.4f}")
    return 0


def _report_dict(report) -> dict:
    return {
        "n_cases": report.n_cases,
        "accuracy": report.accuracy,
        "mean_inquiries": report.mean_inquiries,
        "diagnosis_rate": report.diagnosis_rate,
        "entropy_by_round": list(report.entropy_by_round),
        "per_seed": [{"seed": s, "accuracy": a, "mean_inquiries": n}
                     for s, a, n in report.per_seed],
        "stderr_accuracy": report.stderr_accuracy,
        "stderr_inquiries": report.stderr_inquiries,
    }


def cmd_eval(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    model = _ensure_model(db, args)
    cases = load_cases(args.cases, db)
    backend = make_backend(_backend_config(args.backend))
    config = _session_config(args)
    seeds = _parse_seeds(args.seeds)
    report = run_benchmark(cases, config, db, model, backend, seeds=seeds)
    print(f"cases={report.n_cases} seeds={list(seeds)}")
    print(f"accuracy        {report.accuracy:.4f} +/- {report.stderr_accuracy:.4f}")
    print(f"mean inquiries  {report.mean_inquiries:.4f} +/- {report.stderr_inquiries:.4f}")
    print(f"diagnosis rate  {report.diagnosis_rate:.4f}")
    print(f"entropy by round {[round(h, 4) for h in report.entropy_by_round]}")
    if args.report:
        payload = _report_dict(report)
        payload["config"] = asdict(config)
        payload["backend"] = args.backend
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote report to {args.report}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    model = _ensure_model(db, args)
    cases = load_cases(args.cases, db)
    backend = make_backend(_backend_config(args.backend))
    config = _session_config(args)
    rows = sweep_tau(cases, config, db, model, backend,
                     taus=_parse_taus(args.taus), seeds=_parse_seeds(args.seeds))
    print(f"{'tau':>5} {'accuracy':>9} {'inquiries':>10} {'diag_rate':>10}")
    for tau, report in rows:
        print(f"{tau:>5.2f} {report.accuracy:>9.4f} "
              f"{report.mean_inquiries:>10.4f} {report.diagnosis_rate:>10.4f}")
    if args.report:
        payload = [{"tau": tau, **_report_dict(report)} for tau, report in rows]
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote report to {args.report}")
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    model = _ensure_model(db, args)
    cases = load_cases(args.cases, db)
    backend = make_backend(_backend_config(args.backend))
    config = _session_config(args)
    points = threshold_curve(cases, config, db, model, backend,
                             taus=_parse_taus(args.taus))
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["tau", "rate", "accuracy"])
        for point in points:
            acc = "" if point.accuracy is None else f"{point.accuracy:.6f}"
            writer.writerow([f"{point.tau:.6g}", f"{point.diagnosis_rate:.6f}", acc])
    finally:
        if args.out:
            out.close()
            print(f"wrote curve to {args.out}")
    return 0


def cmd_datagen(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    model = _ensure_model(db, args)
    cases = load_cases(args.cases, db)
    backend = make_backend(_backend_config(args.backend))
    config = _session_config(args)
    retained, discarded = [], []
    for case in cases:
        outcome = build_cod_record(case, config, db, model, backend,
                                   rethink_limit=args.rethink_limit,
                                   verify_tau=args.verify_tau)
        (discarded if isinstance(outcome, Discarded) else retained).append(outcome)
    count = export_training_set(retained, args.out)
    print(f"retained {count} / {len(cases)} dialogues -> {args.out}")
    if discarded:
        print(f"discarded {len(discarded)}:")
        for item in discarded:
            print(f"  {item.case_id}: {item.reason}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    db = _load_db(args.db)
    model = _ensure_model(db, args)
    app = create_app(db, model,
                     session_config=_session_config(args),
                     backend_config=_backend_config(args.backend),
                     static_dir=args.static)
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_interactive(args: argparse.Namespace) -> int:
    db = _load_db(args.db)
    model = _ensure_model(db, args)
    backend = make_backend(_backend_config(args.backend))
    config = _session_config(args)
    print("enter opening symptoms (comma separated), or 'quit'")
    while True:
        try:
            line = input("symptoms> ").strip()
        except EOFError:
            return 0
        if not line or line.lower() in ("quit", "exit"):
            return 0
        session = Session(db, model, config, backend)
        try:
            trace_round = session.start(line)
        except ValueError as exc:
            print(f"  {exc}")
            continue
        while True:
            top = sorted(trace_round.confidence.entries.items(),
                         key=lambda kv: (-kv[1], kv[0]))[:3]
            shown = ", ".join(f"{d}={c:.3f}" for d, c in top)
            print(f"  round {trace_round.round}: {shown}")
            decision = trace_round.decision
            if isinstance(decision, Diagnose):
                record = db.by_id[decision.disease]
                forced = " (round cap reached)" if decision.forced else ""
                print(f"  diagnosis: {record.name} "
                      f"({decision.confidence:.3f}){forced}")
                print(f"  treatment: {record.treatment}")
                break
            while True:
                reply = input(f"  {decision.question_text} [yes/no] ").strip().lower()
                if reply in ("yes", "no", "y", "n"):
                    break
                print("  please answer yes or no")
            trace_round = session.answer("yes" if reply.startswith("y") else "no")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cod", description="diagnostic dialogue engine")
    parser.add_argument("--verbose", action="store_true",
                        help="log at DEBUG instead of INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize benchmark cases from a catalog")
    p.add_argument("--db", default="demo")
    p.add_argument("--per-disease", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train-retriever", help="train the candidate recall model")
    p.add_argument("--db", default="demo")
    p.add_argument("--cases", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_retriever)

    p = sub.add_parser("eval-retriever", help="rank-quality metrics for a model")
    p.add_argument("--db", default="demo")
    p.add_argument("--model", required=True)
    p.add_argument("--cases", required=True)
    p.set_defaults(fn=cmd_eval_retriever)

    p = sub.add_parser("eval", help="run the dialogue benchmark")
    p.add_argument("--db", default="demo")
    p.add_argument("--cases", required=True)
    p.add_argument("--model")
    p.add_argument("--seeds", default=",".join(str(s) for s in DEFAULT_SEEDS))
    p.add_argument("--report", help="write the full report as JSON here")
    _add_session_flags(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="benchmark across several thresholds")
    p.add_argument("--db", default="demo")
    p.add_argument("--cases", required=True)
    p.add_argument("--model")
    p.add_argument("--taus", default="0.4,0.5,0.6,0.7")
    p.add_argument("--seeds", default=",".join(str(s) for s in DEFAULT_SEEDS))
    p.add_argument("--report", help="write per-tau reports as JSON here")
    _add_session_flags(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("curve", help="no-inquiry threshold curve as CSV")
    p.add_argument("--db", default="demo")
    p.add_argument("--cases", required=True)
    p.add_argument("--model")
    p.add_argument("--taus", default="0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--out", help="CSV path (default: stdout)")
    _add_session_flags(p)
    p.set_defaults(fn=cmd_curve)

    p = sub.add_parser("datagen", help="export verified training dialogues")
    p.add_argument("--db", default="demo")
    p.add_argument("--cases", required=True)
    p.add_argument("--model")
    p.add_argument("--rethink-limit", type=int, default=3)
    p.add_argument("--verify-tau", type=float, default=None,
                   help="verification threshold (default: --tau)")
    p.add_argument("--out", required=True)
    _add_session_flags(p)
    p.set_defaults(fn=cmd_datagen)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--db", default="demo")
    p.add_argument("--model")
    p.add_argument("--listen", default="127.0.0.1:8000")
    p.add_argument("--static", help="directory with built console assets")
    _add_session_flags(p)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("interactive", help="play the patient at a terminal")
    p.add_argument("--db", default="demo")
    p.add_argument("--model")
    _add_session_flags(p)
    p.set_defaults(fn=cmd_interactive)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
