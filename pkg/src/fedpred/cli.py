"""Command-line interface: a thin client over the service operations.

Subcommands run locally by default; pass --server URL to target a running
`fedpred serve` instance instead.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .client import make_backend
from .errors import FedpredError
from .service import schemas


def _read_config(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise FedpredError(f"config file not found: {path}")
    return p.read_text(encoding="utf-8")


def _cmd_run(args: argparse.Namespace) -> int:
    backend = make_backend(args.server)
    req = schemas.ExperimentRequest(
        config_text=_read_config(args.config), output_dir=args.output_dir
    )
    response = backend.run_experiment(req)
    for r in response.results:
        metrics = " ".join(f"{k}={v:.6g}" for k, v in sorted(r.metrics.items()))
        print(
            f"{r.method} seed={r.seed} h={r.heterogeneity:g} {metrics} "
            f"rounds={r.rounds} uplink={r.uplink_bytes}B"
        )
    for f in response.failures:
        print(f"FAILED {f.method} seed={f.seed} h={f.heterogeneity:g}: {f.error}", file=sys.stderr)
    print(f"results written to {response.output_dir}")
    _print_summary(response.summary)
    return 1 if response.failures else 0


def _print_summary(rows: list[schemas.SummaryRowModel]) -> None:
    if not rows:
        return
    print("\nsummary (mean +/- std over seeds):")
    for row in rows:
        print(
            f"  {row.method:18s} h={row.heterogeneity:<4g} "
            f"{row.metric:9s} {row.mean:.6g} +/- {row.std:.3g}  (n={row.n_seeds})"
        )


def _cmd_inspect_partition(args: argparse.Namespace) -> int:
    backend = make_backend(args.server)
    req = schemas.PartitionInspectRequest(config_text=_read_config(args.config), seed=args.seed)
    response = backend.inspect_partition(req)
    print(f"task={response.task} n_items={response.n_items}")
    for level in response.levels:
        print(f"heterogeneity={level.heterogeneity:g}")
        for client in level.clients:
            if client.class_counts is not None:
                counts = " ".join(str(c) for c in client.class_counts)
                print(f"  client {client.client_id}: size={client.size} classes=[{counts}]")
            else:
                print(f"  client {client.client_id}: size={client.size}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    backend = make_backend(args.server)
    req = schemas.EvalRequest(ensemble_dir=args.ensemble, config_text=_read_config(args.data))
    response = backend.evaluate(req)
    metrics = " ".join(f"{k}={v:.6g}" for k, v in sorted(response.metrics.items()))
    print(f"{response.method}: {metrics}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    backend = make_backend(args.server)
    response = backend.compare(schemas.CompareRequest(results_dir=args.results_dir))
    out_dir = Path(args.results_dir)
    summary_path = out_dir / "summary.csv"
    curves_path = out_dir / "curves.csv"
    summary_path.write_text(response.summary_csv)
    curves_path.write_text(response.curves_csv)
    _print_summary(response.summary)
    print(f"\nwrote {summary_path} and {curves_path} (curve metric: {response.metric})")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedpred",
        description="One-round Bayesian federated learning simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config", help="path to a key=value experiment config")
    p.add_argument("--output-dir", default=None, help="override the config's output_dir")
    p.add_argument("--server", default=None, help="URL of a fedpred server (default: in-process)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("inspect-partition", help="print per-client class histograms per h")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="defaults to the config's first seed")
    p.add_argument("--server", default=None)
    p.set_defaults(func=_cmd_inspect_partition)

    p = sub.add_parser("eval", help="score a saved ensemble on a dataset config")
    p.add_argument("ensemble", help="ensemble directory (manifest.json + .fpsb files)")
    p.add_argument("data", help="config file describing the dataset")
    p.add_argument("--server", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="summarize a results directory as CSV tables")
    p.add_argument("results_dir")
    p.add_argument("--server", default=None)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FedpredError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
