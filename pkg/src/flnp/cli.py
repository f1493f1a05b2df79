"""Command-line entry points.

Subcommands:
    gen-data   write a synthetic labeled corpus to a file
    run        execute one configured experiment (channel, or TCP with
               locally spawned client processes)
    serve      run the server role of a networked deployment
    client     run one client role against a remote server
    compare    run the 3 models x 3 modes classification grid

Exit codes: 0 ok, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .data import CorpusParams, gen_synthetic_corpus, save_corpus
from .models.config import ConfigError
from .protocol.fedavg import ProtocolError
from .tensor import UsageError
from .experiment.config import (
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .experiment.metrics import MetricsRecord, emit_metrics
from .experiment.runner import (
    build_dataset,
    params_checksum,
    run_experiment,
    save_params,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flnp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic labeled corpus")
    gen.add_argument("--out", required=True, help="output corpus path")
    gen.add_argument("--n", type=int, default=10000, help="number of records")
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--min-len", type=int, default=16)
    gen.add_argument("--max-len", type=int, default=64)
    gen.add_argument("--prevalence", type=float, default=0.21)
    gen.add_argument("--label-noise", type=float, default=0.05)

    def add_run_args(p, addr=True):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a config field by dotted path (repeatable)")
        p.add_argument("--out", default=None, help="metrics/artifact directory")
        if addr:
            p.add_argument("--addr", default=None, help="host:port for tcp transport")

    run = sub.add_parser("run", help="execute one experiment")
    add_run_args(run)
    run.add_argument("--transport", choices=["channel", "tcp"], default=None)
    run.add_argument("--force", action="store_true", help="rerun even if outputs exist")

    serve = sub.add_parser("serve", help="server role for multi-machine runs")
    add_run_args(serve)

    client = sub.add_parser("client", help="client role for multi-machine runs")
    add_run_args(client)
    client.add_argument("--name", required=True, help="client name for provisioning")

    compare = sub.add_parser("compare", help="3 models x 3 modes accuracy grid")
    add_run_args(compare, addr=False)
    compare.add_argument("--force", action="store_true")
    compare.add_argument("--with-pretrain", action="store_true",
                         help="pretrain transformer encoders before fine-tuning")
    return parser


def _load_cfg(args) -> ExperimentConfig:
    try:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{args.config}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    overrides = list(args.set)
    if getattr(args, "transport", None):
        overrides.append(f"transport={args.transport}")
    if getattr(args, "addr", None):
        overrides.append(f"addr={args.addr}")
    if args.out:
        overrides.append(f"out_dir={args.out}")
    apply_overrides(data, overrides)
    return config_from_dict(data)


def cmd_gen_data(args) -> int:
    params = CorpusParams(
        min_len=args.min_len, max_len=args.max_len,
        prevalence=args.prevalence, label_noise=args.label_noise,
    )
    records = gen_synthetic_corpus(args.seed, args.n, params)
    save_corpus(records, args.out)
    positives = sum(label for label, _ in records)
    print(f"wrote {len(records)} records to {args.out} ({positives} positive)")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    os.makedirs(cfg.out_dir, exist_ok=True)

    existing = [
        path for path in _expected_outputs(cfg)
        if os.path.exists(path)
    ]
    if existing and not args.force:
        print(f"outputs already present ({existing[0]}); use --force to rerun")
        return EXIT_OK

    client_config_path = None
    if cfg.transport == "tcp" and cfg.mode == "federated":
        client_config_path = os.path.join(cfg.out_dir, f"{cfg.derived_run_id()}-config.json")
        with open(client_config_path, "w", encoding="utf-8") as fh:
            json.dump(config_to_dict(cfg), fh, indent=2)

    results = run_experiment(
        cfg,
        tcp_clients="subprocess" if cfg.transport == "tcp" else "thread",
        client_config_path=client_config_path,
    )
    for result in results:
        csv_path = os.path.join(cfg.out_dir, f"{result.run_id}.csv")
        emit_metrics(result.records, csv_path)
        params_path = os.path.join(cfg.out_dir, f"{result.run_id}-params.flnp")
        save_params(result.final_params, params_path)
        print(f"{result.run_id}: metrics -> {csv_path}")
        print(f"{result.run_id}: final-params sha256 {params_checksum(result.final_params)}")
    return EXIT_OK


def _expected_outputs(cfg: ExperimentConfig) -> list[str]:
    if cfg.phase == "pretrain_then_finetune":
        pre = cfg.derived_run_id().replace("pretrain_then_finetune", "pretrain_mlm")
        fine = cfg.derived_run_id().replace("pretrain_then_finetune", "finetune_classify")
        return [os.path.join(cfg.out_dir, f"{pre}.csv"), os.path.join(cfg.out_dir, f"{fine}.csv")]
    return [os.path.join(cfg.out_dir, f"{cfg.derived_run_id()}.csv")]


def cmd_serve(args) -> int:
    cfg = _load_cfg(args)
    if cfg.mode != "federated":
        raise ConfigError("serve requires mode=federated")
    cfg_tcp = config_from_dict({**config_to_dict(cfg), "transport": "tcp"})
    os.makedirs(cfg_tcp.out_dir, exist_ok=True)
    results = run_experiment(cfg_tcp, tcp_clients="external")
    for result in results:
        csv_path = os.path.join(cfg_tcp.out_dir, f"{result.run_id}.csv")
        emit_metrics(result.records, csv_path)
        print(f"{result.run_id}: final-params sha256 {params_checksum(result.final_params)}")
    return EXIT_OK


def cmd_client(args) -> int:
    from .protocol.client import ClientTrainConfig, FlClient
    from .experiment.runner import _phase_label, _settings  # shared derivations
    from .experiment.federated import tcp_client_loop
    from .transport.tcp import connect

    cfg = _load_cfg(args)
    bundle = build_dataset(cfg)
    phase_label = _phase_label(cfg.phase if cfg.phase != "pretrain_then_finetune" else "pretrain_mlm")
    model_cfg = cfg.model_config(bundle.vocab.size)
    client = FlClient(
        name=args.name,
        auth_token=cfg.auth_token,
        config=ClientTrainConfig(
            model_config=model_cfg,
            mode="mlm" if phase_label == "mlm" else "classify",
            vocab=bundle.vocab,
            settings=_settings(cfg, phase_label),
            batch_seed=cfg.seeds.batch,
            shard_provider=lambda cid: bundle.shards[cid],
        ),
    )
    host, _, port = args.addr.rpartition(":") if args.addr else cfg.addr.rpartition(":")
    conn = connect(host, int(port))
    tcp_client_loop(client, conn)
    print(f"{args.name}: completed {len(client.round_history)} rounds")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_cfg(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    models = ["bert", "bert_mini", "lstm"]
    modes = ["centralized", "standalone", "federated"]
    table: dict[tuple[str, str], float] = {}

    for model in models:
        pretrain_artifact = os.path.join(cfg.out_dir, f"compare-pretrain-{model}-params.flnp")
        if args.with_pretrain and model != "lstm" and (args.force or not os.path.exists(pretrain_artifact)):
            pre_cfg = _cell_config(cfg, "federated", model, "pretrain_mlm")
            result = run_experiment(pre_cfg)[-1]
            save_params(result.final_params, pretrain_artifact)
        for mode in modes:
            run_id = f"compare-{model}-{mode}"
            csv_path = os.path.join(cfg.out_dir, f"{run_id}.csv")
            if os.path.exists(csv_path) and not args.force:
                table[(mode, model)] = _final_accuracy_from_csv(csv_path)
                continue
            cell_cfg = _cell_config(cfg, mode, model, "finetune_classify")
            if model != "lstm" and os.path.exists(pretrain_artifact):
                cell_cfg = config_from_dict(
                    {**config_to_dict(cell_cfg), "pretrained_params_path": pretrain_artifact}
                )
            result = run_experiment(cell_cfg)[-1]
            records = [
                MetricsRecord(run_id, r.mode, r.model, r.round, r.scope, r.split,
                              r.loss, r.top1_accuracy, r.wall_time_ms)
                for r in result.records
            ]
            emit_metrics(records, csv_path)
            table[(mode, model)] = _final_accuracy(result.records)

    print(f"{'top-1 accuracy':<14} " + " ".join(f"{m:>10}" for m in models))
    for mode in modes:
        cells = " ".join(f"{table[(mode, m)]:>10.3f}" for m in models)
        print(f"{mode:<14} {cells}")
    return EXIT_OK


def _cell_config(base: ExperimentConfig, mode: str, model: str, phase: str) -> ExperimentConfig:
    data = config_to_dict(base)
    data.update({"mode": mode, "model": model, "phase": phase, "run_id": None})
    return config_from_dict(data)


def _final_accuracy(records: list[MetricsRecord]) -> float:
    last_round = max(r.round for r in records)
    finals = [r.top1_accuracy for r in records
              if r.round == last_round and r.split == "validation" and r.scope.startswith(("global", "client"))]
    # standalone has one validation record per client; others one global
    global_finals = [r.top1_accuracy for r in records
                     if r.round == last_round and r.split == "validation" and r.scope == "global"]
    chosen = global_finals or finals
    return sum(chosen) / len(chosen)


def _final_accuracy_from_csv(path: str) -> float:
    from .experiment.metrics import parse_metrics

    return _final_accuracy(parse_metrics(path))


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "gen-data": cmd_gen_data,
        "run": cmd_run,
        "serve": cmd_serve,
        "client": cmd_client,
        "compare": cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProtocolError, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def console_main() -> None:
    sys.exit(cli_main())
