import json
import math

import numpy as np
import pytest

from flnp.experiment.config import apply_overrides, config_from_dict, config_to_dict
from flnp.experiment.federated import drive_channel
from flnp.experiment.metrics import MetricsRecord, emit_metrics, parse_metrics, strip_wall_time
from flnp.experiment.runner import build_dataset, merge_encoder, params_checksum, run_experiment
from flnp.models.config import ConfigError
from flnp.protocol.fedavg import ProtocolError
from flnp.rng import Rng


def small_cfg(**kw):
    base = {
        "mode": "federated",
        "phase": "pretrain_mlm",
        "model": "bert_mini",
        "rounds": 2,
        "local_epochs": 1,
        "batch_size": 16,
        "max_seq_len": 20,
        "partition": {"n_clients": 2, "mode": "balanced"},
        "data": {"n_records": 80, "min_len": 8, "max_len": 14},
    }
    base.update(kw)
    return config_from_dict(base)


class TestConfig:
    def test_defaults_follow_study_setup(self):
        cfg = config_from_dict({})
        assert cfg.partition.n_clients == 8
        assert cfg.lr == pytest.approx(1e-2)
        assert cfg.rounds == 10

    def test_lstm_mlm_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"model": "lstm", "phase": "pretrain_mlm"})

    def test_single_client_federated_needs_override(self):
        with pytest.raises(ConfigError):
            config_from_dict({"mode": "federated", "partition": {"n_clients": 1}})
        cfg = config_from_dict({"mode": "federated", "partition": {"n_clients": 1},
                                "allow_single_client": True})
        assert cfg.effective_clients() == 1

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"no_such_field": 1})

    def test_set_overrides(self):
        data = {"seeds": {"init": 3}}
        apply_overrides(data, ["seeds.init=7", "lr=0.003", "model=lstm",
                               "partition.n_clients=4"])
        cfg = config_from_dict({**data, "phase": "finetune_classify"})
        assert cfg.seeds.init == 7
        assert cfg.lr == 0.003
        assert cfg.model == "lstm"
        assert cfg.partition.n_clients == 4

    def test_round_trip_via_dict(self):
        cfg = small_cfg()
        assert config_from_dict(config_to_dict(cfg)) == cfg


class TestDataset:
    def test_seed_isolation_batch_seed_leaves_data_alone(self):
        a = build_dataset(small_cfg())
        b = build_dataset(small_cfg(seeds={"batch": 999}))
        assert a.shards == b.shards
        assert a.global_val == b.global_val
        assert a.vocab.non_reserved_tokens() == b.vocab.non_reserved_tokens()

    def test_corpus_seed_changes_data(self):
        a = build_dataset(small_cfg())
        b = build_dataset(small_cfg(seeds={"corpus": 42}))
        assert a.shards != b.shards

    def test_partition_seed_changes_assignment_not_corpus(self):
        a = build_dataset(small_cfg())
        b = build_dataset(small_cfg(seeds={"partition": 42}))
        assert sorted(map(repr, a.pooled + a.global_val)) == sorted(map(repr, b.pooled + b.global_val))
        assert a.shards != b.shards


class TestMetricsCsv:
    def _records(self):
        return [
            MetricsRecord("r", "federated", "bert_mini", 1, "global", "validation", 0.5, 0.75, 12.0),
            MetricsRecord("r", "federated", "bert_mini", 0, "global", "validation", 0.7, 0.5, 3.0),
            MetricsRecord("r", "federated", "bert_mini", 1, "client_0", "train", 0.4, 0.8, 12.0),
        ]

    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "m.csv")
        records = [
            MetricsRecord("r", "centralized", "lstm", i, "global", "validation",
                          float(f"{np.pi * (i + 1):.6g}"), float(f"{0.1 * i:.6g}"), 0.0)
            for i in range(5)
        ]
        emit_metrics(records, path)
        assert parse_metrics(path) == records

    def test_rows_sorted_by_round_scope_split(self, tmp_path):
        path = str(tmp_path / "m.csv")
        emit_metrics(self._records(), path)
        rounds = [r.round for r in parse_metrics(path)]
        assert rounds == sorted(rounds)

    def test_empty_stream_writes_header_only(self, tmp_path):
        path = str(tmp_path / "m.csv")
        emit_metrics([], path)
        content = (tmp_path / "m.csv").read_text().strip().splitlines()
        assert len(content) == 1
        assert content[0].startswith("run_id,mode,model,round,scope,split,loss")

    def test_wall_time_excluded_from_determinism_diff(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        recs = self._records()
        emit_metrics(recs, a)
        jittered = [MetricsRecord(r.run_id, r.mode, r.model, r.round, r.scope, r.split,
                                  r.loss, r.top1_accuracy, r.wall_time_ms + 5.0) for r in recs]
        emit_metrics(jittered, b)
        assert strip_wall_time(a) == strip_wall_time(b)
        assert (tmp_path / "a.csv").read_text() != (tmp_path / "b.csv").read_text()


class TestRuns:
    def test_initial_mlm_loss_is_log_vocab(self):
        cfg = small_cfg(mode="centralized", rounds=0, data={"n_records": 120, "min_len": 8, "max_len": 14})
        bundle = build_dataset(cfg)
        result = run_experiment(cfg, bundle)[0]
        initial = [r for r in result.records if r.round == 0][0]
        expected = math.log(bundle.vocab.size)
        assert 0.95 * expected <= initial.loss <= 1.05 * expected

    def test_same_config_identical_metrics_and_params(self):
        cfg = small_cfg(mode="centralized")
        a = run_experiment(cfg)[0]
        b = run_experiment(cfg)[0]
        strip = lambda rs: [(r.round, r.scope, r.split, r.loss, r.top1_accuracy) for r in rs]
        assert strip(a.records) == strip(b.records)
        assert a.final_params == b.final_params
        assert params_checksum(a.final_params) == params_checksum(b.final_params)

    def test_losses_always_finite(self):
        result = run_experiment(small_cfg())[0]
        assert all(np.isfinite(r.loss) for r in result.records)

    def test_round_count_contract(self):
        cfg = small_cfg(rounds=3, partition={"n_clients": 2, "mode": "balanced"})
        bundle = build_dataset(cfg)
        from flnp.experiment.runner import run_federated

        result = run_federated(cfg, bundle, "mlm")
        # exactly E aggregated rounds; every client contributed each round
        global_val = [r for r in result.records if r.scope == "global" and r.round > 0]
        assert len(global_val) == 3
        client_rows = [r for r in result.records if r.scope.startswith("client_") and r.split == "train"]
        assert len(client_rows) == 3 * 2

    def test_standalone_single_client_full_data_equals_centralized(self):
        base = dict(rounds=2, partition={"n_clients": 1, "mode": "balanced"},
                    allow_single_client=True)
        alone = run_experiment(small_cfg(mode="standalone", **base))[0]
        central = run_experiment(small_cfg(mode="centralized", **base))[0]
        assert alone.finals["client_0"] == central.finals["global"]

    def test_one_client_federated_collapses_to_centralized(self):
        base = dict(rounds=3, partition={"n_clients": 1, "mode": "balanced"},
                    allow_single_client=True)
        fed = run_experiment(small_cfg(mode="federated", **base))[0]
        central = run_experiment(small_cfg(mode="centralized", **base))[0]
        assert fed.final_params.quantize32() == central.final_params.quantize32()

    def test_standalone_shard_sizes_follow_imbalanced_spec(self):
        cfg = small_cfg(
            mode="standalone",
            rounds=1,
            partition={"n_clients": 8, "mode": "imbalanced"},
            data={"n_records": 1120, "min_len": 8, "max_len": 12},
        )
        bundle = build_dataset(cfg)  # 1008 after the validation split
        from flnp.data import largest_remainder_sizes, IMBALANCED_RATIOS

        assert [len(s) for s in bundle.shards] == largest_remainder_sizes(1008, IMBALANCED_RATIOS)

    def test_drop_injection_aborts_deterministically(self):
        cfg = small_cfg(rounds=3)
        bundle = build_dataset(cfg)
        from flnp.experiment.runner import run_federated

        def failing_round(seed):
            try:
                run_federated(cfg, bundle, "mlm", drop_rng=Rng(seed), drop_prob=0.15)
                return None
            except ProtocolError as err:
                return str(err)

        first = failing_round(3)
        assert first is not None and "round" in first
        assert failing_round(3) == first


class TestPretrainFinetune:
    def test_encoder_names_carry_over_and_heads_are_disjoint(self):
        cfg = small_cfg(mode="centralized", phase="pretrain_then_finetune",
                        rounds=1, pretrain_rounds=1)
        pre, fine = run_experiment(cfg)
        pre_names = set(pre.final_params.names)
        fine_names = set(fine.final_params.names)
        encoder = {n for n in pre_names if not n.startswith(("mlm.", "cls."))}
        assert encoder <= fine_names
        assert {n for n in pre_names if n.startswith("mlm.")}.isdisjoint(fine_names)
        assert any(n.startswith("cls.") for n in fine_names)

    def test_merge_encoder_keeps_pretrained_weights(self):
        cfg = small_cfg(mode="centralized", phase="pretrain_then_finetune",
                        rounds=1, pretrain_rounds=1)
        bundle = build_dataset(cfg)
        pre, fine = run_experiment(cfg, bundle)
        merged = merge_encoder(pre.final_params, fine.final_params)
        assert np.array_equal(merged["emb.tok"], pre.final_params["emb.tok"])

    def test_missing_artifact_is_usage_error(self):
        from flnp.tensor import UsageError

        cfg = small_cfg(mode="centralized", phase="finetune_classify",
                        pretrained_params_path="/nonexistent/snXX.flnp")
        with pytest.raises(UsageError):
            run_experiment(cfg)
