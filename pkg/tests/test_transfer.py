import dataclasses
import json

import numpy as np
import pytest

from nclab import transfer
from nclab.errors import DegeneracyError
from nclab.etf import verify_etf
from nclab.gmm import LabeledDataset, ShiftSpec, isotropic_spec, random_spec, sample_gmm
from nclab.linalg import SeedSpec
from nclab.mlp import HeadKind, MlpConfig, OptimizerSpec, init_state
from nclab.transfer import (ConfigError, ExperimentSpec, bundled_config, evaluate, finetune, load_experiment,
                            pretrain, run_experiment, spec_from_dict, worker_count)


def small_spec(**kw):
    base = dict(source=random_spec(3, 8, SeedSpec(5), mean_norm=4.0),
                target=ShiftSpec(0.3, 0.5, 1.0),
                pretrain_opt=OptimizerSpec(epochs=20, batch_size=32),
                finetune_opt=OptimizerSpec(epochs=5, batch_size=32),
                n_source=300, n_target_train=120, n_target_test=150,
                seeds=(SeedSpec(0),), hidden_dims=(16,), feature_dim=8)
    base.update(kw)
    return ExperimentSpec(**base)


def identity_state(k):
    state = init_state(MlpConfig(k, (), k, k, HeadKind.TRAINABLE, SeedSpec(0)))
    state.params["layer0.weight"][...] = np.eye(k)
    state.params["layer0.bias"][...] = 0.0
    state.params["head.weight"][...] = np.eye(k)
    state.params["head.bias"][...] = 0.0
    return state


class TestPretrain:
    def test_fixed_head_stays_etf(self):
        spec = small_spec(strategies=(HeadKind.FIXED_ETF,))
        state, _ = pretrain(spec, HeadKind.FIXED_ETF, SeedSpec(0))
        fresh = init_state(spec.mlp_config(HeadKind.FIXED_ETF, SeedSpec(0).child(4)))
        assert verify_etf(fresh.head_weights).is_etf
        assert verify_etf(state.head_weights).is_etf
        np.testing.assert_array_equal(state.head_weights, fresh.head_weights)

    @pytest.mark.parametrize("head", list(HeadKind))
    def test_separable_source(self, head):
        means = np.zeros((6, 3))
        means[:3] = 4 * np.eye(3)
        spec = small_spec(source=isotropic_spec(means, sigma2=0.3))
        state, _ = pretrain(spec, head, SeedSpec(1))
        assert state.log[-1].acc >= 0.95

    def test_seeds_differ(self):
        spec = small_spec()
        a, _ = pretrain(spec, HeadKind.TRAINABLE, SeedSpec(0))
        b, _ = pretrain(spec, HeadKind.TRAINABLE, SeedSpec(1))
        assert not np.array_equal(a.params["layer0.weight"], b.params["layer0.weight"])


class TestFinetune:
    def test_zero_epochs_keep(self):
        spec = small_spec()
        state, source = pretrain(spec, HeadKind.TRAINABLE, SeedSpec(0))
        tuned = finetune(state, source, "keep", OptimizerSpec(epochs=0), SeedSpec(1))
        assert evaluate(tuned, source)[0] == evaluate(state, source)[0]

    def test_same_domain_small_lr(self):
        spec = small_spec(target=ShiftSpec())
        state, source = pretrain(spec, HeadKind.TRAINABLE, SeedSpec(0))
        test = sample_gmm(spec.source, 400, SeedSpec(9))
        before = evaluate(state, test)[0]
        tuned = finetune(state, source, "keep", OptimizerSpec(lr=1e-4, epochs=3), SeedSpec(1))
        assert abs(evaluate(tuned, test)[0] - before) <= 0.05

    def test_fixed_target_head_is_frozen(self):
        spec = small_spec()
        state, source = pretrain(spec, HeadKind.TRAINABLE, SeedSpec(0))
        tuned0 = finetune(state, source, HeadKind.FIXED_ETF, OptimizerSpec(epochs=0), SeedSpec(2))
        tuned = finetune(state, source, HeadKind.FIXED_ETF, OptimizerSpec(epochs=3), SeedSpec(2))
        np.testing.assert_array_equal(tuned.head_weights, tuned0.head_weights)
        assert verify_etf(tuned.head_weights).is_etf
        assert "head.weight" not in tuned.params

    def test_pretrained_state_untouched(self):
        spec = small_spec()
        state, source = pretrain(spec, HeadKind.WHITENED, SeedSpec(0))
        snapshot = {k: v.copy() for k, v in state.params.items()}
        finetune(state, source, HeadKind.TRAINABLE, OptimizerSpec(epochs=2), SeedSpec(3))
        for k, v in snapshot.items():
            np.testing.assert_array_equal(state.params[k], v)


class TestEvaluate:
    def test_perfect_logits(self):
        labels = np.arange(40) % 4
        ds = LabeledDataset(5.0 * np.eye(4)[:, labels], labels, 4)
        acc, report = evaluate(identity_state(4), ds)
        assert acc == 1.0
        # every sample sits on its class mean
        assert report.trace_ratio == 0.0

    def test_random_logits(self):
        k, n = 4, 4000
        rng = np.random.default_rng(0)
        state = identity_state(k)
        state.params["head.weight"][...] = rng.standard_normal((k, k))
        ds = LabeledDataset(np.abs(rng.standard_normal((k, n))), rng.integers(0, k, n), k)
        acc, _ = evaluate(state, ds)
        sigma = np.sqrt((1 / k) * (1 - 1 / k) / n)
        assert abs(acc - 1 / k) < 3 * sigma

    def test_report_none_when_class_too_small(self):
        ds = LabeledDataset(np.eye(3)[:, [0, 1, 2, 2]], [0, 1, 2, 2], 3)
        acc, report = evaluate(identity_state(3), ds)
        assert acc == 1.0 and report is None

    def test_whitened_has_no_alignment(self):
        spec = small_spec()
        state, source = pretrain(spec, HeadKind.WHITENED, SeedSpec(0))
        _, report = evaluate(state, source)
        assert report.nc3_alignment is None


class TestExperiment:
    def test_single_cell(self, tmp_path):
        res = run_experiment(small_spec(strategies=(HeadKind.FIXED_ETF,)), tmp_path)
        lines = (tmp_path / "results.csv").read_text().splitlines()
        assert lines[0] == ",".join(transfer.RESULT_COLUMNS)
        assert len(lines) == 2 and lines[1].startswith("fixed_etf,0:0,in_domain,")
        assert (tmp_path / "cov_fixed_etf.csv").exists()
        assert len(res.summary()) == 1

    def test_reproducible(self, tmp_path):
        spec = small_spec(seeds=(SeedSpec(0), SeedSpec(1)))
        run_experiment(spec, tmp_path / "a")
        run_experiment(spec, tmp_path / "b")
        for name in ("results.csv", "cov_trainable.csv", "cov_whitened.csv", "cov_fixed_etf.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_threads_match_sequential(self, monkeypatch):
        monkeypatch.setenv("NC_LAB_THREADS", "3")
        assert worker_count() == 3
        spec = small_spec(seeds=(SeedSpec(0), SeedSpec(1)))
        threaded = run_experiment(spec)
        sequential = run_experiment(spec, workers=1)
        assert [c.row() for c in threaded.cells] == [c.row() for c in sequential.cells]

    def test_failure_is_per_cell(self, monkeypatch):
        real = transfer.pretrain

        def flaky(spec, strategy, seed):
            if seed.base_seed == 1:
                raise DegeneracyError("injected")
            return real(spec, strategy, seed)

        monkeypatch.setattr(transfer, "pretrain", flaky)
        res = run_experiment(small_spec(seeds=(SeedSpec(0), SeedSpec(1))), workers=1)
        assert len(res.cells) == 6
        assert len(res.failures()) == 3
        assert all("injected" in c.error for c in res.failures())
        assert all(len(res.for_strategy(s)) == 1 for s in HeadKind)

    def test_divergence_is_captured(self):
        spec = small_spec(strategies=(HeadKind.TRAINABLE,), pretrain_opt=OptimizerSpec(lr=1e6, momentum=0.0))
        with np.errstate(all="ignore"):
            res = run_experiment(spec)
        assert res.failures()[0].error.startswith("TrainingDivergedError")

    def test_explicit_target(self):
        src = random_spec(3, 8, SeedSpec(5), mean_norm=4.0)
        spec = small_spec(target=src, strategies=(HeadKind.TRAINABLE,))
        assert spec.domain_label == "explicit"
        assert run_experiment(spec).cells[0].error is None


class TestConfig:
    @pytest.mark.parametrize("name", ["out_of_domain", "in_domain", "minimal"])
    def test_bundled(self, name):
        spec = load_experiment(bundled_config(name))
        assert spec.source.k >= 2

    def test_defaults_labels(self):
        assert load_experiment(bundled_config("out_of_domain")).domain_label == "out_of_domain"
        assert load_experiment(bundled_config("in_domain")).domain_label == "in_domain"

    @pytest.mark.parametrize("patch,field", [
        ({"strategies": ["softmax"]}, "strategies"),
        ({"n_source": "many"}, "n_source"),
        ({"n_target_test": 0}, "n_target_test"),
        ({"target": {"shift": {"rotation_strength": 2.0}}}, "target"),
        ({"pretrain_opt": {"lr": -1}}, "pretrain_opt"),
        ({"seeds": []}, "seeds"),
        ({"bogus": 1}, "bogus"),
        ({"target_head": "whitened"}, "target_head"),
    ])
    def test_errors_name_field(self, patch, field):
        cfg = json.loads(bundled_config("minimal").read_text())
        cfg.update(patch)
        with pytest.raises(ConfigError) as info:
            spec_from_dict(cfg)
        assert info.value.field == field

    def test_missing_source(self):
        with pytest.raises(ConfigError) as info:
            spec_from_dict({"strategies": ["trainable"]})
        assert info.value.field == "source"

    def test_bad_json(self, tmp_path):
        (tmp_path / "x.json").write_text("{nope")
        with pytest.raises(ConfigError):
            load_experiment(tmp_path / "x.json")

    def test_explicit_mixture(self):
        src = random_spec(2, 3, SeedSpec(1))
        spec = spec_from_dict({"source": src.to_dict(), "target": src.to_dict(), "seeds": [[4, 2]]})
        assert spec.seeds == (SeedSpec(4, 2),)
        assert dataclasses.replace(spec).domain_label == "explicit"
