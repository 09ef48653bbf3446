import pytest

from fedpred.config import load_config, parse_config_text
from fedpred.errors import ConfigError
from fedpred.nn import Task
from fedpred.posterior import PriorMode

MINIMAL = """
task = classification
dataset = blobs
"""


class TestParsing:
    def test_minimal_config_gets_defaults(self):
        cfg = parse_config_text(MINIMAL)
        assert cfg.task is Task.CLASSIFICATION
        assert cfg.n_clients == 5
        assert cfg.seeds == (0, 1, 2)
        assert cfg.heterogeneity == (0.0, 0.7, 0.9)
        assert cfg["arch.hidden"] == (100, 100)

    def test_unknown_key_reports_line(self):
        text = MINIMAL + "nonsense.key = 3\n"
        with pytest.raises(ConfigError, match=r"line 4: unknown key 'nonsense.key'"):
            parse_config_text(text)

    def test_malformed_line_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("task = regression\njust words\n")

    def test_bad_value_reports_key_and_line(self):
        with pytest.raises(ConfigError, match=r"bad value for 'n_clients'"):
            parse_config_text(MINIMAL + "n_clients = five\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text(MINIMAL + "n_clients = 3\nn_clients = 4\n")

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="missing required"):
            parse_config_text("n_clients = 3\n")

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config_text("# a comment\n\ntask = regression\ndataset = sine\n")
        assert cfg.task is Task.REGRESSION

    def test_lists_parse(self):
        cfg = parse_config_text(MINIMAL + "heterogeneity = 0.0, 0.5 ,1.0\nseeds = 7,8\n")
        assert cfg.heterogeneity == (0.0, 0.5, 1.0)
        assert cfg.seeds == (7, 8)

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.cfg")

    def test_load_config_roundtrip(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(MINIMAL + "seeds = 5\n")
        cfg = load_config(path)
        assert cfg.seeds == (5,)


class TestValidation:
    def test_unknown_method(self):
        with pytest.raises(ConfigError, match="unknown method"):
            parse_config_text(MINIMAL + "methods = gradient_gossip\n")

    def test_heterogeneity_range(self):
        with pytest.raises(ConfigError, match="heterogeneity"):
            parse_config_text(MINIMAL + "heterogeneity = 1.5\n")

    def test_task_dataset_mismatch(self):
        with pytest.raises(ConfigError, match="regression generator"):
            parse_config_text("task = classification\ndataset = sine\n")

    def test_csv_requires_schema_keys(self):
        with pytest.raises(ConfigError, match="required for dataset = csv"):
            parse_config_text("task = regression\ndataset = csv\n")

    def test_epoch_budget_covers_rounds(self):
        text = MINIMAL + "methods = fedavg\nsgd.epochs = 3\nfedavg.rounds = 5\n"
        with pytest.raises(ConfigError, match="epoch budget"):
            parse_config_text(text)

    def test_epoch_budget_ignored_without_multiround_fedavg(self):
        text = MINIMAL + "methods = fedavg_1round\nsgd.epochs = 3\nfedavg.rounds = 5\n"
        parse_config_text(text)

    def test_section_errors_attributed(self):
        with pytest.raises(ConfigError, match="csghmc"):
            parse_config_text(MINIMAL + "csghmc.friction = 7\n")

    def test_bad_test_fraction(self):
        with pytest.raises(ConfigError, match="test_fraction"):
            parse_config_text(MINIMAL + "test_fraction = 1.2\n")


class TestBuilders:
    def test_blobs_builder_seeded(self):
        cfg = parse_config_text(MINIMAL + "data.n = 50\ndata.classes = 3\ndata.features = 4\n")
        a, test_a = cfg.build_dataset(seed=3)
        b, _ = cfg.build_dataset(seed=3)
        assert test_a is None
        assert (a.features == b.features).all()
        assert a.n == 50

    def test_architecture_dims(self):
        cfg = parse_config_text(MINIMAL + "arch.hidden = 16,8\n")
        arch = cfg.architecture(input_dim=12, output_dim=10)
        assert arch.layer_sizes == (12, 16, 8, 10)

    def test_prior_auto_resolution(self):
        classification = parse_config_text(MINIMAL)
        assert classification.prior_config(10).mode is PriorMode.UNIFORM_CLASSES
        regression = parse_config_text("task = regression\ndataset = sine\n")
        prior = regression.prior_config(1)
        assert prior.mode is PriorMode.FIXED_GAUSSIAN
        assert prior.variance[0] == 100.0

    def test_echo_is_json_friendly(self):
        import json

        cfg = parse_config_text(MINIMAL)
        json.dumps(cfg.echo())
