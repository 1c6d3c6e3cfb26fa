"""Config file parsing, schema validation, and cross-field checks."""

import pytest

from conftest import TINY_CONFIG_TEXT
from unikd.config import (
    SCHEMA,
    config_reference,
    default_config,
    load_config,
    parse_config_text,
    parse_override,
)
from unikd.errors import ConfigError


class TestDefaults:
    def test_bundled_default_values(self):
        cfg = default_config()
        assert cfg.train.iled.weight == 70.0
        assert cfg.train.rpsd.weight == 3.0
        assert cfg.train.iterations == 1400
        assert cfg.train.mode == "unified"
        assert cfg.teacher_train.iterations == 3000
        assert cfg.teacher_train.milestones == (1500, 2400)
        assert cfg.teacher_spec.widths == (64, 256, 256, 32)
        assert cfg.student_spec.widths == (64, 32, 32)
        assert cfg.far_targets == (1e-2, 1e-3)
        assert cfg.metric == "cosine"

    def test_head_derived_from_dataset_and_train_keys(self):
        cfg = default_config()
        assert cfg.head.classes == cfg.dataset.classes == 50
        assert cfg.head.scale == 30.0
        assert cfg.head.margin == 0.4

    def test_teacher_train_is_supervised_only(self):
        cfg = default_config()
        assert cfg.teacher_train.mode == "none"
        assert cfg.teacher_train.seed == 11
        assert cfg.teacher_train.batch_size == cfg.train.batch_size


class TestParsing:
    def test_comments_blanks_and_spacing(self):
        cfg = parse_config_text(
            "# a comment\n\n  train.iterations   =  17  \n\n# another\n"
        )
        assert cfg.train.iterations == 17

    def test_typed_values(self):
        cfg = parse_config_text(
            "train.base_lr = 0.05\n"
            "train.cache_teacher = yes\n"
            "teacher.milestones = 3,5,9\n"
            "eval.far_targets = 0.5\n"
        )
        assert cfg.train.base_lr == 0.05
        assert cfg.train.cache_teacher is True
        assert cfg.teacher_train.milestones == (3, 5, 9)
        assert cfg.far_targets == (0.5,)

    def test_empty_list_value(self):
        cfg = parse_config_text("teacher.milestones =\n")
        assert cfg.teacher_train.milestones == ()

    def test_unknown_key_names_source_and_line(self):
        with pytest.raises(ConfigError, match=r"myfile:3: unknown config key 'trian\.mode'"):
            parse_config_text("\n\ntrian.mode = unified\n", source="myfile")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match=r":2: duplicate key"):
            parse_config_text("train.seed = 1\ntrain.seed = 2\n")

    def test_missing_equals_sign(self):
        with pytest.raises(ConfigError, match=r":1: expected 'section\.key = value'"):
            parse_config_text("train.iterations 40\n")

    def test_bad_value_names_key_and_line(self):
        with pytest.raises(ConfigError, match=r":1: bad value for train\.iterations"):
            parse_config_text("train.iterations = soon\n")

    def test_bad_boolean(self):
        with pytest.raises(ConfigError, match="boolean"):
            parse_config_text("train.cache_teacher = maybe\n")


class TestOverrides:
    def test_override_applied_after_file(self):
        cfg = parse_config_text(
            "train.iterations = 40\n", overrides=("train.iterations=7",)
        )
        assert cfg.train.iterations == 7

    def test_unknown_override_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_override("train.speed=11")

    def test_malformed_override(self):
        with pytest.raises(ConfigError, match="key=value"):
            parse_override("train.iterations")

    def test_override_bad_value(self):
        with pytest.raises(ConfigError, match="override train.iterations: bad value"):
            parse_config_text("", overrides=("train.iterations=ten",))


class TestCrossChecks:
    def test_dataset_error_wrapped_as_config_error(self):
        with pytest.raises(ConfigError, match="invalid configuration"):
            parse_config_text("dataset.classes = 1\n")

    def test_widths_must_match_input_dim(self):
        with pytest.raises(ConfigError, match=r"teacher\.widths starts at 32"):
            parse_config_text("teacher.widths = 32,16,8\n")

    def test_embedding_mismatch_rejected_for_embedding_modes(self):
        text = "teacher.widths = 64,32,16\nstudent.widths = 64,32,8\n"
        with pytest.raises(ConfigError, match="matching embedding widths"):
            parse_config_text(text + "train.mode = unified\n")

    def test_embedding_mismatch_allowed_for_logit_modes(self):
        text = "teacher.widths = 64,32,16\nstudent.widths = 64,32,8\n"
        for mode in ("none", "kl"):
            cfg = parse_config_text(text + f"train.mode = {mode}\n")
            assert cfg.train.mode == mode

    def test_bad_eval_metric(self):
        with pytest.raises(ConfigError, match=r"eval\.metric"):
            parse_config_text("eval.metric = hamming\n")

    def test_bad_mode_surfaces_as_config_error(self):
        with pytest.raises(ConfigError, match="invalid configuration"):
            parse_config_text("train.mode = everything\n")


class TestFilesAndReference:
    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(TINY_CONFIG_TEXT)
        cfg = load_config(path)
        assert cfg.dataset.classes == 6
        assert cfg.train.mode == "none"
        assert cfg.train.iterations == 10

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.cfg")

    def test_file_errors_name_the_path(self, tmp_path):
        path = tmp_path / "broken.cfg"
        path.write_text("nope = 1\n")
        with pytest.raises(ConfigError, match="broken.cfg:1"):
            load_config(path)

    def test_reference_lists_every_key(self):
        text = config_reference()
        for key in SCHEMA:
            assert key in text

    def test_reference_round_trips_through_parser(self):
        # the reference text is itself a valid config setting every default
        cfg = parse_config_text(config_reference())
        assert cfg == default_config()

    def test_bundled_configs_parse(self):
        from pathlib import Path

        root = Path(__file__).resolve().parents[1] / "configs"
        found = sorted(root.glob("*.cfg"))
        assert found
        for path in found:
            load_config(path)
