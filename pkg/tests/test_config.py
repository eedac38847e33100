"""
Unit tests for configuration module

Covers the min_bucket grid builder, the worker-count environment override,
TOML reading and the import-time integrity check.
"""

import logging

import pytest

import config


# ============================================================================
# GRID SEQUENCES
# ============================================================================

@pytest.mark.unit
class TestMinBucketSequence:

    def test_tree_grid_spans_2_to_1024(self):
        grid = config.min_bucket_sequence(*config.TREE_MIN_BUCKET_EXPONENTS)
        assert grid[0] == 2
        assert grid[-1] == 1024

    def test_values_strictly_increase_after_dedup(self):
        grid = config.min_bucket_sequence(*config.TREE_MIN_BUCKET_EXPONENTS)
        assert all(a < b for a, b in zip(grid, grid[1:]))
        # small exponents round onto the same integers
        assert len(grid) < 91

    def test_forest_grid_stays_below_2_to_14(self):
        grid = config.min_bucket_sequence(*config.FOREST_MIN_BUCKET_EXPONENTS)
        assert grid[0] == 2
        assert 8192 < grid[-1] <= 16384

    def test_single_exponent(self):
        assert config.min_bucket_sequence(3.0, 3.0, 0.5) == (8,)


# ============================================================================
# RUNTIME
# ============================================================================

@pytest.mark.unit
class TestWorkerCount:

    def test_env_var_caps_workers(self, monkeypatch):
        monkeypatch.setenv(config.THREADS_ENV_VAR, "1")
        assert config.worker_count() == 1

    def test_cap_never_below_one(self, monkeypatch):
        monkeypatch.setenv(config.THREADS_ENV_VAR, "0")
        assert config.worker_count() == 1

    def test_unset_uses_cpu_count(self, monkeypatch):
        monkeypatch.delenv(config.THREADS_ENV_VAR, raising=False)
        monkeypatch.setattr(config.os, "cpu_count", lambda: 3)
        assert config.worker_count() == 3

    def test_non_integer_is_ignored_with_warning(self, monkeypatch, caplog):
        monkeypatch.setenv(config.THREADS_ENV_VAR, "many")
        monkeypatch.setattr(config.os, "cpu_count", lambda: 4)
        with caplog.at_level(logging.WARNING, logger="config"):
            assert config.worker_count() == 4
        assert "many" in caplog.text


@pytest.mark.unit
class TestReadToml:

    def test_reads_tables(self, tmp_path):
        path = tmp_path / "grid.toml"
        path.write_text("[tree]\nmin_bucket = [5, 10]\n", encoding="utf-8")
        assert config.read_toml(path) == {"tree": {"min_bucket": [5, 10]}}

    def test_invalid_toml_raises_value_error(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[tree\nmin_bucket = ", encoding="utf-8")
        with pytest.raises(ValueError, match="Invalid TOML"):
            config.read_toml(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            config.read_toml(tmp_path / "absent.toml")


# ============================================================================
# CONFIGURATION INTEGRITY
# ============================================================================

@pytest.mark.unit
class TestValidateConfiguration:

    def test_shipped_defaults_pass(self):
        config.validate_configuration()

    def test_bad_clip_is_reported(self, monkeypatch):
        monkeypatch.setattr(config, "BETA_CLIP", 0.7)
        with pytest.raises(ValueError, match="BETA_CLIP"):
            config.validate_configuration()

    def test_ratios_must_sum_to_one(self, monkeypatch):
        monkeypatch.setattr(config, "REAL_DATA_RATIOS", (0.5, 0.3, 0.3))
        with pytest.raises(ValueError, match="REAL_DATA_RATIOS"):
            config.validate_configuration()

    def test_level_counts_must_be_integers(self, monkeypatch):
        monkeypatch.setattr(config, "DGP3_CATEGORICAL_LEVELS", (2, 2, 3, 5, 1.5))
        with pytest.raises(TypeError):
            config.validate_configuration()

    def test_summary_mentions_defaults(self):
        summary = config.print_config_summary()
        assert "Histogram bins" in summary
        assert str(config.DEFAULT_N_TREES) in summary
