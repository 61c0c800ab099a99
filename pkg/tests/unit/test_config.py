"""
Tests for the environment-driven settings.
"""

import unittest.mock as mock

from structinfer.config import PACKAGED_PRESETS_DIR, Settings


def test_defaults(monkeypatch):
    monkeypatch.delenv("STRUCTINFER_PRESET_FILE", raising=False)
    settings = Settings()
    assert settings.default_seed == 7
    assert settings.fd_epsilon == 1e-5
    assert settings.gate_irrelevant_threshold == 0.2
    assert settings.reference_preset_path == PACKAGED_PRESETS_DIR / "reference.yml"
    assert settings.reference_preset_path.exists()


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("STRUCTINFER_DEFAULT_STEPS", "5")
    monkeypatch.setenv("STRUCTINFER_PRESET_FILE", str(tmp_path / "mine.yml"))
    settings = Settings()
    assert settings.default_steps == 5
    assert settings.reference_preset_path == tmp_path / "mine.yml"


def test_update_warns_on_unknown_keys():
    settings = Settings()
    with mock.patch("structinfer.config.logger") as logger:
        settings.update(threads=4, not_a_setting=1)
    assert settings.threads == 4
    logger.warning.assert_called_once_with("Unknown setting: not_a_setting")
