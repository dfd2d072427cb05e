import pytest

from disappointment_lab import settings
from disappointment_lab.errors import ConfigError, LatticeTooLargeError, ScenarioParseError


def test_thread_count_defaults_to_one(monkeypatch):
    monkeypatch.delenv(settings.THREADS_ENV_VAR, raising=False)
    assert settings.thread_count() == 1


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv(settings.THREADS_ENV_VAR, "4")
    assert settings.thread_count() == 4


@pytest.mark.parametrize("raw", ["0", "-2", "many", "1.5"])
def test_thread_count_rejects(monkeypatch, raw):
    monkeypatch.setenv(settings.THREADS_ENV_VAR, raw)
    with pytest.raises(ConfigError):
        settings.thread_count()


def test_error_records():
    record = ScenarioParseError("bad", line=3, field='loss').to_record()
    assert record == {"error": "ScenarioParseError", "message": "bad", "exit_code": 2, "line": 3, "field": 'loss'}
    record = LatticeTooLargeError(500, 100).to_record()
    assert record["exit_code"] == 1
    assert record["size"] == 500
    assert "--method importance" in record["message"]
