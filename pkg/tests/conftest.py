import pytest

from lyricscribe.asr import MockAsrBackend
from lyricscribe.ensemble import MockChatBackend
from lyricscribe.gate import MockTaggerBackend
from lyricscribe.pipeline import Backends
from lyricscribe.synthetic import benchmark_corpus, dataset_corpus


def mock_backends(corpus) -> Backends:
    return Backends(
        asr=MockAsrBackend(corpus.asr_script),
        chat=MockChatBackend(corpus.chat_script),
        tagger=MockTaggerBackend(corpus.tagger_script),
    )


@pytest.fixture(scope="session")
def corpus50():
    return dataset_corpus(50, seed=0)


@pytest.fixture(scope="session")
def bench12():
    return benchmark_corpus(12, seed=0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True)
def _loopback_only(monkeypatch):
    """The suite must run offline: any connection off the loopback interface fails."""
    import socket

    real_connect = socket.socket.connect

    def connect(self, address):
        host = address[0] if isinstance(address, tuple) else address
        if host not in ("127.0.0.1", "::1", "localhost"):
            raise OSError(f"network access blocked in tests: {address}")
        return real_connect(self, address)

    monkeypatch.setattr(socket.socket, "connect", connect)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
