import logging

import pytest

from utils.logger_config import get_logger, set_console_level


@pytest.fixture
def restore_console():
    yield
    set_console_level(logging.WARNING)


def _console(logger):
    return [h for h in logger.handlers if type(h) is logging.StreamHandler]


def test_get_logger_is_idempotent(caplog):
    logger = get_logger("rigidity.test")
    handlers = list(logger.handlers)
    assert get_logger("rigidity.test") is logger
    assert logger.handlers == handlers and len(handlers) == 2

    with caplog.at_level(logging.INFO, logger="rigidity.test"):
        logger.info("hello from the engine")
    assert "hello from the engine" in caplog.text


def test_set_console_level(restore_console):
    existing = get_logger("rigidity.test.existing")
    assert set_console_level("debug") == logging.DEBUG
    assert _console(existing)[0].level == logging.DEBUG
    assert _console(get_logger("rigidity.test.later"))[0].level == logging.DEBUG

    with pytest.raises(ValueError):
        set_console_level("chatty")
