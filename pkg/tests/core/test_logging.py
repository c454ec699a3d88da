import pytest
from loguru import logger

from ddsr.core.config import Settings
from ddsr.core.logging import configure_logging


@pytest.fixture
def restore_logger():
    yield
    logger.remove()


class TestConfigureLogging:
    def test_writes_log_and_error_files(self, tmp_path, restore_logger):
        log_file = tmp_path / "logs" / "ddsr.log"
        configure_logging(Settings(_env_file=None, log_file=log_file, log_level="DEBUG"))

        logger.info("trial finished")
        logger.error("trial failed")

        assert "trial finished" in log_file.read_text()
        errors = (tmp_path / "logs" / "ddsr.errors.log").read_text()
        assert "trial failed" in errors
        assert "trial finished" not in errors

    def test_level_filters_messages(self, tmp_path, restore_logger):
        log_file = tmp_path / "ddsr.log"
        configure_logging(Settings(_env_file=None, log_file=log_file, log_level="WARNING"))

        logger.info("hidden")
        logger.warning("shown")

        content = log_file.read_text()
        assert "shown" in content
        assert "hidden" not in content
