"""Configure application logging with loguru."""
import sys

from loguru import logger

from ddsr.core.config import Settings


def configure_logging(settings: Settings) -> None:
    """Configure loguru logger with application settings.

    Progress and diagnostics go to standard error so that standard output
    stays free for data written by the CLI.
    """
    logger.remove()

    logger.add(
        sys.stderr,
        level=settings.log_level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
    )

    if settings.log_file is not None:
        log_path = settings.log_file.expanduser().resolve()
        log_path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_path),
            rotation="10 MB",
            compression="zip",
            retention="1 week",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{line} - {message}",
            level=settings.log_level,
        )
        logger.add(
            str(log_path.with_name(log_path.stem + ".errors.log")),
            rotation="1 day",
            compression="zip",
            retention="1 month",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{line} - {message}",
            level="ERROR",
            filter=lambda record: record["level"].name == "ERROR",
        )
        logger.info(f"Log files will be stored in: {log_path.parent}")

    logger.debug(f"Logging configured with level: {settings.log_level}")
