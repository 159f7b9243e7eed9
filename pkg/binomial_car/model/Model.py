import logging
import os

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def log_level() -> int:
    name = os.environ.get("BINOMIAL_CAR_LOG_LEVEL", "INFO").upper()
    return getattr(logging, name, logging.INFO)


def get_logger(name: str) -> logging.Logger:
    logger = logging.getLogger(name)
    logger.setLevel(log_level())

    # Create handler if not already set up
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    return logger


class Model:
    """Base for the fitted model specifications.

    Subclasses describe a target posterior to the sampler: the parameter
    layout of a retained draw, an initial state, the update blocks and the
    support predicate (see `binomial_car.model.Sampler.ChainModel`).
    """

    kind: str = "model"

    def __init__(self):
        self.init_logger()

    def init_logger(self):
        self.logger = get_logger(f"{type(self).__module__}.{type(self).__name__}")


def set_level(level: int) -> None:
    """Apply `level` to every package logger created so far."""
    root = __name__.split(".")[0]
    for name, logger in logging.root.manager.loggerDict.items():
        if name.startswith(root) and isinstance(logger, logging.Logger):
            logger.setLevel(level)
