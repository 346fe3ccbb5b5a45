"""Retry utilities with geometric parameter growth."""
import logging
from typing import Callable, Tuple, Type, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


def retry(
    func: Callable[[float], T],
    exceptions: Tuple[Type[BaseException], ...] = (Exception,),
    max_attempts: int = 3,
    initial: float = 1.0,
    growth_factor: float = 2.0,
) -> T:
    """Call func(value) with a geometrically growing value until it succeeds.

    Used for search windows: each failure multiplies the window by
    `growth_factor`. The last exception is re-raised after `max_attempts`.
    """
    attempt = 1
    value = initial
    while True:
        try:
            return func(value)
        except exceptions as exc:
            if attempt >= max_attempts:
                logger.error("Retry failed after %s attempts (last value %.6g): %s", attempt, value, exc)
                raise
            logger.debug("Retry %s/%s at %.6g after: %s", attempt, max_attempts, value, exc)
            attempt += 1
            value *= growth_factor
