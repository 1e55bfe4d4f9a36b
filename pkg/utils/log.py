"""
Logging setup shared by every module.

Messages go to stderr with bracketed level tags, e.g. ``[INFO] learning.loop: ...``.
"""
import logging
import sys

from config import Config

_configured = False


def _configure_root() -> None:
    global _configured
    if _configured:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('[%(levelname)s] %(name)s: %(message)s'))
    root = logging.getLogger('sitlmpc')
    root.addHandler(handler)
    root.setLevel(Config.LOG_LEVEL.upper())
    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger under the ``sitlmpc`` namespace.
    
    Args:
        name: Usually the module's ``__name__``
    
    Returns:
        Configured logger
    """
    _configure_root()
    return logging.getLogger(f'sitlmpc.{name}')
