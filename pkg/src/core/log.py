"""
Logging setup shared by every package.

Loggers live under the `dlo` namespace and render through rich. Records keep
propagating to the root logger.
"""

import logging

from rich.logging import RichHandler

_ROOT = "dlo"
_configured = False


def _configure():
    global _configured
    if _configured:
        return
    root = logging.getLogger(_ROOT)
    root.setLevel(logging.INFO)
    handler = RichHandler(show_path=False, rich_tracebacks=False, markup=False)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root.addHandler(handler)
    _configured = True


def get_logger(area: str) -> logging.Logger:
    """Return the `dlo.<area>` logger."""
    _configure()
    return logging.getLogger(f"{_ROOT}.{area}")


def set_verbosity(verbose: bool):
    logging.getLogger(_ROOT).setLevel(logging.DEBUG if verbose else logging.INFO)
