"""Command groups of the meanfield command line.

Each module builds a ``CommandGroup`` and decorates its handlers with
``@group.command(name)``; ``app.create_app`` registers every group on the
argument parser. A handler receives the merged ``RunConfig`` and returns a
``CommandResult`` whose frame becomes the CSV output.
"""
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import pandas as pd

from models import RunConfig
from utils.errors import EXIT_OK
from utils.radial_core import CSV_FLOAT_FORMAT, RadialField, RadialGrid, make_grid

logger = logging.getLogger(__name__)

Handler = Callable[[RunConfig], 'CommandResult']


@dataclass
class CommandResult:
    frame: pd.DataFrame
    exit_code: int = EXIT_OK
    status: str = 'ok'
    details: Dict[str, Any] = field(default_factory=dict)


class CommandGroup:
    def __init__(self, name: str):
        self.name = name
        self.commands: List[Tuple[str, str, Handler]] = []

    def command(self, name: str, help: str = '') -> Callable[[Handler], Handler]:
        def decorator(func: Handler) -> Handler:
            self.commands.append((name, help, func))
            return func
        return decorator

    def register(self, subparsers, parents: Sequence) -> None:
        for name, help_text, handler in self.commands:
            parser = subparsers.add_parser(name, parents=list(parents), help=help_text, description=help_text)
            parser.set_defaults(handler=handler)
        logger.debug(f"Registered command group {self.name}: {[c[0] for c in self.commands]}")


def grid_for(config: RunConfig, n: int = 513, q: float = 1.0) -> RadialGrid:
    return make_grid(config.n if config.n is not None else n, config.q if config.q is not None else q)


def read_field(config: RunConfig) -> RadialField:
    config.require('input')
    return RadialField.read_csv(config.input)


def write_frame(frame: pd.DataFrame, out: Optional[str], stream: Optional[TextIO] = None) -> None:
    if out:
        frame.to_csv(out, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info(f"Wrote {len(frame)} rows to {out}")
    else:
        frame.to_csv(stream or sys.stdout, index=False, float_format=CSV_FLOAT_FORMAT)
