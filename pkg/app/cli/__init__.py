"""Command-line interface."""

from app.cli.commands import COMMANDS
from app.cli.parser import build_parser

__all__ = ["COMMANDS", "build_parser"]
