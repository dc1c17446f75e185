"""Entry point of the ``hcmen`` command.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import sys
from typing import List, Optional

from loguru import logger

from app.cli import COMMANDS, build_parser
from app.exceptions import HCMENError, UsageError
from app.utils.logging import setup_logging
from app.utils.monitoring import setup_monitoring

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    setup_logging(args.log_level)
    try:
        setup_monitoring()
    except Exception as e:
        logger.error(f"Failed to initialize monitoring: {e}")
        logger.warning("Continuing without monitoring...")

    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (HCMENError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
