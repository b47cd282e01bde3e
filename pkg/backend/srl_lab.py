"""
__Project__: SRL-VAE Lab
__Description__: Command-line entry point. Runs baseline pretraining, SRL fine-tuning, attacks, evaluation and latent analyses.
"""

# =============================================================================
# IMPORTS
# =============================================================================

import sys
import logging
from pathlib import Path
from typing import List, Optional

sys.path.insert(0, str(Path(__file__).parent))

from app.cli import build_parser, run_command
from app.core.logging import setup_logging


logger = logging.getLogger(__name__)


# =============================================================================
# MAIN FUNCTION
# =============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one subcommand.

    Returns:
        Process exit code: 0 success, 1 runtime failure, 2 configuration error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return int(e.code or 0)

    setup_logging(level="DEBUG" if args.verbose else None)
    logger.debug(f"Arguments | {vars(args)}")
    return run_command(args)


# =============================================================================
# SCRIPT EXECUTION
# =============================================================================

if __name__ == "__main__":
    sys.exit(main())
