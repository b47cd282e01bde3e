"""
__Project__: SRL-VAE Lab
__Description__: Script to render the deterministic synthetic corpus used by configs/toy.toml and the test suite.
"""

# =============================================================================
# IMPORTS
# =============================================================================

import argparse
import sys
import logging
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "backend"))

from app.core.logging import setup_logging
from app.services.data import write_synthetic_corpus


logger = logging.getLogger(__name__)


# =============================================================================
# MAIN FUNCTION
# =============================================================================

def main() -> int:
    """Render the corpus and report where it was written."""
    parser = argparse.ArgumentParser(description="Write a synthetic PNG corpus of gradients, discs and stripes")
    parser.add_argument("--out", default="data/toy", help="Corpus directory (default: data/toy)")
    parser.add_argument("--count", type=int, default=512, help="Number of images (default: 512)")
    parser.add_argument("--size", type=int, default=32, help="Side length in pixels (default: 32)")
    parser.add_argument("--seed", type=int, default=0, help="Rendering seed (default: 0)")
    args = parser.parse_args()

    setup_logging()
    try:
        paths = write_synthetic_corpus(Path(args.out), args.count, args.size, args.seed)
        print(f"Wrote {len(paths)} images to {Path(args.out) / 'images'}")
        return 0
    except Exception as e:
        logger.error(f"Corpus generation failed: {str(e)}", exc_info=True)
        return 1


# =============================================================================
# SCRIPT EXECUTION
# =============================================================================

if __name__ == "__main__":
    sys.exit(main())
