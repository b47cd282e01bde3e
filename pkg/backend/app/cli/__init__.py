"""
__Project__: SRL-VAE Lab
__Description__: CLI Package that parses the srl_lab subcommands, dispatches them and records run manifests.
"""

# =============================================================================
# PACKAGE EXPORTS
# =============================================================================

from app.cli.commands import run_command
from app.cli.parser import build_parser, config_overrides
from app.cli.runs import RunContext, config_hash, open_run


# =============================================================================
# PUBLIC API
# =============================================================================

__all__ = [
    'RunContext',
    'build_parser',
    'config_hash',
    'config_overrides',
    'open_run',
    'run_command',
]
