"""
Argument parser of the srl_lab entry script.

Every ExperimentConfig field becomes a `--field-name` flag whose default is
argparse.SUPPRESS, so only flags the user actually typed reach the config
resolver and the precedence flag > file > default holds.
"""

import argparse
import typing
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple

from app.schemas.experiment import PIXEL_UNIT_FIELDS, ExperimentConfig
from app.services.attacks.methods import ATTACK_METHODS
from app.utils.validators import parse_fraction

SUBCOMMANDS = ("pretrain", "finetune", "attack", "eval", "analyze")

# Extra spellings of config flags
FLAG_ALIASES: Dict[str, Tuple[str, ...]] = {
    "pca_components": ("-k",),
    "eval_split": ("--split",),
}

# Per-subcommand spellings: in `pretrain`, --total-steps counts pretraining steps
SUBCOMMAND_ALIASES: Dict[str, Dict[str, str]] = {
    "pretrain": {"total_steps": "pretrain_steps"},
}


def _fraction(value: str) -> float:
    try:
        return parse_fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"invalid number or fraction: {value!r}") from e


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _field_kwargs(name: str, annotation: Any) -> Dict[str, Any]:
    """argparse keyword arguments for one config field."""
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        annotation, origin, args = inner[0], typing.get_origin(inner[0]), typing.get_args(inner[0])

    if annotation is bool:
        return {"action": argparse.BooleanOptionalAction}
    if name in PIXEL_UNIT_FIELDS:
        return {"type": _fraction, "metavar": "X"}
    if origin is tuple:
        return {"type": int, "nargs": "+", "metavar": "N"}
    if origin is Literal:
        return {"type": str, "choices": list(args)}
    if annotation in (int, float, str):
        return {"type": annotation}
    return {"type": str}


def add_config_flags(parser: argparse.ArgumentParser, subcommand: str, exclude: Iterable[str] = ()) -> None:
    """Add one flag per ExperimentConfig field (minus `exclude`) to a subparser."""
    group = parser.add_argument_group("experiment configuration (overrides the --config file)")
    aliases = SUBCOMMAND_ALIASES.get(subcommand, {})
    hidden = set(exclude) | set(aliases)
    for name, field in ExperimentConfig.model_fields.items():
        if name in hidden:
            continue
        names: List[str] = [_flag(name), *FLAG_ALIASES.get(name, ())]
        names += [_flag(alias) for alias, target in aliases.items() if target == name]
        default = field.default if field.default is not None else "none"
        group.add_argument(
            *names,
            dest=name,
            default=argparse.SUPPRESS,
            help=f"{field.description or name} (default: {default})",
            **_field_kwargs(name, field.annotation),
        )


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Flat TOML experiment file")
    parser.add_argument("--run-dir", dest="run_dir", help="Write artifacts here instead of a new run directory")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")


def build_parser() -> argparse.ArgumentParser:
    """The full srl_lab parser with its five subcommands."""
    parser = argparse.ArgumentParser(
        prog="srl_lab",
        description="SRL-VAE laboratory: robust VAE fine-tuning, attacks, metrics and latent analyses.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Baseline VAE on the toy corpus
  python srl_lab.py pretrain --config configs/toy.toml

  # SRL fine-tune from the baseline (add --orig-weight 0 for the ablation)
  python srl_lab.py finetune --config configs/toy.toml --baseline <run>/checkpoints/final

  # epsilon sweep of the encoder-targeted attack
  python srl_lab.py attack --checkpoint <ckpt> --method encoder-target --epsilon 2/255 4/255 8/255 15/255

  # Clean and attacked metrics, then latent analyses
  python srl_lab.py eval --checkpoint <ckpt> --attack pgd-recon
  python srl_lab.py analyze --checkpoint <ckpt> --surface --pca -k 2 --tightness

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
        """
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    pretrain = subparsers.add_parser("pretrain", help="Train a baseline VAE")
    _common(pretrain)
    add_config_flags(pretrain, "pretrain")

    finetune = subparsers.add_parser("finetune", help="SRL fine-tune of the encoder")
    _common(finetune)
    finetune.add_argument("--baseline", required=True, help="Baseline checkpoint directory (theta_0 source)")
    add_config_flags(finetune, "finetune")

    attack = subparsers.add_parser("attack", help="Run one attack (or an epsilon sweep) on the probe split")
    _common(attack)
    attack.add_argument("--checkpoint", required=True, help="Checkpoint directory")
    attack.add_argument("--method", required=True, choices=ATTACK_METHODS, help="Attack method")
    attack.add_argument("--epsilon", nargs="+", type=_fraction, metavar="X",
                        help="One or more l-inf radii (default: the method's radius)")
    attack.add_argument("--target", choices=("gray", "roll"), default="gray",
                        help="Target of encoder-target / mist-textural (default: gray)")
    attack.add_argument("--dump-png", dest="dump_png", action="store_true", help="Write adversarial images as PNG")
    add_config_flags(attack, "attack", exclude=("epsilon",))

    evaluate = subparsers.add_parser("eval", help="Reconstruction metrics, clean and under attack")
    _common(evaluate)
    evaluate.add_argument("--checkpoint", required=True, help="Checkpoint directory")
    evaluate.add_argument("--attack", choices=ATTACK_METHODS, help="Also evaluate under this attack")
    evaluate.add_argument("--target", choices=("gray", "roll"), default="gray",
                          help="Target of encoder-target / mist-textural (default: gray)")
    add_config_flags(evaluate, "eval")

    analyze = subparsers.add_parser("analyze", help="Loss surfaces, latent PCA and cluster tightness")
    _common(analyze)
    analyze.add_argument("--checkpoint", required=True, help="Checkpoint directory")
    analyze.add_argument("--surface", action="store_true", help="Loss-surface grids over the anchor images")
    analyze.add_argument("--pca", action="store_true", help="PCA of latent means")
    analyze.add_argument("--tightness", action="store_true", help="Cluster tightness under Gaussian noise")
    add_config_flags(analyze, "analyze")

    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Config values explicitly given on the command line."""
    fields = ExperimentConfig.model_fields
    overrides = {k: v for k, v in vars(args).items() if k in fields}
    if args.command == "attack":
        # --epsilon of `attack` is a sweep, resolved by the handler
        overrides.pop("epsilon", None)
    return overrides


def epsilon_flag(args: argparse.Namespace) -> Optional[List[float]]:
    """The --epsilon values of `attack`, or the single --epsilon of other subcommands."""
    value = getattr(args, "epsilon", None)
    if value is None:
        return None
    return list(value) if isinstance(value, list) else [value]
