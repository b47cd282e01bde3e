"""
__Project__: SRL-VAE Lab
__Description__: CLI Command Handlers that wire configuration, data, models, attacks, metrics and analyses into the five srl_lab subcommands and record every run in a manifest.
"""

# =============================================================================
# IMPORTS
# =============================================================================

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
from pydantic import ValidationError
from PIL import Image

from app.cli.parser import config_overrides, epsilon_flag
from app.cli.runs import RunContext, open_run, record_rejected_run
from app.core.config import get_settings, resolve_experiment_config
from app.core.exceptions import ConfigurationError, SRLLabError
from app.models.image_batch import ImageBatch
from app.models.outcomes import AttackOutcome
from app.schemas.attack import AttackBudget
from app.schemas.experiment import ExperimentConfig
from app.services.analysis import cluster_tightness, collect_latents, latent_pca, mean_smoothness, smoothness_score
from app.services.attacks import (
    DEFAULT_EPSILON,
    encoder_targeted_attack,
    mist_textural_attack,
    pgd_reconstruction_attack,
    poison_crafting_probe,
    target_batch,
)
from app.services.data import load_dataset, split_fingerprint
from app.services.metrics import reconstruction_report, save_report
from app.services.training import SRLTrainer
from app.services.vae import (
    ModelHandle,
    PerceptualExtractor,
    build_model,
    checkpoint_tensors_hash,
    default_extractor,
    encode,
    load_checkpoint,
)
from app.utils.file_handling import safe_filename, write_csv, write_json, write_matrix_csv


# =============================================================================
# MODULE CONFIGURATION
# =============================================================================

logger = logging.getLogger(__name__)

ATTACK_HEADER = ("id", "epsilon", "initial_loss", "final_loss", "linf_norm")
PROBE_HEADER = ATTACK_HEADER + ("reduction_ratio",)


# =============================================================================
# SHARED SETUP
# =============================================================================

def configure_torch() -> None:
    """Deterministic kernels and the configured thread count."""
    settings = get_settings()
    torch.use_deterministic_algorithms(True, warn_only=True)
    if settings.TORCH_NUM_THREADS:
        torch.set_num_threads(settings.TORCH_NUM_THREADS)


def build_extractor(config: ExperimentConfig) -> PerceptualExtractor:
    """Pretrained extractor when extractor_weights is set, else the seeded default."""
    if config.extractor_weights:
        return PerceptualExtractor.from_file(config.extractor_weights, in_channels=config.channels)
    return default_extractor(config.channels, config.extractor_seed)


def load_model(run: RunContext, checkpoint: str, config: ExperimentConfig) -> Tuple[ModelHandle, str]:
    """Load a checkpoint against the configured architecture; returns (model, tensors hash)."""
    model, _ = load_checkpoint(Path(checkpoint), expected_architecture=config.architecture())
    digest = run.add_checkpoint(Path(checkpoint))
    return model.to(get_settings().DEVICE), digest


def probe_set(config: ExperimentConfig) -> ImageBatch:
    """The configured evaluation split, truncated to probe_limit images."""
    split = load_dataset(config.dataset_spec()).get(config.eval_split)
    if config.probe_limit is not None:
        split = split.head(config.probe_limit)
    return split.to(get_settings().DEVICE)


def resolve_epsilons(method: str, explicit: Optional[List[float]], file_values: Dict[str, Any], config: ExperimentConfig) -> List[float]:
    """Flag > config file > the method's default radius."""
    if explicit:
        return explicit
    if "epsilon" in file_values:
        return [config.epsilon]
    return [DEFAULT_EPSILON[method]]


AttackRunner = Callable[[ImageBatch], Tuple[AttackOutcome, Optional[List[float]]]]


def attack_runner(model: ModelHandle, method: str, budget: AttackBudget, config: ExperimentConfig,
                  extractor: PerceptualExtractor, target: str) -> AttackRunner:
    """
    Batch -> (outcome, per-image poison ratios or None) for one attack method.

    The poison probe pairs every source image with the next image of its batch.
    """
    def run(batch: ImageBatch) -> Tuple[AttackOutcome, Optional[List[float]]]:
        if method == "pgd-recon":
            return pgd_reconstruction_attack(model, batch, budget, config.lpips_weight, extractor), None
        if method == "encoder-target":
            with torch.no_grad():
                z_targ = encode(model, target_batch(batch, target)).mu
            return encoder_targeted_attack(model, batch, z_targ, budget), None
        if method == "mist-textural":
            return mist_textural_attack(model, batch, target_batch(batch, target), budget), None
        report = poison_crafting_probe(model, batch, batch.rolled(1), budget)
        return report.outcome, report.per_image_ratios
    return run


def _gap_ratio(initial: List[float], final: List[float]) -> Dict[str, float]:
    initial_gap = math.fsum(initial) / len(initial)
    final_gap = math.fsum(final) / len(final)
    return {
        "initial_gap": initial_gap,
        "final_gap": final_gap,
        "reduction_ratio": final_gap / initial_gap if initial_gap > 0 else 1.0,
    }


def dump_png(batch: ImageBatch, directory: Path) -> None:
    """One 8-bit PNG per image, named after its id."""
    directory.mkdir(parents=True, exist_ok=True)
    pixels = (batch.pixels.detach().cpu().clamp(0, 1) * 255.0).round().to(torch.uint8)
    for sample_id, image in zip(batch.ids, pixels):
        array = image.permute(1, 2, 0).numpy()
        if array.shape[2] == 1:
            array = array[:, :, 0]
        Image.fromarray(np.ascontiguousarray(array)).save(directory / f"{Path(safe_filename(sample_id)).stem}.png")


# =============================================================================
# SUBCOMMANDS
# =============================================================================

def cmd_pretrain(args: argparse.Namespace, config: ExperimentConfig, file_values: Dict[str, Any]) -> int:
    """Baseline pretraining; writes the checkpoint later used as theta_0."""
    with open_run("pretrain", config, args.run_dir) as run:
        run.tags.append("baseline")
        splits = load_dataset(config.dataset_spec())
        device = get_settings().DEVICE
        model = build_model(config.architecture(), config.model_seed).to(device)
        trainer = SRLTrainer(model, run.run_dir, build_extractor(config), provenance={"config_hash": run.config_hash})
        result = trainer.pretrain_baseline(splits.train.to(device), config.pretrain_config())

        run.add_output("checkpoint", result.final_checkpoint)
        run.add_output("step_log", result.log_path)
        run.summary.update(result.to_dict())
        run.summary["train_split"] = split_fingerprint(splits.train)
        print(result.final_checkpoint)
    return 0


def cmd_finetune(args: argparse.Namespace, config: ExperimentConfig, file_values: Dict[str, Any]) -> int:
    """SRL fine-tune of a baseline; --orig-weight 0 runs the ablation."""
    with open_run("finetune", config, args.run_dir) as run:
        train_config = config.train_config()
        run.tags.append(train_config.run_tag)
        model, baseline_hash = load_model(run, args.baseline, config)
        baseline_decoder = model.parameter_hash("decoder")
        splits = load_dataset(config.dataset_spec())

        trainer = SRLTrainer(
            model,
            run.run_dir,
            build_extractor(config),
            provenance={"config_hash": run.config_hash, "baseline": baseline_hash},
        )
        result = trainer.finetune(splits.train.to(get_settings().DEVICE), train_config)

        run.add_output("checkpoint", result.final_checkpoint)
        run.add_output("step_log", result.log_path)
        run.summary.update(result.to_dict())
        run.summary["decoder_unchanged"] = result.decoder_hash == baseline_decoder == model.parameter_hash("decoder")
        run.summary["train_split"] = split_fingerprint(splits.train)
        print(result.final_checkpoint)
    return 0


def cmd_attack(args: argparse.Namespace, config: ExperimentConfig, file_values: Dict[str, Any]) -> int:
    """Per-image attack CSV for one method over one or more radii."""
    with open_run("attack", config, args.run_dir) as run:
        epsilons = resolve_epsilons(args.method, epsilon_flag(args), file_values, config)
        run.tags.append(args.method)
        model, _ = load_model(run, args.checkpoint, config)
        probe = probe_set(config)
        extractor = build_extractor(config)
        poison = args.method == "poison-probe"

        rows: List[tuple] = []
        sweep: List[Dict[str, Any]] = []
        for index, epsilon in enumerate(epsilons):
            budget = config.attack_budget(epsilon=epsilon)
            runner = attack_runner(model, args.method, budget, config, extractor, args.target)
            initial: List[float] = []
            final: List[float] = []
            trace = np.zeros(budget.iterations + 1)
            for batch in probe.chunks(config.eval_batch_size):
                outcome, ratios = runner(batch)
                trace += np.asarray(outcome.loss_trace) * batch.size
                for position, row in enumerate(outcome.per_image_rows()):
                    values = (row["id"], epsilon, row["initial_loss"], row["final_loss"], row["linf_norm"])
                    rows.append(values + ((ratios[position],) if poison else ()))
                    initial.append(row["initial_loss"])
                    final.append(row["final_loss"])
                if args.dump_png:
                    dump_png(outcome.x_adv, run.path("png", f"eps_{index:02d}"))

            entry = {
                "epsilon": epsilon,
                "budget": budget.describe(),
                "mean_initial_loss": math.fsum(initial) / len(initial),
                "mean_final_loss": math.fsum(final) / len(final),
                "loss_trace": [float(v) for v in trace / probe.size],
            }
            if poison:
                entry.update(_gap_ratio(initial, final))
            sweep.append(entry)
            logger.info(
                f"Attack | method={args.method} | eps={epsilon:.5f} | images={probe.size} | "
                f"initial={entry['mean_initial_loss']:.6g} | final={entry['mean_final_loss']:.6g}"
            )

        csv_path = write_csv(run.path("attack.csv"), PROBE_HEADER if poison else ATTACK_HEADER, rows)
        summary_path = write_json(run.path("attack_summary.json"), {"method": args.method, "target": args.target, "sweep": sweep})
        run.add_output("per_image", csv_path)
        run.add_output("summary", summary_path)
        if args.dump_png:
            run.add_output("png", run.path("png"))
        run.summary.update({"method": args.method, "sweep": sweep})
        print(csv_path)
    return 0


def cmd_eval(args: argparse.Namespace, config: ExperimentConfig, file_values: Dict[str, Any]) -> int:
    """MetricReport JSON plus one results-ledger row."""
    with open_run("eval", config, args.run_dir) as run:
        model, model_id = load_model(run, args.checkpoint, config)
        probe = probe_set(config)
        extractor = build_extractor(config)

        attack_fn = None
        descriptor = None
        poison_losses: Dict[str, List[float]] = {"initial": [], "final": []}
        if args.attack:
            run.tags.append(args.attack)
            epsilon = resolve_epsilons(args.attack, epsilon_flag(args), file_values, config)[0]
            budget = config.attack_budget(epsilon=epsilon)
            runner = attack_runner(model, args.attack, budget, config, extractor, args.target)
            descriptor = {"method": args.attack, "epsilon": epsilon, "target": args.target, "budget": budget.describe()}

            def attack_fn(batch: ImageBatch) -> AttackOutcome:
                outcome, _ = runner(batch)
                poison_losses["initial"].extend(outcome.initial_losses.tolist())
                poison_losses["final"].extend(outcome.final_losses.tolist())
                return outcome

        report = reconstruction_report(
            model,
            probe,
            attack_fn,
            extractor=extractor,
            corpus_id=split_fingerprint(probe),
            model_id=model_id,
            attack_descriptor=descriptor,
            batch_size=config.eval_batch_size,
        )
        if args.attack == "poison-probe":
            ratio = _gap_ratio(poison_losses["initial"], poison_losses["final"])["reduction_ratio"]
            report = report.model_copy(update={"poison_ratio": ratio})

        report_path = save_report(report, run.path("report.json"), get_settings().results_ledger)
        run.add_output("report", report_path)
        run.add_output("results_ledger", get_settings().results_ledger)
        run.summary.update(report.ledger_row())
        print(report_path)
    return 0


def cmd_analyze(args: argparse.Namespace, config: ExperimentConfig, file_values: Dict[str, Any]) -> int:
    """Selected latent analyses; at least one of --surface, --pca, --tightness."""
    with open_run("analyze", config, args.run_dir) as run:
        if not (args.surface or args.pca or args.tightness):
            raise ConfigurationError("Select at least one analysis: --surface, --pca or --tightness")

        model, _ = load_model(run, args.checkpoint, config)
        probe = probe_set(config)

        if args.surface:
            run.tags.append("surface")
            anchors = probe.head(config.anchors)
            score, grids = mean_smoothness(model, anchors, config.surface_radius, config.half_res, config.seed)
            scores = []
            for index, grid in enumerate(grids):
                write_matrix_csv(run.path("surface", f"anchor_{index:02d}.csv"), grid.grid)
                sidecar = grid.sidecar()
                sidecar["smoothness_score"] = smoothness_score(grid)
                scores.append(sidecar["smoothness_score"])
                write_json(run.path("surface", f"anchor_{index:02d}.json"), sidecar)
            run.add_output("surface", run.path("surface"))
            run.summary["smoothness_score"] = score
            run.summary["smoothness_scores"] = scores

        if args.pca:
            run.tags.append("pca")
            result = latent_pca(collect_latents(model, probe, config.eval_batch_size), config.pca_components, probe.ids)
            header = ("id",) + tuple(f"pc{i + 1}" for i in range(config.pca_components))
            rows = [(sample_id, *map(float, projection)) for sample_id, projection in zip(result.ids, result.projections)]
            run.add_output("pca_projections", write_csv(run.path("pca_projections.csv"), header, rows))
            run.add_output("pca", write_json(run.path("pca.json"), result.to_dict()))
            run.summary["pca"] = result.to_dict()

        if args.tightness:
            run.tags.append("tightness")
            tightness = cluster_tightness(model, probe, config.noise_sigma, config.seed, config.eval_batch_size)
            run.add_output("tightness", write_json(run.path("tightness.json"), tightness.to_dict()))
            run.summary["tightness"] = tightness.to_dict()

        write_json(run.path("analysis_summary.json"), run.summary)
        print(run.run_dir)
    return 0


HANDLERS: Dict[str, Callable[[argparse.Namespace, ExperimentConfig, Dict[str, Any]], int]] = {
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
}


# =============================================================================
# DISPATCH
# =============================================================================

def run_command(args: argparse.Namespace) -> int:
    """
    Resolve the configuration and run one subcommand.

    Returns:
        0 on success, 2 on a configuration error, 1 on any other failure.
    """
    try:
        overrides = config_overrides(args)
        try:
            config, file_values = resolve_experiment_config(args.config, overrides)
        except ConfigurationError as e:
            raw = {"config_file": args.config, "overrides": overrides}
            record_rejected_run(args.command, raw, e.message, args.run_dir)
            raise
        configure_torch()
        return HANDLERS[args.command](args, config, file_values)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return 2
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or e.title
        logger.error(f"Configuration error: {key}: {first['msg']}")
        print(f"error: invalid value for {key}: {first['msg']}", file=sys.stderr)
        return 2
    except SRLLabError as e:
        logger.error(f"{type(e).__name__}: {e.message} | details={e.details}")
        print(f"error: {e.message}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
