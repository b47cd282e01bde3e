"""
__Project__: SRL-VAE Lab
__Description__: Projected Gradient Descent Engine Module that runs signed-gradient steps on an l-inf bounded perturbation, projecting onto the ball and clipping to the pixel domain after every step.
"""

# =============================================================================
# IMPORTS
# =============================================================================

import logging
from typing import Callable, List, Literal

import torch

from app.core.exceptions import AttackError, ConfigurationError
from app.models.image_batch import ImageBatch
from app.models.outcomes import AttackOutcome
from app.schemas.attack import AttackBudget


# =============================================================================
# MODULE CONFIGURATION
# =============================================================================

logger = logging.getLogger(__name__)

BALL_TOLERANCE = 1e-9

# (x_adv pixels, iteration) -> per-sample objective of shape (N,)
Objective = Callable[[torch.Tensor, int], torch.Tensor]
Direction = Literal["ascent", "descent"]


# =============================================================================
# PROJECTIONS
# =============================================================================

def project_linf(delta: torch.Tensor, epsilon: float) -> torch.Tensor:
    """
    Componentwise clamp of delta to [-epsilon, +epsilon]; idempotent.

    Raises:
        ConfigurationError: If epsilon is not positive.
    """
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}", details={"epsilon": epsilon})
    return delta.clamp(-epsilon, epsilon)


def clip_to_domain(x: torch.Tensor, delta: torch.Tensor) -> torch.Tensor:
    """Shrink delta so that x + delta stays inside [0, 1]; components already legal are unchanged."""
    return torch.maximum(torch.minimum(delta, 1.0 - x), -x)


def init_delta(x: torch.Tensor, budget: AttackBudget) -> torch.Tensor:
    """Zero start, or uniform in the ball drawn from budget.rng_seed."""
    if budget.init == "zero":
        return torch.zeros_like(x)
    generator = torch.Generator().manual_seed(budget.rng_seed)
    noise = torch.rand(x.shape, generator=generator, dtype=x.dtype).to(x.device)
    return (noise * 2.0 - 1.0) * budget.epsilon


def ball_radius(epsilon: float, dtype: torch.dtype) -> float:
    """epsilon as stored in a tensor of the given dtype (float32 may round it up)."""
    return max(epsilon, float(torch.tensor(epsilon, dtype=dtype)))


def _check_containment(delta: torch.Tensor, epsilon: float, iteration: int) -> None:
    overshoot = float(delta.abs().max()) - ball_radius(epsilon, delta.dtype)
    if overshoot > BALL_TOLERANCE:
        raise AttackError(
            f"Perturbation left the l-inf ball at iteration {iteration}",
            details={"iteration": iteration, "overshoot": overshoot}
        )


# =============================================================================
# PGD LOOP
# =============================================================================

def run_pgd(
    x: ImageBatch,
    objective: Objective,
    budget: AttackBudget,
    direction: Direction,
    tag: str,
) -> AttackOutcome:
    """
    Optimize a per-sample objective over the l-inf ball around x.

    Each iteration evaluates the objective at clip(x + delta), takes one step
    of size budget.step_size along the sign of the gradient (sign(0) = 0),
    projects onto the ball and clips to the pixel domain. Model parameters
    are never touched: gradients are taken with respect to delta only.

    Args:
        x: Clean batch.
        objective: Per-sample objective evaluated on perturbed pixels.
        budget: Radius, step size, iteration count and init.
        direction: "ascent" maximizes, "descent" minimizes.
        tag: Objective name stored in the outcome.

    Returns:
        AttackOutcome whose loss_trace holds the batch-mean objective before
        every step and after the last one.

    Raises:
        AttackError: On a non-finite gradient, naming the iteration.
    """
    pixels = x.pixels.detach()
    epsilon = budget.epsilon
    sign = 1.0 if direction == "ascent" else -1.0

    delta = clip_to_domain(pixels, project_linf(init_delta(pixels, budget), epsilon))
    trace: List[float] = []
    initial_losses = None

    for iteration in range(budget.iterations):
        delta = delta.detach().requires_grad_(True)
        values = objective((pixels + delta).clamp(0.0, 1.0), iteration)
        if initial_losses is None:
            initial_losses = values.detach()
        trace.append(float(values.detach().mean()))

        (grad,) = torch.autograd.grad(values.sum(), delta)
        if not bool(torch.isfinite(grad).all()):
            raise AttackError(
                f"Non-finite gradient in {tag} attack at iteration {iteration}",
                details={"iteration": iteration, "objective": tag}
            )

        with torch.no_grad():
            delta = delta.detach() + sign * budget.step_size * torch.sign(grad)
            delta = clip_to_domain(pixels, project_linf(delta, epsilon))
        _check_containment(delta, epsilon, iteration)

    delta = delta.detach()
    x_adv = (pixels + delta).clamp(0.0, 1.0)
    with torch.no_grad():
        final_losses = objective(x_adv, budget.iterations).detach()
    if initial_losses is None:
        initial_losses = final_losses
    trace.append(float(final_losses.mean()))

    logger.debug(
        f"PGD {tag} | direction={direction} | eps={epsilon:.5f} | iterations={budget.iterations} | "
        f"start={trace[0]:.6g} | end={trace[-1]:.6g}"
    )
    return AttackOutcome(
        delta=delta,
        x_adv=x.with_pixels(x_adv),
        loss_trace=trace,
        objective=tag,
        initial_losses=initial_losses,
        final_losses=final_losses,
        epsilon=epsilon,
    )
