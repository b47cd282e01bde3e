"""
ModelHandle: the encoder E_theta, the decoder D_phi and the frozen reference
encoder theta_0 of one VAE, plus the freeze flags that trainers honor.
"""

import copy
import hashlib
import logging
from typing import Dict, Iterator, Optional

import torch
from torch import nn

from app.core.exceptions import ConfigurationError, ShapeError
from app.schemas.model import VAEArchitecture
from app.services.vae.networks import Decoder, Encoder

logger = logging.getLogger(__name__)

COMPONENTS = ("encoder", "decoder", "reference_encoder")


def module_hash(module: nn.Module) -> str:
    """sha256 over parameter names and raw bytes, in state_dict order."""
    digest = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


class ModelHandle:
    """
    One VAE and its reference encoder.

    Attributes:
        architecture: Shape of the networks.
        encoder: E_theta, trainable unless frozen.
        decoder: D_phi, frozen during SRL fine-tuning.
        reference_encoder: theta_0, a frozen copy of the encoder taken before
            fine-tuning starts (None until snapshot_reference is called).
        seed: Seed the parameters were initialized from.
    """

    def __init__(
        self,
        architecture: VAEArchitecture,
        encoder: Optional[Encoder] = None,
        decoder: Optional[Decoder] = None,
        reference_encoder: Optional[Encoder] = None,
        seed: int = 0,
    ):
        self.architecture = architecture
        self.seed = seed
        if encoder is None or decoder is None:
            # fork_rng keeps the caller's global RNG state untouched
            with torch.random.fork_rng(devices=[]):
                torch.manual_seed(seed)
                encoder = encoder if encoder is not None else Encoder(architecture)
                decoder = decoder if decoder is not None else Decoder(architecture)
        self.encoder = encoder.eval()
        self.decoder = decoder.eval()
        self.reference_encoder = reference_encoder
        if self.reference_encoder is not None:
            self._lock(self.reference_encoder)
        self.frozen: Dict[str, bool] = {"encoder": False, "decoder": False}

    # -------------------------------------------------------------------------
    # Geometry
    # -------------------------------------------------------------------------

    @property
    def downsampling_factor(self) -> int:
        return self.architecture.downsampling_factor

    @property
    def latent_channels(self) -> int:
        return self.architecture.latent_channels

    @property
    def dtype(self) -> torch.dtype:
        return next(self.encoder.parameters()).dtype

    @property
    def device(self) -> torch.device:
        return next(self.encoder.parameters()).device

    def modules(self) -> Iterator[tuple]:
        """(name, module) pairs of every present component."""
        for name in COMPONENTS:
            module = getattr(self, name)
            if module is not None:
                yield name, module

    # -------------------------------------------------------------------------
    # Forward passes
    # -------------------------------------------------------------------------

    def run_encoder(self, pixels: torch.Tensor, reference: bool = False):
        """Raw (mu, log_var) of the trainable or the reference encoder."""
        if pixels.dim() != 4:
            raise ShapeError(f"Expected (N, C, H, W) pixels, got {tuple(pixels.shape)}")
        network = self.require_reference() if reference else self.encoder
        return network(pixels)

    def run_decoder(self, z: torch.Tensor) -> torch.Tensor:
        """D_phi(z) after checking z against the latent spec."""
        if z.dim() != 4 or z.shape[1] != self.latent_channels:
            raise ShapeError(
                f"Latent must be (N, {self.latent_channels}, h, w), got {tuple(z.shape)}",
                details={"shape": list(z.shape), "latent_channels": self.latent_channels}
            )
        return self.decoder(z)

    # -------------------------------------------------------------------------
    # Reference encoder and freezing
    # -------------------------------------------------------------------------

    @staticmethod
    def _lock(module: nn.Module) -> None:
        module.requires_grad_(False)
        module.eval()

    def snapshot_reference(self, overwrite: bool = False) -> Encoder:
        """
        Copy the current encoder into theta_0.

        An existing reference is kept unless overwrite is set, so a resumed
        fine-tune keeps comparing against the original pretrained encoder.
        """
        if self.reference_encoder is None or overwrite:
            self.reference_encoder = copy.deepcopy(self.encoder)
            self._lock(self.reference_encoder)
            logger.info(f"Snapshot reference encoder | hash={module_hash(self.reference_encoder)[:12]}")
        return self.reference_encoder

    def require_reference(self) -> Encoder:
        """
        Raises:
            ConfigurationError: If no reference encoder has been snapshotted.
        """
        if self.reference_encoder is None:
            raise ConfigurationError(
                "Model has no reference encoder (theta_0); snapshot it or load a fine-tune checkpoint",
            )
        return self.reference_encoder

    def freeze(self, component: str) -> None:
        """Stop gradients into a component and mark it frozen."""
        if component not in self.frozen:
            raise ConfigurationError(f"Unknown component: {component}", details={"component": component})
        self._lock(getattr(self, component))
        self.frozen[component] = True

    def unfreeze(self, component: str) -> None:
        if component not in self.frozen:
            raise ConfigurationError(f"Unknown component: {component}", details={"component": component})
        getattr(self, component).requires_grad_(True)
        self.frozen[component] = False

    def parameter_hash(self, component: str) -> str:
        """Hash of one component's parameters; used to prove freeze contracts."""
        module = self.require_reference() if component == "reference_encoder" else getattr(self, component)
        return module_hash(module)

    # -------------------------------------------------------------------------
    # Conversion
    # -------------------------------------------------------------------------

    def to(self, device=None, dtype: Optional[torch.dtype] = None) -> "ModelHandle":
        """Move every component in place; returns self."""
        for _, module in self.modules():
            module.to(device=device, dtype=dtype)
        return self

    def clone(self) -> "ModelHandle":
        """Independent deep copy with the same freeze flags."""
        other = ModelHandle(
            self.architecture,
            encoder=copy.deepcopy(self.encoder),
            decoder=copy.deepcopy(self.decoder),
            reference_encoder=copy.deepcopy(self.reference_encoder),
            seed=self.seed,
        )
        for component, frozen in self.frozen.items():
            if frozen:
                other.freeze(component)
        return other

    def describe(self) -> Dict[str, object]:
        return {
            "architecture": self.architecture.to_dict(),
            "seed": self.seed,
            "frozen": dict(self.frozen),
            "has_reference": self.reference_encoder is not None,
        }


def build_model(architecture: VAEArchitecture, seed: int = 0) -> ModelHandle:
    """Freshly initialized model; same (architecture, seed) gives identical parameters."""
    model = ModelHandle(architecture, seed=seed)
    logger.info(
        f"Built VAE | channels={list(architecture.encoder_channels)} | latent={architecture.latent_channels} | "
        f"f={architecture.downsampling_factor} | seed={seed}"
    )
    return model
