"""
__Project__: SRL-VAE Lab
__Description__: VAE Core Package with the encoder/decoder networks, reparameterized sampling, the loss primitives and checkpoint persistence.
"""

# =============================================================================
# PACKAGE EXPORTS
# =============================================================================

from app.services.vae.checkpoint import checkpoint_tensors_hash, load_checkpoint, save_checkpoint
from app.services.vae.losses import kl_loss, l1_loss, mse_loss, perceptual_loss, reconstruction_loss
from app.services.vae.model import ModelHandle, build_model, module_hash
from app.services.vae.networks import Decoder, Encoder
from app.services.vae.operations import decode, encode, encode_reference, reconstruct, sample_latent
from app.services.vae.perceptual import PerceptualExtractor, default_extractor


# =============================================================================
# PUBLIC API
# =============================================================================

__all__ = [
    'Decoder',
    'Encoder',
    'ModelHandle',
    'PerceptualExtractor',
    'build_model',
    'checkpoint_tensors_hash',
    'decode',
    'default_extractor',
    'encode',
    'encode_reference',
    'kl_loss',
    'l1_loss',
    'load_checkpoint',
    'module_hash',
    'mse_loss',
    'perceptual_loss',
    'reconstruct',
    'reconstruction_loss',
    'sample_latent',
    'save_checkpoint',
]
