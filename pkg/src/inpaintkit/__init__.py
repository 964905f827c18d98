"""inpaintkit: desk-scale cascade context encoders and the normalized
squared-distortion (NSD) metric for quantitative inpainting evaluation.

The package is self-contained: synthetic data generation, a small
numpy-based differentiable network kernel, two-stage cascade training with
a frozen coarse stage, and a latent-space evaluation protocol, all wired
into one CLI (``inpaintkit``).
"""

from .masking import (
    Mask,
    apply_mask,
    central_mask,
    complement,
    coverage,
    random_blocks_mask,
)
from .metric import (
    DistortionReport,
    LatentSet,
    chi2_reference,
    dataset_distortion,
    mean_sq_distortion,
    nsd_estimate,
    pairwise_sq_distortion,
    standardize_latents,
)
from .imaging import Dataset, dataset_mean_color, load_png, save_png, synth_dataset
from .cascade import (
    CascadeModel,
    cascade_fill,
    cascade_rec_loss,
    downscale,
    inpaint,
    train_stage1,
    train_stage2,
    upscale,
)

__version__ = "0.1.0"
