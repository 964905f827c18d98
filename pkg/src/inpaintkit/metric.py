"""Latent-space distortion measures for inpainting evaluation.

For one image encoded under n different masks the squared distortion is the
average squared distance between the latent vectors of all ordered mask
pairs. Dividing the dataset average by 2*D (the expected squared distance
between two independent N(0, I_D) draws) normalizes the measure so that a
fully mask-independent standardized encoder scores ~1 and a mask-invariant
encoder scores 0.

Two estimators are provided: the quadratic-cost pairwise sum and the
linear-cost sum of squared deviations from the per-image latent mean. They
are algebraically identical and each serves as the oracle for the other in
the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Guard against division by ~zero spread when standardizing pooled latents.
STD_EPS = 1e-12


@dataclass(frozen=True)
class LatentSet:
    """Latent vectors of one image under n different masks, as an (n, D) array."""

    image_id: str
    latents: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.latents, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"latents must be (n, D), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"latents must be non-empty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError(f"non-finite latent component in set {self.image_id!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "latents", arr)

    @property
    def n(self) -> int:
        return self.latents.shape[0]

    @property
    def dim(self) -> int:
        return self.latents.shape[1]


@dataclass(frozen=True)
class DistortionReport:
    """Distortion summary over k images and n masks in a D-dimensional latent space.

    nsd_mean is dataset_dist2 / (2 D); nsd_std is the sample standard
    deviation (k - 1 denominator) over the per-image values dist2_j / (2 D).
    The +/- spread is therefore over images, not over repeated evaluations.
    """

    per_image_dist2: tuple[float, ...]
    dataset_dist2: float
    nsd_mean: float
    nsd_std: float
    D: int
    n: int
    k: int
    standardized: bool = False
    mask_strategy: str = ""

    def __post_init__(self):
        if self.k != len(self.per_image_dist2):
            raise ValueError("k does not match the number of per-image values")
        if any(v < 0 for v in self.per_image_dist2):
            raise ValueError("negative per-image distortion")
        mean = math.fsum(self.per_image_dist2) / self.k
        if not math.isclose(self.dataset_dist2, mean, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("dataset_dist2 is not the mean of per_image_dist2")
        if not math.isclose(
            self.nsd_mean, self.dataset_dist2 / (2 * self.D), rel_tol=1e-12, abs_tol=1e-300
        ):
            raise ValueError("nsd_mean is not dataset_dist2 / (2 D)")

    @property
    def per_image_nsd(self) -> tuple[float, ...]:
        return tuple(v / (2 * self.D) for v in self.per_image_dist2)

    def summary_line(self) -> str:
        tag = "yes" if self.standardized else "no"
        masks = self.mask_strategy or "unspecified"
        return (
            f"nsd = {self.nsd_mean:.6f} ± {self.nsd_std:.6f} "
            f"(D={self.D}, n={self.n}, k={self.k}, masks={masks}, standardized={tag})"
        )


def _check_set(latents: LatentSet) -> None:
    if latents.n < 2:
        raise ValueError(
            f"distortion needs at least 2 latents, set {latents.image_id!r} has {latents.n}"
        )


def pairwise_sq_distortion(latents: LatentSet) -> float:
    """(1/n^2) * sum over all ordered pairs (i, j) of ||x_i - x_j||^2.

    Quadratic in n; kept as the independent reference for
    :func:`mean_sq_distortion`.
    """
    _check_set(latents)
    x = latents.latents
    n = latents.n
    terms = []
    for i in range(n):
        d = x - x[i]
        terms.append(math.fsum(np.einsum("nd,nd->n", d, d).tolist()))
    return math.fsum(terms) / (n * n)


def mean_sq_distortion(latents: LatentSet) -> float:
    """(2/n) * sum_i ||x_i - mean||^2, the linear-cost form of the pairwise sum."""
    _check_set(latents)
    x = latents.latents
    if (x == x[0]).all():
        return 0.0  # exact-zero contract; the mean can be off by an ulp here
    center = x.mean(axis=0)
    d = x - center
    sq_norms = np.einsum("nd,nd->n", d, d)
    return 2.0 * math.fsum(sq_norms.tolist()) / latents.n


def dataset_distortion(per_image: list[float]) -> float:
    """Arithmetic mean of per-image distortions, compensated summation."""
    values = list(per_image)
    if not values:
        raise ValueError("no per-image distortions given")
    return math.fsum(values) / len(values)


def nsd_estimate(
    sets: list[LatentSet],
    D: int,
    standardized: bool = False,
    mask_strategy: str = "",
) -> DistortionReport:
    """Normalized squared-distortion over k latent sets sharing n masks and dim D.

    Returns the full report: per-image squared distortions, their mean, and
    the mean/std of the per-image normalized values.
    """
    if not sets:
        raise ValueError("nsd_estimate needs at least one latent set")
    n = sets[0].n
    dim = sets[0].dim
    for s in sets:
        if s.n != n:
            raise ValueError(f"mask count differs across sets: {s.n} vs {n}")
        if s.dim != dim:
            raise ValueError(f"latent dim differs across sets: {s.dim} vs {dim}")
    if D != dim:
        raise ValueError(f"declared D={D} does not match latent dim {dim}")
    per_image = [mean_sq_distortion(s) for s in sets]
    k = len(per_image)
    dataset = dataset_distortion(per_image)
    per_image_nsd = [v / (2 * D) for v in per_image]
    nsd_mean = dataset / (2 * D)
    if k > 1:
        var = math.fsum((v - nsd_mean) ** 2 for v in per_image_nsd) / (k - 1)
        nsd_std = math.sqrt(var)
    else:
        nsd_std = 0.0
    return DistortionReport(
        per_image_dist2=tuple(per_image),
        dataset_dist2=dataset,
        nsd_mean=nsd_mean,
        nsd_std=nsd_std,
        D=D,
        n=n,
        k=k,
        standardized=standardized,
        mask_strategy=mask_strategy,
    )


def sq_distance_samples(D: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """||X - Y||^2 for `samples` independent pairs X, Y ~ N(0, I_D)."""
    x = rng.standard_normal((samples, D))
    y = rng.standard_normal((samples, D))
    d = x - y
    return np.einsum("nd,nd->n", d, d)


def chi2_reference(D: int, samples: int, rng: np.random.Generator) -> float:
    """Monte-Carlo estimate of E||X - Y||^2 for independent X, Y ~ N(0, I_D).

    Converges to 2 D (half the squared distance is chi-squared with D degrees
    of freedom). This is the independent calibration oracle for the 1/(2 D)
    normalization.
    """
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples for a usable estimate, got {samples}")
    return float(sq_distance_samples(D, samples, rng).mean())


@dataclass(frozen=True)
class StandardizeStats:
    """Pooled per-dimension moments used by standardize_latents; invertible."""

    mean: np.ndarray
    std: np.ndarray            # as used for division, i.e. after the epsilon guard
    degenerate: np.ndarray     # bool per dimension: True where raw std was ~0


def standardize_latents(
    sets: list[LatentSet],
) -> tuple[list[LatentSet], StandardizeStats]:
    """Subtract the pooled per-dimension mean and divide by the pooled std.

    Zero-variance dimensions are divided by a small epsilon instead (they map
    to all-zeros) and flagged in the returned stats. The transform is exactly
    invertible from the stats.
    """
    if not sets:
        raise ValueError("standardize_latents needs at least one latent set")
    pooled = np.concatenate([s.latents for s in sets], axis=0)
    if pooled.shape[0] < 2:
        raise ValueError("pooled latent count must be at least 2")
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    degenerate = std <= STD_EPS
    safe_std = np.where(degenerate, STD_EPS, std)
    out = [
        LatentSet(s.image_id, (s.latents - mean) / safe_std)
        for s in sets
    ]
    return out, StandardizeStats(mean=mean, std=safe_std, degenerate=degenerate)
