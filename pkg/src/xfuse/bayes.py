"""Bayesian spatio-temporal fusion baseline.

Per fused frame: per-pixel temporal dynamics are clustered with k-means
over (previous, reference, next) LR triplets; each target HR frame is
predicted from its two HR neighbors via the Gaussian conditional of the
middle time given the endpoints, then corrected with the reference LR
frame through a blockwise linear Kalman update under a calibrated
4x4-block degradation model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frames import Frame

EPS_COV = 1e-8       # covariance regularizer added after fitting
RIDGE_LAMBDA = 1e-6  # ridge weight in degradation calibration
DRIFT_RATE = 1e-4    # prior variance growth per frame away from an HR keyframe
BLOCK = 4            # HR block edge mapped to one LR pixel

STATUS_OK = "ok"
STATUS_DEGENERATE = "degenerate"


@dataclass(frozen=True)
class ClusterModel:
    """Temporal-dynamics clusters over 3-point LR pixel time series."""

    means: np.ndarray        # (K, 3)
    covariances: np.ndarray  # (K, 3, 3), symmetric, regularized
    status: str = STATUS_OK

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        covs = np.asarray(self.covariances, dtype=np.float64)
        if means.ndim != 2 or means.shape[1] != 3 or means.shape[0] < 1:
            raise ValidationError(f"means must be (K, 3) with K >= 1, got {means.shape}")
        if covs.shape != (means.shape[0], 3, 3):
            raise ValidationError(f"covariances must be (K, 3, 3), got {covs.shape}")
        if not (np.isfinite(means).all() and np.isfinite(covs).all()):
            raise ValidationError("cluster model contains non-finite values")
        if not np.allclose(covs, np.swapaxes(covs, 1, 2), atol=1e-9):
            raise ValidationError("cluster covariances must be symmetric")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)

    @property
    def k(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class BlockDegradationModel:
    """Linear map from a 4x4 HR block to one LR pixel, plus noise variance."""

    w: np.ndarray        # (16,)
    sigma_r2: float
    status: str = STATUS_OK

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (BLOCK * BLOCK,):
            raise ValidationError(f"kernel must have {BLOCK * BLOCK} weights, got {w.shape}")
        if not np.isfinite(w).all():
            raise ValidationError("kernel weights must be finite")
        if self.sigma_r2 < 0:
            raise ValidationError(f"sigma_r2 must be >= 0, got {self.sigma_r2}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sigma_r2", float(self.sigma_r2))


@dataclass(frozen=True)
class BlockPrior:
    """Gaussian prior over one 16-pixel HR block."""

    mean: np.ndarray  # (16,)
    cov: np.ndarray   # (16, 16), symmetric PSD

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        n = BLOCK * BLOCK
        if mean.shape != (n,) or cov.shape != (n, n):
            raise ValidationError("block prior must be a 16-vector and 16x16 covariance")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise ValidationError("block prior contains non-finite values")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def cluster_count(lr_width: int, lr_height: int) -> int:
    """5% of the geometric-mean pixel count per dimension, at least 2."""
    k = round(0.05 * np.sqrt(lr_width * lr_height))
    if k < 1:
        raise ValidationError(
            f"LR dims {lr_width}x{lr_height} too small for clustering (K would be < 1)"
        )
    return max(int(k), 2)


def _kmeans_pp_init(series: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = series.shape[0]
    centers = np.empty((k, series.shape[1]))
    centers[0] = series[rng.integers(n)]
    d2 = ((series - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = series[rng.integers(n)]
            continue
        centers[j] = series[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((series - centers[j]) ** 2).sum(axis=1))
    return centers


def _assign(series: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((series[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)  # argmin breaks ties toward the lowest index


def fit_clusters(series: np.ndarray, k: int, seed: int = 0,
                 max_iter: int = 100, tol: float = 1e-6) -> ClusterModel:
    """Seeded k-means++ / Lloyd fit with per-cluster mean and covariance.

    An empty cluster is reseeded to the point currently farthest from its
    assigned centroid. An all-identical input degenerates to a K=1 model
    with a warning status.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2 or series.shape[1] != 3:
        raise ValidationError(f"series must be (N, 3), got {series.shape}")
    n = series.shape[0]
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    if n < k:
        raise ValidationError(f"need at least K={k} series, got {n}")
    if np.all(series == series[0]):
        warnings.warn("all time series identical; returning a single degenerate cluster")
        covs = (EPS_COV * np.eye(3))[None, :, :]
        return ClusterModel(series[:1].copy(), covs, STATUS_DEGENERATE)

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(series, k, rng)
    labels = _assign(series, centers)
    for _ in range(max_iter):
        new_centers = centers.copy()
        for j in range(k):
            members = series[labels == j]
            if members.size:
                new_centers[j] = members.mean(axis=0)
        labels = _assign(series, new_centers)
        for j in range(k):
            if not np.any(labels == j):
                dist = ((series - new_centers[labels]) ** 2).sum(axis=1)
                new_centers[j] = series[dist.argmax()]
                labels = _assign(series, new_centers)
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift < tol:
            break

    means = np.empty((k, 3))
    covs = np.empty((k, 3, 3))
    eye = np.eye(3)
    for j in range(k):
        members = series[labels == j]
        means[j] = members.mean(axis=0)
        if members.shape[0] > 1:
            c = np.cov(members, rowvar=False, ddof=1)
        else:
            c = np.zeros((3, 3))
        covs[j] = c + EPS_COV * eye
    return ClusterModel(means, covs)


def condition_mid(mean: np.ndarray, cov: np.ndarray,
                  x_prev: float, x_next: float) -> tuple[float, float]:
    """Gaussian conditional of the middle time given the two endpoints.

    Falls back to the marginal (mean[1], cov[1,1]) when the endpoint
    block is singular even after regularization.
    """
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    a, var = _conditioner_single(mean, cov)
    mu = mean[1] + a[0] * (x_prev - mean[0]) + a[1] * (x_next - mean[2])
    return float(mu), float(var)


def _conditioner_single(mean: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, float]:
    s_oo = cov[np.ix_([0, 2], [0, 2])]
    s_mo = cov[1, [0, 2]]
    try:
        a = np.linalg.solve(s_oo, s_mo)
        if not np.isfinite(a).all():
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        warnings.warn("singular endpoint covariance; using the marginal of the middle time")
        return np.zeros(2), max(float(cov[1, 1]), 0.0)
    var = float(cov[1, 1] - a @ s_mo)
    return a, max(var, 0.0)


def _conditioners(model: ClusterModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster endpoint coefficients (K, 2) and conditional variances (K,)."""
    k = model.k
    coef = np.zeros((k, 2))
    var = np.zeros(k)
    for j in range(k):
        coef[j], var[j] = _conditioner_single(model.means[j], model.covariances[j])
    return coef, var


def blocks_4x4(frame: Frame) -> np.ndarray:
    """Non-overlapping 4x4 blocks as rows, LR-pixel row-major order."""
    h, w = frame.height, frame.width
    if h % BLOCK or w % BLOCK:
        raise ValidationError(f"HR dims {w}x{h} not divisible by {BLOCK}")
    px = frame.pixels.astype(np.float64)
    return (px.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK)
              .transpose(0, 2, 1, 3)
              .reshape(-1, BLOCK * BLOCK))


def frame_from_blocks(blocks: np.ndarray, lr_height: int, lr_width: int,
                      frame_index: int = 0) -> Frame:
    """Inverse of blocks_4x4."""
    px = (blocks.reshape(lr_height, lr_width, BLOCK, BLOCK)
                .transpose(0, 2, 1, 3)
                .reshape(lr_height * BLOCK, lr_width * BLOCK))
    return Frame(px.astype(np.float32), frame_index)


def calibrate_degradation(hr: Frame, lr: Frame,
                          more_pairs: tuple[tuple[Frame, Frame], ...] = ()
                          ) -> BlockDegradationModel:
    """Ridge least squares of LR pixels on their 4x4 HR blocks.

    Additional (hr, lr) pairs are pooled into one design. A
    rank-deficient design (constant images) falls back to the uniform
    mean-binning kernel with a warning status.
    """
    xs, ys = [], []
    for hr_f, lr_f in ((hr, lr), *more_pairs):
        if hr_f.width != BLOCK * lr_f.width or hr_f.height != BLOCK * lr_f.height:
            raise ValidationError(
                f"HR {hr_f.width}x{hr_f.height} is not {BLOCK}x the "
                f"LR {lr_f.width}x{lr_f.height}"
            )
        xs.append(blocks_4x4(hr_f))
        ys.append(lr_f.pixels.astype(np.float64).ravel())
    x = np.vstack(xs)
    y = np.concatenate(ys)

    n_w = BLOCK * BLOCK
    xtx = x.T @ x
    sv = np.linalg.svd(xtx, compute_uv=False)
    if sv[-1] <= sv[0] * 1e-12:
        warnings.warn("rank-deficient calibration design; using the uniform kernel")
        w = np.full(n_w, 1.0 / n_w)
        resid = y - x @ w
        return BlockDegradationModel(w, float(np.mean(resid**2)), STATUS_DEGENERATE)
    w = np.linalg.solve(xtx + RIDGE_LAMBDA * np.eye(n_w), x.T @ y)
    resid = y - x @ w
    return BlockDegradationModel(w, float(np.mean(resid**2)))


def kalman_update_block(prior: BlockPrior, model: BlockDegradationModel,
                        y: float) -> BlockPrior:
    """Posterior of one HR block given its scalar LR observation."""
    w = model.w
    pw = prior.cov @ w
    denom = float(w @ pw + model.sigma_r2)
    if denom == 0.0:
        warnings.warn("degenerate Kalman update (zero innovation variance); prior kept")
        return prior
    gain = pw / denom
    mean = prior.mean + gain * (y - float(w @ prior.mean))
    cov = (np.eye(w.size) - np.outer(gain, w)) @ prior.cov
    return BlockPrior(mean, cov)


def fuse_frame(lr_prev: Frame, lr_ref: Frame, lr_next: Frame,
               hr_prev: Frame, hr_next: Frame,
               delta_back: int, delta_fwd: int,
               model: ClusterModel, deg: BlockDegradationModel,
               clamp: bool = True) -> Frame:
    """Reconstruct the HR frame at the reference LR time.

    Forward/backward HR predictions are blended with 1/delta precision
    weights, given a diagonal prior variance var_mid + DRIFT_RATE *
    min(delta_back, delta_fwd), then corrected by a per-block Kalman
    update against the reference LR pixel. Output is clamped to [0, 1]
    as the final step unless ``clamp`` is disabled.
    """
    h, w = lr_ref.height, lr_ref.width
    for f in (lr_prev, lr_next):
        if f.width != w or f.height != h:
            raise ValidationError("LR frames must share dimensions")
    for f in (hr_prev, hr_next):
        if f.width != BLOCK * w or f.height != BLOCK * h:
            raise ValidationError("HR frames must be 4x the LR dimensions")
    if delta_back < 1 or delta_fwd < 1:
        raise ValidationError("delta_back and delta_fwd must be >= 1")

    xp = lr_prev.pixels.astype(np.float64).ravel()
    xr = lr_ref.pixels.astype(np.float64).ravel()
    xn = lr_next.pixels.astype(np.float64).ravel()

    series = np.column_stack([xp, xr, xn])
    labels = _assign(series, model.means)
    coef, cond_var = _conditioners(model)
    a = coef[labels]
    mu_mid = (model.means[labels, 1]
              + a[:, 0] * (xp - model.means[labels, 0])
              + a[:, 1] * (xn - model.means[labels, 2]))
    var_mid = cond_var[labels]

    hp = blocks_4x4(hr_prev)
    hn = blocks_4x4(hr_next)
    forward = hp + (mu_mid - xp)[:, None]
    backward = hn - (xn - mu_mid)[:, None]
    wb, wf = 1.0 / delta_back, 1.0 / delta_fwd
    mean = (forward * wb + backward * wf) / (wb + wf)

    p = var_mid + DRIFT_RATE * min(delta_back, delta_fwd)
    kw = deg.w
    denom = p * float(kw @ kw) + deg.sigma_r2
    resid = xr - mean @ kw
    safe = denom > 0
    if not np.all(safe):
        warnings.warn("degenerate Kalman update on some blocks; priors kept there")
    scale = np.where(safe, p / np.where(safe, denom, 1.0), 0.0) * resid
    posterior = mean + scale[:, None] * kw[None, :]

    out = frame_from_blocks(posterior, h, w, lr_ref.frame_index)
    if clamp:
        return Frame(np.clip(out.pixels, 0.0, 1.0), lr_ref.frame_index)
    return out
