"""Dual-stream high-speed video fusion toolkit and benchmark harness.

Fuses a dense low-resolution image stream with a sparse high-resolution
stream into a dense high-resolution reconstruction, and provides the
degradation simulation, quality metrics, baselines, and experiment grid
used to evaluate such reconstructions.
"""

from .attention import (AttentionHistogram, AttentionRecord, MonotonicityStats,
                        NormalizedAttention, histogram2d, monotonicity_stat,
                        normalize_scores, read_attention_csv, write_attention_csv)
from .bayes import (BlockDegradationModel, BlockPrior, ClusterModel,
                    calibrate_degradation, cluster_count, condition_mid,
                    fit_clusters, fuse_frame, kalman_update_block)
from .bench import (Condition, ConditionSet, GridConfig, TimingReport,
                    build_conditions, grid_cells, run_grid, time_method)
from .bicubic import ResampleConfig, cubic_kernel, upsample_bicubic
from .degrade import (NoiseConfig, NormalizationStats, add_poisson, bin_spatial,
                      calibrate_b0, downsample_temporal, normalize_sequence)
from .errors import FrameFormatError, ValidationError
from .frames import (Frame, Role, Sequence, SequencePair, read_frame, read_manifest,
                     sequence_from_arrays, write_frame, write_manifest)
from .metrics import (MetricsConfig, MetricsRow, PSNR_INFINITE, SummaryRow, aad, psnr,
                      ssim, summarize)
from .phantom import PhantomConfig, div_prev, gen_phantom

__version__ = "0.1.0"
