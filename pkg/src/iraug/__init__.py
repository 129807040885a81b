"""iraug: deterministic quantization-based augmentation and detection
metrics for infrared small-target imagery."""

from .backends import (
    BackendDescriptor,
    BatchRequest,
    BatchResponse,
    l2_reconstruction_loss,
    reconstruct,
    smooth_background,
)
from .diffusion import (
    Denoiser,
    FixedNoiseDenoiser,
    GaussianPriorDenoiser,
    LatentTensor,
    NoiseSchedule,
    OrthogonalCodec,
    ZeroDenoiser,
    build_schedule,
    forward_noise,
    jump_sample,
    ldm_loss,
    resample_loss,
)
from .errors import (
    BackendError,
    ConfigError,
    ContractError,
    RasterFormatError,
    RasterIOError,
    ToolkitError,
)
from .evaluation import (
    ComponentSet,
    MetricReport,
    aggregate_reports,
    compute_report,
    compute_scr,
    connected_components,
    pd_fa_sweep,
    pixel_metrics,
    soft_iou_loss,
    target_metrics,
)
from .manifest import AugmentationRecord, read_manifest, sha256_file, write_manifest
from .pipeline import (
    DatasetIndex,
    MetricOptions,
    PipelineConfig,
    ingest,
    load_config,
    report_directories,
    run_augment,
    split_dataset,
)
from .raster import (
    load_gray_image,
    load_target_mask,
    save_gray_image,
    save_target_mask,
)
from .rng import RandomnessContext, derive_stream
from .squeezer import (
    GaussianSamplerConfig,
    QuantSpec,
    apply_quantization,
    build_quant_spec,
    pixel_copy_paste,
    sample_bin_count,
)

__version__ = "0.1.0"
