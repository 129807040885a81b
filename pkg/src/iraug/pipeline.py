"""Dataset orchestration: ingestion, scarcity splits, the quantize ->
reconstruct -> re-implant augmentation flow, and metric reporting.

A run is fully determined by (config, global seed): every stochastic stage
draws from a stream derived per (stage label, pass, sample position), the
train and inference stages use disjoint labels, and scarcity splits are
nested prefixes of one seeded shuffle so the 10% condition is a
sub-experiment of the 30% condition.
"""

from __future__ import annotations

import json
import math
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import BackendDescriptor, BatchRequest, reconstruct
from .errors import BackendError, ConfigError
from .evaluation import (
    DEFAULT_CONNECTIVITY,
    DEFAULT_MATCH_RADIUS,
    MetricReport,
    aggregate_reports,
    compute_report,
)
from .manifest import AugmentationRecord, read_manifest, sha256_file, write_manifest
from .raster import (
    load_gray_image,
    load_target_mask,
    save_gray_image,
    save_target_mask,
)
from .rng import derive_stream
from .squeezer import (
    GaussianSamplerConfig,
    apply_quantization,
    build_quant_spec,
    pixel_copy_paste,
    sample_bin_count,
)
from .types import require_same_shape

_RASTER_EXTS = (".png", ".pgm")
MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class IndexEntry:
    sample_id: str
    image_path: str  # relative to the dataset root
    mask_path: str


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    entries: tuple

    def __len__(self) -> int:
        return len(self.entries)

    def abs_image(self, entry: IndexEntry) -> Path:
        return self.root / entry.image_path

    def abs_mask(self, entry: IndexEntry) -> Path:
        return self.root / entry.mask_path

    def save_tsv(self, path) -> None:
        lines = [
            f"{e.sample_id}\t{e.image_path}\t{e.mask_path}" for e in self.entries
        ]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")

    @classmethod
    def load_tsv(cls, path, root) -> "DatasetIndex":
        entries = []
        for line in Path(path).read_text("utf-8").splitlines():
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ConfigError(f"malformed index line: {line!r}")
            entries.append(IndexEntry(*parts))
        return cls(root=Path(root), entries=tuple(entries))


def ingest(dataset_root) -> DatasetIndex:
    """Index an images/ + masks/ dataset layout, pairing files by stem."""
    root = Path(dataset_root)
    images_dir, masks_dir = root / "images", root / "masks"
    if not images_dir.is_dir() or not masks_dir.is_dir():
        raise ConfigError(f"dataset root {root} needs images/ and masks/ subdirs")
    masks = {}
    for p in sorted(masks_dir.iterdir()):
        if p.suffix.lower() in _RASTER_EXTS:
            masks[p.stem] = p
    entries, missing = [], []
    for p in sorted(images_dir.iterdir()):
        if p.suffix.lower() not in _RASTER_EXTS:
            continue
        if p.stem in masks:
            entries.append(
                IndexEntry(
                    sample_id=p.stem,
                    image_path=str(p.relative_to(root)),
                    mask_path=str(masks[p.stem].relative_to(root)),
                )
            )
        else:
            missing.append(p.stem)
    if missing:
        raise ConfigError(f"images without masks: {', '.join(missing)}")
    ids = [e.sample_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate sample ids in dataset")
    return DatasetIndex(root=root, entries=tuple(entries))


def split_dataset(index: DatasetIndex, ratio: float, seed: int) -> DatasetIndex:
    """Deterministic shuffled prefix of ceil(ratio * N) samples.

    Subsets at different ratios under one seed are nested prefixes of the
    same shuffle, so smaller scarcity conditions are sub-experiments of
    larger ones.
    """
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"split ratio must be in (0, 1], got {ratio}")
    n = len(index)
    size = math.ceil(ratio * n)
    if size == 0:
        raise ConfigError("split selects no samples (empty dataset)")
    gen = derive_stream(seed, "split", 0).generator()
    perm = gen.permutation(n)
    selected = tuple(index.entries[i] for i in perm[:size])
    return DatasetIndex(root=index.root, entries=selected)


@dataclass(frozen=True)
class MetricOptions:
    match_radius: float = DEFAULT_MATCH_RADIUS
    connectivity: int = DEFAULT_CONNECTIVITY

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.match_radius < 0:
            raise ConfigError("match_radius must be >= 0")


@dataclass(frozen=True)
class PipelineConfig:
    dataset_root: Path
    output_root: Path
    ratio: float = 1.0
    global_seed: int = 0
    stage: str = "infer"  # stream-label prefix; train/infer draws never collide
    passes: int = 1
    workers: int = 4
    gaussian: GaussianSamplerConfig = field(default_factory=GaussianSamplerConfig)
    backends: tuple = ()  # ordered reconstruction chain
    metrics: MetricOptions = field(default_factory=MetricOptions)

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.passes < 1:
            raise ConfigError(f"passes must be >= 1, got {self.passes}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.stage or any(ch in self.stage for ch in ".\x1f"):
            raise ConfigError(f"invalid stage label {self.stage!r}")
        names = [b.name for b in self.backends]
        if len(set(names)) != len(names):
            raise ConfigError("backend names must be unique")

    def validate_paths(self) -> None:
        if not Path(self.dataset_root).is_dir():
            raise ConfigError(f"dataset root does not exist: {self.dataset_root}")


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Read a JSON config file; overrides replace top-level fields."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw, base_dir=path.parent)


def config_from_dict(raw: dict, base_dir=Path(".")) -> PipelineConfig:
    def _path(key):
        if key not in raw:
            raise ConfigError(f"config missing required field {key!r}")
        p = Path(raw[key])
        return p if p.is_absolute() else Path(base_dir) / p

    gaussian = GaussianSamplerConfig(**raw.get("gaussian", {}))
    metrics = MetricOptions(**raw.get("metrics", {}))
    backends = tuple(
        BackendDescriptor(
            name=b["name"], kind=b["kind"], params=b.get("params", {})
        )
        for b in raw.get("backends", [])
    )
    return PipelineConfig(
        dataset_root=_path("dataset_root"),
        output_root=_path("output_root"),
        ratio=float(raw.get("ratio", 1.0)),
        global_seed=int(raw.get("global_seed", 0)),
        stage=raw.get("stage", "infer"),
        passes=int(raw.get("passes", 1)),
        workers=int(raw.get("workers", 4)),
        gaussian=gaussian,
        backends=backends,
        metrics=metrics,
    )


@dataclass
class _Prepared:
    position: int
    entry: IndexEntry
    out_name: str
    image: object = None
    mask: object = None
    num: int = 0
    spec: object = None
    quantized: object = None
    seeds: dict = field(default_factory=dict)


def _squeeze_one(config: PipelineConfig, index: DatasetIndex, item: _Prepared,
                 pass_no: int) -> _Prepared:
    img = load_gray_image(index.abs_image(item.entry))
    mask = load_target_mask(index.abs_mask(item.entry))
    require_same_shape(img, mask)
    ctx_num = derive_stream(
        config.global_seed, f"{config.stage}.num.pass{pass_no}", item.position
    )
    ctx_spec = derive_stream(
        config.global_seed, f"{config.stage}.spec.pass{pass_no}", item.position
    )
    item.num = sample_bin_count(config.gaussian, ctx_num)
    item.spec = build_quant_spec(img, item.num, ctx_spec)
    item.image, item.mask = img, mask
    item.quantized = apply_quantization(img, mask, item.spec)
    item.seeds = {"num": ctx_num.stream_id, "spec": ctx_spec.stream_id}
    return item


def _run_chain(config: PipelineConfig, work: list[_Prepared], scratch: Path):
    """Push the whole pass through the backend chain as directory batches.

    Returns ({sample_id: final GrayImage}, {sample_id: [stage digests]}).
    """
    stage0 = scratch / "stage0"
    stage0.mkdir(parents=True, exist_ok=True)
    cur, mask_paths = {}, {}
    for it in work:
        img_p = stage0 / f"{it.entry.sample_id}.png"
        msk_p = stage0 / f"{it.entry.sample_id}.mask.png"
        save_gray_image(it.quantized, img_p)
        save_target_mask(it.mask, msk_p)
        cur[it.entry.sample_id] = img_p
        mask_paths[it.entry.sample_id] = msk_p
    digests = {it.entry.sample_id: [] for it in work}
    for k, backend in enumerate(config.backends):
        outdir = scratch / f"stage{k + 1}"
        req = BatchRequest.build(
            [
                (it.entry.sample_id, cur[it.entry.sample_id],
                 mask_paths[it.entry.sample_id])
                for it in work
            ],
            outdir,
        )
        resp = reconstruct(req, backend)
        for sid, path in resp.outputs:
            cur[sid] = path
            digests[sid].append(sha256_file(path))
    finals = {sid: load_gray_image(p) for sid, p in cur.items()}
    return finals, digests


def run_augment(config: PipelineConfig, resume: bool = False):
    """Generate one synthetic sample per selected source image per pass.

    Returns the full record list; also writes images, masks and the
    manifest under config.output_root. With resume=True, samples already
    present in the manifest are kept and only missing ones are generated.
    """
    config.validate_paths()
    index = ingest(config.dataset_root)
    subset = split_dataset(index, config.ratio, config.global_seed)

    out_root = Path(config.output_root)
    (out_root / "images").mkdir(parents=True, exist_ok=True)
    (out_root / "masks").mkdir(parents=True, exist_ok=True)
    manifest_path = out_root / MANIFEST_NAME

    existing = {}
    if resume and manifest_path.is_file():
        for rec in read_manifest(manifest_path):
            if rec.status == "ok":
                existing[rec.output_path] = rec

    chain_names = [b.name for b in config.backends]
    backend_field = "+".join(chain_names) if chain_names else "none"
    records: list[AugmentationRecord] = []
    scratch_root = out_root / ".scratch"

    for pass_no in range(1, config.passes + 1):
        work: list[_Prepared] = []
        slots: list[tuple[str, _Prepared | None]] = []
        for pos, entry in enumerate(subset.entries):
            out_name = f"{entry.sample_id}__gen{pass_no}.png"
            rel_out = f"images/{out_name}"
            if rel_out in existing:
                slots.append((rel_out, None))
                continue
            item = _Prepared(position=pos, entry=entry, out_name=out_name)
            work.append(item)
            slots.append((rel_out, item))

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(
                lambda it: _squeeze_one(config, subset, it, pass_no), work
            ))

        finals, stage_digests = {}, {}
        if config.backends and work:
            scratch = scratch_root / f"pass{pass_no}"
            try:
                finals, stage_digests = _run_chain(config, work, scratch)
            except BackendError:
                _write_partial(manifest_path, records,
                               reason=f"backend failure in pass {pass_no}")
                raise

        for rel_out, item in slots:
            if item is None:
                records.append(existing[rel_out])
                continue
            sid = item.entry.sample_id
            final = finals.get(sid, item.quantized)
            gen = pixel_copy_paste(final, item.image, item.mask)
            img_path = out_root / "images" / item.out_name
            msk_path = out_root / "masks" / item.out_name
            save_gray_image(gen, img_path)
            save_target_mask(item.mask, msk_path)
            records.append(
                AugmentationRecord(
                    source_id=sid,
                    stage_seeds=item.seeds,
                    quant_spec_digest=item.spec.digest(),
                    backend_name=backend_field,
                    output_path=rel_out,
                    quant_spec=item.spec.to_json_dict(),
                    num_intervals=item.num,
                    backend_chain=tuple(chain_names),
                    stage_digests=tuple(stage_digests.get(sid, ())),
                    output_digest=sha256_file(img_path),
                    mask_path=f"masks/{item.out_name}",
                )
            )

    write_manifest(records, manifest_path)
    shutil.rmtree(scratch_root, ignore_errors=True)
    return records


def _write_partial(manifest_path, records, reason: str) -> None:
    lines = [r.to_json_line() for r in records]
    lines.append(json.dumps(
        {"marker": "aborted", "error_category": "backend", "reason": reason},
        sort_keys=True, separators=(",", ":"),
    ))
    Path(manifest_path).write_text("\n".join(lines) + "\n", "utf-8")


@dataclass(frozen=True)
class ReportResult:
    per_image: tuple  # ((sample_id, MetricReport), ...)
    aggregate: MetricReport
    unmatched_pred: tuple
    unmatched_gt: tuple


def _stem_map(directory: Path) -> dict:
    out = {}
    for p in sorted(Path(directory).iterdir()):
        if p.suffix.lower() in _RASTER_EXTS:
            out[p.stem] = p
    return out


def report_directories(
    pred_dir, gt_dir, options: MetricOptions = MetricOptions()
) -> ReportResult:
    """Score prediction masks against ground truth, paired by file stem.

    Unmatched sample ids on either side are excluded and surfaced in the
    result. The aggregate pools raw pixel/target counts across the dataset
    rather than averaging per-image rates.
    """
    preds, gts = _stem_map(pred_dir), _stem_map(gt_dir)
    common = sorted(set(preds) & set(gts))
    if not common:
        raise ConfigError("no prediction/ground-truth pairs share a sample id")
    per_image = []
    for sid in common:
        pred = load_target_mask(preds[sid])
        gt = load_target_mask(gts[sid])
        require_same_shape(pred, gt)
        per_image.append(
            (sid, compute_report(pred, gt, options.match_radius, options.connectivity))
        )
    agg = aggregate_reports([r for _, r in per_image])
    return ReportResult(
        per_image=tuple(per_image),
        aggregate=agg,
        unmatched_pred=tuple(sorted(set(preds) - set(gts))),
        unmatched_gt=tuple(sorted(set(gts) - set(preds))),
    )
