"""End-to-end discovery: features -> VAD -> stage 1 -> stage 2 -> outputs."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classfile import write_pairs
from .config import PipelineConfig
from .corpus import MaskedFile, mask_corpus
from .errors import EmptyCorpus, PdtwError
from .features import FeatureMatrix, compute_mfcc, load_features, load_wav, normalize_features
from .stage1 import CandidatePair, SegmentTable, calibrate_segment_distances, find_candidates, \
    segment_corpus, write_candidates
from .stage2 import SELF_OVERLAP, TOO_SHORT, DiscoveredPair, Rejection, align_candidates, \
    calibrate_frame_distances
from .stats import NormalParams
from .vad import SpeechMask, apply_vad, fit_vad, keep_all, write_masks

log = logging.getLogger(__name__)

PAIRS_FILE = "pairs.txt"
SIDECAR_FILE = "pairs_lr.tsv"
STATS_FILE = "stats.txt"
MASKS_FILE = "masks.tsv"
CANDIDATES_FILE = "candidates.tsv"


class StageError(PdtwError):
    def __init__(self, stage: str, cause: BaseException, file: str | None = None):
        where = f" ({file})" if file else ""
        super().__init__(f"{stage} failed{where}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.file = file
        self.cause = cause


@dataclass
class RunStats:
    segment_count: int = 0
    candidate_count: int = 0
    accepted_pairs: int = 0
    rejected_too_short: int = 0
    rejected_self_overlap: int = 0
    frame_count: int = 0
    kept_frame_count: int = 0
    frame_shift: float = 0.0
    frame_length: float = 0.0
    timings: dict[str, float] = field(default_factory=dict)
    segment_params: NormalParams | None = None
    frame_params: NormalParams | None = None

    def consistent(self) -> bool:
        return (self.accepted_pairs + self.rejected_too_short + self.rejected_self_overlap
                == self.candidate_count)

    def as_text(self) -> str:
        rows = [
            ("segment_count", self.segment_count),
            ("candidate_count", self.candidate_count),
            ("accepted_pairs", self.accepted_pairs),
            ("rejected_too_short", self.rejected_too_short),
            ("rejected_self_overlap", self.rejected_self_overlap),
            ("frame_count", self.frame_count),
            ("kept_frame_count", self.kept_frame_count),
            ("frame_shift", repr(self.frame_shift)),
            ("frame_length", repr(self.frame_length)),
        ]
        for name, p in (("segment", self.segment_params), ("frame", self.frame_params)):
            if p is not None:
                rows += [(f"{name}_mu", repr(p.mu)), (f"{name}_sigma", repr(p.sigma))]
        rows += [(f"time_{k}", f"{v:.3f}") for k, v in self.timings.items()]
        return "".join(f"{k}={v}\n" for k, v in rows)


@dataclass
class DiscoveryResult:
    pairs: list[DiscoveredPair]
    stats: RunStats
    masks: dict[str, SpeechMask]
    files: list[MaskedFile]
    table: SegmentTable
    candidates: list[CandidatePair]
    outcomes: list[DiscoveredPair | Rejection]


@contextmanager
def _timed(stats: RunStats, key: str):
    t0 = time.perf_counter()
    yield
    stats.timings[key] = time.perf_counter() - t0


def read_manifest(path) -> list[Path]:
    base = Path(path).parent
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            p = Path(line)
            out.append(p if p.is_absolute() else base / p)
    return out


def _load_one(path: Path, config: PipelineConfig) -> FeatureMatrix:
    try:
        if config.feature_source == "mfcc":
            return compute_mfcc(load_wav(path))
        return load_features(path, frame_shift=config.csv_frame_shift)
    except (PdtwError, OSError, ValueError) as exc:
        raise StageError("features", exc, str(path)) from exc


def load_corpus(inputs: Sequence, config: PipelineConfig) -> list[FeatureMatrix]:
    if not inputs:
        raise EmptyCorpus("no input files")
    paths = [Path(p) for p in inputs]
    if config.thread_count > 1:
        with ThreadPoolExecutor(max_workers=config.thread_count) as pool:
            mats = list(pool.map(lambda p: _load_one(p, config), paths))
    else:
        mats = [_load_one(p, config) for p in paths]
    seen = set()
    for m in mats:
        if m.file_id in seen:
            raise StageError("features", ValueError(f"duplicate file id {m.file_id!r}"), m.file_id)
        seen.add(m.file_id)
    return mats


def compute_masks(mats: Sequence[FeatureMatrix], config: PipelineConfig) -> dict[str, SpeechMask]:
    if not config.vad_enabled:
        return {m.file_id: keep_all(m) for m in mats}
    src = normalize_features(list(mats), config.normalization_scope) if config.vad_on_normalized else mats
    pooled = np.concatenate([m.frames[:, 0] for m in src])
    model = fit_vad(pooled, threshold=config.vad_threshold, larger=config.vad_larger,
                    rng_seed=config.rng_seed)
    return {m.file_id: apply_vad(model, s) for m, s in zip(mats, src)}


def _seeds(rng_seed: int) -> tuple[int, int]:
    ss = np.random.SeedSequence(rng_seed).spawn(2)
    return tuple(int(s.generate_state(1, dtype=np.uint64)[0]) for s in ss)


def discover(mats: Sequence[FeatureMatrix], config: PipelineConfig) -> DiscoveryResult:
    """Run VAD and both stages on already loaded feature matrices."""
    if not mats:
        raise EmptyCorpus("no input files")
    stats = RunStats(frame_count=sum(m.n_frames for m in mats),
                     frame_shift=mats[0].frame_shift, frame_length=mats[0].frame_length)
    seed1, seed2 = _seeds(config.rng_seed)
    try:
        with _timed(stats, "vad"):
            masks = compute_masks(mats, config)
            files = mask_corpus(mats, masks, config.normalization_scope)
    except PdtwError as exc:
        raise StageError("vad", exc) from exc
    stats.kept_frame_count = sum(f.n_frames for f in files)

    try:
        with _timed(stats, "stage1_segment"):
            table = segment_corpus(files, config.L, config.S, config.M)
        stats.segment_count = len(table)
        if len(table) < 2:
            candidates = []
        else:
            with _timed(stats, "stage1_calibrate"):
                stats.segment_params = calibrate_segment_distances(table, config.n_calib_samples, seed1)
            with _timed(stats, "stage1_search"):
                candidates = find_candidates(table, stats.segment_params, config.k, config.alpha,
                                             config.thread_count)
    except PdtwError as exc:
        raise StageError("stage1", exc) from exc
    stats.candidate_count = len(candidates)

    outcomes: list = []
    if candidates:
        try:
            with _timed(stats, "stage2_calibrate"):
                stats.frame_params = calibrate_frame_distances(files, config.n_calib_samples, seed2)
            with _timed(stats, "stage2_align"):
                outcomes = align_candidates(candidates, table, files, stats.frame_params,
                                            config.alpha, config.E, config.L_min,
                                            config.dtw_cost_mode, config.thread_count)
        except PdtwError as exc:
            raise StageError("stage2", exc) from exc
    pairs = [o for o in outcomes if isinstance(o, DiscoveredPair)]
    stats.accepted_pairs = len(pairs)
    stats.rejected_too_short = sum(1 for o in outcomes if isinstance(o, Rejection) and o.reason == TOO_SHORT)
    stats.rejected_self_overlap = sum(1 for o in outcomes
                                      if isinstance(o, Rejection) and o.reason == SELF_OVERLAP)
    log.info("segments=%d candidates=%d accepted=%d", stats.segment_count,
             stats.candidate_count, stats.accepted_pairs)
    return DiscoveryResult(pairs, stats, masks, files, table, candidates, outcomes)


def run_discover(config: PipelineConfig, inputs: Sequence, out_dir,
                 dump_candidates: bool = False) -> DiscoveryResult:
    """Full run from input paths; writes pairs, sidecar, stats and masks into ``out_dir``.

    Files this call created are removed again if any stage fails.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        t0 = time.perf_counter()
        mats = load_corpus(inputs, config)
        load_time = time.perf_counter() - t0
        result = discover(mats, config)
        result.stats.timings = {"features": load_time, **result.stats.timings}

        targets = [out / PAIRS_FILE, out / SIDECAR_FILE, out / MASKS_FILE, out / STATS_FILE]
        written.extend(targets)
        write_pairs(result.pairs, targets[0], targets[1])
        write_masks(result.masks.values(), targets[2])
        targets[3].write_text(result.stats.as_text())
        if dump_candidates:
            written.append(out / CANDIDATES_FILE)
            write_candidates(result.candidates, out / CANDIDATES_FILE)
        (out / "config.txt").write_text(config.as_text())
        written.append(out / "config.txt")
        return result
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
