"""Unsupervised speech/non-speech filtering with a 2-component GMM on c0."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateSample, MalformedLine
from .features import FeatureMatrix
from .stats import Gmm2Params, NormalParams, fit_gmm2, normal_cdf

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.01


@dataclass(frozen=True, eq=False)
class SpeechMask:
    file_id: str
    keep: np.ndarray
    kept_frame_times: np.ndarray

    @property
    def n_kept(self) -> int:
        return int(self.keep.sum())


@dataclass(frozen=True)
class VadModel:
    """Fitted speech component and the side of it whose tail gets cut.

    ``speech`` is None when the fit was degenerate; every frame is kept then.
    """
    speech: NormalParams | None
    cut_low_tail: bool = True
    threshold: float = DEFAULT_THRESHOLD
    gmm: Gmm2Params | None = None

    def keep(self, c0) -> np.ndarray:
        c0 = np.asarray(c0, dtype=np.float64)
        if self.speech is None:
            return np.ones(c0.shape, dtype=bool)
        p = normal_cdf(c0, self.speech, floor=0.0)
        tail = p if self.cut_low_tail else 1.0 - p
        return ~(np.atleast_1d(tail) < self.threshold).reshape(c0.shape)


def fit_vad(c0_pooled, threshold: float = DEFAULT_THRESHOLD,
            larger: str = "weight", rng_seed: int = 0) -> VadModel:
    """Fit the GMM on pooled c0 values and pick the speech component.

    ``larger="weight"`` takes the component with the larger mixture weight as
    speech, ``larger="mean"`` the one with the higher mean. The tail cut is the
    one facing the other component.
    """
    try:
        gmm = fit_gmm2(c0_pooled, rng_seed=rng_seed)
    except DegenerateSample as exc:
        log.warning("VAD disabled, GMM fit degenerate (%s); keeping all frames", exc)
        return VadModel(None, threshold=threshold)
    if larger == "weight":
        s = 1 if gmm.weight[1] > gmm.weight[0] else 0
    elif larger == "mean":
        s = 1
    else:
        raise ValueError(f"unknown speech-cluster rule {larger!r}")
    other = 1 - s
    return VadModel(gmm.component(s), cut_low_tail=gmm.mean[s] > gmm.mean[other],
                    threshold=threshold, gmm=gmm)


def compute_speech_mask(matrices: Sequence[FeatureMatrix], threshold: float = DEFAULT_THRESHOLD,
                        column: int = 0, larger: str = "weight",
                        rng_seed: int = 0) -> dict[str, SpeechMask]:
    """Corpus-global VAD: one GMM over every file's ``column``, then per-file masks."""
    if not matrices:
        return {}
    pooled = np.concatenate([m.frames[:, column] for m in matrices])
    model = fit_vad(pooled, threshold=threshold, larger=larger, rng_seed=rng_seed)
    return {m.file_id: apply_vad(model, m, column) for m in matrices}


def apply_vad(model: VadModel, m: FeatureMatrix, column: int = 0) -> SpeechMask:
    keep = model.keep(m.frames[:, column])
    return SpeechMask(m.file_id, keep, m.frame_times[keep])


def keep_all(m: FeatureMatrix) -> SpeechMask:
    return SpeechMask(m.file_id, np.ones(m.n_frames, dtype=bool), m.frame_times.copy())


def write_masks(masks: Iterable[SpeechMask], path) -> None:
    """TSV lines ``<file_id>\\t<frame_index>\\t<0|1>``."""
    with open(path, "w") as fh:
        for mask in masks:
            for i, k in enumerate(mask.keep):
                fh.write(f"{mask.file_id}\t{i}\t{int(k)}\n")


def read_masks(path, frame_shift: float, frame_length: float | None = None) -> dict[str, SpeechMask]:
    """Inverse of :func:`write_masks`; frame centers are rebuilt from the frame geometry."""
    frame_length = frame_shift if frame_length is None else frame_length
    rows: dict[str, list[tuple[int, bool]]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise MalformedLine("expected <file_id>\\t<frame_index>\\t<0|1>", lineno, path)
            try:
                idx = int(parts[1])
            except ValueError as exc:
                raise MalformedLine(f"bad frame index {parts[1]!r}", lineno, path) from exc
            rows.setdefault(parts[0], []).append((idx, parts[2] == "1"))
    masks = {}
    for fid, entries in rows.items():
        entries.sort()
        idx = np.array([e[0] for e in entries])
        if not np.array_equal(idx, np.arange(idx.size)):
            raise MalformedLine(f"frame indices for {fid} are not 0..{idx.size - 1}", None, path)
        keep = np.array([e[1] for e in entries], dtype=bool)
        times = idx * frame_shift + frame_length / 2
        masks[fid] = SpeechMask(fid, keep, times[keep])
    return masks
