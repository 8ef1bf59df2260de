"""Speech-only view of a corpus: kept frames plus their original timestamps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import FeatureMatrix, normalize_features
from .vad import SpeechMask


@dataclass(frozen=True, eq=False)
class MaskedFile:
    file_id: str
    frames: np.ndarray
    times: np.ndarray
    frame_shift: float

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def span_seconds(self, first: int, last: int) -> tuple[float, float]:
        """Time extent of kept frames ``first..last`` (inclusive)."""
        half = self.frame_shift / 2
        return float(self.times[first] - half), float(self.times[last] + half)


def mask_corpus(matrices: Sequence[FeatureMatrix], masks: dict[str, SpeechMask],
                scope: str = "per-file") -> list[MaskedFile]:
    """Drop non-speech frames, then mean/variance normalize what is left.

    Files with fewer than two kept frames are carried along unnormalized;
    they cannot contribute segments anyway.
    """
    kept = []
    for m in matrices:
        keep = masks[m.file_id].keep
        kept.append(FeatureMatrix(m.file_id, m.frames[keep] if keep.any() else m.frames[:1],
                                  frame_shift=m.frame_shift, frame_length=m.frame_length,
                                  frame_times=m.frame_times[keep] if keep.any() else m.frame_times[:1]))
    counts = [int(masks[m.file_id].keep.sum()) for m in matrices]
    normable = [fm for fm, c in zip(kept, counts) if c >= 2]
    normed = {fm.file_id: fm for fm in normalize_features(normable, scope)} if normable else {}
    out = []
    for fm, c in zip(kept, counts):
        src = normed.get(fm.file_id, fm)
        frames = src.frames if c > 0 else src.frames[:0]
        times = src.frame_times if c > 0 else src.frame_times[:0]
        out.append(MaskedFile(fm.file_id, np.ascontiguousarray(frames), times, fm.frame_shift))
    return out
