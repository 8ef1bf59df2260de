"""Audio front-end: WAV loading, 39-dim MFCCs, normalization, feature file I/O."""

from __future__ import annotations

import logging
import struct
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.fft import dct

from .errors import DimensionMismatch, MalformedHeader, MalformedLine, TooShort, UnsupportedFormat

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000
FRAME_SHIFT = 0.010
FRAME_LENGTH = 0.025
PRE_EMPHASIS = 0.97
N_FFT = 512
N_MELS = 24
N_CEPS = 13
DELTA_WIDTH = 2
#: Floor added before the log of mel energies.
MEL_FLOOR = 1e-10

FEAT_MAGIC = b"PDTWFEAT"
_FEAT_HEADER = struct.Struct("<8sIIf")


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int
    file_id: str


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    file_id: str
    frames: np.ndarray
    frame_shift: float = FRAME_SHIFT
    frame_length: float = FRAME_LENGTH
    frame_times: np.ndarray | None = None
    degenerate_dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"{self.file_id}: frames must be a non-empty N x d matrix")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        if self.frame_times is None:
            times = np.arange(frames.shape[0]) * self.frame_shift + self.frame_length / 2
        else:
            times = np.asarray(self.frame_times, dtype=np.float64)
            if times.shape != (frames.shape[0],):
                raise ValueError(f"{self.file_id}: one frame time per row required")
        times.setflags(write=False)
        object.__setattr__(self, "frame_times", times)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def load_wav(path) -> Waveform:
    """Read a 16 kHz mono PCM16 WAV file, scaled into [-1, 1)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise UnsupportedFormat(f"{path}: truncated RIFF data") from exc
    if channels != 1:
        raise UnsupportedFormat(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise UnsupportedFormat(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormat(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise UnsupportedFormat(f"{path}: no audio samples")
    return Waveform(samples, rate, path.stem)


def write_wav(path, samples, sample_rate: int = SAMPLE_RATE) -> None:
    pcm = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = N_MELS, n_fft: int = N_FFT, sample_rate: int = SAMPLE_RATE,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filters (n_mels x n_fft//2+1) equally spaced on the mel scale."""
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    fb = np.zeros((n_mels, bins.size))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (bins - lo) / (mid - lo)
        down = (hi - bins) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def frame_count(n_samples: int, frame_len: int, hop: int) -> int:
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // hop + 1


def deltas(feats: np.ndarray, width: int = DELTA_WIDTH) -> np.ndarray:
    """Regression deltas over +-width frames, edges replicated."""
    n = feats.shape[0]
    padded = np.pad(feats, ((width, width), (0, 0)), mode="edge")
    denom = 2.0 * sum(k * k for k in range(1, width + 1))
    out = np.zeros_like(feats)
    for k in range(1, width + 1):
        out += k * (padded[width + k:width + k + n] - padded[width - k:width - k + n])
    return out / denom


def compute_mfcc(w: Waveform) -> FeatureMatrix:
    """13 cepstra (c0 included) plus deltas and delta-deltas, 39 columns."""
    frame_len = int(round(FRAME_LENGTH * w.sample_rate))
    hop = int(round(FRAME_SHIFT * w.sample_rate))
    x = np.asarray(w.samples, dtype=np.float64)
    n = frame_count(x.size, frame_len, hop)
    if n < 1:
        raise TooShort(f"{w.file_id}: {x.size} samples is shorter than one {frame_len}-sample window")

    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - PRE_EMPHASIS * x[:-1]

    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    frames = y[idx] * np.hamming(frame_len)[None, :]
    mag = np.abs(np.fft.rfft(frames, n=N_FFT, axis=1))
    fb = mel_filterbank(sample_rate=w.sample_rate)
    logmel = np.log(mag @ fb.T + MEL_FLOOR)
    ceps = dct(logmel, type=2, axis=1, norm="ortho")[:, :N_CEPS]

    d1 = deltas(ceps)
    d2 = deltas(d1)
    return FeatureMatrix(
        file_id=w.file_id,
        frames=np.hstack([ceps, d1, d2]),
        frame_shift=hop / w.sample_rate,
        frame_length=frame_len / w.sample_rate,
    )


def _moments(blocks: Sequence[np.ndarray]):
    stacked = np.vstack(blocks)
    if stacked.shape[0] < 2:
        raise ValueError("normalization needs at least 2 frames in scope")
    mean = stacked.mean(axis=0)
    std = np.sqrt(((stacked - mean) ** 2).mean(axis=0))
    return mean, std


def _apply(m: FeatureMatrix, mean, std) -> FeatureMatrix:
    degenerate = std < 1e-12
    scale = np.where(degenerate, 1.0, std)
    if degenerate.any():
        log.warning("%s: %d zero-variance dimension(s) left unscaled",
                    m.file_id, int(degenerate.sum()))
    return replace(m, frames=(m.frames - mean) / scale,
                   degenerate_dims=tuple(int(i) for i in np.flatnonzero(degenerate)))


def normalize_features(m, scope: str = "per-file"):
    """Zero-mean, unit-variance scaling of each feature dimension.

    ``m`` is a single FeatureMatrix or a sequence of them. With
    ``scope="per-corpus"`` statistics are pooled over the whole sequence.
    Constant dimensions are centered and reported in ``degenerate_dims``.
    """
    single = isinstance(m, FeatureMatrix)
    mats = [m] if single else list(m)
    if scope == "per-file":
        out = []
        for fm in mats:
            mean, std = _moments([fm.frames])
            out.append(_apply(fm, mean, std))
    elif scope == "per-corpus":
        if not mats:
            return []
        mean, std = _moments([fm.frames for fm in mats])
        out = [_apply(fm, mean, std) for fm in mats]
    else:
        raise ValueError(f"unknown normalization scope {scope!r}")
    return out[0] if single else out


def store_features(m: FeatureMatrix, path) -> None:
    """Write ``m`` in the PDTWFEAT binary layout (values stored as float32)."""
    data = np.ascontiguousarray(m.frames, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_FEAT_HEADER.pack(FEAT_MAGIC, data.shape[0], data.shape[1], m.frame_shift))
        fh.write(data.tobytes())


def _read_binary(path: Path) -> FeatureMatrix:
    blob = path.read_bytes()
    if len(blob) < _FEAT_HEADER.size:
        raise MalformedHeader(f"{path}: file shorter than the {_FEAT_HEADER.size}-byte header")
    magic, n, d, shift = _FEAT_HEADER.unpack_from(blob)
    if magic != FEAT_MAGIC:
        raise MalformedHeader(f"{path}: bad magic {magic!r}")
    if n < 1 or d < 1:
        raise MalformedHeader(f"{path}: empty matrix ({n} x {d})")
    if not shift > 0:
        raise MalformedHeader(f"{path}: frame shift must be positive, got {shift}")
    expected = _FEAT_HEADER.size + 4 * n * d
    if len(blob) != expected:
        raise MalformedHeader(f"{path}: header says {n}x{d} but payload is "
                              f"{len(blob) - _FEAT_HEADER.size} bytes")
    frames = np.frombuffer(blob, dtype="<f4", offset=_FEAT_HEADER.size).reshape(n, d)
    # shortest decimal that round-trips through float32, e.g. 0.01 rather than 0.0099999998
    shift = float(str(np.float32(shift)))
    return FeatureMatrix(path.stem, frames, frame_shift=shift, frame_length=shift)


def _read_csv(path: Path, frame_shift: float) -> FeatureMatrix:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(",")]
            except ValueError as exc:
                raise MalformedLine(str(exc), lineno, path) from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DimensionMismatch(f"{path}:{lineno}: {len(row)} values, expected {width}")
            rows.append(row)
    if not rows:
        raise MalformedHeader(f"{path}: no frames")
    return FeatureMatrix(path.stem, np.array(rows), frame_shift=frame_shift,
                         frame_length=frame_shift)


def load_features(path, frame_shift: float = FRAME_SHIFT) -> FeatureMatrix:
    """Load a PDTWFEAT binary or a frame-per-row CSV file.

    ``frame_shift`` only applies to CSV input; the binary header carries its own.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv(path, frame_shift)
    return _read_binary(path)
