"""Synthetic planted-pattern corpora with a known answer key."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .features import FeatureMatrix, store_features


@dataclass(frozen=True)
class SynthSpec:
    n_words: int = 20
    instances: int = 10
    noise: float = 0.3
    warp: float = 0.2
    background_seconds: float = 600.0
    n_files: int = 20
    dim: int = 39
    min_word_frames: int = 15
    max_word_frames: int = 40
    min_gap_frames: int = 20
    frame_shift: float = 0.010
    seed: int = 0


@dataclass(frozen=True)
class PlantedInstance:
    file_id: str
    word: str
    instance: int
    start_frame: int
    end_frame: int
    frame_shift: float

    @property
    def start_s(self) -> float:
        return self.start_frame * self.frame_shift

    @property
    def end_s(self) -> float:
        return self.end_frame * self.frame_shift


@dataclass
class SynthCorpus:
    spec: SynthSpec
    matrices: list[FeatureMatrix]
    planted: list[PlantedInstance]
    paths: dict[str, Path] = field(default_factory=dict)


def word_template(rng: np.random.Generator, n_frames: int, dim: int):
    """Smooth random trajectory, callable on normalized time in [0, 1], unit RMS."""
    knots = 2 + n_frames // 8
    u = np.linspace(0.0, 1.0, knots)
    spline = CubicSpline(u, rng.standard_normal((knots, dim)), axis=0)
    rms = np.sqrt(np.mean(spline(np.linspace(0.0, 1.0, n_frames)) ** 2))
    return lambda t: spline(t) / rms


def generate(spec: SynthSpec = SynthSpec()) -> SynthCorpus:
    rng = np.random.default_rng(spec.seed)
    words = []
    for w in range(spec.n_words):
        length = int(rng.integers(spec.min_word_frames, spec.max_word_frames + 1))
        words.append((f"w{w:03d}", length, word_template(rng, length, spec.dim)))

    tokens = []
    for name, length, tpl in words:
        for inst in range(spec.instances):
            factor = rng.uniform(1.0 - spec.warp, 1.0 + spec.warp)
            n = max(2, int(round(length * factor)))
            traj = tpl(np.linspace(0.0, 1.0, n))
            traj = traj + spec.noise * rng.standard_normal(traj.shape)
            tokens.append((name, inst, traj))

    order = rng.permutation(len(tokens))
    owner = rng.integers(0, spec.n_files, size=len(tokens))
    bg_frames = int(round(spec.background_seconds / spec.frame_shift / spec.n_files))

    matrices, planted = [], []
    for f in range(spec.n_files):
        fid = f"synth{f:03d}"
        mine = [tokens[t] for t, o in zip(order, owner[order]) if o == f]
        n_gaps = len(mine) + 1
        spare = bg_frames - n_gaps * spec.min_gap_frames
        if spare < 0:
            raise ValueError("background too short for the requested instances and gaps")
        gaps = spec.min_gap_frames + rng.multinomial(spare, np.full(n_gaps, 1.0 / n_gaps))
        pieces = []
        pos = 0
        for g, tok in zip(gaps, mine + [None]):
            pieces.append(rng.standard_normal((g, spec.dim)))
            pos += g
            if tok is not None:
                name, inst, traj = tok
                pieces.append(traj)
                planted.append(PlantedInstance(fid, name, inst, pos, pos + traj.shape[0],
                                               spec.frame_shift))
                pos += traj.shape[0]
        frames = np.vstack(pieces).astype(np.float32)
        matrices.append(FeatureMatrix(fid, frames, frame_shift=spec.frame_shift,
                                      frame_length=spec.frame_shift))
    planted.sort(key=lambda p: (p.file_id, p.start_frame))
    return SynthCorpus(spec, matrices, planted)


def write_corpus(corpus: SynthCorpus, out_dir) -> SynthCorpus:
    """Write feature files, manifest, gold tiers and the planted-extent key."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    feat_dir = out / "features"
    feat_dir.mkdir(exist_ok=True)
    paths = {}
    for m in corpus.matrices:
        p = feat_dir / f"{m.file_id}.pdtwfeat"
        store_features(m, p)
        paths[m.file_id] = p
    (out / "manifest.txt").write_text("".join(f"features/{p.name}\n" for p in paths.values()))
    gold = "".join(f"{p.file_id}\t{p.start_s:.3f}\t{p.end_s:.3f}\t{p.word}\n" for p in corpus.planted)
    (out / "phones.tsv").write_text(gold)
    (out / "words.tsv").write_text(gold)
    (out / "planted.tsv").write_text(
        "file_id\tword\tinstance\tstart_frame\tend_frame\tstart_s\tend_s\tframe_shift\n"
        + "".join(f"{p.file_id}\t{p.word}\t{p.instance}\t{p.start_frame}\t{p.end_frame}\t"
                  f"{p.start_s:.3f}\t{p.end_s:.3f}\t{p.frame_shift!r}\n" for p in corpus.planted))
    corpus.paths = paths
    return corpus


def read_planted(path) -> list[PlantedInstance]:
    rows = Path(path).read_text().splitlines()[1:]
    out = []
    for row in rows:
        fid, word, inst, s, e, _, _, shift = row.split("\t")
        out.append(PlantedInstance(fid, word, int(inst), int(s), int(e), float(shift)))
    return out
