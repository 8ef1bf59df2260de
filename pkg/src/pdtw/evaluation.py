"""Scoring discovered pairs against gold phone/word annotations."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyPairSet, MalformedLine, OverlappingIntervals, UnknownFile
from .vad import SpeechMask

PHONE_MIN_FRACTION = 0.5
PHONE_MIN_SECONDS = 0.030
BOUNDARY_TOLERANCE = 0.030
_EPS = 1e-9


@dataclass(frozen=True)
class Interval:
    start: float
    end: float
    label: str


@dataclass
class GoldAnnotation:
    phones: dict[str, list[Interval]] = field(default_factory=dict)
    words: dict[str, list[Interval]] = field(default_factory=dict)


@dataclass(frozen=True)
class Fragment:
    file_id: str
    onset: float
    offset: float


@dataclass(frozen=True)
class EvalReport:
    ned: float
    cov: float
    m_score: float
    boundary_prc: float
    boundary_rcl: float
    boundary_f: float
    pair_count: int
    prc_undefined: bool = False

    def as_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.as_dict().items()) + "\n"

    def as_table(self) -> str:
        head = f"{'pairs':>7} {'NED':>7} {'Cov':>7} {'M':>7} {'PRC':>7} {'RCL':>7} {'F':>7}"
        row = (f"{self.pair_count:>7d} {self.ned:7.1f} {self.cov:7.1f} {self.m_score:7.1f} "
               f"{self.boundary_prc:7.1f} {self.boundary_rcl:7.1f} {self.boundary_f:7.1f}")
        return head + "\n" + row + "\n"

    def as_dict(self) -> dict:
        return {
            "pair_count": self.pair_count,
            "ned": self.ned,
            "cov": self.cov,
            "m_score": self.m_score,
            "boundary_prc": self.boundary_prc,
            "boundary_rcl": self.boundary_rcl,
            "boundary_f": self.boundary_f,
            "prc_undefined": int(self.prc_undefined),
        }


def _read_tier(path) -> dict[str, list[Interval]]:
    tier: dict[str, list[Interval]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise MalformedLine("expected <file_id>\\t<start_s>\\t<end_s>\\t<label>", lineno, path)
            fid, s, e, label = parts
            try:
                start, end = float(s), float(e)
            except ValueError as exc:
                raise MalformedLine(str(exc), lineno, path) from exc
            if not end > start:
                raise MalformedLine(f"interval end {end} <= start {start}", lineno, path)
            tier.setdefault(fid, []).append(Interval(start, end, label))
    for fid, ivs in tier.items():
        ivs.sort(key=lambda iv: (iv.start, iv.end))
        for a, b in zip(ivs, ivs[1:]):
            if b.start < a.end - _EPS:
                raise OverlappingIntervals(
                    f"{path}: {fid} has overlapping intervals [{a.start}, {a.end}) and [{b.start}, {b.end})")
    return tier


def load_gold(phones_path, words_path=None) -> GoldAnnotation:
    words = _read_tier(words_path) if words_path is not None else {}
    return GoldAnnotation(_read_tier(phones_path), words)


def transcribe_interval(gold: GoldAnnotation, file_id: str, t0: float, t1: float) -> list[str]:
    """Phone labels substantially covered by [t0, t1], in temporal order.

    A phone counts when the overlap is at least half its duration or at least
    30 ms.
    """
    if file_id not in gold.phones and file_id not in gold.words:
        raise UnknownFile(f"no gold annotation for file {file_id!r}")
    out = []
    for iv in gold.phones.get(file_id, ()):
        if iv.end <= t0 or iv.start >= t1:
            continue
        ov = min(t1, iv.end) - max(t0, iv.start)
        if ov >= PHONE_MIN_FRACTION * (iv.end - iv.start) - _EPS or ov >= PHONE_MIN_SECONDS - _EPS:
            out.append(iv.label)
    return out


def levenshtein(a: Sequence, b: Sequence) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def _pair_fragments(pair) -> tuple[Fragment, Fragment]:
    if isinstance(pair, tuple):
        return pair
    return (Fragment(pair.file_a, pair.onset_a, pair.offset_a),
            Fragment(pair.file_b, pair.onset_b, pair.offset_b))


def pair_ned(pair, gold: GoldAnnotation) -> float:
    fa, fb = _pair_fragments(pair)
    ta = transcribe_interval(gold, fa.file_id, fa.onset, fa.offset)
    tb = transcribe_interval(gold, fb.file_id, fb.onset, fb.offset)
    longest = max(len(ta), len(tb))
    if longest == 0:
        return 1.0
    return levenshtein(ta, tb) / longest


def ned(pairs: Sequence, gold: GoldAnnotation) -> float:
    """Mean normalized edit distance over pairs, in percent.

    ``pairs`` holds DiscoveredPair objects or (Fragment, Fragment) tuples.
    """
    if not pairs:
        raise EmptyPairSet("NED is undefined for an empty pair set")
    return 100.0 * sum(pair_ned(p, gold) for p in pairs) / len(pairs)


def _fragments(pairs: Iterable) -> list[Fragment]:
    out = []
    for p in pairs:
        out.extend(_pair_fragments(p))
    return out


def coverage(pairs: Sequence, masks: Mapping[str, SpeechMask]) -> float:
    """Percent of kept (speech) frames whose center lies inside some fragment."""
    total = sum(m.n_kept for m in masks.values())
    if total == 0 or not pairs:
        return 0.0
    covered = {fid: np.zeros(m.n_kept, dtype=bool) for fid, m in masks.items()}
    for frag in _fragments(pairs):
        if frag.file_id not in masks:
            raise UnknownFile(f"no speech mask for file {frag.file_id!r}")
        t = masks[frag.file_id].kept_frame_times
        lo = np.searchsorted(t, frag.onset - _EPS, side="left")
        hi = np.searchsorted(t, frag.offset - _EPS, side="left")
        covered[frag.file_id][lo:hi] = True
    return 100.0 * sum(int(c.sum()) for c in covered.values()) / total


def m_score(ned_pct: float, cov_pct: float) -> float:
    """Harmonic mean of purity (100 - NED) and coverage."""
    purity = 100.0 - ned_pct
    denom = purity + cov_pct
    if denom <= 0.0 or purity <= 0.0 or cov_pct <= 0.0:
        return 0.0
    return 2.0 * purity * cov_pct / denom


def _merge_within(times: Sequence[float], tol: float) -> list[float]:
    kept: list[float] = []
    for t in sorted(times):
        if not kept or t - kept[-1] > tol + _EPS:
            kept.append(t)
    return kept


def gold_boundaries(gold: GoldAnnotation) -> dict[str, list[float]]:
    out = {}
    for fid, ivs in gold.words.items():
        pts = sorted({round(x, 9) for iv in ivs for x in (iv.start, iv.end)})
        out[fid] = pts
    return out


def boundary_prf(pairs: Sequence, gold: GoldAnnotation,
                 tolerance: float = BOUNDARY_TOLERANCE) -> tuple[float, float, float, bool]:
    """Word-boundary precision, recall, F (percent) and a flag for undefined precision."""
    predicted: dict[str, list[float]] = {}
    for frag in _fragments(pairs):
        predicted.setdefault(frag.file_id, []).extend([frag.onset, frag.offset])
    gold_b = gold_boundaries(gold)
    n_gold = sum(len(v) for v in gold_b.values())
    n_pred = 0
    matched = 0
    for fid, times in predicted.items():
        preds = _merge_within(times, tolerance)
        n_pred += len(preds)
        refs = gold_b.get(fid, [])
        used = [False] * len(refs)
        for t in preds:
            for r, g in enumerate(refs):
                if not used[r] and abs(t - g) <= tolerance + _EPS:
                    used[r] = True
                    matched += 1
                    break
    undefined = n_pred == 0
    prc = 0.0 if undefined else 100.0 * matched / n_pred
    rcl = 0.0 if n_gold == 0 else 100.0 * matched / n_gold
    f = 0.0 if prc + rcl == 0 else 2 * prc * rcl / (prc + rcl)
    return prc, rcl, f, undefined


def evaluate(pairs: Sequence, gold: GoldAnnotation, masks: Mapping[str, SpeechMask],
             tolerance: float = BOUNDARY_TOLERANCE) -> EvalReport:
    ned_pct = ned(pairs, gold) if pairs else 100.0
    cov_pct = coverage(pairs, masks)
    prc, rcl, f, undefined = boundary_prf(pairs, gold, tolerance)
    return EvalReport(ned_pct, cov_pct, m_score(ned_pct, cov_pct), prc, rcl, f,
                      len(pairs), undefined)
