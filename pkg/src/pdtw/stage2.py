"""High-resolution probabilistic DTW and likelihood-ratio sub-path selection."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .corpus import MaskedFile
from .stage1 import CandidatePair, SegmentTable
from .stats import DEFAULT_CALIB_SAMPLES, NormalParams, normal_cdf, sample_distance_distribution

TOO_SHORT = "too_short"
SELF_OVERLAP = "self_overlap"

_STEPS = {(1, 0), (0, 1), (1, 1)}


@dataclass(frozen=True, eq=False)
class AlignmentPath:
    """Monotone corner-to-corner path through an I x J probability matrix."""
    steps: np.ndarray
    p_d: np.ndarray
    shape: tuple[int, int]
    cost: float = math.nan

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64).reshape(-1, 2)
        I, J = self.shape
        if steps.shape[0] == 0 or tuple(steps[0]) != (0, 0) or tuple(steps[-1]) != (I - 1, J - 1):
            raise ValueError("alignment path must run from (0, 0) to (I-1, J-1)")
        inc = np.diff(steps, axis=0)
        if not all(tuple(s) in _STEPS for s in inc):
            raise ValueError("alignment path has an invalid step")
        if len(self.p_d) != steps.shape[0]:
            raise ValueError("one probability per path step required")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "p_d", np.asarray(self.p_d, dtype=np.float64))

    def __len__(self) -> int:
        return self.steps.shape[0]

    @property
    def log_p(self) -> np.ndarray:
        return np.log(self.p_d)


@dataclass(frozen=True)
class DiscoveredPair:
    file_a: str
    onset_a: float
    offset_a: float
    file_b: str
    onset_b: float
    offset_b: float
    lr_score: float
    path_length: int
    source: CandidatePair | None = None


@dataclass(frozen=True)
class Rejection:
    reason: str
    source: CandidatePair | None = None


def expand_segment(start: int, end: int, n_frames: int, E: int = 25) -> tuple[int, int]:
    """Grow [start, end) by E frames on each side, clipped to [0, n_frames)."""
    if E < 0:
        raise ValueError("E must be non-negative")
    return max(0, start - E), min(n_frames, end + E)


def calibrate_frame_distances(files: Sequence[MaskedFile], n_samples: int = DEFAULT_CALIB_SAMPLES,
                              rng_seed: int = 0) -> NormalParams:
    frames = np.vstack([f.frames for f in files if f.n_frames])
    return sample_distance_distribution(frames, n_samples, rng_seed)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.maximum(np.sqrt(np.einsum("ij,ij->i", x, x)), 1e-12)
    return x / norms[:, None]


def probability_matrix(xi, xj, params: NormalParams) -> np.ndarray:
    """P[y, z] = Ncdf(cosine distance(xi[y], xj[z]) | mu_d, sigma_d)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
    xj = np.atleast_2d(np.asarray(xj, dtype=np.float64))
    dist = 1.0 - _unit_rows(xi) @ _unit_rows(xj).T
    return normal_cdf(dist, params)


@numba.njit(nogil=True, cache=True)
def _dtw_accumulate(C):
    I, J = C.shape
    D = np.empty((I, J))
    D[0, 0] = C[0, 0]
    for q in range(1, J):
        D[0, q] = D[0, q - 1] + C[0, q]
    for p in range(1, I):
        D[p, 0] = D[p - 1, 0] + C[p, 0]
        for q in range(1, J):
            best = D[p - 1, q - 1]
            if D[p - 1, q] < best:
                best = D[p - 1, q]
            if D[p, q - 1] < best:
                best = D[p, q - 1]
            D[p, q] = best + C[p, q]
    return D


@numba.njit(nogil=True, cache=True)
def _dtw_backtrack(D):
    I, J = D.shape
    out = np.empty((I + J - 1, 2), dtype=np.int64)
    p, q = I - 1, J - 1
    n = 0
    out[n, 0] = p
    out[n, 1] = q
    while p > 0 or q > 0:
        if p == 0:
            q -= 1
        elif q == 0:
            p -= 1
        else:
            # ties: diagonal, then p-advance, then q-advance
            best = D[p - 1, q - 1]
            move = 0
            if D[p - 1, q] < best:
                best = D[p - 1, q]
                move = 1
            if D[p, q - 1] < best:
                move = 2
            if move == 0:
                p -= 1
                q -= 1
            elif move == 1:
                p -= 1
            else:
                q -= 1
        n += 1
        out[n, 0] = p
        out[n, 1] = q
    return out[n::-1].copy()


def dtw_min_cost_path(P, cost_mode: str = "raw") -> AlignmentPath:
    """Minimum-cost monotone path through ``P`` with steps (1,0), (0,1), (1,1).

    ``cost_mode="raw"`` sums probabilities; ``"log"`` sums their logarithms.
    """
    P = np.ascontiguousarray(P, dtype=np.float64)
    if P.ndim != 2 or P.size == 0:
        raise ValueError("probability matrix must be a non-empty 2-D array")
    if cost_mode == "raw":
        C = P
    elif cost_mode == "log":
        C = np.log(P)
    else:
        raise ValueError(f"unknown DTW cost mode {cost_mode!r}")
    D = _dtw_accumulate(C)
    steps = _dtw_backtrack(D)
    return AlignmentPath(steps, P[steps[:, 0], steps[:, 1]], P.shape, float(D[-1, -1]))


def path_alignment_logprob(path: AlignmentPath) -> float:
    """log of the product of per-step probabilities along ``path``."""
    total = 0.0
    for v in path.log_p:
        total += v
    return total


def min_sum_subarray(values) -> tuple[int, int, float]:
    """Non-empty contiguous range [start, stop) with the smallest sum.

    Linear-time recurrence over exact sums: every float is a dyadic rational,
    so the values are scaled to integers over a shared power-of-two
    denominator. Ties go to the earliest start, then the shortest range. The
    returned sum is the exact range sum rounded once to float.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("empty sequence")
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("values must be finite")
    ratios = [v.as_integer_ratio() for v in vals]
    den = max(d for _, d in ratios)
    ints = [n * (den // d) for n, d in ratios]
    run_sum = ints[0]
    run_start = 0
    best = (run_sum, 0, 1)
    for e in range(1, len(ints)):
        ext = run_sum + ints[e]
        if ext <= ints[e]:
            run_sum = ext
        else:
            run_sum = ints[e]
            run_start = e
        if run_sum < best[0] or (run_sum == best[0] and run_start < best[1]):
            best = (run_sum, run_start, e + 1)
    return best[1], best[2], best[0] / den


def step_scores(path: AlignmentPath, alpha: float) -> np.ndarray:
    """Per-step log p_d - log alpha; negative steps beat chance."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return path.log_p - math.log(alpha)


def best_subpath_lr(path: AlignmentPath, alpha: float) -> tuple[tuple[int, int], float]:
    """Step range [start, stop) minimizing the log-domain likelihood ratio, and that ratio."""
    start, stop, lr = min_sum_subarray(step_scores(path, alpha))
    return (start, stop), lr


def align_pair(cand: CandidatePair, table: SegmentTable, files: Sequence[MaskedFile],
               params_d: NormalParams, alpha: float = 0.001, E: int = 25, L_min: int = 5,
               cost_mode: str = "raw") -> DiscoveredPair | Rejection:
    fa = files[table.file_index[cand.seg_a]]
    fb = files[table.file_index[cand.seg_b]]
    lo_a, hi_a = expand_segment(int(table.start_frame[cand.seg_a]), int(table.end_frame[cand.seg_a]),
                                fa.n_frames, E)
    lo_b, hi_b = expand_segment(int(table.start_frame[cand.seg_b]), int(table.end_frame[cand.seg_b]),
                                fb.n_frames, E)
    P = probability_matrix(fa.frames[lo_a:hi_a], fb.frames[lo_b:hi_b], params_d)
    path = dtw_min_cost_path(P, cost_mode)
    (start, stop), lr = best_subpath_lr(path, alpha)
    if stop - start < L_min:
        return Rejection(TOO_SHORT, cand)
    sub = path.steps[start:stop]
    on_a, off_a = fa.span_seconds(lo_a + int(sub[0, 0]), lo_a + int(sub[-1, 0]))
    on_b, off_b = fb.span_seconds(lo_b + int(sub[0, 1]), lo_b + int(sub[-1, 1]))
    if fa.file_id == fb.file_id and on_a < off_b and on_b < off_a:
        return Rejection(SELF_OVERLAP, cand)
    return DiscoveredPair(fa.file_id, on_a, off_a, fb.file_id, on_b, off_b,
                          float(lr), int(stop - start), cand)


def align_candidates(cands: Sequence[CandidatePair], table: SegmentTable,
                     files: Sequence[MaskedFile], params_d: NormalParams, alpha: float = 0.001,
                     E: int = 25, L_min: int = 5, cost_mode: str = "raw",
                     threads: int = 1) -> list[DiscoveredPair | Rejection]:
    """Run :func:`align_pair` over ``cands``; results follow the input order."""
    def one(c):
        return align_pair(c, table, files, params_d, alpha, E, L_min, cost_mode)

    if threads <= 1:
        return [one(c) for c in cands]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, cands))
