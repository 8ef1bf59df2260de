"""Low-resolution candidate search over fixed-length, downsampled segments."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .corpus import MaskedFile
from .errors import BadConfig, LengthMismatch
from .stats import DEFAULT_CALIB_SAMPLES, NormalParams, normal_cdf, sample_distance_distribution

_BLOCK_ROWS = 128


@dataclass(frozen=True)
class CandidatePair:
    seg_a: int
    seg_b: int
    distance: float
    p_value: float


@dataclass(frozen=True, eq=False)
class SegmentTable:
    """Column-wise segment store; row index is the segment id."""
    file_ids: tuple[str, ...]
    file_index: np.ndarray
    start_frame: np.ndarray
    end_frame: np.ndarray
    start_time: np.ndarray
    end_time: np.ndarray
    embeddings: np.ndarray
    L: int
    S: int
    M: int

    def __len__(self) -> int:
        return int(self.file_index.shape[0])

    def file_of(self, seg: int) -> str:
        return self.file_ids[self.file_index[seg]]

    def unit_embeddings(self) -> np.ndarray:
        """L2-normalized embeddings as float32, the input of the similarity sweep."""
        norms = np.maximum(np.linalg.norm(self.embeddings, axis=1), 1e-12)
        return np.ascontiguousarray(self.embeddings / norms[:, None], dtype=np.float32)


def bin_edges(L: int, M: int) -> np.ndarray:
    """Bin b covers frames [edges[b], edges[b+1])."""
    return (np.arange(M + 1) * L) // M


def embed_segment(frames, M: int = 4) -> np.ndarray:
    """Average ``frames`` (L x d) into M contiguous bins and concatenate the means."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 1:
        frames = frames[:, None]
    L = frames.shape[0]
    if M < 1 or M > L:
        raise BadConfig(f"cannot downsample {L} frames to M={M}")
    e = bin_edges(L, M)
    return np.concatenate([frames[e[b]:e[b + 1]].mean(axis=0) for b in range(M)])


def cosine_distance(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise LengthMismatch(f"vector shapes differ: {u.shape} vs {v.shape}")
    nu = max(float(np.linalg.norm(u)), 1e-12)
    nv = max(float(np.linalg.norm(v)), 1e-12)
    return 1.0 - float(u @ v) / (nu * nv)


def segment_corpus(files: Sequence[MaskedFile], L: int = 20, S: int = 10, M: int = 4) -> SegmentTable:
    if L <= 0 or S <= 0:
        raise BadConfig("L and S must be positive")
    if M > L:
        raise BadConfig(f"M={M} exceeds L={L}")
    fidx, starts, emb, t0, t1 = [], [], [], [], []
    dim = files[0].frames.shape[1] if files else 0
    e = bin_edges(L, M)
    for k, f in enumerate(files):
        n_seg = 0 if f.n_frames < L else (f.n_frames - L) // S + 1
        if n_seg == 0:
            continue
        offs = np.arange(n_seg) * S
        windows = f.frames[offs[:, None] + np.arange(L)[None, :]]
        parts = [windows[:, e[b]:e[b + 1]].mean(axis=1) for b in range(M)]
        emb.append(np.hstack(parts))
        fidx.append(np.full(n_seg, k))
        starts.append(offs)
        half = f.frame_shift / 2
        t0.append(f.times[offs] - half)
        t1.append(f.times[offs + L - 1] + half)
    if not emb:
        empty = np.zeros(0, dtype=np.int64)
        return SegmentTable(tuple(f.file_id for f in files), empty, empty, empty,
                            np.zeros(0), np.zeros(0), np.zeros((0, M * dim)), L, S, M)
    start = np.concatenate(starts).astype(np.int64)
    return SegmentTable(
        file_ids=tuple(f.file_id for f in files),
        file_index=np.concatenate(fidx).astype(np.int64),
        start_frame=start,
        end_frame=start + L,
        start_time=np.concatenate(t0),
        end_time=np.concatenate(t1),
        embeddings=np.vstack(emb),
        L=L, S=S, M=M,
    )


def calibrate_segment_distances(table: SegmentTable, n_samples: int = DEFAULT_CALIB_SAMPLES,
                                rng_seed: int = 0) -> NormalParams:
    return sample_distance_distribution(table.embeddings, n_samples, rng_seed)


@numba.njit(nogil=True, cache=True)
def _knn_rows(U, file_index, start, excl, lo, hi, k, out_j, out_d):
    n, dim = U.shape
    for i in range(lo, hi):
        r = i - lo
        cnt = 0
        for j in range(n):
            if j == i:
                continue
            if file_index[j] == file_index[i] and abs(start[j] - start[i]) < excl:
                continue
            acc = 0.0
            for t in range(dim):
                acc += np.float64(U[i, t]) * np.float64(U[j, t])
            d = 1.0 - acc
            if cnt < k:
                pos = cnt
                cnt += 1
            elif d < out_d[r, k - 1]:
                pos = k - 1
            else:
                continue
            while pos > 0 and out_d[r, pos - 1] > d:
                out_d[r, pos] = out_d[r, pos - 1]
                out_j[r, pos] = out_j[r, pos - 1]
                pos -= 1
            out_d[r, pos] = d
            out_j[r, pos] = j
        for pos in range(cnt, k):
            out_j[r, pos] = -1
            out_d[r, pos] = np.inf


def nearest_neighbors(table: SegmentTable, k: int = 5, threads: int = 1):
    """k nearest admissible neighbours of every segment.

    Returns (neighbour ids, distances), both n x k, sorted by (distance, id);
    unused slots hold -1 / inf.
    """
    n = len(table)
    out_j = np.full((n, k), -1, dtype=np.int64)
    out_d = np.full((n, k), np.inf)
    if n == 0 or k == 0:
        return out_j, out_d
    U = table.unit_embeddings()
    excl = table.L + table.S
    blocks = [(lo, min(lo + _BLOCK_ROWS, n)) for lo in range(0, n, _BLOCK_ROWS)]

    def run(block):
        lo, hi = block
        _knn_rows(U, table.file_index, table.start_frame, excl, lo, hi, k,
                  out_j[lo:hi], out_d[lo:hi])

    if threads <= 1:
        for b in blocks:
            run(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, blocks))
    return out_j, out_d


def find_candidates(table: SegmentTable, params: NormalParams, k: int = 5,
                    alpha: float = 0.001, threads: int = 1) -> list[CandidatePair]:
    """Significant nearest-neighbour pairs, canonical (a < b) and sorted."""
    nbr, dist = nearest_neighbors(table, k, threads)
    pairs: dict[tuple[int, int], CandidatePair] = {}
    valid = nbr >= 0
    if not valid.any():
        return []
    p = np.ones_like(dist)
    p[valid] = normal_cdf(dist[valid], params)
    for i, r in zip(*np.nonzero(valid & (p < alpha))):
        j = int(nbr[i, r])
        key = (min(int(i), j), max(int(i), j))
        if key not in pairs:
            pairs[key] = CandidatePair(key[0], key[1], float(dist[i, r]), float(p[i, r]))
    return [pairs[key] for key in sorted(pairs)]


def write_candidates(cands: Sequence[CandidatePair], path) -> None:
    with open(path, "w") as fh:
        for c in cands:
            fh.write(f"{c.seg_a}\t{c.seg_b}\t{c.distance!r}\t{c.p_value!r}\n")
