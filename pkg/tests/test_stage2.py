import math

import mpmath
import numpy as np
import pytest

from pdtw.corpus import MaskedFile
from pdtw.errors import DegenerateSample
from pdtw.stage1 import CandidatePair, segment_corpus
from pdtw.stage2 import (SELF_OVERLAP, TOO_SHORT, AlignmentPath, DiscoveredPair, Rejection,
                         align_candidates, align_pair, best_subpath_lr, calibrate_frame_distances,
                         dtw_min_cost_path, expand_segment, min_sum_subarray,
                         path_alignment_logprob, probability_matrix, step_scores)
from pdtw.stage1 import cosine_distance
from pdtw.stats import CDF_FLOOR, NormalParams, normal_cdf
from pdtw.synth import word_template

from helpers import random_files
from oracles import all_pairs_cosine_moments, brute_min_path_cost, brute_min_subarray, monotone_paths, path_cost

PD = NormalParams(1.0, 0.16)


def _path(p_d):
    n = len(p_d)
    return AlignmentPath([(i, i) for i in range(n)], p_d, (n, n))


def test_expand_examples():
    assert expand_segment(100, 120, 1000, 25) == (75, 145)
    assert expand_segment(0, 20, 1000, 25) == (0, 45)
    assert expand_segment(100, 120, 1000, 0) == (100, 120)
    assert expand_segment(970, 990, 1000, 25) == (945, 1000)


def test_frame_calibration_exhaustive_and_deterministic():
    files = random_files(2, 250, 6, seed=3)
    a = calibrate_frame_distances(files, 200_000, 11)
    assert a == calibrate_frame_distances(files, 200_000, 11)
    mu, _ = all_pairs_cosine_moments(np.vstack([f.frames for f in files]))
    assert abs(a.mu - mu) < 0.005


def test_frame_calibration_repeated_frame():
    f = MaskedFile("a", np.ones((30, 4)), (np.arange(30) + 0.5) * 0.01, 0.01)
    with pytest.raises(DegenerateSample):
        calibrate_frame_distances([f], 1000, 0)


def test_probability_matrix_single_frame():
    x = np.array([[0.3, -1.0, 2.0]])
    P = probability_matrix(x, x, PD)
    assert P.shape == (1, 1)
    assert P[0, 0] == pytest.approx(normal_cdf(0.0, PD), rel=1e-9)


def test_probability_matrix_at_mean_is_half():
    P = probability_matrix([[1.0, 0.0]], [[0.0, 1.0]], NormalParams(1.0, 0.2))
    assert P[0, 0] == 0.5


def test_probability_matrix_composition():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(5, 4)), rng.normal(size=(7, 4))
    P = probability_matrix(a, b, PD)
    ref = np.array([[normal_cdf(cosine_distance(u, v), PD) for v in b] for u in a])
    assert np.max(np.abs(P - ref)) < 1e-12
    assert P.min() >= CDF_FLOOR and P.max() <= 1 - CDF_FLOOR


def test_dtw_trivial():
    path = dtw_min_cost_path([[0.4]])
    assert path.steps.tolist() == [[0, 0]]
    assert path.cost == 0.4


def test_dtw_two_by_two():
    path = dtw_min_cost_path([[0.1, 0.9], [0.9, 0.1]])
    assert path.steps.tolist() == [[0, 0], [1, 1]]
    assert path.cost == pytest.approx(0.2)


def test_dtw_tie_prefers_diagonal_then_vertical():
    assert dtw_min_cost_path(np.zeros((3, 3))).steps.tolist() == [[0, 0], [1, 1], [2, 2]]
    # 3x2: diagonal (1,1) then vertical; zero costs tie everywhere
    assert dtw_min_cost_path(np.zeros((3, 2))).steps.tolist() == [[0, 0], [1, 0], [2, 1]]


@pytest.mark.parametrize("seed", range(40))
def test_dtw_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    I, J = rng.integers(1, 7, size=2)
    P = rng.uniform(size=(I, J))
    path = dtw_min_cost_path(P)
    assert path.cost == brute_min_path_cost(P.tolist())
    assert path_cost(P.tolist(), [tuple(s) for s in path.steps]) == path.cost


@pytest.mark.parametrize("seed", range(10))
def test_dtw_beats_diagonal_and_random_paths(seed):
    rng = np.random.default_rng(100 + seed)
    n = 9
    P = rng.uniform(size=(n, n))
    best = dtw_min_cost_path(P).cost
    assert best <= sum(P[i, i] for i in range(n)) + 1e-12
    for _ in range(100):
        p = q = 0
        cost = P[0, 0]
        while (p, q) != (n - 1, n - 1):
            moves = [m for m in ((1, 0), (0, 1), (1, 1)) if p + m[0] < n and q + m[1] < n]
            dp, dq = moves[rng.integers(len(moves))]
            p, q = p + dp, q + dq
            cost += P[p, q]
        assert best <= cost + 1e-12


def test_dtw_log_mode():
    P = np.array([[0.5, 0.9], [0.9, 0.5]])
    path = dtw_min_cost_path(P, "log")
    # log costs are negative, so the detour through both 0.9 cells wins
    assert path.cost == brute_min_path_cost(np.log(P).tolist())
    assert len(path) == 3
    with pytest.raises(ValueError):
        dtw_min_cost_path(P, "cubic")


def test_alignment_path_validation():
    with pytest.raises(ValueError):
        AlignmentPath([(0, 0), (2, 1)], [0.5, 0.5], (3, 2))
    with pytest.raises(ValueError):
        AlignmentPath([(0, 0), (1, 1)], [0.5, 0.5], (3, 3))


def test_logprob_examples():
    assert path_alignment_logprob(_path([0.5])) == pytest.approx(-0.6931, abs=1e-4)
    assert path_alignment_logprob(_path([1 - CDF_FLOOR] * 10)) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_logprob_direct_product(seed):
    p = np.random.default_rng(seed).uniform(1e-6, 1.0, size=20)
    mpmath.mp.dps = 50
    ref = mpmath.log(mpmath.fprod([mpmath.mpf(float(v)) for v in p]))
    got = path_alignment_logprob(_path(p))
    assert got <= 0
    assert abs(got - float(ref)) < 1e-11


def test_min_sum_subarray_example():
    assert min_sum_subarray([3, -5, 2, -4, 1]) == (1, 4, -7.0)
    assert brute_min_subarray([3.0, -5.0, 2.0, -4.0, 1.0]) == (1, 4, -7.0)


def test_min_sum_all_positive_single_smallest():
    assert min_sum_subarray([4.0, 2.0, 3.0, 2.0]) == (1, 2, 2.0)


def test_min_sum_ties_earliest_then_shortest():
    # [-1] at 0, [-1, 0] at 0..2, [-1] at 3: earliest start, then shortest
    assert min_sum_subarray([-1.0, 0.0, 2.0, -1.0]) == (0, 1, -1.0)
    assert min_sum_subarray([0.0, -2.0, 0.0]) == (0, 2, -2.0)


def test_min_sum_uses_exact_sums():
    # float addition absorbs 1e-17 into -1.0, but the exact sums still differ
    assert min_sum_subarray([1e-17, -1.0]) == (1, 2, -1.0)
    assert min_sum_subarray([-1e-17, -1.0]) == (0, 2, -1.0)
    with pytest.raises(ValueError):
        min_sum_subarray([0.0, -math.inf])


@pytest.mark.parametrize("seed", range(50))
def test_min_sum_integer_ties_match_bruteforce(seed):
    vals = np.random.default_rng(seed).integers(-3, 4, size=int(np.random.default_rng(seed).integers(1, 20)))
    vals = [float(v) for v in vals]
    assert min_sum_subarray(vals) == brute_min_subarray(vals)


def test_best_subpath_bounds():
    rng = np.random.default_rng(1)
    path = _path(rng.uniform(1e-6, 0.2, size=40))
    s = step_scores(path, 0.001)
    (a, b), lr = best_subpath_lr(path, 0.001)
    assert lr <= float(np.sum(s)) + 1e-9
    assert lr <= float(np.min(s))
    assert lr == pytest.approx(float(np.sum(s[a:b])))


def test_step_scores_alpha_range():
    with pytest.raises(ValueError):
        step_scores(_path([0.5]), 1.0)


def _copy_corpus():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(200, 39))
    b = rng.normal(size=(200, 39))
    b[80:150] = a[50:120]
    t = (np.arange(200) + 0.5) * 0.01
    files = [MaskedFile("a", a, t, 0.01), MaskedFile("b", b, t, 0.01)]
    return files, segment_corpus(files, 20, 5)


def _seg(table, fid, start):
    idx = [i for i in range(len(table)) if table.file_of(i) == fid and table.start_frame[i] == start]
    return idx[0]


def test_identical_copies_accepted_exactly():
    files, table = _copy_corpus()
    pd = calibrate_frame_distances(files, 100_000, 0)
    cand = CandidatePair(_seg(table, "a", 75), _seg(table, "b", 105), 0.0, CDF_FLOOR)
    out = align_pair(cand, table, files, pd, alpha=0.001, E=25, L_min=5)
    assert isinstance(out, DiscoveredPair)
    assert out.path_length == 70
    assert (out.onset_a, out.offset_a) == pytest.approx((0.50, 1.20))
    assert (out.onset_b, out.offset_b) == pytest.approx((0.80, 1.50))
    assert out.lr_score < 0


def test_swap_symmetry():
    files = random_files(2, 300, 6, seed=12)
    table = segment_corpus(files, 20, 10)
    pd = calibrate_frame_distances(files, 100_000, 0)
    for a, b in [(3, 40), (10, 50), (0, 29)]:
        fa, fb = files[table.file_index[a]], files[table.file_index[b]]
        xa = fa.frames[expand_segment(table.start_frame[a], table.end_frame[a], fa.n_frames, 25)[0]:][:70]
        xb = fb.frames[expand_segment(table.start_frame[b], table.end_frame[b], fb.n_frames, 25)[0]:][:70]
        P = probability_matrix(xa, xb, pd)
        assert np.array_equal(probability_matrix(xb, xa, pd), P.T)
        p1, p2 = dtw_min_cost_path(P), dtw_min_cost_path(P.T)
        assert p1.cost == pytest.approx(p2.cost, abs=1e-12)
        o1 = align_pair(CandidatePair(a, b, 0, 0), table, files, pd, alpha=0.05)
        o2 = align_pair(CandidatePair(b, a, 0, 0), table, files, pd, alpha=0.05)
        assert type(o1) is type(o2)
        if isinstance(o1, DiscoveredPair):
            assert o1.lr_score == pytest.approx(o2.lr_score, abs=1e-9)


def test_self_overlap_rejected():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(300, 8))
    f = MaskedFile("a", x, (np.arange(300) + 0.5) * 0.01, 0.01)
    table = segment_corpus([f], 20, 10)
    pd = NormalParams(1.0, 0.16)
    # segments 30 frames apart share most of their +-25 expansions; diagonal offsets overlap
    x[100:180] = np.repeat(rng.normal(size=(1, 8)), 80, axis=0)
    f = MaskedFile("a", x, f.times, 0.01)
    out = align_pair(CandidatePair(10, 13, 0.0, 0.0), table, [f], pd, alpha=0.001)
    assert isinstance(out, Rejection) and out.reason == SELF_OVERLAP


def test_planted_word_boundaries():
    rng = np.random.default_rng(21)
    tpl = word_template(rng, 30, 39)
    wa = tpl(np.linspace(0, 1, 30)) + 0.3 * rng.normal(size=(30, 39))
    wb = tpl(np.linspace(0, 1, 33)) + 0.3 * rng.normal(size=(33, 39))
    a = rng.normal(size=(400, 39))
    b = rng.normal(size=(400, 39))
    a[133:163] = wa
    b[207:240] = wb
    t = (np.arange(400) + 0.5) * 0.01
    files = [MaskedFile("a", a, t, 0.01), MaskedFile("b", b, t, 0.01)]
    table = segment_corpus(files, 20, 10)
    pd = calibrate_frame_distances(files, 200_000, 0)
    out = align_pair(CandidatePair(_seg(table, "a", 140), _seg(table, "b", 210), 0, 0),
                     table, files, pd, alpha=0.001)
    assert isinstance(out, DiscoveredPair)
    assert abs(out.onset_a - 1.33) <= 0.03 + 1e-9 and abs(out.offset_a - 1.63) <= 0.03 + 1e-9
    assert abs(out.onset_b - 2.07) <= 0.03 + 1e-9 and abs(out.offset_b - 2.40) <= 0.03 + 1e-9
    assert 5 * 0.01 <= out.offset_a - out.onset_a <= (20 + 50) * 0.01 + 0.01


def test_align_candidates_threads_and_accounting():
    files = random_files(3, 400, 8, seed=4)
    table = segment_corpus(files, 20, 10)
    pd = calibrate_frame_distances(files, 100_000, 0)
    rng = np.random.default_rng(0)
    cands = [CandidatePair(int(a), int(b), 0, 0)
             for a, b in (sorted(rng.choice(len(table), 2, replace=False)) for _ in range(60))]
    one = align_candidates(cands, table, files, pd, alpha=0.05, threads=1)
    four = align_candidates(cands, table, files, pd, alpha=0.05, threads=4)
    assert one == four
    assert all(o.source is c for o, c in zip(one, cands))
    assert {o.reason for o in one if isinstance(o, Rejection)} <= {TOO_SHORT, SELF_OVERLAP}
