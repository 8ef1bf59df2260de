import numpy as np

from pdtw.corpus import MaskedFile


def random_files(n_files, n_frames, dim, seed=0, shift=0.01):
    rng = np.random.default_rng(seed)
    if np.isscalar(n_frames):
        n_frames = [n_frames] * n_files
    return [MaskedFile(f"f{i:02d}", rng.standard_normal((n, dim)), (np.arange(n) + 0.5) * shift, shift)
            for i, n in enumerate(n_frames)]
