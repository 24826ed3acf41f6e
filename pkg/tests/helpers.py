import numpy as np

from timatch.dataset import from_arrays


def make_ds(X, T, Y, kinds, names=None):
    return from_arrays(
        np.asarray(X, dtype=float), np.asarray(T), np.asarray(Y, dtype=float), kinds, names
    )


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path
