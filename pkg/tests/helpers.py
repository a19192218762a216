"""Shared fixture builders for the test suite."""

from pathlib import Path

import numpy as np

from qfda.dataset import RawImageSet, write_idx


def two_class_images(n=200, height=28, width=28, seed=0) -> RawImageSet:
    """Two overlapping textured classes in [0, 255].

    Class 0 is a bright blob at a jittered position; class 1 is the same
    style of blob, dimmer, plus a faint stripe pattern.  Noise is strong
    enough that a 10-NN in a good subspace errs on a modest fraction,
    which keeps the discriminant comparison informative.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    images = np.empty((height * width, n))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        label = i % 2
        cy = height / 2 + rng.uniform(-6, 6)
        cx = width / 2 + rng.uniform(-6, 6)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * 5.0**2))
        if label == 0:
            img = 60.0 + 100.0 * blob
        else:
            phase = rng.uniform(0, 2 * np.pi)
            freq = rng.uniform(0.5, 0.9)
            img = 60.0 + 70.0 * blob + 30.0 * np.sin(freq * xx + phase)
        img = img + rng.normal(0, 40.0, size=img.shape)
        images[:, i] = np.clip(img, 0, 255).round().ravel()
        labels[i] = label
    return RawImageSet(pixels=images, height=height, width=width, labels=labels)


def write_two_class_idx(directory, n=200, height=28, width=28, seed=0):
    """Write the two-class fixture as an IDX pair; returns the image path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    raw = two_class_images(n=n, height=height, width=width, seed=seed)
    images_path = directory / "fixture-images-idx3-ubyte"
    labels_path = directory / "fixture-labels-idx1-ubyte"
    write_idx(raw, images_path, labels_path)
    return images_path, labels_path


def gaussian_class_spectra(d=64, n_per_class=30, separation=6.0, seed=0):
    """Two spherical Gaussian clusters separation·sigma apart, as columns."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    a = rng.standard_normal((d, n_per_class))
    b = rng.standard_normal((d, n_per_class)) + separation * direction[:, None]
    x = np.concatenate([a, b], axis=1)
    labels = np.repeat([0, 1], n_per_class)
    return x, labels
