"""Bundled toy classification set.

Four classes are concentric radius bands of a 2-d latent point, embedded
into 12 observed features through a fixed linear map plus noise.  Radius is
not a linear function of the features, so linear models sit near chance
while a modest nonlinear net separates the bands well - which is exactly
the spread an evaluation worker wants between bad and good configurations.

The dataset ships as an .npz regenerated bit-for-bit by ``regenerate()``
(fixed seed); ``python -m pyeval_worker.data`` rewrites it in place.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

DATASET_SEED = 20240810
N_SAMPLES = 3000
N_FEATURES = 12
N_CLASSES = 4
VAL_FRACTION = 0.25

_BANDS = (0.0, 1.0, 2.0, 3.0, 4.2)  # radius band edges per class


def generate(seed: int = DATASET_SEED) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    per_class = N_SAMPLES // N_CLASSES
    latents, labels = [], []
    for c in range(N_CLASSES):
        lo, hi = _BANDS[c], _BANDS[c + 1]
        r = rng.uniform(lo, hi, size=per_class)
        theta = rng.uniform(0, 2 * np.pi, size=per_class)
        latents.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
        labels.append(np.full(per_class, c))
    z = np.concatenate(latents)
    y = np.concatenate(labels).astype(np.int64)
    embed = rng.normal(size=(2, N_FEATURES)) / np.sqrt(2)
    x = z @ embed + 0.08 * rng.normal(size=(len(z), N_FEATURES))

    order = rng.permutation(len(x))
    x, y = x[order].astype(np.float32), y[order]
    n_val = int(len(x) * VAL_FRACTION)
    return {
        "x_train": x[:-n_val], "y_train": y[:-n_val],
        "x_val": x[-n_val:], "y_val": y[-n_val:],
    }


def bundle_path() -> Path:
    return Path(str(resources.files("pyeval_worker").joinpath("toy_dataset.npz")))


def load() -> dict[str, np.ndarray]:
    with np.load(bundle_path()) as archive:
        return {key: archive[key] for key in archive.files}


def regenerate(path: Path | None = None) -> Path:
    path = path or bundle_path()
    np.savez_compressed(path, **generate())
    return path


if __name__ == "__main__":
    print(f"wrote {regenerate()}")
