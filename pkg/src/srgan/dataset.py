"""Deterministic generator for the polynomial coefficient-estimation benchmark.

Each example is 5 independently drawn quartic polynomials, 10 noisy samples
each on the inclusive grid over [-1, 1]; the regression target is the cubic
coefficient of the first polynomial, so 40 of the 50 observations are
irrelevant to the label.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

N_POLYNOMIALS = 5
SAMPLES_PER_POLYNOMIAL = 10
OBSERVATIONS = N_POLYNOMIALS * SAMPLES_PER_POLYNOMIAL

# 10-point inclusive grid, constant step 2/9
X_GRID = np.linspace(-1.0, 1.0, SAMPLES_PER_POLYNOMIAL)
X_GRID.flags.writeable = False

DEFAULT_NOISE_SIGMA = 0.1


@dataclass(frozen=True)
class PolynomialCoeffs:
    """Coefficients of y = a4*x^4 + a3*x^3 + a2*x^2 + a1*x."""

    a1: float
    a2: float
    a3: float
    a4: float

    def __post_init__(self):
        if self.a1 != 1.0:
            raise ValueError(f"a1 is fixed at 1, got {self.a1}")
        if not -1.0 <= self.a3 <= 1.0:
            raise ValueError(f"a3 must lie in [-1, 1], got {self.a3}")
        for name, v in (("a2", self.a2), ("a4", self.a4)):
            if not 1.0 <= _abs(v) <= 2.0:
                raise ValueError(f"|{name}| must lie in [1, 2], got {v}")


def _abs(x: float) -> float:
    return x if x >= 0.0 else -x


@dataclass(frozen=True)
class Example:
    """50 observations (5 polynomials x 10 samples, generation order) plus
    an optional label equal to the first polynomial's a3."""

    observations: np.ndarray
    label: Optional[float]

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.float64)
        if obs.shape != (OBSERVATIONS,):
            raise ValueError(f"expected {OBSERVATIONS} observations, got shape {obs.shape}")
        obs.flags.writeable = False
        object.__setattr__(self, "observations", obs)
        if self.label is not None and not -1.0 <= self.label <= 1.0:
            raise ValueError(f"label must lie in [-1, 1], got {self.label}")


@dataclass(frozen=True)
class DatasetBundle:
    """Labeled / unlabeled / test splits drawn from one seeded stream."""

    labeled: tuple[Example, ...]
    unlabeled: tuple[Example, ...]
    test: tuple[Example, ...]
    seed: int
    noise_sigma: float = DEFAULT_NOISE_SIGMA

    def labeled_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return observation_matrix(self.labeled), label_vector(self.labeled)

    def unlabeled_matrix(self) -> np.ndarray:
        return observation_matrix(self.unlabeled)

    def test_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return observation_matrix(self.test), label_vector(self.test)

    def checksum(self) -> str:
        """SHA-256 over the raw observation/label bytes; identical bundles hash equal."""
        h = hashlib.sha256()
        h.update(f"seed={self.seed} sigma={self.noise_sigma!r}".encode())
        for examples in (self.labeled, self.unlabeled, self.test):
            h.update(observation_matrix(examples).tobytes())
            for ex in examples:
                h.update(b"." if ex.label is None else repr(ex.label).encode())
        return h.hexdigest()


def observation_matrix(examples) -> np.ndarray:
    if len(examples) == 0:
        return np.zeros((0, OBSERVATIONS))
    return np.stack([ex.observations for ex in examples])


def label_vector(examples) -> np.ndarray:
    return np.array([ex.label for ex in examples], dtype=np.float64).reshape(-1, 1)


def sample_coeffs(rng: np.random.Generator) -> PolynomialCoeffs:
    """One coefficient draw: a1 = 1, a3 ~ U(-1, 1), a2 and a4 a fair-coin
    sign times U(1, 2) magnitude."""
    a2 = _signed_magnitude(rng)
    a3 = rng.uniform(-1.0, 1.0)
    a4 = _signed_magnitude(rng)
    return PolynomialCoeffs(1.0, a2, a3, a4)


def _signed_magnitude(rng: np.random.Generator) -> float:
    negative = rng.integers(0, 2) == 1
    magnitude = rng.uniform(1.0, 2.0)
    return -magnitude if negative else magnitude


def evaluate_polynomial(c: PolynomialCoeffs, x):
    x = np.asarray(x, dtype=np.float64)
    return c.a4 * x**4 + c.a3 * x**3 + c.a2 * x**2 + c.a1 * x


def sample_points(c: PolynomialCoeffs) -> np.ndarray:
    """The polynomial's 10 values on the inclusive [-1, 1] grid, grid order."""
    return evaluate_polynomial(c, X_GRID)


def generate_example(rng: np.random.Generator, noise_sigma: float = DEFAULT_NOISE_SIGMA) -> Example:
    """One example: 5 coefficient draws, 10 samples each, Gaussian observation
    noise; the label is the first polynomial's a3, noise-free."""
    if noise_sigma < 0.0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    polys = [sample_coeffs(rng) for _ in range(N_POLYNOMIALS)]
    obs = np.concatenate([sample_points(p) for p in polys])
    # noise draw happens unconditionally so the stream layout is sigma-independent
    obs = obs + noise_sigma * rng.standard_normal(OBSERVATIONS)
    return Example(observations=obs, label=polys[0].a3)


def build_bundle(
    seed: int,
    n_labeled: int,
    n_unlabeled: int,
    n_test: int,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
) -> DatasetBundle:
    """Generate the three splits from a single stream, in the fixed order
    test, labeled, unlabeled, so growing the unlabeled pool never disturbs
    the test or labeled draws."""
    for name, n in (("n_labeled", n_labeled), ("n_unlabeled", n_unlabeled), ("n_test", n_test)):
        if n < 0:
            raise ValueError(f"{name} must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    test = tuple(generate_example(rng, noise_sigma) for _ in range(n_test))
    labeled = tuple(generate_example(rng, noise_sigma) for _ in range(n_labeled))
    unlabeled = tuple(
        Example(generate_example(rng, noise_sigma).observations, None) for _ in range(n_unlabeled)
    )
    return DatasetBundle(labeled, unlabeled, test, seed, noise_sigma)


# --- CSV export/import -------------------------------------------------------
# One row per example: split tag, 50 observation columns, label (empty when
# withheld). Floats are written with 17 significant digits so the round trip
# is value-exact.

_CSV_HEADER = ["set"] + [f"obs_{i:02d}" for i in range(OBSERVATIONS)] + ["label"]


def _fmt(x: float) -> str:
    return format(x, ".17g")


def dump_bundle_csv(bundle: DatasetBundle, fileobj: io.TextIOBase) -> None:
    fileobj.write(
        f"# srgan-bundle seed={bundle.seed} noise_sigma={_fmt(bundle.noise_sigma)}\n"
    )
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for tag, examples in (("labeled", bundle.labeled), ("unlabeled", bundle.unlabeled), ("test", bundle.test)):
        for ex in examples:
            label = "" if ex.label is None else _fmt(ex.label)
            writer.writerow([tag] + [_fmt(v) for v in ex.observations] + [label])


def save_bundle_csv(bundle: DatasetBundle, path) -> None:
    with open(path, "w", newline="") as f:
        dump_bundle_csv(bundle, f)


def load_bundle_csv(path) -> DatasetBundle:
    with open(path, "r", newline="") as f:
        first = f.readline()
        if not first.startswith("# srgan-bundle "):
            raise ValueError(f"{path}: not a bundle file")
        meta = dict(kv.split("=", 1) for kv in first[len("# srgan-bundle ") :].split())
        reader = csv.reader(f)
        header = next(reader)
        if header != _CSV_HEADER:
            raise ValueError(f"{path}: unexpected header")
        splits: dict[str, list[Example]] = {"labeled": [], "unlabeled": [], "test": []}
        for row in reader:
            tag, obs, label = row[0], row[1:-1], row[-1]
            splits[tag].append(
                Example(
                    observations=np.array([float(v) for v in obs]),
                    label=None if label == "" else float(label),
                )
            )
    return DatasetBundle(
        labeled=tuple(splits["labeled"]),
        unlabeled=tuple(splits["unlabeled"]),
        test=tuple(splits["test"]),
        seed=int(meta["seed"]),
        noise_sigma=float(meta["noise_sigma"]),
    )
