"""
Shared pytest fixtures for scoreshape tests.

Provides seeded synthetic samples, hand-built datasets, score/label pairs
and a CSV writer for ingestion tests. Every random fixture uses a fixed
seed so expectations are reproducible.
"""

from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pytest

from models import CategoricalGroup, Dataset, DgpSpec
from synthetic_dgp import generate
from tabular_data import split


# ============================================================================
# RANDOM STREAMS
# ============================================================================

@pytest.fixture
def rng():
    """Seeded generator for ad hoc draws inside a test."""
    return np.random.default_rng(20240601)


# ============================================================================
# DATASETS
# ============================================================================

@pytest.fixture
def tiny_dataset():
    """Six rows, two numeric features, separable on x1 at 0.5."""
    features = np.array([
        [0.1, 5.0],
        [0.2, 3.0],
        [0.3, 4.0],
        [0.7, 1.0],
        [0.8, 2.0],
        [0.9, 6.0],
    ])
    return Dataset(features=features, target=[0, 0, 0, 1, 1, 1], feature_names=("x1", "x2"))


@pytest.fixture
def categorical_dataset():
    """Dataset with one numeric column and a three-level categorical group."""
    rng = np.random.default_rng(7)
    n = 300
    x = rng.standard_normal(n)
    level = rng.integers(0, 3, size=n)
    indicators = (level[:, np.newaxis] == np.arange(3)).astype(float)
    eta = 0.8 * x + np.array([-0.5, 0.0, 0.5])[level]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return Dataset(
        features=np.column_stack([x, indicators]),
        target=y,
        feature_names=("x", "c=a", "c=b", "c=c"),
        categorical_groups=(CategoricalGroup("c", ("a", "b", "c"), (1, 2, 3)),),
    )


@pytest.fixture
def dgp1_sample():
    """3,000 DGP1 observations with true probabilities (seed 1)."""
    return generate(DgpSpec(1, seed=1), 3000)


@pytest.fixture
def dgp1_splits(dgp1_sample):
    """(train, validation, test) thirds of dgp1_sample."""
    ds = dgp1_sample.dataset
    parts = split(ds, (1 / 3, 1 / 3, 1 / 3), seed=1)
    return ds.subset(parts.train), ds.subset(parts.validation), ds.subset(parts.test)


# ============================================================================
# SCORE / LABEL PAIRS
# ============================================================================

@pytest.fixture
def calibrated_pairs():
    """10,000 well-spread scores with labels drawn as Bernoulli(score)."""
    rng = np.random.default_rng(11)
    scores = rng.beta(2.0, 2.0, size=10_000)
    labels = (rng.random(scores.size) < scores).astype(float)
    return scores, labels


# ============================================================================
# FILES
# ============================================================================

@pytest.fixture
def write_csv(tmp_path) -> Callable[..., Path]:
    """
    Factory writing a CSV from a header and rows into tmp_path.

    Usage: path = write_csv("data.csv", ["x", "y"], [[1, 0], [2, 1]])
    """
    def _write(name: str, header: Sequence[str], rows: Sequence[Sequence], raw: str = None) -> Path:
        path = tmp_path / name
        if raw is not None:
            path.write_text(raw, encoding="utf-8")
            return path
        lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


@pytest.fixture(autouse=True)
def single_thread_default(monkeypatch):
    """Keep thread pools small so tests do not oversubscribe the runner."""
    monkeypatch.setenv("SCORESHAPE_THREADS", "2")
