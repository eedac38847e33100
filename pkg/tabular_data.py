#!/usr/bin/env python3
"""
scoreshape - Tabular Data Module

CSV ingestion against a declared column schema, one-hot encoding of
categorical columns, seeded three-way splitting, and CSV export of datasets
together with a sidecar schema file.

Schema files are TOML:

    [columns]
    age = "numeric"
    colour = "categorical"
    y = "target"
    p = "true_probability"
    id = "ignore"

Missing values are rejected; there is no imputation.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from errors import DomainError, ParameterError, ParseError, SchemaError
from models import (
    CategoricalGroup,
    ColumnKind,
    ColumnSpec,
    Dataset,
    GeneratedSample,
    SplitIndices,
    validate_schema,
)

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ============================================================================
# SCHEMA FILES
# ============================================================================

def load_schema(path: PathLike) -> List[ColumnSpec]:
    """
    Read a schema file with a [columns] table (name = kind).

    Raises:
        SchemaError: If the table is missing or a kind is unknown
    """
    data = config.read_toml(path)
    columns = data.get('columns')
    if not isinstance(columns, dict) or not columns:
        raise SchemaError(f"Schema file {path} needs a non-empty [columns] table")
    schema = [ColumnSpec(name=str(name), kind=kind) for name, kind in columns.items()]
    validate_schema(schema)
    return schema


def parse_schema_flags(pairs: Sequence[str]) -> List[ColumnSpec]:
    """Build a schema from 'name=kind' strings given on the command line."""
    schema = []
    for pair in pairs:
        name, sep, kind = pair.partition('=')
        if not sep:
            raise SchemaError(f"Schema entry '{pair}' must look like name=kind")
        schema.append(ColumnSpec(name=name.strip(), kind=kind.strip()))
    validate_schema(schema)
    return schema


def write_schema(path: PathLike, schema: Sequence[ColumnSpec]) -> Path:
    """Write a schema file readable by load_schema."""
    path = Path(path)
    lines = ["[columns]"]
    # JSON string escaping is valid TOML basic-string escaping
    lines += [f"{json.dumps(spec.name)} = {json.dumps(spec.kind.value)}" for spec in schema]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def schema_path_for(csv_path: PathLike) -> Path:
    """Sidecar schema location used by export_sample_csv."""
    csv_path = Path(csv_path)
    return csv_path.with_name(f"{csv_path.stem}.schema.toml")


# ============================================================================
# CSV INGESTION
# ============================================================================

def _parse_real_column(raw: pd.Series, column: str) -> np.ndarray:
    """Parse a column of strings as finite reals, reporting the first bad cell."""
    cells = raw.to_numpy(dtype=object)
    try:
        values = cells.astype(np.float64)
    except ValueError:
        values = None

    if values is not None and np.all(np.isfinite(values)):
        return values

    for position, cell in enumerate(cells):
        text = str(cell).strip()
        if not text:
            raise ParseError("missing value", row=position + 1, column=column)
        try:
            value = float(text)
        except ValueError:
            raise ParseError(f"cannot parse '{text}' as a number", row=position + 1, column=column) from None
        if not np.isfinite(value):
            raise ParseError(f"non-finite value '{text}'", row=position + 1, column=column)
    raise ParseError("unparseable column", row=0, column=column)  # pragma: no cover


def _encode_categorical(raw: pd.Series, column: str, offset: int) -> Tuple[np.ndarray, CategoricalGroup]:
    """One indicator column per level, levels in first-appearance order."""
    cells = raw.astype(str).str.strip()
    empty = np.flatnonzero(cells.to_numpy() == "")
    if empty.size:
        raise ParseError("missing value", row=int(empty[0]) + 1, column=column)

    levels = tuple(pd.unique(cells))
    if len(levels) > config.MAX_CATEGORICAL_LEVELS:
        raise SchemaError(
            f"Categorical column '{column}' has {len(levels)} levels "
            f"(at most {config.MAX_CATEGORICAL_LEVELS} allowed)",
            column=column,
        )
    codes = pd.Categorical(cells, categories=list(levels)).codes
    indicators = np.zeros((len(cells), len(levels)), dtype=np.float64)
    indicators[np.arange(len(cells)), codes] = 1.0
    group = CategoricalGroup(
        name=column,
        levels=levels,
        columns=tuple(range(offset, offset + len(levels))),
    )
    return indicators, group


def load_csv(path: PathLike, schema: Sequence[ColumnSpec]) -> Dataset:
    """
    Read a comma-separated UTF-8 file into a Dataset.

    Numeric columns are parsed as reals, categorical columns are one-hot
    encoded (one indicator per level, named 'column=level'), the target is
    parsed as 0/1 and an optional true_probability column must lie in [0, 1].
    Feature columns keep schema order.

    Args:
        path: CSV file with a header row
        schema: One ColumnSpec per header column

    Returns:
        Dataset: Validated, immutable dataset

    Raises:
        SchemaError: Missing or undeclared column, too many levels
        ParseError: Unparseable or empty cell (row is 1-based over data rows)
        DomainError: Target outside {0, 1}, probability outside [0, 1]
    """
    validate_schema(schema)
    path = Path(path)
    logger.debug(f"Loading {path} with {len(schema)} declared columns")

    frame = pd.read_csv(
        path,
        dtype=str,
        keep_default_na=False,
        na_filter=False,
        encoding="utf-8",
        skipinitialspace=True,
    )
    header = [str(name).strip() for name in frame.columns]
    frame.columns = header

    declared = [spec.name for spec in schema]
    for name in declared:
        if name not in header:
            raise SchemaError(f"Column '{name}' declared in the schema is missing from {path}", column=name)
    for name in header:
        if name not in declared:
            raise SchemaError(f"Column '{name}' in {path} is not declared in the schema", column=name)

    blocks: List[np.ndarray] = []
    names: List[str] = []
    groups: List[CategoricalGroup] = []
    target: Optional[np.ndarray] = None
    true_prob: Optional[np.ndarray] = None

    for spec in schema:
        raw = frame[spec.name]
        if spec.kind is ColumnKind.NUMERIC:
            blocks.append(_parse_real_column(raw, spec.name).reshape(-1, 1))
            names.append(spec.name)
        elif spec.kind is ColumnKind.CATEGORICAL:
            indicators, group = _encode_categorical(raw, spec.name, offset=len(names))
            blocks.append(indicators)
            names.extend(f"{spec.name}={level}" for level in group.levels)
            groups.append(group)
        elif spec.kind is ColumnKind.TARGET:
            target = _parse_real_column(raw, spec.name)
            bad = np.flatnonzero((target != 0.0) & (target != 1.0))
            if bad.size:
                raise DomainError(
                    f"Target column '{spec.name}' must contain only 0 and 1 "
                    f"(row {int(bad[0]) + 1} has {raw.iloc[int(bad[0])]})"
                )
        elif spec.kind is ColumnKind.TRUE_PROBABILITY:
            true_prob = _parse_real_column(raw, spec.name)
            bad = np.flatnonzero((true_prob < 0.0) | (true_prob > 1.0))
            if bad.size:
                raise DomainError(
                    f"Column '{spec.name}' must lie in [0, 1] (row {int(bad[0]) + 1} has {raw.iloc[int(bad[0])]})"
                )

    features = np.hstack(blocks) if blocks else np.empty((len(frame), 0))
    dataset = Dataset(
        features=features,
        target=target,
        true_prob=true_prob,
        feature_names=tuple(names),
        categorical_groups=tuple(groups),
    )
    logger.info(
        f"Loaded {path.name}: n={dataset.n}, {dataset.n_features} encoded features, "
        f"{len(groups)} categorical"
    )
    return dataset


# ============================================================================
# SPLITTING
# ============================================================================

def split_sizes(n: int, ratios: Sequence[float]) -> Tuple[int, int, int]:
    """
    Largest-remainder part sizes for n observations.

    Every part receives at least one observation.

    Examples:
        >>> split_sizes(10, (0.64, 0.16, 0.20))
        (6, 2, 2)
    """
    raw = n * np.asarray(ratios, dtype=np.float64)
    sizes = np.floor(raw).astype(np.int64)
    remainder = n - int(sizes.sum())
    # stable sort keeps earlier parts first among equal remainders
    order = np.argsort(-(raw - sizes), kind="stable")
    sizes[order[:remainder]] += 1

    while np.any(sizes == 0):
        sizes[int(np.argmax(sizes))] -= 1
        sizes[int(np.argmin(sizes))] += 1
    return (int(sizes[0]), int(sizes[1]), int(sizes[2]))


def split(ds: Dataset, ratios: Sequence[float], seed: int) -> SplitIndices:
    """
    Seeded train / validation / test partition.

    A uniform random permutation of 0..n-1 is cut into three contiguous
    blocks whose sizes follow split_sizes.

    Raises:
        ParameterError: If ratios are not three positive fractions summing to
            1, or n < 3
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ParameterError(f"ratios must be three positive fractions (got {ratios})")
    if abs(sum(ratios) - 1.0) > config.RATIO_TOLERANCE:
        raise ParameterError(f"ratios must sum to 1 (got {sum(ratios)!r})")

    n = ds.n if isinstance(ds, Dataset) else int(ds)
    if n < 3:
        raise ParameterError(f"Cannot split {n} observations into three nonempty parts")

    n_train, n_valid, _ = split_sizes(n, ratios)
    permutation = np.random.default_rng(seed).permutation(n)
    indices = SplitIndices(
        train=permutation[:n_train],
        validation=permutation[n_train:n_train + n_valid],
        test=permutation[n_train + n_valid:],
        seed=seed,
    )
    logger.debug(f"Split n={n} with seed {seed} into sizes {indices.sizes}")
    return indices


# ============================================================================
# EXPORT
# ============================================================================

def dataset_to_frame(
    ds: Dataset,
    target_name: str = "y",
    true_prob_name: str = "true_probability",
) -> Tuple[pd.DataFrame, List[ColumnSpec]]:
    """
    Columns of a Dataset as a DataFrame plus the schema that reloads it.

    Categorical groups collapse back into one labelled column each, placed
    where their first indicator sits.
    """
    owner: Dict[int, CategoricalGroup] = {}
    for group in ds.categorical_groups:
        for column in group.columns:
            owner[column] = group

    data: Dict[str, object] = {}
    schema: List[ColumnSpec] = []
    for j, name in enumerate(ds.feature_names):
        group = owner.get(j)
        if group is None:
            data[name] = ds.features[:, j]
            schema.append(ColumnSpec(name, ColumnKind.NUMERIC))
        elif j == group.columns[0]:
            block = ds.features[:, list(group.columns)]
            labels = np.asarray(group.levels, dtype=object)[np.argmax(block, axis=1)]
            data[group.name] = labels
            schema.append(ColumnSpec(group.name, ColumnKind.CATEGORICAL))

    data[target_name] = ds.target.astype(np.int64)
    schema.append(ColumnSpec(target_name, ColumnKind.TARGET))
    if ds.true_prob is not None:
        data[true_prob_name] = ds.true_prob
        schema.append(ColumnSpec(true_prob_name, ColumnKind.TRUE_PROBABILITY))

    validate_schema(schema)
    return pd.DataFrame(data), schema


def export_sample_csv(
    sample: Union[GeneratedSample, Dataset],
    path: PathLike,
    include_true_prob: bool = True,
) -> Tuple[Path, Path]:
    """
    Write a dataset as CSV next to a sidecar schema file.

    Floats are written with round-trip precision, so load_csv with the
    sidecar schema restores the same matrix.

    Returns:
        Tuple[Path, Path]: (csv path, schema path)
    """
    ds = sample.dataset if isinstance(sample, GeneratedSample) else sample
    if not include_true_prob:
        ds = ds.without_true_prob()
    frame, schema = dataset_to_frame(ds)

    path = Path(path)
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.17g", lineterminator="\n")
    schema_file = write_schema(schema_path_for(path), schema)
    logger.info(f"Wrote {ds.n} rows to {path} (schema {schema_file.name})")
    return path, schema_file
