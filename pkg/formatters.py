#!/usr/bin/env python3
"""
scoreshape - Formatters Module

Formatting and output for selection studies:
- Pure formatting functions returning List[str] (markdown tables, metric
  blocks); no I/O, easy to test
- Study output files: replications.csv, summary.csv, deltas.csv,
  histograms.csv, candidates.csv and manifest.json
- A minimal self-contained SVG emitter for score histograms
- Output writers for console and file destinations

CSV and JSON files are the source of truth; report.md and the SVG figures
are derived from them by write_report.
"""

import json
import logging
import math
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple, Union
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd
import scipy

import config
from models import METRIC_NAMES, MetricTable, ScoreHistogram, SelectionReport
from selection_harness import StudyResult

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

REPLICATIONS_FILE = "replications.csv"
SUMMARY_FILE = "summary.csv"
DELTAS_FILE = "deltas.csv"
HISTOGRAMS_FILE = "histograms.csv"
CANDIDATES_FILE = "candidates.csv"
MANIFEST_FILE = "manifest.json"
REPORT_FILE = "report.md"
STUDY_FILES: Tuple[str, ...] = (
    REPLICATIONS_FILE, SUMMARY_FILE, DELTAS_FILE, HISTOGRAMS_FILE, CANDIDATES_FILE, MANIFEST_FILE,
)

CSV_FLOAT_FORMAT = "%.17g"

METRIC_HEADERS = {
    'leaf_count': 'No. Leaves',
    'mse': 'MSE',
    'auc': 'AUC',
    'brier': 'Brier',
    'ici': 'ICI',
    'kl': 'KL',
    'qr': 'QR',
}

SVG_WIDTH = 640
SVG_HEIGHT = 400
SVG_MARGIN = 48
PLOT_WIDTH = SVG_WIDTH - 2 * SVG_MARGIN
PLOT_HEIGHT = SVG_HEIGHT - 2 * SVG_MARGIN


# ============================================================================
# PURE FORMATTING FUNCTIONS
# ============================================================================

def format_value(value: Optional[float], digits: int = 3) -> str:
    """
    Fixed-point number, '-' for missing values.

    Examples:
        >>> format_value(0.08612)
        '0.086'
        >>> format_value(None)
        '-'
    """
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.{digits}f}"


def format_mean_std(mean: Optional[float], std: Optional[float], digits: int = 3) -> str:
    """
    'mean (std)' cell; the std part is omitted when undefined.

    Examples:
        >>> format_mean_std(0.086, 0.019)
        '0.086 (0.019)'
        >>> format_mean_std(0.5, float('nan'))
        '0.500'
    """
    text = format_value(mean, digits)
    if text == "-" or format_value(std, digits) == "-":
        return text
    return f"{text} ({std:.{digits}f})"


def slugify(name: str) -> str:
    """
    File-name-safe form of a row name.

    Examples:
        >>> slugify('KL*')
        'kl_star'
        >>> slugify('smallest')
        'smallest'
    """
    text = name.strip().lower().replace('*', '_star')
    return re.sub(r'[^a-z0-9_]+', '_', text).strip('_') or "row"


def markdown_table(headers: Sequence[str], rows: Iterable[Sequence[str]]) -> List[str]:
    """Pipe table with left-aligned first column and right-aligned others."""
    lines = ["| " + " | ".join(headers) + " |"]
    lines.append("|" + "|".join([":---"] + ["---:"] * (len(headers) - 1)) + "|")
    for row in rows:
        lines.append("| " + " | ".join(str(cell) for cell in row) + " |")
    return lines


def format_metric_table(table: MetricTable, title: str = "Metrics") -> List[str]:
    """One MetricTable as a two-column block."""
    lines = [f"## {title}", ""]
    rows = [(METRIC_HEADERS[name], format_value(table.get(name), 4)) for name in METRIC_NAMES]
    lines += markdown_table(("Metric", "Value"), rows)
    return lines


def format_selection_report(report: SelectionReport, split: str = 'test') -> List[str]:
    """
    Rows of one SelectionReport with metrics on the given split.

    Appends the KL* vs AUC* deltas and, on the real-data path, the prior.
    """
    headers = ["Model", "Params", "No. Leaves"] + [METRIC_HEADERS[name] for name in METRIC_NAMES]
    rows = []
    for row in report.rows:
        metrics = getattr(row, split)
        params = "" if row.point is None else row.point.label()
        rows.append(
            [row.name, params, format_value(row.leaf_count, 1)]
            + [format_value(metrics.get(name)) for name in METRIC_NAMES]
        )

    lines = [f"## {report.learner.value} selection ({split} split)", ""]
    lines += markdown_table(headers, rows)
    deltas = report.deltas if split == 'test' else report.validation_deltas
    if deltas:
        lines.append("")
        lines.append("KL* - AUC*: " + ", ".join(
            f"d{METRIC_HEADERS[name]} {value:+.3f}" for name, value in deltas.items()
        ))
    if report.prior is not None:
        lines.append("")
        lines.append(f"Prior: {report.prior} (log-likelihood {report.prior.log_likelihood:.2f})")
    return lines


def format_summary_table(summary: pd.DataFrame, digits: int = 3) -> List[str]:
    """Markdown table of 'mean (std)' cells from a summary frame."""
    present = [name for name in ('leaf_count', *METRIC_NAMES) if f"{name}_mean" in summary.columns]
    headers = ["Model"] + [METRIC_HEADERS[name] for name in present]
    rows = []
    for _, record in summary.iterrows():
        cells = [str(record['model'])]
        for name in present:
            mean = record[f"{name}_mean"]
            std = record.get(f"{name}_std")
            cells.append(format_mean_std(
                None if pd.isna(mean) else float(mean),
                None if std is None or pd.isna(std) else float(std),
                1 if name == 'leaf_count' else digits,
            ))
        rows.append(cells)
    return markdown_table(headers, rows)


def format_delta_summary(deltas: pd.DataFrame, digits: int = 3) -> List[str]:
    """Mean (std) of the per-replication KL* - AUC* differences."""
    if deltas.empty:
        return []
    metrics = [c for c in deltas.columns if c != 'replication']
    cells = []
    for name in metrics:
        values = pd.to_numeric(deltas[name], errors='coerce')
        std = float(values.std(ddof=1)) if values.size > 1 else None
        cells.append(format_mean_std(float(values.mean()), std, digits))
    return markdown_table(["Delta (KL* - AUC*)"] + [METRIC_HEADERS[m] for m in metrics], [["test"] + cells])


# ============================================================================
# HISTOGRAM FRAMES
# ============================================================================

def histogram_frame(histograms: Mapping[str, ScoreHistogram]) -> pd.DataFrame:
    """Long table (model, bin, bin_lower, bin_upper, proportion, sample_size)."""
    records = []
    for name, hist in histograms.items():
        for index, row in enumerate(hist.to_rows()):
            records.append({'model': name, 'bin': index, **row, 'sample_size': hist.sample_size})
    return pd.DataFrame.from_records(
        records, columns=['model', 'bin', 'bin_lower', 'bin_upper', 'proportion', 'sample_size']
    )


def histograms_from_frame(frame: pd.DataFrame) -> Dict[str, ScoreHistogram]:
    """Inverse of histogram_frame, keeping first-seen model order."""
    histograms: Dict[str, ScoreHistogram] = {}
    for name, group in frame.groupby('model', sort=False):
        group = group.sort_values('bin')
        histograms[str(name)] = ScoreHistogram(
            proportions=group['proportion'].to_numpy(dtype=np.float64),
            sample_size=int(group['sample_size'].iloc[0]),
        )
    return histograms


# ============================================================================
# SVG HISTOGRAMS
# ============================================================================

def render_histogram_svg(title: str, scores: ScoreHistogram, reference: Optional[ScoreHistogram] = None) -> str:
    """
    Self-contained SVG bar chart of a score histogram.

    Bars are drawn for the scores; the reference histogram is overlaid as
    a step outline. Heights share one scale, so bar height is proportional
    to the bin proportion. Each bar carries its proportion in
    data-proportion.
    """
    top = float(np.max(scores.proportions))
    if reference is not None:
        top = max(top, float(np.max(reference.proportions)))
    top = top if top > 0 else 1.0

    m = scores.bin_count
    width = PLOT_WIDTH / m
    base = SVG_MARGIN + PLOT_HEIGHT

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<title>{escape(title)}</title>',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<text x="{SVG_WIDTH / 2:.1f}" y="{SVG_MARGIN / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    for i, proportion in enumerate(scores.proportions):
        height = proportion / top * PLOT_HEIGHT
        lines.append(
            f'<rect class="bar" x="{SVG_MARGIN + i * width:.4f}" y="{base - height:.4f}" '
            f'width="{width:.4f}" height="{height:.4f}" data-proportion="{proportion:.10g}" '
            f'fill="#4c72b0" stroke="white" stroke-width="0.5"/>'
        )

    if reference is not None:
        points = [f"{SVG_MARGIN:.4f},{base:.4f}"]
        for i, proportion in enumerate(reference.proportions):
            y = base - proportion / top * PLOT_HEIGHT
            points.append(f"{SVG_MARGIN + i * width:.4f},{y:.4f}")
            points.append(f"{SVG_MARGIN + (i + 1) * width:.4f},{y:.4f}")
        points.append(f"{SVG_MARGIN + PLOT_WIDTH:.4f},{base:.4f}")
        lines.append(
            f'<polyline class="reference" points="{" ".join(points)}" fill="none" '
            f'stroke="#dd8452" stroke-width="2"/>'
        )

    lines.append(
        f'<line x1="{SVG_MARGIN}" y1="{base}" x2="{SVG_MARGIN + PLOT_WIDTH}" y2="{base}" stroke="black"/>'
    )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = SVG_MARGIN + tick * PLOT_WIDTH
        lines.append(
            f'<text x="{x:.1f}" y="{base + 16:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
    lines.append('</svg>')
    return "\n".join(lines) + "\n"


# ============================================================================
# OUTPUT WRITER PROTOCOL AND IMPLEMENTATIONS
# ============================================================================

class OutputWriter(Protocol):
    """Anything that accepts rendered text."""

    def write(self, content: str) -> None:
        ...


class ConsoleWriter:
    """Prints content to stdout."""

    def write(self, content: str) -> None:
        print(content)

    def write_lines(self, lines: List[str]) -> None:
        for line in lines:
            print(line)


class FileWriter:
    """
    Writes content to a file, creating parent directories.

    Refuses to replace an existing file unless force is set.
    """

    def __init__(self, file_path: Union[str, Path], force: bool = False):
        self.file_path = Path(file_path)
        self.force = force

    def write(self, content: str) -> None:
        self.file_path.parent.mkdir(parents=True, exist_ok=True)
        if self.file_path.exists() and not self.force:
            raise FileExistsError(f"{self.file_path} exists (use --force to overwrite)")
        with open(self.file_path, 'w', encoding='utf-8', newline='') as f:
            f.write(content)

    def write_frame(self, frame: pd.DataFrame) -> None:
        self.write(frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n'))

    @staticmethod
    def lines_to_content(lines: List[str]) -> str:
        return '\n'.join(lines) + '\n'


def check_writable(paths: Iterable[Path], force: bool) -> None:
    """
    Fail before any work when an output would be overwritten.

    Raises:
        FileExistsError: Listing every existing path
    """
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise FileExistsError(f"Refusing to overwrite {', '.join(existing)} (use --force)")


# ============================================================================
# STUDY OUTPUTS
# ============================================================================

def build_manifest(result: StudyResult, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Seeds, configuration and library versions of a study run."""
    manifest = {
        'tool': 'scoreshape',
        'version': __version__,
        'created': datetime.now(timezone.utc).isoformat(timespec='seconds'),
        'study': result.config.to_dict(),
        'master_seed': result.config.seed,
        'replication_seeds': list(result.seeds),
        'threads': config.worker_count(),
        'versions': {
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'pandas': pd.__version__,
        },
        'files': list(STUDY_FILES[:-1]),
    }
    priors = [r.prior.to_dict() for r in result.reports if r.prior is not None]
    if priors:
        manifest['priors'] = priors
    if extra:
        manifest.update(extra)
    return manifest


def write_study_outputs(
    result: StudyResult,
    out_dir: Union[str, Path],
    force: bool = False,
    extra_manifest: Optional[Dict[str, Any]] = None,
) -> List[Path]:
    """
    Write the machine-readable outputs of a study.

    histograms.csv holds the first replication's test-score histograms and
    its reference histogram.
    candidates.csv holds the validation metrics of every grid point of
    every replication.

    Returns:
        Paths written, in STUDY_FILES order
    """
    out_dir = Path(out_dir)
    paths = [out_dir / name for name in STUDY_FILES]
    check_writable(paths, force)

    FileWriter(paths[0], force).write_frame(result.replication_frame())
    FileWriter(paths[1], force).write_frame(result.summary_frame())
    FileWriter(paths[2], force).write_frame(result.delta_frame())
    FileWriter(paths[3], force).write_frame(histogram_frame(result.reports[0].histograms))
    FileWriter(paths[4], force).write_frame(result.candidate_frame())
    FileWriter(paths[5], force).write(
        json.dumps(build_manifest(result, extra_manifest), indent=2, sort_keys=True) + "\n"
    )
    logger.info(f"Wrote study outputs to {out_dir}")
    return paths


def load_study_outputs(study_dir: Union[str, Path]) -> Tuple[pd.DataFrame, pd.DataFrame, Dict[str, ScoreHistogram], Dict[str, Any]]:
    """
    Read summary, deltas, histograms and manifest of a study directory.

    Raises:
        FileNotFoundError: Naming every expected file that is missing
    """
    study_dir = Path(study_dir)
    needed = [study_dir / name for name in (SUMMARY_FILE, DELTAS_FILE, HISTOGRAMS_FILE, MANIFEST_FILE)]
    missing = [str(p) for p in needed if not p.is_file()]
    if missing:
        raise FileNotFoundError(f"Study outputs missing; expected: {', '.join(missing)}")

    summary = pd.read_csv(needed[0])
    deltas = pd.read_csv(needed[1])
    histograms = histograms_from_frame(pd.read_csv(needed[2]))
    with open(needed[3], encoding='utf-8') as f:
        manifest = json.load(f)
    return summary, deltas, histograms, manifest


def write_report(study_dir: Union[str, Path], out_dir: Optional[Union[str, Path]] = None, force: bool = False) -> List[Path]:
    """
    Derive report.md and one SVG per selected-model histogram.

    Every histogram other than 'reference' becomes histogram_<slug>.svg with
    the reference overlaid.

    Returns:
        Paths written (markdown first)
    """
    summary, deltas, histograms, manifest = load_study_outputs(study_dir)
    out_dir = Path(out_dir) if out_dir is not None else Path(study_dir)
    reference = histograms.get('reference')
    figures = {name: out_dir / f"histogram_{slugify(name)}.svg" for name in histograms if name != 'reference'}
    report_path = out_dir / REPORT_FILE
    check_writable([report_path, *figures.values()], force)

    study = manifest.get('study', {})
    lines = [
        "# scoreshape study report",
        "",
        f"- learner: {study.get('learner', '-')}",
        "- data: " + (study['csv'] if study.get('csv') else f"DGP{study.get('dgp', '-')}, noise {study.get('noise', '-')}"),
        f"- replications: {len(manifest.get('replication_seeds', []))} (master seed {manifest.get('master_seed', '-')})",
        "",
        "## Test-split metrics, mean (std)",
        "",
    ]
    lines += format_summary_table(summary)
    delta_lines = format_delta_summary(deltas)
    if delta_lines:
        lines += ["", "## KL* versus AUC*", ""] + delta_lines
    if manifest.get('priors'):
        prior = manifest['priors'][0]
        lines += ["", f"Beta prior: alpha={prior['alpha']:.4f}, beta={prior['beta']:.4f}"]
    if figures:
        lines += ["", "## Test-score histograms (first replication)", ""]
        lines += [f"![{name}]({path.name})" for name, path in figures.items()]

    FileWriter(report_path, force).write(FileWriter.lines_to_content(lines))
    for name, path in figures.items():
        FileWriter(path, force).write(render_histogram_svg(f"{name} test scores", histograms[name], reference))
    logger.info(f"Wrote {report_path} and {len(figures)} histogram figure(s)")
    return [report_path, *figures.values()]
