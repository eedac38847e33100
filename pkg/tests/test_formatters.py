"""
Unit tests for formatters module

Pure formatting helpers, histogram frames, the SVG emitter and the study
output / report writers.
"""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from formatters import (
    PLOT_HEIGHT,
    STUDY_FILES,
    FileWriter,
    format_mean_std,
    format_value,
    histogram_frame,
    histograms_from_frame,
    markdown_table,
    render_histogram_svg,
    slugify,
    write_report,
    write_study_outputs,
)
from models import ScoreHistogram
from selection_harness import StudyConfig, replicate

SVG_NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def small_study():
    """Two tree replications selected by AUC* and KL* only."""
    study = StudyConfig(dgp=1, n=120, reps=2, seed=3, criteria=("auc", "kl"),
                        grid={"min_bucket": [10, 30]}, include_extremes=False)
    return replicate(study, workers=1)


# ============================================================================
# PURE FORMATTING
# ============================================================================

@pytest.mark.unit
class TestFormatting:

    @pytest.mark.parametrize("value, expected", [
        (0.08612, "0.086"),
        (None, "-"),
        (float("nan"), "-"),
        (1.0, "1.000"),
    ])
    def test_format_value(self, value, expected):
        assert format_value(value) == expected

    def test_mean_std(self):
        assert format_mean_std(0.086, 0.019) == "0.086 (0.019)"
        assert format_mean_std(0.5, None) == "0.500"
        assert format_mean_std(None, 0.1) == "-"

    @pytest.mark.parametrize("name, slug", [
        ("KL*", "kl_star"),
        ("AUC*", "auc_star"),
        ("smallest", "smallest"),
        ("GLM", "glm"),
        ("***", "star_star_star"),
        ("  ", "row"),
    ])
    def test_slugify(self, name, slug):
        assert slugify(name) == slug

    def test_markdown_table_alignment(self):
        lines = markdown_table(["Model", "AUC"], [["KL*", "0.700"]])
        assert lines == ["| Model | AUC |", "|:---|---:|", "| KL* | 0.700 |"]


# ============================================================================
# HISTOGRAMS
# ============================================================================

@pytest.mark.unit
class TestHistogramFrames:

    def test_frame_round_trip_keeps_order(self):
        histograms = {
            "reference": ScoreHistogram.from_counts([1, 2, 1]),
            "KL*": ScoreHistogram.from_counts([0, 3, 1]),
        }
        frame = histogram_frame(histograms)
        assert len(frame) == 6
        restored = histograms_from_frame(frame)
        assert list(restored) == ["reference", "KL*"]
        assert restored["KL*"].proportions.tolist() == pytest.approx([0.0, 0.75, 0.25])
        assert restored["reference"].sample_size == 4


@pytest.mark.unit
class TestRenderHistogramSvg:

    def test_bar_heights_follow_proportions(self):
        scores = ScoreHistogram.from_counts([1, 3, 0, 4])
        reference = ScoreHistogram.from_counts([2, 2, 2, 2])
        root = ET.fromstring(render_histogram_svg("KL* & friends", scores, reference))

        bars = [r for r in root.iter(f"{SVG_NS}rect") if r.get("class") == "bar"]
        assert len(bars) == 4
        top = 0.5
        for bar, proportion in zip(bars, scores.proportions):
            assert float(bar.get("data-proportion")) == pytest.approx(proportion)
            assert float(bar.get("height")) == pytest.approx(proportion / top * PLOT_HEIGHT, abs=1e-3)

        outline = root.find(f"{SVG_NS}polyline")
        assert outline.get("class") == "reference"
        assert root.find(f"{SVG_NS}title").text == "KL* & friends"

    def test_without_reference(self):
        root = ET.fromstring(render_histogram_svg("AUC*", ScoreHistogram.from_counts([1, 1])))
        assert root.find(f"{SVG_NS}polyline") is None
        heights = [float(r.get("height")) for r in root.iter(f"{SVG_NS}rect") if r.get("class") == "bar"]
        assert heights == pytest.approx([PLOT_HEIGHT, PLOT_HEIGHT])


# ============================================================================
# FILE OUTPUTS
# ============================================================================

@pytest.mark.unit
class TestFileWriter:

    def test_refuses_to_overwrite(self, tmp_path):
        path = tmp_path / "out" / "a.txt"
        FileWriter(path).write("one")
        with pytest.raises(FileExistsError, match="--force"):
            FileWriter(path).write("two")
        FileWriter(path, force=True).write("three")
        assert path.read_text(encoding="utf-8") == "three"


@pytest.mark.unit
class TestStudyOutputs:

    def test_files_and_manifest(self, small_study, tmp_path):
        paths = write_study_outputs(small_study, tmp_path)
        assert [p.name for p in paths] == list(STUDY_FILES)

        manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["master_seed"] == 3
        assert manifest["replication_seeds"] == list(small_study.seeds)
        assert set(manifest["versions"]) == {"numpy", "scipy", "pandas"}

        replications = pd.read_csv(tmp_path / "replications.csv")
        assert len(replications) == 4
        assert replications["model"].tolist() == ["AUC*", "KL*", "AUC*", "KL*"]
        summary = pd.read_csv(tmp_path / "summary.csv")
        assert summary["kl_mean"].iloc[1] == pytest.approx(replications["kl"].iloc[[1, 3]].mean())

    def test_candidates_file_has_one_row_per_grid_point(self, small_study, tmp_path):
        write_study_outputs(small_study, tmp_path)
        candidates = pd.read_csv(tmp_path / "candidates.csv")

        assert len(candidates) == 2 * 2
        assert candidates["replication"].tolist() == [0, 0, 1, 1]
        assert candidates["min_bucket"].tolist() == [10, 30, 10, 30]
        assert candidates["point"].tolist() == [0, 1, 0, 1]
        assert candidates["mtry"].isna().all()

        first = small_study.reports[0]
        assert candidates["leaf_count"].iloc[:2].tolist() == [c.leaf_count for c in first.candidates]
        assert candidates["kl"].iloc[:2].to_numpy() == pytest.approx([c.validation.kl for c in first.candidates])
        kl_row = first.row("KL*")
        assert candidates["kl"].iloc[:2].min() == pytest.approx(kl_row.validation.kl)

    def test_existing_outputs_need_force(self, small_study, tmp_path):
        write_study_outputs(small_study, tmp_path)
        with pytest.raises(FileExistsError):
            write_study_outputs(small_study, tmp_path)
        write_study_outputs(small_study, tmp_path, force=True)

    def test_report_and_figures(self, small_study, tmp_path):
        write_study_outputs(small_study, tmp_path)
        written = write_report(tmp_path)
        assert [p.name for p in written] == ["report.md", "histogram_auc_star.svg", "histogram_kl_star.svg"]

        report = (tmp_path / "report.md").read_text(encoding="utf-8")
        assert "- learner: tree" in report
        assert "KL* versus AUC*" in report
        assert "![KL*](histogram_kl_star.svg)" in report

        root = ET.fromstring((tmp_path / "histogram_kl_star.svg").read_text(encoding="utf-8"))
        proportions = [float(r.get("data-proportion")) for r in root.iter(f"{SVG_NS}rect")
                       if r.get("class") == "bar"]
        expected = small_study.reports[0].histograms["KL*"].proportions
        assert np.allclose(proportions, expected)

    def test_report_into_another_directory(self, small_study, tmp_path):
        write_study_outputs(small_study, tmp_path / "study")
        written = write_report(tmp_path / "study", tmp_path / "report")
        assert all(p.parent == tmp_path / "report" for p in written)

    def test_report_needs_study_outputs(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="summary.csv"):
            write_report(tmp_path)
