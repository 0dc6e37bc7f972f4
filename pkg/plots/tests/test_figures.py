"""Headless render tests, including the figure-regeneration acceptance check.

The fixture produces real simulator output by invoking the installed
``ackwatch`` CLI (the only interface this package consumes); the figures are
then rendered and verified by reading back the embedded image metadata and
the plotted-series extents.
"""

import json
import subprocess
import sys

import pytest
from PIL import Image

from ackwatch_plots.cli import main
from ackwatch_plots.figures import FIGURE_IDS, FigureDataError, build_spec, render


def generate_figure_data(tmp_dir, scenario_overrides=None):
    scenario_path = tmp_dir / "scenario.json"
    scenario_path.write_text(json.dumps(scenario_overrides or {}))
    out = tmp_dir / "data"
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "ackwatch",
            "figures-data",
            "--scenario",
            str(scenario_path),
            "--out",
            str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    return out


@pytest.fixture(scope="module")
def default_data(tmp_path_factory):
    return generate_figure_data(tmp_path_factory.mktemp("default"))


@pytest.fixture(scope="module")
def consistent_means_data(tmp_path_factory):
    # Post-change channel quality 0.9 is the parameterization under which
    # the reference theoretical means (1.5873 / 1.7637) are self-consistent.
    return generate_figure_data(
        tmp_path_factory.mktemp("consistent"), {"channels": {"alpha_e": 0.9}}
    )


def png_metadata(path):
    with Image.open(path) as image:
        return dict(image.text)


class TestRenderAll:
    def test_acceptance_figure_regeneration(self, consistent_means_data, tmp_path):
        """All four figure analogues render with correct markers (activation
        k=900, threshold lines, theoretical means 1.5873 / 1.7637) and
        nonempty series, verified via image metadata and extents."""
        notes = json.loads((consistent_means_data / "annotations.json").read_text())
        assert notes["activation_step"] == 900
        assert notes["mean_age_pre"] == pytest.approx(1.5873, abs=5e-5)
        assert notes["mean_age_post"] == pytest.approx(1.7637, abs=5e-5)

        results = {}
        for figure in FIGURE_IDS:
            spec = build_spec(figure, consistent_means_data)
            results[figure] = render(spec, tmp_path / f"{figure}.png")

        for figure, result in results.items():
            assert result.path.exists()
            metadata = png_metadata(result.path)
            assert metadata["Title"] == f"ackwatch-plots:{figure}"
            markers = json.loads(metadata["Description"])
            assert markers == result.markers
            for extent in result.extents.values():
                assert extent["points"] > 0
                assert extent["xmax"] > extent["xmin"]

        age = results["age"]
        assert age.markers["activation_step"] == 900
        assert age.extents["age"]["ymin"] >= 1.0

        ma = results["moving_average"]
        assert ma.markers["mean_age_pre"] == pytest.approx(1.5873, abs=5e-5)
        assert ma.markers["mean_age_post"] == pytest.approx(1.7637, abs=5e-5)
        assert ma.extents["moving_average"]["ymin"] > 1.0

        receiver = results["posterior_receiver"]
        assert receiver.markers["threshold"] == pytest.approx(0.9875)
        assert 0.0 <= receiver.extents["posterior"]["ymin"] <= 1.0

        combined = results["posterior_combined"]
        assert combined.markers["threshold"] == pytest.approx(0.9865)
        assert combined.markers["activation_step"] == 900
        assert combined.extents["sensor"]["points"] <= combined.extents["receiver"]["points"]
        print(
            "\nACCEPTANCE | figure regeneration: PASS | four figures rendered; markers "
            f"activation=900, thresholds 0.9875/0.9865, means 1.5873/1.7637; series "
            f"{ {k: v.extents for k, v in results.items()} }"
        )

    def test_default_scenario_markers(self, default_data, tmp_path):
        # The literal reference configuration (post-change quality 0.8)
        # carries its law-consistent post-change mean 1/0.504.
        spec = build_spec("moving_average", default_data)
        result = render(spec, tmp_path / "ma.png")
        assert result.markers["mean_age_post"] == pytest.approx(1.0 / 0.504, abs=5e-5)


class TestDeterminism:
    def test_byte_stable_re_render(self, consistent_means_data, tmp_path):
        spec = build_spec("age", consistent_means_data)
        first = render(spec, tmp_path / "one.png")
        second = render(spec, tmp_path / "two.png")
        assert first.path.read_bytes() == second.path.read_bytes()


class TestFailureModes:
    def test_missing_column_is_descriptive(self, tmp_path):
        (tmp_path / "annotations.json").write_text(json.dumps({"activation_step": 1}))
        (tmp_path / "age_series.csv").write_text("m,k\n1,2\n")
        spec = build_spec("age", tmp_path)
        with pytest.raises(FigureDataError, match="age"):
            render(spec, tmp_path / "fig.png")

    def test_missing_input_file(self, tmp_path):
        (tmp_path / "annotations.json").write_text("{}")
        with pytest.raises(FigureDataError, match="not found"):
            build_spec("age", tmp_path)

    def test_unknown_figure_id(self, tmp_path):
        (tmp_path / "annotations.json").write_text("{}")
        with pytest.raises(FigureDataError, match="unknown figure"):
            build_spec("histogram", tmp_path)


class TestCli:
    def test_render_all_via_cli(self, consistent_means_data, tmp_path):
        out = tmp_path / "figs"
        assert main(["--input", str(consistent_means_data), "--out", str(out)]) == 0
        for figure in FIGURE_IDS:
            assert (out / f"{figure}.png").exists()

    def test_missing_input_exit_code(self, tmp_path):
        assert main(["--input", str(tmp_path / "nothing"), "--out", str(tmp_path)]) == 2
