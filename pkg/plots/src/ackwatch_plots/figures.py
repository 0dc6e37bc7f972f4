"""Render the four figure analogues from the simulator's figure-data CSVs.

Inputs are the files written by ``ackwatch figures-data``: per-receipt age
series, the moving-average baseline, the receiver posterior, the combined
receiver/sensor posterior, and ``annotations.json`` with the markers
(activation step and indices, thresholds, theoretical mean ages).  No
simulation logic lives here; rendering is pure given the inputs, and
timestamps are never embedded so re-rendering is byte-stable.

Each rendered PNG embeds its markers as JSON in the image ``Description``
text field, which the headless render test reads back alongside the
plotted-series extents returned by `render`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_IDS = ("age", "moving_average", "posterior_receiver", "posterior_combined")

_INPUT_FILES = {
    "age": ("age_series.csv",),
    "moving_average": ("moving_average.csv",),
    "posterior_receiver": ("posterior_receiver.csv",),
    "posterior_combined": ("posterior_combined.csv",),
}


class FigureDataError(RuntimeError):
    """Missing input file or column."""


@dataclass
class FigureSpec:
    figure: str
    inputs: dict[str, Path]
    annotations: dict

    def __post_init__(self):
        if self.figure not in FIGURE_IDS:
            raise FigureDataError(f"unknown figure id {self.figure!r}; known: {FIGURE_IDS}")


@dataclass
class RenderResult:
    path: Path
    figure: str
    markers: dict
    extents: dict[str, dict[str, float]] = field(default_factory=dict)


def build_spec(figure: str, data_dir: str | Path) -> FigureSpec:
    """Figure specification from a figures-data directory."""
    data_dir = Path(data_dir)
    annotations_path = data_dir / "annotations.json"
    if not annotations_path.exists():
        raise FigureDataError(f"annotations file not found: {annotations_path}")
    annotations = json.loads(annotations_path.read_text())
    inputs = {}
    for name in _INPUT_FILES.get(figure, ()):
        path = data_dir / name
        if not path.exists():
            raise FigureDataError(f"input file not found: {path}")
        inputs[name] = path
    return FigureSpec(figure=figure, inputs=inputs, annotations=annotations)


def _read_columns(
    path: Path, required: tuple[str, ...], text_columns: tuple[str, ...] = ()
) -> dict[str, list]:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [name for name in required if name not in header]
        if missing:
            raise FigureDataError(f"{path} is missing columns {missing}; found {header}")
        columns: dict[str, list] = {name: [] for name in required}
        for row in reader:
            for name in required:
                value = row[name]
                if name in text_columns:
                    columns[name].append(value)
                else:
                    columns[name].append(float(value) if value != "" else float("nan"))
    return columns


def _extent(xs, ys) -> dict[str, float]:
    return {
        "xmin": float(min(xs)),
        "xmax": float(max(xs)),
        "ymin": float(min(ys)),
        "ymax": float(max(ys)),
        "points": len(xs),
    }


def _save(fig, out_path: Path, figure_id: str, markers: dict) -> None:
    metadata = {
        "Title": f"ackwatch-plots:{figure_id}",
        "Description": json.dumps(markers, sort_keys=True),
    }
    fig.savefig(out_path, dpi=110, metadata=metadata)
    plt.close(fig)


def _render_age(spec: FigureSpec, out_path: Path) -> RenderResult:
    data = _read_columns(spec.inputs["age_series.csv"], ("m", "k", "age"))
    notes = spec.annotations
    markers = {"activation_step": notes["activation_step"]}
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(data["k"], data["age"], lw=0.7, color="tab:blue")
    if notes["activation_step"] is not None:
        ax.axvline(notes["activation_step"], color="black", lw=1.2)
    ax.set_xlabel("process time k")
    ax.set_ylabel("age at receipt")
    ax.set_title("Age of innovation at the receiver")
    fig.tight_layout()
    _save(fig, out_path, spec.figure, markers)
    return RenderResult(
        path=out_path,
        figure=spec.figure,
        markers=markers,
        extents={"age": _extent(data["k"], data["age"])},
    )


def _render_moving_average(spec: FigureSpec, out_path: Path) -> RenderResult:
    data = _read_columns(spec.inputs["moving_average.csv"], ("m", "mean_age",))
    notes = spec.annotations
    markers = {
        "activation_receipt": notes["activation_receipt"],
        "mean_age_pre": notes["mean_age_pre"],
        "mean_age_post": notes["mean_age_post"],
        "window": notes["moving_average_window"],
    }
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(data["m"], data["mean_age"], color="tab:blue", lw=1.0)
    if notes["activation_receipt"] is not None:
        ax.axvline(notes["activation_receipt"], color="black", lw=1.2)
    ax.axhline(notes["mean_age_pre"], color="black", ls="--", lw=1.0)
    ax.axhline(notes["mean_age_post"], color="black", ls="-.", lw=1.0)
    ax.set_xlabel("packet receipt m")
    ax.set_ylabel(f"mean age, last {notes['moving_average_window']} receipts")
    ax.set_title("Moving-average age with theoretical means")
    fig.tight_layout()
    _save(fig, out_path, spec.figure, markers)
    return RenderResult(
        path=out_path,
        figure=spec.figure,
        markers=markers,
        extents={"moving_average": _extent(data["m"], data["mean_age"])},
    )


def _render_posterior_receiver(spec: FigureSpec, out_path: Path) -> RenderResult:
    data = _read_columns(spec.inputs["posterior_receiver.csv"], ("m", "z"))
    notes = spec.annotations
    markers = {
        "activation_receipt": notes["activation_receipt"],
        "threshold": notes["posterior_receiver_threshold"],
        "detector": notes["posterior_receiver_detector"],
    }
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(data["m"], data["z"], color="tab:blue", lw=1.0)
    if notes["activation_receipt"] is not None:
        ax.axvline(notes["activation_receipt"], color="black", lw=1.2)
    ax.axhline(markers["threshold"], color="black", ls="--", lw=1.0)
    ax.set_xlabel("packet receipt m")
    ax.set_ylabel("no-change posterior")
    ax.set_title("Receiver no-change posterior")
    fig.tight_layout()
    _save(fig, out_path, spec.figure, markers)
    return RenderResult(
        path=out_path,
        figure=spec.figure,
        markers=markers,
        extents={"posterior": _extent(data["m"], data["z"])},
    )


def _render_posterior_combined(spec: FigureSpec, out_path: Path) -> RenderResult:
    data = _read_columns(
        spec.inputs["posterior_combined.csv"], ("side", "index", "k", "z"), text_columns=("side",)
    )
    notes = spec.annotations
    sides = data["side"]
    raise_on_missing = {"receiver", "sensor"} - set(sides)
    if raise_on_missing:
        raise FigureDataError(f"posterior_combined.csv is missing rows for {sorted(raise_on_missing)}")

    def select(side):
        rows = [i for i, s in enumerate(sides) if s == side]
        return (
            [data["index"][i] for i in rows],
            [data["k"][i] for i in rows],
            [data["z"][i] for i in rows],
        )

    rx_index, rx_k, rx_z = select("receiver")
    tx_index, tx_k, tx_z = select("sensor")
    markers = {
        "activation_step": notes["activation_step"],
        "activation_receipt": notes["activation_receipt"],
        "activation_ack": notes["activation_ack"],
        "threshold": notes["combined_threshold"],
        "receiver_detector": notes["combined_receiver_detector"],
        "sensor_detector": notes["combined_sensor_detector"],
    }
    fig, (ax_rx, ax_tx, ax_k) = plt.subplots(3, 1, figsize=(7, 7.2), sharex=False)
    ax_rx.plot(rx_index, rx_z, color="tab:blue", lw=1.0)
    if notes["activation_receipt"] is not None:
        ax_rx.axvline(notes["activation_receipt"], color="black", lw=1.2)
    ax_rx.axhline(markers["threshold"], color="black", ls="--", lw=1.0)
    ax_rx.set_xlabel("packet receipt m")
    ax_rx.set_ylabel("receiver posterior")

    ax_tx.plot(tx_index, tx_z, color="tab:red", ls="--", lw=1.0)
    if notes["activation_ack"] is not None:
        ax_tx.axvline(notes["activation_ack"], color="black", lw=1.2)
    ax_tx.axhline(markers["threshold"], color="black", ls="--", lw=1.0)
    ax_tx.set_xlabel("acknowledgment receipt n")
    ax_tx.set_ylabel("sensor posterior")

    ax_k.plot(rx_k, rx_z, color="tab:blue", lw=1.0, label="receiver")
    ax_k.plot(tx_k, tx_z, color="tab:red", ls="--", lw=1.0, label="sensor")
    if notes["activation_step"] is not None:
        ax_k.axvline(notes["activation_step"], color="black", lw=1.2)
    ax_k.axhline(markers["threshold"], color="black", ls="--", lw=1.0)
    ax_k.set_xlabel("process time k")
    ax_k.set_ylabel("posterior")
    ax_k.legend(loc="lower left", fontsize=8)

    fig.suptitle("No-change posterior: receiver vs sensor")
    fig.tight_layout()
    _save(fig, out_path, spec.figure, markers)
    return RenderResult(
        path=out_path,
        figure=spec.figure,
        markers=markers,
        extents={
            "receiver": _extent(rx_index, rx_z),
            "sensor": _extent(tx_index, tx_z),
            "process_time": _extent(rx_k + tx_k, rx_z + tx_z),
        },
    )


_RENDERERS = {
    "age": _render_age,
    "moving_average": _render_moving_average,
    "posterior_receiver": _render_posterior_receiver,
    "posterior_combined": _render_posterior_combined,
}


def render(spec: FigureSpec, out_path: str | Path) -> RenderResult:
    """Render one figure to PNG and report the plotted extents and markers."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    return _RENDERERS[spec.figure](spec, out_path)
