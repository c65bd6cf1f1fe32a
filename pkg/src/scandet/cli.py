"""Command-line interface.

Subcommands cover the full pipeline: synthetic dataset generation,
segmentation / anchor-detector training and inference, evaluation,
latency benchmarking, PR-curve export, and the annotation service.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import evalbench, lfe, ppn
from .dataset import benchmark_views, load_dataset, save_dataset, scan_with_annotations
from .geometry import FROG_META
from .nn.training import TrainConfig, load_checkpoint, save_checkpoint
from .simulate import SimConfig, generate_dataset


def _log(msg: str) -> None:
    click.echo(msg, err=True)


@click.group()
def main():
    """2D-LiDAR people detection toolkit."""


@main.command()
@click.option("--scans", type=int, default=1000, show_default=True)
@click.option("--people", type=int, default=3, show_default=True)
@click.option("--pillars", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise-sigma", type=float, default=0.01, show_default=True)
@click.option("--preset", type=click.Choice(["frog"]), default="frog", show_default=True)
@click.option("--out", type=click.Path(), required=True)
def generate(scans, people, pillars, seed, noise_sigma, preset, out):
    """Generate a synthetic annotated dataset (HDF5)."""
    config = SimConfig(
        n_people=people, n_pillars=pillars, noise_sigma=noise_sigma, meta=FROG_META
    )
    ds = generate_dataset(config, scans, seed)
    save_dataset(ds, out)
    _log(f"wrote {scans} scans to {out}")


def _train_options(fn):
    for opt in reversed(
        [
            click.option("--dataset", type=click.Path(exists=True), required=True),
            click.option("--out", type=click.Path(), required=True),
            click.option("--epochs", type=int, default=100, show_default=True),
            click.option("--batch-size", type=int, default=None,
                         help="defaults: 32 for seg, 8 for ppn"),
            click.option("--lr", type=float, default=None,
                         help="defaults: 1e-3 for both detectors"),
            click.option("--weight-decay", type=float, default=None,
                         help="defaults: 4e-3 for seg, 4e-4 for ppn"),
            click.option("--patience", type=int, default=20, show_default=True),
            click.option("--seed", type=int, default=0, show_default=True),
            click.option(
                "--channels",
                type=str,
                default="32,64,96",
                show_default=True,
                help="comma-separated block channel widths",
            ),
        ]
    ):
        fn = opt(fn)
    return fn


def _parse_channels(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _train_config(epochs, batch_size, lr, weight_decay, patience, seed,
                  default_batch, default_lr, default_wd) -> TrainConfig:
    return TrainConfig(
        epochs=epochs,
        batch_size=batch_size if batch_size is not None else default_batch,
        lr=lr if lr is not None else default_lr,
        weight_decay=weight_decay if weight_decay is not None else default_wd,
        patience=patience,
        seed=seed,
    )


@main.command(name="train-seg")
@_train_options
def train_seg(dataset, out, epochs, batch_size, lr, weight_decay, patience, seed, channels):
    """Train the segmentation detector."""
    ds = load_dataset(dataset)
    config = lfe.LfeConfig(block_channels=_parse_channels(channels), seed=seed)
    tc = _train_config(epochs, batch_size, lr, weight_decay, patience, seed,
                       default_batch=32, default_lr=1e-3, default_wd=4e-3)
    model, history = lfe.train_segmentation(ds, config=config, train_config=tc, log=_log)
    save_checkpoint(out, model.state_dict(), {"kind": "seg", "config": config.as_dict()})
    _log(f"best val loss {min(history.val_losses):.6f}; checkpoint -> {out}")


@main.command(name="train-ppn")
@_train_options
@click.option("--seg-checkpoint", type=click.Path(exists=True), required=True,
              help="segmentation checkpoint to initialise the backbone from")
@click.option("--freeze-backbone", is_flag=True, default=False)
@click.option("--anchors", type=int, default=16, show_default=True)
def train_ppn(dataset, out, epochs, batch_size, lr, weight_decay, patience, seed,
              channels, seg_checkpoint, freeze_backbone, anchors):
    """Train the anchor-grid detector."""
    ds = load_dataset(dataset)
    config = lfe.LfeConfig(block_channels=_parse_channels(channels), seed=seed)
    backbone_state, _ = load_checkpoint(seg_checkpoint)
    tc = _train_config(epochs, batch_size, lr, weight_decay, patience, seed,
                       default_batch=8, default_lr=1e-3, default_wd=4e-4)
    model, history = ppn.train_ppn(
        ds, backbone_state, config=config, anchors_per_sector=anchors,
        train_config=tc, freeze_backbone=freeze_backbone, log=_log,
    )
    save_checkpoint(
        out, model.state_dict(),
        {"kind": "ppn", "config": config.as_dict(), "anchors_per_sector": anchors},
    )
    _log(f"best val loss {min(history.val_losses):.6f}; checkpoint -> {out}")


def _load_model(checkpoint, expected_kind):
    state, meta = load_checkpoint(checkpoint)
    if meta.get("kind") != expected_kind:
        raise click.ClickException(
            f"checkpoint kind {meta.get('kind')!r}, expected {expected_kind!r}"
        )
    config = lfe.LfeConfig.from_dict(meta["config"])
    if expected_kind == "seg":
        model = lfe.SegmentationModel(config)
    else:
        model = ppn.PpnModel(config, anchors_per_sector=meta.get("anchors_per_sector", 16))
    model.load_state_dict(state)
    model.eval()
    return model


def _split_indices(ds, split):
    if split == "all":
        return np.arange(ds.num_scans)
    train_idx, val_idx = benchmark_views(ds)
    return val_idx if split == "val" else train_idx


def _detect_common(dataset, checkpoint, out, kind, detect_fn, split):
    ds = load_dataset(dataset)
    model = _load_model(checkpoint, kind)
    indices = _split_indices(ds, split)
    per_scan = {}
    n = 0
    for i in indices:
        scan, _ = scan_with_annotations(ds, int(i))
        dets = detect_fn(scan, model)
        per_scan[int(i)] = dets
        n += len(dets)
    evalbench.save_detections(out, per_scan, detector_name=kind)
    _log(f"{n} detections over {len(indices)} scans -> {out}")


@main.command(name="detect-seg")
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(["all", "train", "val"]), default="all",
              show_default=True)
def detect_seg(dataset, checkpoint, out, split):
    """Run the segmentation detector, writing detection JSON."""
    _detect_common(dataset, checkpoint, out, "seg", lfe.detect_peaks, split)


@main.command(name="detect-ppn")
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(["all", "train", "val"]), default="all",
              show_default=True)
def detect_ppn(dataset, checkpoint, out, split):
    """Run the anchor-grid detector, writing detection JSON."""
    _detect_common(dataset, checkpoint, out, "ppn", ppn.detect_ppn, split)


@main.command()
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--detections", type=click.Path(exists=True), required=True)
@click.option("--d", "d_list", type=float, multiple=True, default=(0.5, 0.3),
              show_default=True, help="association distance(s) in metres")
@click.option("--split", type=click.Choice(["all", "train", "val"]), default="val",
              show_default=True)
@click.option("--out", type=click.Path(), default=None, help="report JSON path")
def evaluate(dataset, detections, d_list, split, out):
    """Evaluate detections against dataset ground truth."""
    ds = load_dataset(dataset)
    indices = _split_indices(ds, split)
    per_scan, detector_name = evalbench.load_detections(detections)
    gts = {}
    for i in indices:
        _, circles = scan_with_annotations(ds, int(i))
        gts[int(i)] = [(c.x, c.y) for c in circles]
    per_scan = {i: d for i, d in per_scan.items() if i in gts}
    report = evalbench.evaluate_detections(
        per_scan, gts, d_list=d_list, detector_name=detector_name
    )
    if out:
        with open(out, "w") as f:
            json.dump(report, f, indent=2)
        _log(f"report -> {out}")
    for entry in report["results"]:
        click.echo(
            f"d={entry['association_distance']:g}: AP={entry['ap']:.4f} "
            f"PeakF1={entry['peak_f1']:.4f} EER={entry['eer']:.4f}"
        )


@main.command()
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--detector", type=click.Choice(["seg", "ppn"]), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--scans", type=int, default=200, show_default=True)
def bench(dataset, detector, checkpoint, scans):
    """Measure single-scan detection latency."""
    ds = load_dataset(dataset)
    model = _load_model(checkpoint, detector)
    detect_fn = lfe.detect_peaks if detector == "seg" else ppn.detect_ppn
    scan_list = [
        scan_with_annotations(ds, i % ds.num_scans)[0] for i in range(scans)
    ]
    stats = evalbench.latency_bench(lambda s: detect_fn(s, model), scan_list)
    click.echo(json.dumps(stats, indent=2))


@main.command()
@click.option("--report", type=click.Path(exists=True), required=True)
@click.option("--d", "d_value", type=float, default=0.5, show_default=True)
@click.option("--out", type=click.Path(), default="curve.csv", show_default=True)
def curve(report, d_value, out):
    """Export a PR curve from a report JSON as CSV."""
    with open(report) as f:
        doc = json.load(f)
    entry = next(
        (r for r in doc["results"] if abs(r["association_distance"] - d_value) < 1e-9),
        None,
    )
    if entry is None:
        available = [r["association_distance"] for r in doc["results"]]
        raise click.ClickException(f"no curve for d={d_value:g}; available: {available}")
    with open(out, "w", newline="") as f:
        f.write("threshold,precision,recall\n")
        for p in entry["curve"]:
            f.write(f"{p['threshold']},{p['precision']},{p['recall']}\n")
    _log(f"{len(entry['curve'])} PR points -> {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
def serve(host, port):
    """Run the annotation HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
