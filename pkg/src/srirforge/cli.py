"""srirforge command line: calibrate rooms, render SRIR banks, synthesize
mixture datasets, and score predictions.

Exit codes: 0 success, 2 input/config error, 3 insufficient data,
4 infeasible physics, 5 scheduling failure.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import numpy as np

from .annotations import FrameAnnotations
from .bank import TrajectoryOutsideRoomError, build_and_save_bank, load_room_spec
from .calibration import (
    InfeasibleRoomError,
    InsufficientDecayError,
    calibrate_room,
    dc_block,
    energy_decay_curve,
)
from .ism import Rir
from .metrics import EmptyReferenceError, compute_scores, events_from_annotations, report
from .mixer import DatasetConfig, SchedulingError, generate_dataset, ingest_corpus
from .wavio import read_wav

EXIT_INPUT = 2
EXIT_INSUFFICIENT_DATA = 3
EXIT_INFEASIBLE = 4
EXIT_SCHEDULING = 5


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_dims(text: str) -> np.ndarray:
    parts = text.replace("x", ",").split(",")
    if len(parts) != 3:
        raise ValueError(f"dims must be three numbers like 7x5x3, got {text!r}")
    return np.array([float(p) for p in parts])


def _parse_region(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"region must look like -5:-25, got {text!r}")
    return float(parts[0]), float(parts[1])


@click.group()
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]))
def main(log_level):
    """Geometric-acoustics SRIR simulation and SELD dataset tooling."""
    logging.basicConfig(level=log_level.upper())


@main.command()
@click.argument("rir_dir", type=click.Path(file_okay=False))
@click.option("--dims", required=True, help="Room dimensions in meters, e.g. 7x5x3.")
@click.option("--region", default="-5:-25", show_default=True,
              help="EDC fit region in dB, start:end.")
@click.option("--speed-of-sound", default=343.0, show_default=True)
@click.option("--dc-block", "dc_block_hz", default=50.0, show_default=True,
              help="High-pass cutoff in Hz applied before analysis; 0 disables.")
@click.option("--plot", "plot_prefix", default=None,
              help="Write the EDC and fit line as <prefix>.csv and <prefix>.svg.")
def calibrate(rir_dir, dims, region, speed_of_sound, dc_block_hz, plot_prefix):
    """Estimate RT60/absorption/reflection order from RIR WAVs in RIR_DIR."""
    try:
        dims_v = _parse_dims(dims)
        fit_region = _parse_region(region)
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    cutoff = dc_block_hz if dc_block_hz > 0 else None
    rir_paths = sorted(Path(rir_dir).glob("*.wav"))
    if not rir_paths:
        _fail(EXIT_INPUT, f"no RIR WAV files in {rir_dir}")
    rirs = []
    try:
        for path in rir_paths:
            rate, data = read_wav(path)
            mono = data if data.ndim == 1 else data[:, 0]
            rirs.append(Rir(samples=mono, sample_rate=rate))
    except (ValueError, FileNotFoundError) as exc:
        _fail(EXIT_INPUT, str(exc))
    try:
        result = calibrate_room(rirs, dims_v, region=fit_region, c=speed_of_sound,
                                dc_block_hz=cutoff)
    except InfeasibleRoomError as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except InsufficientDecayError as exc:
        _fail(EXIT_INSUFFICIENT_DATA, str(exc))
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    click.echo(f"rt60: {result.rt60:.4f} s")
    click.echo(f"absorption: {result.absorption:.4f}")
    click.echo(f"max_order: {result.max_order}")
    click.echo(
        f"fit: {result.fit_region[0]:.1f}..{result.fit_region[1]:.1f} dB, "
        f"slope {result.fit_slope:.1f} dB/s, r^2 {result.r_squared:.4f}"
    )
    if plot_prefix:
        _export_edc_plot(rirs, result, fit_region, plot_prefix, cutoff)
        click.echo(f"wrote {plot_prefix}.csv and {plot_prefix}.svg")


def _export_edc_plot(rirs, result, fit_region, prefix, dc_block_hz=None):
    if dc_block_hz is not None:
        rirs = [dc_block(r, dc_block_hz) for r in rirs]
    curves = [energy_decay_curve(r) for r in rirs]
    n = min(c.values.shape[0] for c in curves)
    times = curves[0].times[:n]
    fit_line = result.fit_slope * times + fit_region[0] - result.fit_slope * _level_time(
        curves[0], fit_region[0]
    )
    header = "time_s," + ",".join(f"edc_{i}_db" for i in range(len(curves))) + ",fit_db"
    cols = [times] + [c.values[:n] for c in curves] + [fit_line]
    table = np.stack(cols, axis=1)
    np.savetxt(f"{prefix}.csv", table, delimiter=",", header=header, comments="")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for i, c in enumerate(curves):
        ax.plot(times, c.values[:n], lw=0.8, label=f"RIR {i}")
    ax.plot(times, fit_line, "k--", lw=1.2, label="fit")
    ax.axhline(fit_region[0], color="gray", ls=":", lw=0.8)
    ax.axhline(fit_region[1], color="gray", ls=":", lw=0.8)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("energy decay (dB)")
    ax.set_ylim(max(-80.0, fit_region[1] * 3), 3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(f"{prefix}.svg")
    plt.close(fig)


def _level_time(curve, level_db: float) -> float:
    below = np.nonzero(curve.values <= level_db)[0]
    return float(below[0] / curve.sample_rate) if below.size else 0.0


@main.command("render-srirs")
@click.option("--spec", "spec_path", required=True, type=click.Path(dir_okay=False),
              help="Room spec JSON file.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--jobs", default=1, show_default=True, help="Parallel render workers.")
def render_srirs(spec_path, out_dir, jobs):
    """Render the SRIR bank described by a room spec into OUT."""
    try:
        spec = load_room_spec(spec_path)
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    done = 0

    def progress(n):
        nonlocal done
        done += n
        click.echo(f"rendered {done} SRIRs", err=True)

    try:
        manifest = build_and_save_bank(spec, out_dir, jobs=max(1, jobs), progress=progress)
    except (TrajectoryOutsideRoomError, InfeasibleRoomError) as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    click.echo(f"bank: {len(manifest['entries'])} SRIRs in {out_dir}")


@main.command()
@click.option("--spec-dir", required=True, type=click.Path(file_okay=False),
              help="Directory of room spec JSON files (>= 9 rooms for the full protocol).")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(file_okay=False),
              help="Labeled event corpus: one subdirectory per class, WAVs inside.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", required=True, type=int, envvar="SRIRFORGE_SEED",
              help="Master seed (falls back to SRIRFORGE_SEED).")
@click.option("--scale", default=1.0, show_default=True,
              help="Fold-size multiplier on the 900/300 train/val protocol.")
def synthesize(spec_dir, corpus_dir, out_dir, seed, scale):
    """Synthesize room-disjoint train/val mixture folds with annotations."""
    from .bank import build_bank

    spec_paths = sorted(Path(spec_dir).glob("*.json"))
    if not spec_paths:
        _fail(EXIT_INPUT, f"no room spec JSON files in {spec_dir}")
    labels = sorted(p.name for p in Path(corpus_dir).iterdir() if p.is_dir())
    if not labels:
        _fail(EXIT_INPUT, f"no labeled subdirectories in corpus {corpus_dir}")
    label_map = {name: i for i, name in enumerate(labels)}
    try:
        corpus = ingest_corpus(corpus_dir, label_map)
        if not corpus:
            _fail(EXIT_INPUT, f"corpus {corpus_dir} has no usable clips")
        config = DatasetConfig(scale=scale)
        if len(spec_paths) < config.n_train_rooms + config.n_val_rooms:
            _fail(
                EXIT_INPUT,
                f"need {config.n_train_rooms + config.n_val_rooms} rooms "
                f"({config.n_train_rooms} train + {config.n_val_rooms} val), "
                f"got {len(spec_paths)}",
            )
        banks = []
        for path in spec_paths:
            spec = load_room_spec(path)
            click.echo(f"building bank for room {spec.name}", err=True)
            banks.append(build_bank(spec))
        manifest = generate_dataset(banks, corpus, out_dir, seed=seed, config=config)
    except SchedulingError as exc:
        _fail(EXIT_SCHEDULING, str(exc))
    except (TrajectoryOutsideRoomError, InfeasibleRoomError) as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    click.echo(
        f"dataset: {len(manifest['mixtures'])} mixtures "
        f"({len(manifest['folds']['train'])} train rooms, "
        f"{len(manifest['folds']['val'])} val rooms) in {out_dir}"
    )


def _load_events(path: Path, frame_offset: int) -> tuple[list, int]:
    ann = FrameAnnotations.read(path)
    events = events_from_annotations(ann)
    max_frame = max((r[0] for r in ann.rows), default=0)
    for e in events:
        e.frame += frame_offset
    return events, frame_offset + max_frame + 1


@main.command()
@click.option("--ref", "ref_path", required=True, type=click.Path(),
              help="Reference annotation CSV file or directory.")
@click.option("--pred", "pred_path", required=True, type=click.Path(),
              help="Predicted annotation CSV file or directory.")
@click.option("--threshold", default=20.0, show_default=True,
              help="Spatial threshold in degrees for ER/F.")
@click.option("--csv", "csv_out", default=None, type=click.Path(dir_okay=False),
              help="Also write the report as CSV to this path.")
def evaluate(ref_path, pred_path, threshold, csv_out):
    """Score predicted annotations against a reference."""
    ref_path = Path(ref_path)
    pred_path = Path(pred_path)
    try:
        if ref_path.is_dir() != pred_path.is_dir():
            raise ValueError("--ref and --pred must both be files or both directories")
        ref_events = []
        pred_events = []
        if ref_path.is_dir():
            names = sorted(p.name for p in ref_path.glob("*.csv"))
            if not names:
                raise ValueError(f"no annotation CSVs in {ref_path}")
            offset = 0
            for name in names:
                pred_file = pred_path / name
                if not pred_file.is_file():
                    raise ValueError(f"prediction for {name} missing in {pred_path}")
                evs, next_offset = _load_events(ref_path / name, offset)
                ref_events.extend(evs)
                evs, _ = _load_events(pred_file, offset)
                pred_events.extend(evs)
                offset = next_offset
        else:
            ref_events, _ = _load_events(ref_path, 0)
            pred_events, _ = _load_events(pred_path, 0)
        scores = compute_scores(ref_events, pred_events, threshold=threshold)
    except EmptyReferenceError as exc:
        _fail(EXIT_INSUFFICIENT_DATA, str(exc))
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    click.echo(report(scores, "text"), nl=False)
    if csv_out:
        Path(csv_out).write_text(report(scores, "csv"))
        click.echo(f"wrote {csv_out}")


if __name__ == "__main__":
    main()
