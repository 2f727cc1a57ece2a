"""Command-line surface: evaluate, vtda, schedule, filter, validate.

Exit codes: 0 success, 1 validation/semantic error, 2 I/O or format
error. Reports are JSON with sorted keys; the stdout table is cosmetic.

Any flag can instead come from a JSON `--config` file keyed by flag name
(without dashes); explicit flags win.
"""

from __future__ import annotations

import functools
import json

import click
import numpy as np

from . import __version__
from .errors import FormatError, ValidationError
from .labels import frameset_to_json, load_label_file, SemanticMap
from .plans import (
    CurriculumConfig,
    ImageSetSpec,
    STRATEGIES,
    build_schedule,
    canonical_sets,
    curriculum_plan,
    filter_pose_pseudolabels,
    filter_seg_pseudolabels,
)
from .pool import default_workers
from .tasks import TASK_IDS, load_array, run_aggregation, run_evaluation, validate_file
from .vtda import ScalingTable, default_scales


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(1)
        except (FormatError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(2)

    return wrapper


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    if not isinstance(doc, dict):
        raise ValidationError("--config must contain a JSON object")
    return doc


def _pick(flag_value, config: dict, key: str, default=None):
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _write_report(report: dict, out_path) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if out_path is None:
        click.echo(text)
    else:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")


@click.group()
@click.version_option(version=__version__)
def main():
    """Benchmark evaluation and training-plan toolkit."""


@main.command()
@click.option("--task", "task", default=None, help=f"one of {', '.join(TASK_IDS)}")
@click.option("--pred", "pred", default=None, help="prediction label file")
@click.option("--gt", "gt", default=None, help="ground-truth label file")
@click.option("--out", "out", default=None, help="report JSON path (stdout if omitted)")
@click.option("--workers", type=int, default=None, help="worker count (default: logical cores)")
@click.option("--config", "config_path", default=None, help="JSON config supplying flags")
@click.option("--subsample", type=int, default=None, help="lane: frames to score")
@click.option("--dilation-radius", type=int, default=None, help="lane: gt dilation radius")
@click.option("--thickness", type=float, default=None, help="lane: rasterization thickness")
@click.option("--height", type=int, default=None, help="lane: raster height")
@click.option("--width", type=int, default=None, help="lane: raster width")
@click.option("--max-dets", type=int, default=None, help="AP: detections kept per image")
@click.option("--sigmas", default=None, help="pose: 18 comma-separated OKS sigmas")
@click.option("--exclude-undefined", is_flag=True, default=False,
              help="tagging: skip frames whose gt tag is undefined")
@_exit_codes
def evaluate(task, pred, gt, out, workers, config_path, subsample, dilation_radius,
             thickness, height, width, max_dets, sigmas, exclude_undefined):
    """Compute one task's metric from prediction and ground-truth files."""
    config = _load_config(config_path)
    task = _pick(task, config, "task")
    pred = _pick(pred, config, "pred")
    gt = _pick(gt, config, "gt")
    out = _pick(out, config, "out")
    if task is None or pred is None or gt is None:
        raise ValidationError("evaluate requires --task, --pred and --gt")
    options = {"workers": _pick(workers, config, "workers", default_workers())}
    for key, value in (
        ("subsample", subsample),
        ("dilation_radius", dilation_radius),
        ("thickness", thickness),
        ("height", height),
        ("width", width),
        ("max_dets", max_dets),
    ):
        value = _pick(value, config, key)
        if value is not None:
            options[key] = value
    sigmas = _pick(sigmas, config, "sigmas")
    if sigmas is not None:
        if isinstance(sigmas, str):
            sigmas = [float(s) for s in sigmas.split(",")]
        options["sigmas"] = sigmas
    if exclude_undefined or config.get("exclude_undefined"):
        options["exclude_undefined"] = True

    report = run_evaluation(task, pred, gt, options)
    _write_report(report, out)
    if out is not None:
        for slot in sorted(report["scores"]):
            click.echo(f"{slot:>8}: {report['scores'][slot]:.4f}")


@main.command(name="vtda")
@click.option("--scores", "scores_path", default=None, help="JSON mapping slot -> value")
@click.option("--scales", "scales_path", default=None,
              help="JSON with 'sigma' and/or 'scale' mappings")
@click.option("--default-scales", "use_default", is_flag=True, default=False,
              help="use the canonical published scaling table")
@click.option("--partial", is_flag=True, default=False,
              help="renormalize groups over the slots present")
@click.option("--out", "out", default=None)
@click.option("--config", "config_path", default=None)
@_exit_codes
def vtda_cmd(scores_path, scales_path, use_default, partial, out, config_path):
    """Aggregate 13 task scores into group scores and the total."""
    config = _load_config(config_path)
    scores_path = _pick(scores_path, config, "scores")
    scales_path = _pick(scales_path, config, "scales")
    out = _pick(out, config, "out")
    partial = partial or bool(config.get("partial"))
    if scores_path is None:
        raise ValidationError("vtda requires --scores")
    with open(scores_path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    scores = doc.get("scores", doc) if isinstance(doc, dict) else None
    if not isinstance(scores, dict):
        raise ValidationError("scores file must contain a JSON object of slot values")

    if scales_path is not None and not use_default:
        with open(scales_path, "r", encoding="utf-8") as handle:
            scales_doc = json.load(handle)
        sigma = scales_doc.get("sigma", {})
        scale = scales_doc.get("scale")
        if scale is None:
            scales = ScalingTable.from_sigmas(sigma)
        else:
            scales = ScalingTable.from_pairs(sigma, scale)
    else:
        scales = default_scales()

    report = run_aggregation(scores, scales, partial=partial)
    _write_report(report, out)
    if out is not None:
        for key, value in report["scores"].items():
            shown = "absent" if value is None else f"{value:.4f}"
            click.echo(f"{key:>6}: {shown}")


@main.command()
@click.option("--kind", default=None, help="schedule (default) or curriculum")
@click.option("--out", "out", default=None, help="plan path (stdout if omitted)")
@click.option("--config", "config_path", default=None, help="plan config JSON")
@click.option("--strategy", default=None, help=f"one of {', '.join(STRATEGIES)}")
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--preset", default=None, help="'canonical' for the published set sizes")
@click.option("--joint-epochs", type=int, default=None)
@click.option("--finetune-epochs", type=int, default=None)
@click.option("--finetune-lr-mult", type=float, default=None)
@click.option("--no-pseudolabels", is_flag=True, default=False)
@click.option("--no-mots-subset", is_flag=True, default=False)
@_exit_codes
def schedule(kind, out, config_path, strategy, batch_size, seed, epochs, preset,
             joint_epochs, finetune_epochs, finetune_lr_mult, no_pseudolabels,
             no_mots_subset):
    """Emit a batch schedule or curriculum stage plan."""
    config = _load_config(config_path)
    kind = _pick(kind, config, "kind", "schedule")
    out = _pick(out, config, "out")

    if kind == "curriculum":
        cfg = CurriculumConfig(
            joint_epochs=_pick(joint_epochs, config, "joint_epochs", 12),
            decay_epochs=tuple(config.get("decay_epochs", (8, 11))),
            finetune_epochs=_pick(finetune_epochs, config, "finetune_epochs", 6),
            finetune_lr_mult=_pick(finetune_lr_mult, config, "finetune_lr_mult", 0.1),
            use_pseudolabels=not (no_pseudolabels or config.get("no_pseudolabels", False)),
            use_mots_subset=not (no_mots_subset or config.get("no_mots_subset", False)),
        )
        text = curriculum_plan(cfg).to_json()
    elif kind == "schedule":
        preset = _pick(preset, config, "preset")
        if preset is not None:
            if preset != "canonical":
                raise ValidationError(f"unknown preset '{preset}'")
            sets = canonical_sets(use_mots_subset=not no_mots_subset)
        else:
            raw_sets = config.get("sets")
            if not raw_sets:
                raise ValidationError("schedule needs --preset canonical or config 'sets'")
            sets = [
                ImageSetSpec(
                    id=str(s["id"]),
                    count=int(s["count"]),
                    tasks=tuple(s.get("tasks", ())),
                )
                for s in raw_sets
            ]
        plan = build_schedule(
            sets,
            batch_size=int(_pick(batch_size, config, "batch_size", 16)),
            strategy=str(_pick(strategy, config, "strategy", "round_robin")),
            seed=int(_pick(seed, config, "seed", 0)),
            epochs=int(_pick(epochs, config, "epochs", 1)),
        )
        text = plan.to_json()
    else:
        raise ValidationError(f"unknown plan kind '{kind}'")

    if out is None:
        click.echo(text)
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
        click.echo(f"wrote {kind} plan to {out}")


@main.command(name="filter")
@click.option("--task", "task", default=None, help="pose or sem_seg")
@click.option("--pred", "pred", default=None, help="pose: label file to filter")
@click.option("--map", "map_path", default=None, help="sem_seg: class-index .npy")
@click.option("--confidence", "confidence_path", default=None, help="sem_seg: confidence .npy")
@click.option("--out", "out", default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--config", "config_path", default=None)
@_exit_codes
def filter_cmd(task, pred, map_path, confidence_path, out, threshold, config_path):
    """Filter pseudo-labels below a confidence threshold."""
    config = _load_config(config_path)
    task = _pick(task, config, "task")
    out = _pick(out, config, "out")
    threshold = _pick(threshold, config, "threshold")
    if task == "pose":
        pred = _pick(pred, config, "pred")
        if pred is None or out is None:
            raise ValidationError("filter pose requires --pred and --out")
        fs = load_label_file(pred)
        filtered = filter_pose_pseudolabels(
            fs, threshold=0.2 if threshold is None else threshold
        )
        with open(out, "w", encoding="utf-8") as handle:
            json.dump(frameset_to_json(filtered), handle, sort_keys=True, indent=2)
    elif task == "sem_seg":
        map_path = _pick(map_path, config, "map")
        confidence_path = _pick(confidence_path, config, "confidence")
        if map_path is None or confidence_path is None or out is None:
            raise ValidationError("filter sem_seg requires --map, --confidence and --out")
        seg = SemanticMap(
            classes=load_array(map_path), confidence=load_array(confidence_path)
        )
        filtered = filter_seg_pseudolabels(
            seg, threshold=0.3 if threshold is None else threshold
        )
        np.save(out, filtered.classes)
    else:
        raise ValidationError(f"unknown filter task '{task}' (expected pose or sem_seg)")
    click.echo(f"wrote filtered output to {out}")


@main.command()
@click.option("--task", "task", required=False, default=None)
@click.option("--file", "path", required=False, default=None)
@click.option("--config", "config_path", default=None)
@_exit_codes
def validate(task, path, config_path):
    """Check a label file against a task's schema."""
    config = _load_config(config_path)
    task = _pick(task, config, "task")
    path = _pick(path, config, "file")
    if task is None or path is None:
        raise ValidationError("validate requires --task and --file")
    # surface unreadable files as I/O errors before schema checks
    with open(path, "rb"):
        pass
    diagnostics = validate_file(task, path)
    if diagnostics:
        for line in diagnostics:
            click.echo(line, err=True)
        raise SystemExit(1)
    click.echo(f"{path}: ok")


if __name__ == "__main__":
    main()
