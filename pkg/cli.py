"""
knotdet: command-line entry point.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical/divergence error.
"""
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

import click

import config
from schemas.align import AlignConfig, AlignMethod
from schemas.dataset import AnnotatedImage, CropPolicy
from schemas.ellipse import Ellipse
from schemas.fit import FitConfig, FitMetric
from schemas.overlay import (
    BASELINE_COLOR,
    DETECTION_COLOR,
    GROUND_TRUTH_COLOR,
    OverlayGroup,
    OverlaySpec,
)
from utils.align import align_image
from utils.dataset import (
    DEFAULT_RATIOS,
    annotations_document,
    generate_crops,
    import_via,
    load_annotations,
    render_crop,
    split_images,
)
from utils.errors import KnotdetError, NumericalError, SchemaError
from utils.fit import fit_ellipse
from utils.images import load_rgb, open_image, save_pil, save_png, write_json
from utils.iou import evaluate_dataset, iou_grid, iou_oracle, summarize_runs
from utils.render import render_overlay

logger = logging.getLogger("knotdet.cli")

METRIC_FLAGS = {"w2": FitMetric.W2_SQUARED, "kl": FitMetric.KL, "l2": FitMetric.L2_PARAMS}


class EllipseParam(click.ParamType):
    """cx,cy,rx,ry,theta"""

    name = "cx,cy,rx,ry,theta"

    def convert(self, value, param, ctx):
        if isinstance(value, Ellipse):
            return value
        try:
            parts = [float(v) for v in str(value).split(",")]
        except ValueError:
            self.fail(f"{value!r} is not five comma-separated numbers", param, ctx)
        if len(parts) != 5:
            self.fail(f"{value!r} needs exactly five values", param, ctx)
        try:
            return Ellipse(cx=parts[0], cy=parts[1], rx=parts[2], ry=parts[3], theta=parts[4])
        except ValueError as exc:
            self.fail(f"{value!r} is not a valid ellipse: {exc}", param, ctx)


class RatiosParam(click.ParamType):
    name = "train,val,test"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            parts = tuple(float(v) for v in str(value).split(","))
        except ValueError:
            self.fail(f"{value!r} is not three comma-separated numbers", param, ctx)
        if len(parts) != 3 or any(v < 0 for v in parts) or sum(parts) <= 0:
            self.fail("ratios need three nonnegative numbers with a positive sum", param, ctx)
        return parts


ELLIPSE = EllipseParam()
RATIOS = RatiosParam()


def _seed(ctx: click.Context, seed: Optional[int]) -> int:
    return seed if seed is not None else ctx.obj["seed"]


def _echo_json(document) -> None:
    click.echo(json.dumps(document, indent=2))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True,
              help="Seed for every randomized step.")
@click.option("--workers", type=click.IntRange(min=1), default=config.WORKERS, show_default=True,
              help="Worker threads for per-image work.")
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
@click.pass_context
def cli(ctx: click.Context, seed: int, workers: int, verbose: bool):
    """Ellipse/Gaussian toolkit for knot detection on lumber scans."""
    config.configure_logging("DEBUG" if verbose else None)
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, workers=workers)


# ------------------------------------------------------------------------
# align
# ------------------------------------------------------------------------
@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False), help="Scanned board PNG.")
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False), help="Aligned PNG.")
@click.option("--n", type=click.IntRange(min=1), default=config.ALIGN_N, show_default=True,
              help="Previous columns compared.")
@click.option("--p", type=click.FloatRange(min=0), default=config.ALIGN_P, show_default=True,
              help="Inverse-distance weight exponent.")
@click.option("--k", type=click.Choice(["1", "2"]), default=str(config.ALIGN_K), show_default=True,
              help="Norm order.")
@click.option("--max-shift", type=click.IntRange(min=0), default=config.ALIGN_MAX_SHIFT, show_default=True,
              help="Largest |shift| searched (pixels).")
@click.option("--method", type=click.Choice([m.value for m in AlignMethod]), default=AlignMethod.EQ1.value,
              show_default=True, help="eq1 (neighbour search) or threshold (baseline).")
@click.option("--threshold", type=click.IntRange(1, 254), default=config.THRESHOLD, show_default=True,
              help="Intensity threshold of the baseline method.")
@click.option("--overlap-norm", is_flag=True, help="Compare only the rows a shift keeps in frame.")
@click.option("--emit-shifts", type=click.Path(dir_okay=False), default=None,
              help="Write the shift profile JSON here.")
def align(input_path, output_path, n, p, k, max_shift, method, threshold, overlap_norm, emit_shifts):
    """Correct column misalignment of a scanned board image."""
    cfg = AlignConfig(
        n=n, p=p, k=int(k), max_shift=max_shift, norm_region="overlap" if overlap_norm else "padded"
    )
    img = load_rgb(input_path)
    aligned, profile = align_image(img, cfg, AlignMethod(method), threshold)
    save_png(aligned, output_path)
    if emit_shifts:
        write_json(profile.model_dump(), emit_shifts)
    logger.info("%s: aligned %d columns with %s -> %s", input_path, len(profile.shifts), method, output_path)


# ------------------------------------------------------------------------
# dataset
# ------------------------------------------------------------------------
@cli.group()
def dataset():
    """Crop, split and import annotated board images."""


def _resolve_image(img: AnnotatedImage, base_dir: str) -> str:
    if os.path.isabs(img.image_path) or os.path.exists(img.image_path):
        return img.image_path
    return os.path.join(base_dir, img.image_path)


@dataset.command("crop")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory of annotation JSON files.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--count-per-image", type=click.IntRange(min=1), required=True, help="Crops per image.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Overrides the global seed.")
@click.option("--out-size", type=click.IntRange(min=1), default=config.CROP_SIZE, show_default=True,
              help="Side of the resized crops (pixels).")
@click.option("--min-side", type=click.IntRange(min=1), default=config.MIN_CROP_SIDE, show_default=True,
              help="Smallest crop side before resizing (pixels).")
@click.pass_context
def dataset_crop(ctx, in_dir, out_dir, count_per_image, seed, out_size, min_side):
    """Generate square crops with re-parameterized knots."""
    seed = _seed(ctx, seed)
    policy = CropPolicy(out_size=out_size, min_side=min_side)
    crops_out: List[AnnotatedImage] = []
    for img in load_annotations(in_dir):
        source_path = _resolve_image(img, in_dir)
        source = open_image(source_path)
        stem = os.path.splitext(os.path.basename(img.image_path))[0]
        crops = generate_crops(img, count_per_image, seed, policy)
        for index, crop in enumerate(crops):
            name = f"{stem}_crop{index:03d}.png"
            save_pil(render_crop(source, crop), os.path.join(out_dir, name))
            record = crop.to_image(name, img.surface)
            write_json(record.to_document(), os.path.join(out_dir, f"{stem}_crop{index:03d}.json"))
            crops_out.append(record)
        logger.info("%s: %d crops", img.image_path, len(crops))
    write_json(annotations_document(crops_out), os.path.join(out_dir, "annotations.json"))
    click.echo(f"{len(crops_out)} crops written to {out_dir}")


@dataset.command("split")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="Annotation JSON file or directory.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Overrides the global seed.")
@click.option("--ratios", type=RATIOS, default=",".join(str(r) for r in DEFAULT_RATIOS), show_default=True,
              help="Train, validation and test proportions.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Write the split JSON here.")
@click.pass_context
def dataset_split(ctx, in_path, seed, ratios, out_path):
    """Board-level train/validation/test split."""
    images = load_annotations(in_path)
    parts = split_images(images, _seed(ctx, seed), ratios)
    document = {
        name: {
            "boards": sorted({img.board_id for img in members}),
            "images": [img.image_path for img in members],
        }
        for name, members in parts.items()
    }
    if out_path:
        write_json(document, out_path)
    _echo_json(document)


@dataset.command("import-via")
@click.option("--via", "via_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="VIA project or export JSON.")
@click.option("--images", "image_dir", type=click.Path(file_okay=False), default=None,
              help="Directory holding the annotated images.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Aggregated annotation JSON to write.")
def dataset_import_via(via_path, image_dir, out_path):
    """Convert VIA ellipse regions to the annotation schema."""
    with open(via_path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError(via_path, exc.lineno, None, exc.msg) from exc
    images = import_via(document, image_dir, source=via_path)
    write_json(annotations_document(images), out_path)
    click.echo(f"{len(images)} images, {sum(len(i.knots) for i in images)} knots written to {out_path}")


# ------------------------------------------------------------------------
# iou
# ------------------------------------------------------------------------
@cli.command()
@click.option("--a", "a", type=ELLIPSE, required=True, help="First ellipse.")
@click.option("--b", "b", type=ELLIPSE, required=True, help="Second ellipse.")
@click.option("--oracle", type=click.IntRange(min=256), default=None,
              help="Also report the oracle IoU with this many samples per axis.")
def iou(a, b, oracle):
    """IoU of two ellipses on the pixel grid."""
    document = iou_grid(a, b).model_dump()
    if oracle:
        document["oracle_iou"] = iou_oracle(a, b, oracle)
    _echo_json(document)


# ------------------------------------------------------------------------
# eval
# ------------------------------------------------------------------------
@cli.command("eval")
@click.option("--predictions", "prediction_files", multiple=True, required=True,
              type=click.Path(exists=True), help="Detections in the annotation schema; repeat for several runs.")
@click.option("--ground-truth", "ground_truth_file", required=True, type=click.Path(exists=True),
              help="Ground-truth annotations.")
@click.option("--min-iou", type=click.FloatRange(0.0, 1.0, max_open=True), default=0.0, show_default=True,
              help="Pairs at or below this IoU stay unmatched.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON report here.")
@click.pass_context
def evaluate(ctx, prediction_files, ground_truth_file, min_iou, report_path):
    """Match detections to ground truth and report mean IoU."""
    ground_truths = load_annotations(ground_truth_file)
    reports = [
        evaluate_dataset(load_annotations(path), ground_truths, min_iou, ctx.obj["workers"])
        for path in prediction_files
    ]
    if len(reports) == 1:
        document = reports[0].model_dump()
    else:
        document = {
            "runs": [r.model_dump() for r in reports],
            "mean_iou_matched": summarize_runs([r.mean_iou_matched for r in reports]).model_dump(),
            "mean_iou_penalized": summarize_runs([r.mean_iou_penalized for r in reports]).model_dump(),
        }
    if report_path:
        write_json(document, report_path)
    _echo_json(document)
    for path, report in zip(prediction_files, reports):
        click.echo(
            f"{path}: mean IoU matched {report.mean_iou_matched:.4f}, "
            f"penalized {report.mean_iou_penalized:.4f} over {report.matched_pairs} pairs",
            err=True,
        )


# ------------------------------------------------------------------------
# fit
# ------------------------------------------------------------------------
@cli.command()
@click.option("--target", type=ELLIPSE, required=True, help="Target ellipse.")
@click.option("--init", "init", type=ELLIPSE, required=True, help="Starting ellipse.")
@click.option("--metric", type=click.Choice(sorted(METRIC_FLAGS)), default="w2", show_default=True,
              help="Loss minimized.")
@click.option("--step-size", type=click.FloatRange(min=0, min_open=True), default=config.FIT_STEP,
              show_default=True, help="Initial line-search step.")
@click.option("--max-iters", type=click.IntRange(min=1), default=config.FIT_MAX_ITERS, show_default=True,
              help="Iteration cap.")
@click.option("--grad-tol", type=click.FloatRange(min=0, min_open=True), default=config.FIT_GRAD_TOL,
              show_default=True, help="Gradient infinity-norm stopping tolerance.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="Write the fit trace JSON here.")
def fit(target, init, metric, step_size, max_iters, grad_tol, trace_path):
    """Fit an ellipse to a target by gradient descent."""
    cfg = FitConfig(metric=METRIC_FLAGS[metric], step_size=step_size, max_iters=max_iters,
                    grad_tolerance=grad_tol)
    trace = fit_ellipse(init, target, cfg)
    document = trace.to_document()
    if trace_path:
        write_json(document, trace_path)
    document["iou"] = iou_grid(trace.final_params, target).iou
    document.pop("loss_history")
    _echo_json(document)


# ------------------------------------------------------------------------
# render
# ------------------------------------------------------------------------
def _knots_for(path: Optional[str], image_path: str) -> List[Ellipse]:
    if not path:
        return []
    images = load_annotations(path)
    wanted = os.path.basename(image_path)
    chosen = [img for img in images if os.path.basename(img.image_path) == wanted]
    if not chosen and len(images) == 1:
        chosen = images
    return [k.to_ellipse() for img in chosen for k in img.knots]


@cli.command()
@click.option("--image", "image_path", required=True, type=click.Path(dir_okay=False), help="Base image.")
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False), help="Overlay PNG.")
@click.option("--ground-truth", type=click.Path(exists=True), default=None, help="Drawn in green.")
@click.option("--detections", type=click.Path(exists=True), default=None, help="Drawn in red.")
@click.option("--baseline", type=click.Path(exists=True), default=None, help="Drawn in blue.")
@click.option("--stroke-width", type=click.IntRange(min=1), default=2, show_default=True,
              help="Outline width (pixels).")
def render(image_path, output_path, ground_truth, detections, baseline, stroke_width):
    """Draw ground-truth and detected ellipses over an image."""
    groups = [
        OverlayGroup(label=label, color=color, ellipses=_knots_for(path, image_path))
        for label, color, path in (
            ("ground truth", GROUND_TRUTH_COLOR, ground_truth),
            ("detections", DETECTION_COLOR, detections),
            ("baseline", BASELINE_COLOR, baseline),
        )
        if path
    ]
    spec = OverlaySpec(image_path=image_path, groups=groups, stroke_width=stroke_width)
    save_png(render_overlay(spec), output_path)
    logger.info("%s: %d ellipses drawn -> %s", image_path, sum(len(g.ellipses) for g in groups), output_path)


# ------------------------------------------------------------------------
# serve
# ------------------------------------------------------------------------
@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True, help="Bind address.")
@click.option("--port", type=click.IntRange(1, 65535), default=8000, show_default=True, help="Bind port.")
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("main:app", host=host, port=port)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures onto exit codes."""
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="knotdet",
                      standalone_mode=False)
    except click.exceptions.UsageError as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except NumericalError as exc:
        click.echo(f"Error: {exc.message}", err=True)
        return exc.exit_code
    except KnotdetError as exc:
        click.echo(f"Error: {exc.message}", err=True)
        return exc.exit_code
    except OSError as exc:
        click.echo(f"Error: {exc}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
