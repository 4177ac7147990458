import json

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from cli import cli, main
from schemas.align import ShiftProfile
from schemas.dataset import AnnotatedImage, KnotAnnotation
from schemas.fit import FitTrace
from schemas.iou import DatasetReport
from utils.align import shift_columns

SUBCOMMANDS = [
    [],
    ["align"],
    ["dataset"],
    ["dataset", "crop"],
    ["dataset", "split"],
    ["dataset", "import-via"],
    ["iou"],
    ["eval"],
    ["fit"],
    ["render"],
    ["serve"],
]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def jittered_board(tmp_path, rng, textured_board, write_png):
    board = textured_board(120, 200, (30, 95), rng)
    d = rng.integers(-8, 9, size=200)
    d[0] = 0
    jittered = shift_columns(board, d, 0)
    rgb = np.repeat(jittered[:, :, None], 3, axis=2)
    return write_png(tmp_path / "b3_wide1.png", rgb), d


@pytest.mark.parametrize("args", SUBCOMMANDS, ids=lambda a: " ".join(a) or "root")
def test_help_exits_zero(runner, args):
    result = runner.invoke(cli, args + ["--help"])
    assert result.exit_code == 0
    assert "--help" in result.output


def test_align_writes_png_and_shifts(runner, tmp_path, jittered_board):
    source, d = jittered_board
    out = tmp_path / "aligned.png"
    shifts = tmp_path / "shifts.json"
    result = runner.invoke(cli, [
        "align", "--input", source, "--output", str(out), "--max-shift", "10", "--n", "20",
        "--emit-shifts", str(shifts),
    ])
    assert result.exit_code == 0, result.output
    profile = ShiftProfile.model_validate(json.loads(shifts.read_text(encoding="utf-8")))
    assert profile.shifts == (-d).tolist()
    assert Image.open(out).size == (200, 120)


def test_align_threshold_method(runner, tmp_path, jittered_board):
    source, _ = jittered_board
    out = tmp_path / "aligned.png"
    result = runner.invoke(cli, ["align", "--input", source, "--output", str(out), "--method", "threshold"])
    assert result.exit_code == 0, result.output
    assert out.exists()


def test_align_to_eval_pipeline(runner, tmp_path, jittered_board):
    source, _ = jittered_board
    aligned = tmp_path / "aligned.png"
    assert runner.invoke(cli, [
        "align", "--input", source, "--output", str(aligned), "--max-shift", "10", "--n", "20",
    ]).exit_code == 0

    annotations = tmp_path / "annotations"
    annotations.mkdir()
    truth = AnnotatedImage(
        image=str(aligned), width=200, height=120, board_id="b3",
        knots=[
            KnotAnnotation(cx=60, cy=60, rx=14, ry=8, theta=0.3),
            KnotAnnotation(cx=150, cy=70, rx=10, ry=10, theta=0.0),
        ],
    )
    (annotations / "b3_wide1.json").write_text(json.dumps(truth.to_document()), encoding="utf-8")

    crops = tmp_path / "crops"
    crop_args = [
        "--seed", "17", "dataset", "crop", "--in", str(annotations), "--out", str(crops),
        "--count-per-image", "3", "--out-size", "96", "--min-side", "64",
    ]
    result = runner.invoke(cli, crop_args)
    assert result.exit_code == 0, result.output
    crop_pngs = sorted(crops.glob("*.png"))
    assert len(crop_pngs) == 3
    assert all(Image.open(p).size == (96, 96) for p in crop_pngs)

    # crops are byte-identical under the same seed
    again = tmp_path / "crops-again"
    crop_args[crop_args.index(str(crops))] = str(again)
    assert runner.invoke(cli, crop_args).exit_code == 0
    for first in crop_pngs:
        assert (again / first.name).read_bytes() == first.read_bytes()

    # identity detector: the ground truth doubles as the predictions
    ground_truth = crops / "annotations.json"
    report_path = tmp_path / "report.json"
    result = runner.invoke(cli, [
        "eval", "--predictions", str(ground_truth), "--ground-truth", str(ground_truth),
        "--report", str(report_path),
    ])
    assert result.exit_code == 0, result.output
    report = DatasetReport.model_validate(json.loads(report_path.read_text(encoding="utf-8")))
    assert report.matched_pairs > 0
    assert report.mean_iou_matched == 1.0
    assert report.mean_iou_penalized == 1.0

    overlay = tmp_path / "overlay.png"
    result = runner.invoke(cli, [
        "render", "--image", str(crop_pngs[0]), "--ground-truth", str(ground_truth),
        "--detections", str(ground_truth), "--output", str(overlay),
    ])
    assert result.exit_code == 0, result.output
    with Image.open(overlay) as drawn:
        assert drawn.format == "PNG"
        assert drawn.size == (96, 96)


def test_eval_multiple_runs(runner, tmp_path):
    truth = AnnotatedImage(
        image="b1_wide1.png", width=100, height=100, board_id="b1",
        knots=[KnotAnnotation(cx=50, cy=50, rx=20, ry=10)],
    )
    off = truth.model_copy(update={"knots": [KnotAnnotation(cx=55, cy=50, rx=20, ry=10)]})
    (tmp_path / "truth.json").write_text(json.dumps(truth.to_document()), encoding="utf-8")
    (tmp_path / "off.json").write_text(json.dumps(off.to_document()), encoding="utf-8")
    report_path = tmp_path / "runs.json"
    result = runner.invoke(cli, [
        "eval", "--predictions", str(tmp_path / "truth.json"), "--predictions", str(tmp_path / "off.json"),
        "--ground-truth", str(tmp_path / "truth.json"), "--report", str(report_path),
    ])
    assert result.exit_code == 0, result.output
    document = json.loads(report_path.read_text(encoding="utf-8"))
    assert len(document["runs"]) == 2
    summary = document["mean_iou_matched"]
    assert summary["runs"][0] == 1.0
    assert 0.0 < summary["runs"][1] < 1.0
    assert summary["standard_error"] > 0.0


def test_split_command(runner, tmp_path):
    images = [
        AnnotatedImage(image=f"b{i}_wide1.png", width=10, height=10, board_id=f"b{i}").to_document()
        for i in range(10)
    ]
    (tmp_path / "all.json").write_text(json.dumps({"images": images}), encoding="utf-8")
    out = tmp_path / "split.json"
    args = ["dataset", "split", "--in", str(tmp_path / "all.json"), "--seed", "3", "--out", str(out)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text(encoding="utf-8"))
    assert [len(document[k]["boards"]) for k in ("train", "val", "test")] == [7, 1, 2]
    runner.invoke(cli, args)
    assert json.loads(out.read_text(encoding="utf-8")) == document


def test_import_via_command(runner, tmp_path):
    via = {
        "b5_wide2.png": {
            "filename": "b5_wide2.png",
            "file_attributes": {"width": 300, "height": 100, "surface": "wide2"},
            "regions": [{"shape_attributes": {"name": "ellipse", "cx": 40, "cy": 50, "rx": 12, "ry": 6, "theta": 1.0}}],
        }
    }
    (tmp_path / "via.json").write_text(json.dumps(via), encoding="utf-8")
    out = tmp_path / "annotations.json"
    result = runner.invoke(cli, ["dataset", "import-via", "--via", str(tmp_path / "via.json"), "--out", str(out)])
    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["images"][0]["board_id"] == "b5"
    assert document["images"][0]["knots"][0]["theta"] == 1.0


def test_iou_command(runner):
    result = runner.invoke(cli, ["iou", "--a", "0,0,10,10,0", "--b", "10,0,10,10,0", "--oracle", "1024"])
    assert result.exit_code == 0, result.output
    document = json.loads(result.stdout)
    assert document["iou"] == pytest.approx(0.2430, abs=0.02)
    assert document["oracle_iou"] == pytest.approx(0.2430, abs=0.005)


def test_fit_command_writes_trace(runner, tmp_path):
    trace_path = tmp_path / "trace.json"
    result = runner.invoke(cli, [
        "fit", "--target", "100,100,30,15,0.4", "--init", "110,110,45,22.5,0.7", "--metric", "l2",
        "--trace", str(trace_path),
    ])
    assert result.exit_code == 0, result.output
    trace = FitTrace.from_document(json.loads(trace_path.read_text(encoding="utf-8")))
    assert trace.final_params.cx == pytest.approx(100.0)
    assert trace.converged


# ----------------------------------------
# exit codes
# ----------------------------------------
def test_exit_code_usage_error():
    assert main(["fit", "--target", "1,2,3", "--init", "0,0,1,1,0"]) == 1
    assert main(["align", "--output", "x.png"]) == 1
    assert main(["eval", "--predictions", "p.json", "--ground-truth", "g.json", "--min-iou", "1.5"]) == 1


def test_exit_code_io_error(tmp_path):
    missing = str(tmp_path / "missing.png")
    assert main(["align", "--input", missing, "--output", str(tmp_path / "out.png")]) == 2


def test_exit_code_numerical_error():
    assert main(["fit", "--metric", "kl", "--target", "0,0,10000000,0.1,0", "--init", "0,0,1,1,0"]) == 3


def test_exit_code_schema_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"image": "a.png", "width": -1, "height": 5, "board_id": "a"}', encoding="utf-8")
    assert main(["eval", "--predictions", str(bad), "--ground-truth", str(bad)]) == 1


def test_help_through_main_exits_zero():
    assert main(["--help"]) == 0


@pytest.mark.parametrize(
    "region",
    [
        {"shape_attributes": {"name": "ellipse", "cx": 40, "cy": 50, "ry": 6}},
        {"shape_attributes": {"name": "ellipse", "cx": 40, "cy": 50, "rx": 0, "ry": 6}},
    ],
)
def test_exit_code_malformed_via_export(tmp_path, region):
    via = {"b5_wide2.png": {"filename": "b5_wide2.png", "file_attributes": {"width": 300, "height": 100},
                            "regions": [region]}}
    via_path = tmp_path / "via.json"
    via_path.write_text(json.dumps(via), encoding="utf-8")
    out = tmp_path / "annotations.json"
    assert main(["dataset", "import-via", "--via", str(via_path), "--out", str(out)]) == 1
    assert not out.exists()


def test_exit_code_via_export_not_json(tmp_path):
    via_path = tmp_path / "via.json"
    via_path.write_text("{\n  \"b5.png\": \n", encoding="utf-8")
    assert main(["dataset", "import-via", "--via", str(via_path), "--out", str(tmp_path / "a.json")]) == 1
