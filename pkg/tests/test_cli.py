"""Tests for the command line entry point."""

import pytest
import yaml

from fusedet import main
from fusedet.cli import parse_args
from fusedet.infrastructure import read_manifest

TINY_DATA = {
    "class_names": ["Car", "Pedestrian"],
    "point_cloud_range": [0.0, -6.4, -2.0, 12.8, 6.4, 1.2],
    "voxel_size": [0.4, 0.4, 0.4],
    "max_box_size": [6.0, 3.0, 3.0],
    "image_height": 16,
    "image_width": 32,
    "focal_length": 16.0,
    "min_objects": 1,
    "max_objects": 2,
    "points_per_object": 30,
    "clutter_points": 60,
    "num_train": 2,
    "num_val": 1,
}
TINY_MODEL = {
    "d_model": 16,
    "num_heads": 2,
    "head_dim": 8,
    "roi_grid": 3,
    "image_channels": 4,
    "image_strides": [2, 1],
    "voxel_channels": 4,
    "point_channels": 6,
    "bev_stride": 2,
    "dtype": "float64",
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "fusedet.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "data": {**TINY_DATA, "dataset_dir": str(tmp_path / "data")},
                "model": TINY_MODEL,
                "train": {"num_proposals": 8, "epochs": 1, "max_steps": 1, "loader_workers": 1},
                "infer": {"d_steps": 2, "num_proposals": 8},
            }
        )
    )
    return path


class TestParseArgs:
    """Tests for argument parsing."""

    def test_overrides_collected(self):
        args, overrides = parse_args(["selftest", "--selftest.gradcheck=false"])

        assert args.command == "selftest"
        assert overrides == {"selftest.gradcheck": False}

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            parse_args(["--version"])

        assert excinfo.value.code == 0
        assert "fusedet" in capsys.readouterr().out

    def test_eval_needs_a_source(self):
        with pytest.raises(SystemExit):
            parse_args(["eval"])


class TestMain:
    """Tests for subcommand dispatch and exit codes."""

    def test_init(self, tmp_path):
        path = tmp_path / "fusedet.yaml"

        assert main(["init", "--path", str(path)]) == 0
        assert path.read_text().startswith("# fusedet configuration file")

        path.write_text("keep")
        assert main(["init", "--path", str(path)]) == 0
        assert path.read_text() == "keep"

    def test_bad_override_flag(self):
        assert main(["selftest", "--bogus"]) == 1

    def test_invalid_override_value(self, tiny_config):
        assert main(["-c", str(tiny_config), "gen-data", "--infer.d_steps=0"]) == 1

    def test_missing_dataset(self, tiny_config, tmp_path):
        assert main(["-c", str(tiny_config), "train", "--data", str(tmp_path / "none")]) == 1

    def test_gen_data(self, tiny_config, tmp_path):
        """Test that gen-data writes both splits and a manifest."""
        assert main(["-c", str(tiny_config), "gen-data"]) == 0

        root = tmp_path / "data"
        assert sorted(p.name for p in (root / "train" / "points").iterdir()) == ["000000.bin", "000001.bin"]
        assert (root / "val").is_dir()
        assert read_manifest(root)["subcommand"] == "gen-data"

    def test_train_infer_eval(self, tiny_config, tmp_path):
        """Test the generate, train, infer and evaluate chain on a tiny config."""
        assert main(["-c", str(tiny_config), "gen-data"]) == 0
        assert main(["-c", str(tiny_config), "-o", str(tmp_path / "train"), "train"]) == 0
        checkpoint = tmp_path / "train" / "last.pt"
        assert checkpoint.exists()

        assert (
            main(
                [
                    "-o",
                    str(tmp_path / "infer"),
                    "infer",
                    "--checkpoint",
                    str(checkpoint),
                    "--infer.d_steps=1",
                ]
            )
            == 0
        )
        assert (tmp_path / "infer" / "predictions" / "000002.txt").exists()

        assert (
            main(
                [
                    "-c",
                    str(tiny_config),
                    "-o",
                    str(tmp_path / "eval"),
                    "eval",
                    "--predictions",
                    str(tmp_path / "infer" / "predictions"),
                ]
            )
            == 0
        )
        assert (tmp_path / "eval" / "metrics.csv").exists()
        assert read_manifest(tmp_path / "eval")["subcommand"] == "eval"
