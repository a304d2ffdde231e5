import dataclasses
import json

import numpy as np
import pytest

from splatar import synth
from splatar.asset import save, write_driving_stream
from splatar.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from splatar.rig import save_rig
from splatar.subdivision import unique_edges


@pytest.fixture
def workshop(tmp_path, rng):
    """A rig file, beta file, baked asset, and driving stream on disk."""
    rig = synth.make_mini_rig(rng, n_points=14, joints=3)
    rig_path = tmp_path / "rig.gava"
    save_rig(rig, rig_path)
    beta_path = tmp_path / "beta.json"
    beta_path.write_text(json.dumps([0.05] * rig.n_shape))
    stream_path = tmp_path / "drive.jsonl"
    frames = synth.make_driving_frames(rng, 3, rig.n_expr, rig.num_joints, 48, 48)
    write_driving_stream(stream_path, frames)
    return {"rig": rig, "rig_path": rig_path, "beta": beta_path,
            "stream": stream_path, "dir": tmp_path}


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestBake:
    def test_one_iteration_point_count(self, workshop, capsys):
        rig = workshop["rig"]
        asset = workshop["dir"] / "a.gava"
        code, out, _ = run_cli(
            capsys, "bake", workshop["rig_path"], workshop["beta"],
            "-o", asset, "--iterations", "1",
        )
        assert code == EXIT_OK
        report = json.loads(out)
        expected = rig.num_vertices + unique_edges(rig.faces).shape[0]
        assert report["points"] == expected

    def test_zero_iterations_point_count(self, workshop, capsys):
        asset = workshop["dir"] / "a0.gava"
        code, out, _ = run_cli(
            capsys, "bake", workshop["rig_path"], workshop["beta"],
            "-o", asset, "--iterations", "0",
        )
        assert code == EXIT_OK
        assert json.loads(out)["points"] == workshop["rig"].num_vertices

    def test_json_rig_import_path(self, workshop, capsys, rng):
        rig = workshop["rig"]
        rig_json = workshop["dir"] / "rig.json"
        rig_json.write_text(json.dumps({
            "vertices": rig.vertices.tolist(),
            "faces": rig.faces.tolist(),
            "shape_basis": rig.shape_basis.tolist(),
            "expr_basis": rig.expr_basis.tolist(),
            "pose_basis": rig.pose_basis.tolist(),
            "joint_regressor": rig.joint_regressor.tolist(),
            "skinning_weights": rig.skinning_weights.tolist(),
            "parents": rig.parents.tolist(),
        }))
        a1 = workshop["dir"] / "from_json.gava"
        a2 = workshop["dir"] / "from_bin.gava"
        assert run_cli(capsys, "bake", rig_json, workshop["beta"], "-o", a1)[0] == EXIT_OK
        assert run_cli(capsys, "bake", workshop["rig_path"], workshop["beta"],
                       "-o", a2)[0] == EXIT_OK
        assert a1.read_bytes() == a2.read_bytes()

    def test_missing_rig_is_io_error(self, workshop, capsys):
        code, _, err = run_cli(
            capsys, "bake", workshop["dir"] / "nope.gava", workshop["beta"],
            "-o", workshop["dir"] / "x.gava",
        )
        assert code == EXIT_IO


class TestRender:
    def bake_asset(self, workshop, capsys):
        asset = workshop["dir"] / "a.gava"
        run_cli(capsys, "bake", workshop["rig_path"], workshop["beta"],
                "-o", asset, "--iterations", "1")
        return asset

    def test_renders_frames_and_silhouettes(self, workshop, capsys):
        asset = self.bake_asset(workshop, capsys)
        outdir = workshop["dir"] / "frames"
        code, out, _ = run_cli(
            capsys, "render", asset, workshop["stream"], "-o", outdir, "--size", "48x48",
        )
        assert code == EXIT_OK
        assert json.loads(out)["frames"] == 3
        for i in range(3):
            assert (outdir / f"frame_{i:05d}.png").exists()
            assert (outdir / f"frame_{i:05d}_alpha.png").exists()

    def test_byte_identical_reruns(self, workshop, capsys):
        asset = self.bake_asset(workshop, capsys)
        d1, d2 = workshop["dir"] / "r1", workshop["dir"] / "r2"
        for d in (d1, d2):
            code, _, _ = run_cli(
                capsys, "render", asset, workshop["stream"], "-o", d,
                "--size", "48x48", "--ppm",
            )
            assert code == EXIT_OK
        for name in ("frame_00000.ppm", "frame_00001.ppm", "frame_00002.ppm"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_oracle_flag_passes(self, workshop, capsys):
        asset = self.bake_asset(workshop, capsys)
        code, out, _ = run_cli(
            capsys, "render", asset, workshop["stream"],
            "-o", workshop["dir"] / "ro", "--size", "48x48", "--oracle",
        )
        assert code == EXIT_OK
        assert json.loads(out)["max_oracle_abs_err"] <= 1e-5

    def test_malformed_stream_line_number(self, workshop, capsys):
        asset = self.bake_asset(workshop, capsys)
        bad = workshop["dir"] / "bad.jsonl"
        bad.write_text(workshop["stream"].read_text() + "{broken\n")
        code, _, err = run_cli(
            capsys, "render", asset, bad, "-o", workshop["dir"] / "rb", "--size", "48x48",
        )
        assert code == EXIT_VALIDATION
        assert "line 4" in err


class TestBench:
    def test_reports_fps_fields(self, workshop, capsys, rng):
        asset = workshop["dir"] / "bench.gava"
        save(synth.make_avatar(rng, 500, n_expr=8), asset)
        code, out, _ = run_cli(
            capsys, "bench", asset, "--frames", "5", "--size", "48x48",
        )
        assert code == EXIT_OK
        report = json.loads(out)
        for key in ("animate_fps", "render_fps", "end_to_end_fps"):
            assert report[key] > 0
        assert report["frames"] == 5

    def test_zero_frames_rejected(self, workshop, capsys, rng):
        asset = workshop["dir"] / "bench.gava"
        save(synth.make_avatar(rng, 100, n_expr=4), asset)
        code, _, err = run_cli(capsys, "bench", asset, "--frames", "0")
        assert code == EXIT_VALIDATION


class TestValidate:
    def test_valid_asset_exit_zero(self, workshop, capsys, rng):
        asset = workshop["dir"] / "v.gava"
        save(synth.make_avatar(rng, 64), asset)
        code, out, _ = run_cli(capsys, "validate", asset)
        assert code == EXIT_OK
        assert json.loads(out)["valid"] is True

    def test_invalid_asset_exit_two_with_findings(self, workshop, capsys, rng):
        avatar = synth.make_avatar(rng, 32)
        bad_op = np.array(avatar.opacities, copy=True)
        bad_op[0] = 2.0
        asset = workshop["dir"] / "bad.gava"
        save(dataclasses.replace(avatar, opacities=bad_op), asset)
        code, out, _ = run_cli(capsys, "validate", asset)
        assert code == EXIT_VALIDATION
        report = json.loads(out)
        assert report["valid"] is False
        assert report["findings"][0]["section"] == "opacities"

    def test_missing_file_exit_one(self, workshop, capsys):
        code, _, _ = run_cli(capsys, "validate", workshop["dir"] / "ghost.gava")
        assert code == EXIT_IO


class TestMetrics:
    def test_metrics_json(self, workshop, capsys, rng):
        rig = workshop["rig"]
        asset = workshop["dir"] / "m.gava"
        save(synth.make_avatar(rng, 300, joints=rig.num_joints, n_expr=rig.n_expr), asset)
        outdir = workshop["dir"] / "m_frames"
        run_cli(capsys, "render", asset, workshop["stream"], "-o", outdir, "--size", "48x48")
        code, out, _ = run_cli(
            capsys, "metrics", outdir / "frame_00000.png", outdir / "frame_00001.png",
        )
        assert code == EXIT_OK
        report = json.loads(out)
        assert 0.0 <= report["ssim"] <= 1.0
        assert report["l1"] >= 0.0
        code, out, _ = run_cli(
            capsys, "metrics", outdir / "frame_00000.png", outdir / "frame_00000.png",
        )
        report = json.loads(out)
        assert report["psnr_db"] == 100.0 and report["l1"] == 0.0
