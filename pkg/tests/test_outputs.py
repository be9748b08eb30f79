import json

import pandas as pd
import pytest

from swarmforge.data.artifacts import (
    RunManifest,
    read_csv,
    read_json,
    read_jsonl,
    write_csv,
    write_json,
    write_jsonl,
    write_timing,
)
from swarmforge.data.database import DatabaseManager
from swarmforge.geometry import Path, Point2
from swarmforge.render.charts import (
    create_evolution_chart,
    create_fitness_curve_chart,
    create_frame_metrics_chart,
    save_chart,
)
from swarmforge.render.svg import render_frame, rounder, save_frame


class TestArtifacts:
    def test_json_and_jsonl(self, tmp_path):
        write_json(tmp_path / "nested" / "a.json", {"x": [1, 2]})
        assert read_json(tmp_path / "nested" / "a.json") == {"x": [1, 2]}
        write_jsonl(tmp_path / "rows.jsonl", [{"k": 1}, {"k": 2}])
        assert read_jsonl(tmp_path / "rows.jsonl") == [{"k": 1}, {"k": 2}]

    def test_csv_from_rows_or_frame(self, tmp_path):
        write_csv(tmp_path / "a.csv", [{"a": 1, "b": 2.5}])
        write_csv(tmp_path / "b.csv", pd.DataFrame({"a": [1], "b": [2.5]}))
        assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
        assert read_csv(tmp_path / "a.csv")["b"].tolist() == [2.5]

    def test_timing_pair(self, tmp_path):
        paths = write_timing(tmp_path, [{"frame": 0, "wall_seconds": 0.1}])
        assert [p.name for p in paths] == ["timing.csv", "timing.json"]

    def test_manifest_round_trip(self, tmp_path):
        manifest = RunManifest(subcommand="plan", out_dir=str(tmp_path), seeds={"root": 1})
        manifest.add_output(tmp_path / "records.jsonl")
        manifest.add_output(tmp_path / "records.jsonl")
        manifest.finish()
        path = manifest.write()
        loaded = RunManifest.read(path)
        assert loaded.outputs == ["records.jsonl"]
        assert loaded.status == "ok"
        assert loaded.finished_at is not None


class TestDatabase:
    @pytest.fixture
    def db(self, tmp_path):
        return DatabaseManager(f"sqlite:///{tmp_path / 'ledger.db'}")

    def test_store_and_read(self, db, tmp_path):
        manifest = RunManifest(subcommand="bench", out_dir=str(tmp_path), timing={"total_seconds": 1.5})
        manifest.finish()
        run_id = db.store_manifest(manifest)
        assert run_id is not None
        stored = db.store_summaries(run_id, [{"problem": "BF1", "median_final": 0.5, "algorithm": "dtpso"}],
                                    "problem", "median_final")
        assert stored == 1

        runs = db.get_recent_runs()
        assert runs[0].subcommand == "bench"
        assert runs[0].wall_seconds == 1.5
        assert db.get_summaries(run_id) == [{"problem": "BF1", "median_final": 0.5, "algorithm": "dtpso"}]

    def test_filter_by_subcommand(self, db, tmp_path):
        for sub in ("bench", "plan", "plan"):
            db.store_manifest(RunManifest(subcommand=sub, out_dir=str(tmp_path)))
        assert len(db.get_recent_runs(subcommand="plan")) == 2
        assert len(db.get_recent_runs(limit=1)) == 1

    def test_cleanup_keeps_fresh_runs(self, db, tmp_path):
        db.store_manifest(RunManifest(subcommand="plan", out_dir=str(tmp_path)))
        db.cleanup_old_records(days_to_keep=30)
        assert len(db.get_recent_runs()) == 1


class TestSvg:
    def test_rounder(self):
        assert rounder(2.0) == 2
        assert rounder(1.23456) == 1.235
        assert rounder("x") == "x"

    def test_frame_contents(self, block_world):
        path = Path((Point2(250, 150), Point2(250, 170)))
        svg = render_frame(block_world, path, collision_free=False, caption="frame 0")
        assert svg.startswith("<svg ")
        assert svg.count("<polygon") == len(block_world.obstacles)
        assert svg.count("<polyline") == 1
        assert "#d62728" in svg
        assert "frame 0" in svg

    def test_y_axis_is_flipped(self, empty_world):
        svg = render_frame(empty_world, scale=1.0)
        # start at y=183 on a 366 map sits mid-canvas: 10 + (366 - 183)
        assert 'cy="193"' in svg

    def test_save_is_deterministic(self, tmp_path, block_world):
        a = save_frame(tmp_path / "a.svg", block_world)
        b = save_frame(tmp_path / "sub" / "b.svg", block_world)
        assert a.read_bytes() == b.read_bytes()


class TestCharts:
    def test_fitness_curves(self):
        fig = create_fitness_curve_chart({"dtpso": [[3, 2, 1], [4, 2, 2]], "pso": [[5, 4, 3]]}, "curves")
        # band plus mean for the two-trial label, mean only for the single trial
        assert len(fig.data) == 3
        assert fig.layout.yaxis.type == "log"

    def test_linear_axis_for_non_positive(self):
        fig = create_fitness_curve_chart({"dtpso": [[1.0, 0.0]]}, "curves")
        assert fig.layout.yaxis.type == "linear"

    def test_evolution_chart(self):
        fig = create_evolution_chart([3.0, 2.0], [3.0, 2.5], "evolution")
        assert len(fig.data) == 2

    def test_frame_metrics_chart_and_save(self, tmp_path):
        frames = pd.DataFrame({"frame": [0, 1], "iterations": [20, 12], "path_length": [400.0, 390.0]})
        path = save_chart(create_frame_metrics_chart(frames, "frames"), tmp_path / "frames.html")
        assert path is not None and path.read_text().lstrip().startswith("<html")
