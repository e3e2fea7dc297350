"""Report generation: figures, markdown tables, missing-input handling."""
import json

from driftlab.config import RunConfig
from driftlab.pipeline import run_pipeline
from driftlab.report import emit_report, plot_win_region, run_plots

TINY = {
    "pretrain_steps": "25",
    "updates": "2",
    "steps": "7",
    "group_size": "4",
    "eval_samples": "6",
    "profile_rollouts": "4",
    "chunk_count": "3",
}


def test_empty_input_still_writes_header_only_report(tmp_path):
    path = emit_report([], tmp_path / "rep")
    text = path.read_text()
    assert text.startswith("# Run report")
    assert "| run |" not in text


def test_report_over_runs_with_notices(tmp_path):
    config = RunConfig().with_overrides(TINY)
    run = run_pipeline(config, run_dir=tmp_path / "good", seed=0, make_plots=False)
    (tmp_path / "empty").mkdir()
    path = emit_report([run, tmp_path / "empty"], tmp_path / "rep")
    text = path.read_text()
    assert "| good |" in text
    assert "`empty`: no metrics.csv, skipped" in text
    assert (tmp_path / "rep" / "reward_curves.svg").exists()
    assert (tmp_path / "rep" / "win_region.svg").exists()


def test_run_plots_cover_all_artifacts(tmp_path):
    config = RunConfig().with_overrides(TINY)
    run = run_pipeline(config, run_dir=tmp_path / "run", seed=1, make_plots=True)
    names = {p.name for p in (run / "plots").iterdir()}
    assert names == {"reward_curve.svg", "profile.svg", "samples.svg"}
    for name in names:
        head = (run / "plots" / name).read_text()[:500]
        assert "<svg" in head


def test_run_plots_tolerate_partial_runs(tmp_path):
    partial = tmp_path / "partial"
    partial.mkdir()
    profile = {
        "pooled": {"condition": None, "n_trajectories": 4, "values": [0.5, 0.3, 0.2]},
        "per_condition": [],
    }
    (partial / "profile.json").write_text(json.dumps(profile))
    written = run_plots(partial)
    assert [p.name for p in written] == ["profile.svg"]


def test_win_region_plot(tmp_path):
    out = plot_win_region(tmp_path / "win.svg", t_max=9)
    assert out.exists()
    assert "<svg" in out.read_text()[:500]
