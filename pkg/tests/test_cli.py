"""End-to-end tests through the command-line entry point."""

import csv
import json
from pathlib import Path

import pytest

from eventflow import ascgrid, synth
from eventflow.cli import main
from eventflow.geomodel import Coordinate, GeoRecord, Place, PlaceScale
from eventflow.ingest import write_ndjson


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    d = tmp_path_factory.mktemp("scenario")
    spec = synth.standard_scenario(seed=5, cohort_size=60)
    paths = synth.write_scenario_inputs(spec, d, figures="no")
    return paths


@pytest.fixture(scope="module")
def finished_run(scenario, tmp_path_factory):
    out = tmp_path_factory.mktemp("run1")
    assert main(["run", "--config", str(scenario["config"]), "--out-dir", str(out)]) == 0
    return out


def tree(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "timings.json"}


# -- synth ----------------------------------------------------------------------

def test_synth_writes_store_and_truth(tmp_path, capsys):
    assert main(["example-inputs", str(tmp_path), "--cohort-size", "8"]) == 0
    assert main(["synth", str(tmp_path / "scenario.cfg")]) == 0
    first = (tmp_path / "records.ndjson").read_bytes()
    assert first and (tmp_path / "truth.csv").is_file()
    assert main(["synth", str(tmp_path / "scenario.cfg"), "--out-dir", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "records.ndjson").read_bytes() == first
    assert "wrote" in capsys.readouterr().out


def test_synth_missing_region_file(tmp_path, capsys):
    (tmp_path / "s.cfg").write_text("seed = 1\ncohort_size = 2\nregions = gone.geojson\n")
    assert main(["synth", str(tmp_path / "s.cfg")]) == 2
    assert "gone.geojson" in capsys.readouterr().err


def test_malformed_config_exits_2(tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("this line has no equals sign\n")
    assert main(["run", "--config", str(tmp_path / "bad.cfg")]) == 2
    assert "bad.cfg:1" in capsys.readouterr().err


def test_missing_config_flag_exits_2(capsys):
    assert main(["filter"]) == 2
    assert "--config" in capsys.readouterr().err


def test_bad_override_exits_2(scenario, tmp_path):
    assert main(["filter", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--set", "alpha=-3"]) == 2


# -- run ------------------------------------------------------------------------

def test_manifest_counts_match_ground_truth(scenario, finished_run):
    truth = synth.read_truth_csv(scenario["truth"])
    counts = json.loads((finished_run / "manifest.json").read_text())["counts"]
    assert counts["event_users"] == sum(t.in_corridor for t in truth)
    assert counts["event_records"] == sum(t.n_event_records for t in truth)
    assert counts["event_users"] == counts["users_with_history"] + counts["users_empty_history"]
    assert counts["homes_determined"] + counts["homes_undetermined"] == counts["event_users"]
    assert counts["histogram_total"] == counts["event_records"]
    assert counts["malformed_lines"] == 0


def test_run_writes_every_artifact(finished_run):
    names = set(tree(finished_run))
    for expected in ("event_records.ndjson", "event_users.csv", "histories.ndjson", "history_stats.csv",
                     "history_summary.csv", "home_estimates.csv", "zone_counts.csv", "hotspots_raw.csv",
                     "hotspots_rate.csv", "temporal.csv", "flows.csv", "manifest.json"):
        assert expected in names
    assert (finished_run / "timings.json").is_file()
    manifest = json.loads((finished_run / "manifest.json").read_text())
    assert manifest["stages"][0] == "load-records"
    assert set(manifest["inputs"]) == {"records", "regions", "corridor"}


def test_run_is_byte_identical_across_threads(scenario, finished_run, tmp_path):
    out = tmp_path / "run4"
    assert main(["run", "--config", str(scenario["config"]), "--out-dir", str(out), "--threads", "4"]) == 0
    assert tree(out) == tree(finished_run)


def test_run_with_figures_is_deterministic(scenario, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, threads in ((a, "1"), (b, "3")):
        assert main(["run", "--config", str(scenario["config"]), "--out-dir", str(out),
                     "--threads", threads, "--set", "figures=yes"]) == 0
    assert (a / "figures" / "temporal.png").is_file()
    assert tree(a) == tree(b)


def test_empty_filter_aborts_at_select_users(scenario, tmp_path, capsys):
    code = main(["run", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--set", "keywords=nothingmatchesthis"])
    assert code == 3
    err = capsys.readouterr().err
    assert "[select-users]" in err and "no event users" in err
    # partial outputs stay behind
    assert (tmp_path / "event_records.ndjson").is_file()
    assert json.loads((tmp_path / "manifest.json").read_text())["counts"]["event_records"] == 0


def test_grid_cap_gives_resource_exit(scenario, tmp_path):
    assert main(["infer-home", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--set", "grid_cap=64"]) == 4


def test_missing_input_file_exits_2(scenario, tmp_path):
    assert main(["run", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--set", f"records={tmp_path / 'absent.ndjson'}"]) == 2


@pytest.mark.parametrize("command, output", [
    ("filter", "event_records.ndjson"),
    ("users", "event_users.csv"),
    ("histories", "histories.ndjson"),
    ("stats", "history_summary.csv"),
    ("infer-home", "home_estimates.csv"),
    ("hotspot", "hotspots_rate.csv"),
    ("temporal", "temporal.csv"),
    ("flows", "flows.csv"),
])
def test_stage_subcommands_match_run(scenario, finished_run, tmp_path, command, output):
    assert main([command, "--config", str(scenario["config"]), "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / output).read_bytes() == (finished_run / output).read_bytes()


def test_compare_flows_against_itself(finished_run, tmp_path):
    flows_csv = str(finished_run / "flows.csv")
    assert main(["compare-flows", "--baseline", flows_csv, "--event", flows_csv,
                 "--out-dir", str(tmp_path), "--no-figures"]) == 0
    with open(tmp_path / "flow_comparison.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    assert all(float(r["share_delta"]) == 0.0 and r["rank_baseline"] == r["rank_event"] for r in rows)


def test_compare_flows_unknown_destination(finished_run, tmp_path):
    flows_csv = str(finished_run / "flows.csv")
    assert main(["compare-flows", "--baseline", flows_csv, "--event", flows_csv,
                 "--out-dir", str(tmp_path), "--destination", "nowhere"]) == 3


def test_validate_profiles(scenario, tmp_path, capsys):
    truth = synth.read_truth_csv(scenario["truth"])
    names = {r.region_id: r.name for r in synth.standard_regions()}
    profiles = tmp_path / "profiles.csv"
    with open(profiles, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "profile_text"])
        for t in truth:
            w.writerow([t.user_id, names[t.home_region_id]])
    assert main(["validate-profiles", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--set", f"profiles={profiles}"]) == 0
    rate = float(capsys.readouterr().out.split("agreement rate:")[1])
    assert rate >= 0.9
    assert (tmp_path / "profile_matches.csv").is_file()


def test_validate_profiles_needs_profiles(scenario, tmp_path):
    assert main(["validate-profiles", "--config", str(scenario["config"]), "--out-dir", str(tmp_path)]) == 2


# -- surface ----------------------------------------------------------------------

def test_surface_unknown_user(scenario, tmp_path, capsys):
    assert main(["surface", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--user", "nobody"]) == 3
    assert "nobody" in capsys.readouterr().err


def test_surface_mixed_scales(scenario, tmp_path):
    assert main(["surface", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--user", "u000001"]) == 0
    fixed = ascgrid.read_asc(tmp_path / "surface_u000001_fixed.asc")
    variable = ascgrid.read_asc(tmp_path / "surface_u000001_variable.asc")
    assert variable.values.max() <= fixed.values.max()


def _single_user_store(tmp_path, records):
    path = tmp_path / "solo.ndjson"
    write_ndjson(path, records)
    return path


def test_surface_single_coordinate_is_mode_independent(scenario, tmp_path):
    store = _single_user_store(tmp_path, [GeoRecord("r1", "solo", 0, "hi", Coordinate(45.5, -122.6))])
    assert main(["surface", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--user", "solo", "--set", f"records={store}"]) == 0
    fixed = (tmp_path / "surface_solo_fixed.asc").read_bytes()
    assert fixed == (tmp_path / "surface_solo_variable.asc").read_bytes()


def test_surface_user_without_georeferences(scenario, tmp_path):
    store = _single_user_store(tmp_path, [GeoRecord("r1", "solo", 0, "hi", None)])
    assert main(["surface", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--user", "solo", "--set", f"records={store}"]) == 3


def test_surface_place_only_user_spreads_out(scenario, tmp_path):
    box = [[-122.7, 45.4], [-122.5, 45.4], [-122.5, 45.6], [-122.7, 45.6], [-122.7, 45.4]]
    recs = [GeoRecord("r1", "solo", 0, "a", Coordinate(45.5, -122.6)),
            GeoRecord("r2", "solo", 1, "b", Place(PlaceScale.CITY, box))]
    store = _single_user_store(tmp_path, recs)
    assert main(["surface", "--config", str(scenario["config"]), "--out-dir", str(tmp_path),
                 "--user", "solo", "--set", f"records={store}"]) == 0
    fixed = ascgrid.read_asc(tmp_path / "surface_solo_fixed.asc")
    variable = ascgrid.read_asc(tmp_path / "surface_solo_variable.asc")
    assert variable.values.max() < fixed.values.max()


def test_module_entry_point(scenario):
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "eventflow", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "compare-flows" in proc.stdout
