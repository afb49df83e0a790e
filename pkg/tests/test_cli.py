"""Command-line pipeline: stages, exit codes, artifact layout."""

import json
import os

import pytest

from innoscape import cli


class TestRunLayout:
    def test_artifacts_present(self, pipeline_out):
        for rel in (
            "manifest.json",
            "staging/matrix.tsv",
            "staging/matrix.mask.tsv",
            "staging/join_report.txt",
            "staging/ingest_report.txt",
            "tables/summary_MA_NY.tsv",
            "tables/summary_MA.tsv",
            "tables/summary_NY.tsv",
            "tables/importance_patents_per_1000.tsv",
            "tables/importance_sfr.tsv",
            "maps/patents_per_1000.geojson",
            "maps/sfr.geojson",
        ):
            assert (pipeline_out / rel).exists(), rel

    def test_manifest_digest_embedded_everywhere(self, pipeline_out):
        digest = json.loads((pipeline_out / "manifest.json").read_text())["digest"]
        for rel in (
            "tables/summary_MA.tsv",
            "tables/importance_sfr.tsv",
        ):
            assert f"# manifest={digest}" in (pipeline_out / rel).read_text()
        doc = json.loads((pipeline_out / "maps/sfr.geojson").read_text())
        assert doc["manifest"] == digest

    def test_per_scope_importance_details_staged(self, pipeline_out):
        for outcome in ("patents_per_1000", "sfr"):
            for token in ("MA_NY", "MA", "NY"):
                rel = f"staging/importance_{outcome}_{token}.tsv"
                assert (pipeline_out / rel).exists(), rel


class TestStageIsolation:
    def test_build_requires_staged_records(self, tmp_path, config_path):
        rc = cli.main(
            ["build", "--config", config_path, "--out", str(tmp_path)]
        )
        assert rc == 1

    def test_summarize_requires_matrix(self, tmp_path, config_path):
        rc = cli.main(
            ["summarize", "--config", config_path, "--out", str(tmp_path)]
        )
        assert rc == 1

    def test_ingest_then_build(self, tmp_path, config_path):
        assert cli.main(
            ["ingest", "--config", config_path, "--out", str(tmp_path)]
        ) == 0
        assert (tmp_path / "staging/records/census.jsonl").exists()
        assert cli.main(
            ["build", "--config", config_path, "--out", str(tmp_path)]
        ) == 0
        assert (tmp_path / "staging/matrix.tsv").exists()

    def test_run_only_single_stage(self, tmp_path, config_path):
        rc = cli.main(
            ["run", "--only", "ingest", "--config", config_path,
             "--out", str(tmp_path)]
        )
        assert rc == 0
        assert (tmp_path / "staging/records").exists()
        assert not (tmp_path / "staging/matrix.tsv").exists()


class TestExitCodes:
    def test_bad_config_is_2(self, tmp_path):
        bad = tmp_path / "c.json"
        bad.write_text("{}")
        rc = cli.main(["run", "--config", str(bad), "--out", str(tmp_path)])
        assert rc == 2

    def test_lag_mismatch_is_2(self, tmp_path, config_path):
        doc = json.loads(open(config_path).read())
        doc["outcome_year"] = 2015
        data_dir = os.path.dirname(config_path)
        for k in doc["sources"]:
            doc["sources"][k] = os.path.join(data_dir, doc["sources"][k])
        for k in doc["poi_sources"]:
            doc["poi_sources"][k] = os.path.join(data_dir, doc["poi_sources"][k])
        doc["polygons"] = os.path.join(data_dir, doc["polygons"])
        bad = tmp_path / "c.json"
        bad.write_text(json.dumps(doc))
        rc = cli.main(["run", "--config", str(bad), "--out", str(tmp_path)])
        assert rc == 2

    def test_version_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as e:
            cli.main(["--version"])
        assert e.value.code == 0


class TestSeedOverride:
    def test_seed_changes_importance_not_matrix(self, pipeline_out, tmp_path,
                                                config_path):
        out2 = tmp_path / "alt"
        env_before = os.environ.get("SOURCE_DATE_EPOCH")
        os.environ["SOURCE_DATE_EPOCH"] = "1471219200"
        try:
            assert cli.main(
                ["run", "--config", config_path, "--out", str(out2),
                 "--seed", "7"]
            ) == 0
        finally:
            if env_before is None:
                os.environ.pop("SOURCE_DATE_EPOCH", None)
            else:
                os.environ["SOURCE_DATE_EPOCH"] = env_before
        same = (out2 / "staging/matrix.tsv").read_bytes()
        assert same == (pipeline_out / "staging/matrix.tsv").read_bytes()
        a = (out2 / "tables/importance_sfr.tsv").read_text()
        b = (pipeline_out / "tables/importance_sfr.tsv").read_text()
        assert "master_seed=7" in a
        assert a != b


class TestFetchPoi:
    def test_offline_miss_exits_1(self, tmp_path):
        rc = cli.main([
            "fetch-poi", "--kind", "school",
            "--bbox", "42.0,-71.5,42.4,-71.0",
            "--out", str(tmp_path / "poi.csv"),
            "--cache-dir", str(tmp_path / "cache"),
            "--offline",
        ])
        assert rc == 1

    def test_replays_from_prepared_cache(self, tmp_path):
        from innoscape import osmfetch

        body = json.dumps({
            "elements": [
                {"type": "node", "id": 5, "lon": -71.45, "lat": 42.02,
                 "tags": {"name": "A School"}},
            ]
        }).encode()
        query = osmfetch.build_query("school", (42.0, -71.5, 42.4, -71.0))
        key = osmfetch.cache_key(osmfetch.DEFAULT_ENDPOINT, query)
        cache = tmp_path / "cache"
        cache.mkdir()
        (cache / f"{key}.body").write_bytes(body)
        import hashlib

        (cache / f"{key}.meta.json").write_text(json.dumps({
            "body_sha256": hashlib.sha256(body).hexdigest(),
        }))
        out = tmp_path / "poi.csv"
        rc = cli.main([
            "fetch-poi", "--kind", "school",
            "--bbox", "42.0,-71.5,42.4,-71.0",
            "--out", str(out),
            "--cache-dir", str(cache),
            "--offline",
        ])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "kind,name,lon,lat,area_m2,matched_keyword"
        assert lines[1].startswith("school,A School,-71.45,42.02,")
