import json
import re
import socket
from pathlib import Path

import pytest

import techprox
from techprox.cli import main
from techprox.config import load_config
from techprox.errors import ConfigurationError
from techprox.pipeline import STAGES, Pipeline, Workspace, atomic_write, final_third_slope, lock_for

DATA = Path(techprox.__file__).parent / "data"

SMALL_CONFIG = """
[run]
seed = 0

[paths]
output_dir = "{out}"
dumps = ["{data}/synthetic_works.jsonl"]
external_corpus = "{data}/synthetic_external.csv"

[catalog]
start = "2007-01"
end = "2021-12"
technologies = [
    ["C100001", "Public-key cryptography"],
    ["C100002", "Blockchain"],
    ["C100003", "Steganography"],
]

[thresholds]
exclude_rate = 0.75

[processing]
alpha = {alpha}

[clustering]
algorithm = "kmedoids"
k = 3
sweep = [2, 3]

[forecasting]
horizons = [3]
regimes = ["local", "global", "cluster"]
models = ["naive_seasonal", "linear_regression"]

[report]
case_study = ["C100001", "C100002"]
"""


def write_config(tmp: Path, name="run", alpha=0.1) -> Path:
    path = tmp / f"{name}.toml"
    path.write_text(SMALL_CONFIG.format(out=(tmp / name).as_posix(), data=DATA.as_posix(), alpha=alpha))
    return path


@pytest.fixture(scope="module")
def finished(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    config = write_config(tmp)
    assert main(["run", "--config", str(config)]) == 0
    return config, tmp / "run"


def test_all_artifacts_present(finished):
    _, out = finished
    for rel in ["raw/works.jsonl", "corpus/records.jsonl", "corpus/stats.json", "corpus/annotated.jsonl",
                "index/h_index.csv", "index/series.csv", "processed/series.csv", "processed/metadata.json",
                "cluster/assignment.csv", "cluster/silhouette.json", "cluster/layout.csv",
                "forecast/report.json", "report/trends.csv", "report/tables/local.csv",
                "report/histograms/global.svg", "report/case_study_C100001__C100002.html",
                "report/plots/C100001__C100002.svg"]:
        assert (out / rel).is_file(), rel
    stats = json.loads((out / "corpus/stats.json").read_text())
    assert stats["input_size"] == 200
    assert stats["survivors"] + stats["no_refs"] + stats["no_concepts"] + stats["bad_date"] \
        + stats["dupes_merged"] + stats["out_of_range"] == 200


def test_rerun_skips_every_stage(finished, capsys):
    config, _ = finished
    assert main(["run", "--config", str(config)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == [f"{s}: skipped (up-to-date)" for s in STAGES]


def test_manifest_tracks_every_file(finished):
    _, out = finished
    ws = Workspace(out)
    on_disk = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()}
    assert on_disk - {"manifest.json"} == ws.tracked_files()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"]
    for stage in STAGES:
        entry = manifest["stages"][stage]
        assert {"version", "params", "inputs", "outputs", "completed_at"} <= set(entry)


def test_series_plot_layers(finished):
    _, out = finished
    svg = (out / "report/plots/C100001__C100002.svg").read_text()
    assert svg.count('class="pt"') == 180 * 5
    assert svg.count('class="legend-entry"') == 5
    assert svg.count('class="fit"') == 5
    assert len(re.findall(r"interpolation rate \d+%", svg)) == 5
    assert ">2007<" in svg and ">2021<" in svg


def test_report_is_byte_identical_on_forced_rerun(finished):
    config, out = finished
    before = {p: p.read_bytes() for p in (out / "report").rglob("*") if p.is_file()}
    assert main(["report", "--config", str(config), "--force"]) == 0
    after = {p: p.read_bytes() for p in (out / "report").rglob("*") if p.is_file()}
    assert before == after


def test_report_unknown_pair_fails(finished, capsys):
    config, _ = finished
    assert main(["report", "--config", str(config), "--pair", "C100001,C999"]) != 0
    assert "no series for pair" in capsys.readouterr().err


def test_report_pair_by_label(finished):
    config, out = finished
    assert main(["report", "--config", str(config), "--pair", "Blockchain,Steganography"]) == 0
    assert (out / "report/case_study_C100002__C100003.html").is_file()


def test_missing_predecessor_names_the_command(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["process", "--config", str(config)]) == 2
    err = capsys.readouterr().err
    assert "techprox index --config" in err


def test_changed_parameter_reruns_only_downstream(tmp_path):
    config = write_config(tmp_path)
    cfg = load_config(config)
    Pipeline(cfg, echo=lambda s: None).run(STAGES[:5])
    cfg2 = load_config(write_config(tmp_path, alpha=0.3).as_posix())
    lines = []
    Pipeline(cfg2, echo=lines.append).run(STAGES[:5])
    assert [line.split(":")[1].strip().split()[0] for line in lines] == ["skipped"] * 4 + ["done"]


def test_stages_after_ingest_never_open_sockets(tmp_path, monkeypatch):
    config = write_config(tmp_path)
    cfg = load_config(config)
    pipe = Pipeline(cfg, echo=lambda s: None)
    pipe.run(["ingest"])

    def refuse(*args, **kwargs):
        raise AssertionError("network access outside ingest")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    pipe.run(["refine", "annotate", "index", "process"])


def test_lock_blocks_concurrent_run(tmp_path, capsys):
    config = write_config(tmp_path)
    with lock_for(load_config(config)):
        assert main(["ingest", "--config", str(config)]) == 2
    assert "lock" in capsys.readouterr().err


def test_config_validation(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('[paths]\noutput_dir = "x"\n')
    with pytest.raises(ConfigurationError, match="seed"):
        load_config(path)
    path.write_text('[run]\nseed = 1\n[paths]\noutput_dir = "x"\nbogus = 1\n')
    with pytest.raises(ConfigurationError, match="bogus"):
        load_config(path)
    path.write_text('[run]\nseed = 1\n[paths]\noutput_dir = "x"\n[thresholds]\nflat_mean = 2.0\n')
    with pytest.raises(ConfigurationError, match="flat_mean"):
        load_config(path)
    path.write_text('[run]\nseed = 1\n[paths]\noutput_dir = "x"\n[processing]\nalpha = 1.0\n')
    with pytest.raises(ConfigurationError, match="alpha"):
        load_config(path)


def test_cli_overrides(tmp_path):
    cfg = load_config(write_config(tmp_path)).with_overrides(seed=5, k=2, horizons=(6,), regimes=("local",))
    assert (cfg.seed, cfg.clustering.k, cfg.forecasting.horizons, cfg.forecasting.regimes) == (5, 2, (6,), ("local",))


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "a" / "b.txt"
    atomic_write(target, "hello")
    atomic_write(target, "world")
    assert target.read_text() == "world"
    assert [p.name for p in target.parent.iterdir()] == ["b.txt"]


def test_final_third_slope():
    assert final_third_slope([0.0] * 9) == 0.0
    assert final_third_slope([0, 0, 0, 0, 0, 0, 1, 2, 3]) == pytest.approx(1.0)
