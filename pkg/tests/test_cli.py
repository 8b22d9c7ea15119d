import json

import pytest

from rvintervals.cli import main
from rvintervals.synthgen import TickPathSpec, gen_longmemory_volatility, gen_tick_path
from rvintervals.volatility import parse_ticks, read_volatility, write_ticks, write_volatility


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    ticks = d / "ticks.csv"
    with open(ticks, "w") as fh:
        write_ticks(gen_tick_path(TickPathSpec(days=30, seed=2)), fh)
    vol = d / "vol.csv"
    with open(vol, "w") as fh:
        write_volatility(gen_longmemory_volatility(0.85, 2**15, seed=1), fh)
    return ticks, vol


def test_synth_writes_readable_files(tmp_path):
    t, v = tmp_path / "t.csv", tmp_path / "v.csv"
    assert main(["synth", "ticks", "--days", "2", "-o", str(t)]) == 0
    assert main(["synth", "volatility", "--n", "1024", "--seed", "4", "-o", str(v)]) == 0
    assert len(parse_ticks(t)) > 1000
    assert len(read_volatility(v)) == 1024


def test_ingest_round_trip(files, tmp_path):
    ticks, _ = files
    out = tmp_path / "clean.csv"
    assert main(["ingest", str(ticks), "-o", str(out)]) == 0
    assert out.read_bytes() == ticks.read_bytes()


def test_volatility_subcommand(files, tmp_path, capsys):
    ticks, _ = files
    assert main(["volatility", str(ticks), "--volatility", "R1", "--raw"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("day,minute,value,stage\n") and text.splitlines()[1].endswith(",raw")
    assert main(["volatility", str(ticks)]) == 0
    assert capsys.readouterr().out.splitlines()[1].endswith(",normalized")


@pytest.mark.parametrize(
    "cmd, head",
    [
        (["intervals"], "q,interval"),
        (["conditional", "--q", "2"], "q,quartile,x,density"),
    ],
)
def test_csv_subcommands(files, capsys, cmd, head):
    _, vol = files
    assert main(cmd + [str(vol)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == head


def test_json_subcommands(files, capsys):
    _, vol = files
    assert main(["scaling-test", str(vol)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["verdict"] in ("scaling", "no_scaling") and rep["q_pair"] == [2.0, 5.0]
    assert main(["fit-se", str(vol), "--q", "2,3"]) == 0
    assert [f["q"] for f in json.loads(capsys.readouterr().out)] == [2.0, 3.0]
    assert main(["gof", str(vol), "--gof-q", "2", "--replicas", "10", "--seed", "3"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["statistic_kind"] for r in rows} == {"KS", "KSW"} and rows[0]["replicas"] == 10
    assert main(["dfa", str(vol), "--intervals", "--q", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert set(rep) == {"volatility", "intervals"} and "2.0" in rep["intervals"]


def test_run_all_and_env_override(files, tmp_path, monkeypatch, capsys):
    ticks, vol = files
    monkeypatch.setenv("RVINTERVALS_OUTPUT", str(tmp_path / "env-out"))
    code = main(["run-all", str(ticks), str(vol), "--replicas", "10", "--output", str(tmp_path / "ignored")])
    assert code == 0
    assert (tmp_path / "env-out" / "report.json").is_file()
    assert (tmp_path / "env-out" / "vol" / "gof.json").is_file()
    assert not (tmp_path / "ignored").exists()


def test_run_all_config_file(files, tmp_path, monkeypatch):
    _, vol = files
    monkeypatch.delenv("RVINTERVALS_OUTPUT", raising=False)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"inputs = {vol}\nreplicas = 5\nq = 2,3\ngof_q = 2\nscaling_pair = 2,3\noutput = {tmp_path / 'o'}\n")
    assert main(["run-all", "--config", str(cfg)]) == 0
    header = json.loads((tmp_path / "o" / "report.json").read_text())
    assert header["config"]["q"] == [2.0, 3.0] and header["config"]["replicas"] == 5


def test_run_all_exit_code_on_bad_input(tmp_path, monkeypatch):
    monkeypatch.delenv("RVINTERVALS_OUTPUT", raising=False)
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,price\n2004-01-05T09:31:00,-3\n")
    assert main(["run-all", str(bad), "--output", str(tmp_path / "o")]) == 1


def test_stage_command_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,price\nnot-a-time,1\n")
    assert main(["ingest", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
