import json
import subprocess
import sys
from fractions import Fraction

import pytest

from stieltjes_lab.cli import main
from stieltjes_lab.errors import CacheCorruptError, ConfigError, MissingArtifactError
from stieltjes_lab.pipeline import CacheIndex, Pipeline, RunConfig, parse_eps

SMALL = ["--n-max", "5", "--digits", "60", "--m-start", "10"]


def _cfg(tmp_path, **kw):
    base = dict(n_max=5, digits=60, eps=Fraction(1, 10), cache_dir=tmp_path, m_start=10)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture
def small_run(tmp_path):
    assert main(["run", *SMALL, "--cache-dir", str(tmp_path)]) == 0
    return tmp_path


def _snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_parse_eps_forms():
    assert parse_eps("1/10") == Fraction(1, 10)
    assert parse_eps("0.25") == Fraction(1, 4)
    assert parse_eps("1e-30") == Fraction(1, 10**30)
    with pytest.raises(ConfigError):
        parse_eps("-1/2")
    with pytest.raises(ConfigError):
        parse_eps("abc")


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        _cfg(tmp_path, base=16)
    with pytest.raises(ConfigError):
        _cfg(tmp_path, stop_policy="nmax")
    with pytest.raises(ConfigError):
        _cfg(tmp_path, workers=0)


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["run", "--eps", "zero", "--cache-dir", str(tmp_path)]) == 2
    assert main(["run", "--base", "2", "--cache-dir", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_artifact(tmp_path):
    assert main(["cf", *SMALL, "--cache-dir", str(tmp_path)]) == 2
    with pytest.raises(MissingArtifactError):
        Pipeline(_cfg(tmp_path)).load_gamma(0)


def test_run_outputs_and_idempotence(small_run, capsys):
    root = small_run
    g0 = (root / "stieltjes" / "eps1-10_d60" / "gamma_0000.txt").read_text()
    assert "0.57721566490153286060651209008240243104215933593992" in g0
    cf = json.loads((root / "cf" / "eps1-10_d60_acc" / "cf_0000.json").read_text())
    assert cf["a"][:6] == [0, 1, 1, 2, 1, 2]
    reports = sorted(p.name for p in (root / "reports" / "eps1-10_d60_acc").iterdir())
    assert len(reports) == 10 and "table1_kgram_deviations.tsv" in reports
    before = _snapshot(root)
    capsys.readouterr()
    assert main(["run", *SMALL, "--cache-dir", str(root)]) == 0
    counters = json.loads(capsys.readouterr().out)
    assert all(v == 0 for v in counters.values())
    assert _snapshot(root) == before


def test_stage_by_stage_matches_run(small_run, tmp_path_factory):
    other = tmp_path_factory.mktemp("stages")
    for stage in ("tabulate", "stieltjes", "cf", "stats", "normality", "report"):
        assert main([stage, *SMALL, "--cache-dir", str(other)]) == 0
    a, b = _snapshot(small_run), _snapshot(other)
    shared = [k for k in a if not k.startswith(("index", "plan"))]
    for k in shared:
        assert a[k] == b[k], k


def test_workers_byte_identical(tmp_path):
    one, four = tmp_path / "w1", tmp_path / "w4"
    assert main(["run", *SMALL, "--workers", "1", "--cache-dir", str(one)]) == 0
    assert main(["run", *SMALL, "--workers", "4", "--cache-dir", str(four)]) == 0
    assert _snapshot(one) == _snapshot(four)


def test_cache_keys_separate_parameters(small_run):
    pipe = Pipeline(_cfg(small_run, digits=50))
    assert not pipe.index.has(pipe._gamma_key(0))
    pipe2 = Pipeline(_cfg(small_run, eps=Fraction(1, 8)))
    assert not pipe2.index.has(pipe2._gamma_key(0))
    same = Pipeline(_cfg(small_run))
    assert same.index.has(same._gamma_key(0))


def test_corrupted_cache_exit_code(small_run, capsys):
    p = small_run / "stieltjes" / "eps1-10_d60" / "gamma_0003.txt"
    p.write_text(p.read_text().replace("1", "2", 3))
    # a new k-gram length has to re-read the edited gamma file
    assert main(["normality", *SMALL, "--kgram", "3", "--cache-dir", str(small_run)]) == 4
    with pytest.raises(CacheCorruptError):
        Pipeline(_cfg(small_run)).load_gamma(3)
    (small_run / "index.json").write_text("{not json")
    assert main(["run", *SMALL, "--cache-dir", str(small_run)]) == 4


def test_cache_index_roundtrip(tmp_path):
    idx = CacheIndex(tmp_path)
    k = CacheIndex.key("x", 1, "a")
    idx.write(k, "sub/x.txt", "hello\n")
    again = CacheIndex(tmp_path)
    assert again.read(k) == "hello\n"


def test_verify_passes_then_detects_edit(small_run, capsys):
    assert main(["verify", *SMALL, "--verify-n", "0", "2", "--cache-dir", str(small_run)]) == 0
    rep = json.loads((small_run / "verify" / "eps1-10_d60.json").read_text())
    assert rep["offending"] == []
    p = small_run / "stieltjes" / "eps1-10_d60" / "gamma_0002.txt"
    lines = p.read_text().splitlines()
    body = lines[1]
    i = len(body) - 10
    lines[1] = body[:i] + str((int(body[i]) + 1) % 10) + body[i + 1 :]
    p.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["verify", *SMALL, "--verify-n", "0", "2", "--cache-dir", str(small_run)]) == 5
    err = capsys.readouterr().err
    assert json.loads(err.splitlines()[-1]) == {"offending": [2]}


def test_nmax_policy(tmp_path):
    assert main(["run", *SMALL, "--stop-policy", "nmax", "--nmax", "7", "--cache-dir", str(tmp_path)]) == 0
    cf = json.loads((tmp_path / "cf" / "eps1-10_d60_nmax7" / "cf_0001.json").read_text())
    assert len(cf["a"]) == 8 and cf["terminated_by"] == "nmax-limit"


def test_analyze_subcommand(capsys):
    assert main(["analyze", "--value", "3.14159265358979323846264338327950288", "--m-start", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["quotients"] > 20 and out["digits"] == 36


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "stieltjes_lab.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for stage in ("tabulate", "stieltjes", "cf", "stats", "normality", "report", "verify", "run"):
        assert stage in r.stdout
