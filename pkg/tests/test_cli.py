import argparse
import io
import subprocess
import sys

import pytest

from regencore.cli import parse_quantity, run


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def store(tmp_path, monkeypatch):
    monkeypatch.setenv("REGENCORE_STORE", str(tmp_path / "store"))
    src = tmp_path / "input.bin"
    src.write_bytes(bytes(range(256)) * 37)
    code, _ = call("encode", "--n", "6", "--k", "3", "--symbol-size", "8",
                   "--block-size", "96", "--in", str(src))
    assert code == 0
    return tmp_path


@pytest.mark.parametrize("text,rate,expected", [
    ("1TB", False, 1e12), ("2KiB", False, 2048), ("512", False, 512),
    ("1Gbps", True, 1.25e8), ("125MB/s", True, 1.25e8), ("1e3", False, 1000),
])
def test_parse_quantity(text, rate, expected):
    assert parse_quantity(text, rate) == expected


@pytest.mark.parametrize("text", ["fast", "1 parsecs", "1Gbps"])
def test_parse_quantity_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_quantity(text, rate=False)


def test_full_workflow(store):
    data = (store / "input.bin").read_bytes()
    assert call("fail", "--nodes", "1,4")[0] == 0
    code, text = call("read", "--out", str(store / "degraded.bin"))
    assert code == 0 and (store / "degraded.bin").read_bytes() == data
    code, text = call("recover", "--workers", "2", "--report", str(store / "ledger.csv"))
    assert code == 0 and "recovered nodes [1, 4] with scheme core" in text
    header = (store / "ledger.csv").read_text().splitlines()[0]
    assert header == "node,bytes_read,bytes_encoded,bytes_downloaded,bytes_reconstructed,bytes_uploaded"
    code, text = call("read", "--out", str(store / "after.bin"))
    assert (store / "after.bin").read_bytes() == data
    assert "bytes_downloaded: 0 bytes" in text


def test_read_single_block(store):
    data = (store / "input.bin").read_bytes()
    call("fail", "--nodes", "0")
    code, text = call("read", "--block", "0", "--out", str(store / "b0.bin"))
    assert code == 0
    assert (store / "b0.bin").read_bytes() == data[:96]
    assert call("read", "--block", "999", "--out", str(store / "x"))[0] == 1


def test_info_lists_blocks(store):
    call("fail", "--nodes", "2")
    code, text = call("info")
    assert code == 0
    assert "failed nodes: [2]" in text and "[lost]" in text


def test_info_code_document():
    code, text = call("info", "--n", "6", "--k", "3", "--symbol-size", "4")
    assert code == 0 and '"kind": "msr"' in text


def test_recover_healthy_store(store):
    code, text = call("recover")
    assert code == 0 and "nothing to recover" in text


def test_too_many_failures(store, capsys):
    code, _ = call("fail", "--nodes", "0,1,2,3")
    assert code == 1
    assert "tolerance" in capsys.readouterr().err


def test_encode_refuses_overwrite(store):
    args = ["encode", "--n", "6", "--k", "3", "--in", str(store / "input.bin")]
    assert call(*args)[0] == 1
    assert call(*args, "--force", "--symbol-size", "8", "--block-size", "96")[0] == 0


def test_encode_errors(tmp_path, capsys):
    assert call("encode", "--n", "6", "--k", "3", "--in", str(tmp_path / "nope"),
                "--store", str(tmp_path / "s"))[0] == 1
    src = tmp_path / "f"
    src.write_bytes(b"abc")
    assert call("encode", "--n", "5", "--k", "3", "--in", str(src),
                "--store", str(tmp_path / "s"))[0] == 1
    assert call("encode", "--n", "6", "--k", "3", "--symbol-size", "4", "--block-size", "10",
                "--in", str(src), "--store", str(tmp_path / "s"))[0] == 1
    assert "error" in capsys.readouterr().err


def test_missing_store(tmp_path):
    assert call("info", "--store", str(tmp_path / "none"))[0] == 1


def test_ratios_output(tmp_path):
    code, text = call("ratios", "--n", "20", "--k", "10", "--csv", str(tmp_path / "r.csv"))
    lines = text.splitlines()
    assert lines[0] == "t,good_ratio,good_ratio_exact,bad_ratio,bad_ratio_exact"
    assert lines[2] == "2,0.3600,9/25,0.5100,51/100"
    assert (tmp_path / "r.csv").read_text() == text


def test_census_output():
    code, text = call("census", "--n", "10", "--k", "5", "--t", "4")
    assert code == 0
    assert text.splitlines()[1].startswith("10,5,4,210,210,1,")
    code, text = call("census", "--n", "10", "--k", "5", "--t", "4", "--sample", "50")
    assert "sampled estimate" in text
    assert call("census", "--n", "20", "--k", "10", "--t", "4", "--budget", "10")[0] == 1


def test_mttf_output():
    code, text = call("mttf", "--n", "16", "--k", "8", "--lambda", "0.25",
                      "--bandwidth", "1Gbps", "--capacity", "1TB")
    assert code == 0
    assert "ratio core/conventional: 26.34" in text
    code, text = call("mttf", "--n", "6", "--k", "3", "--lambda", "1", "--bandwidth", "1MB/s",
                      "--scheme", "core", "--trials", "1000")
    assert "Monte Carlo" in text
    code, text = call("mttf", "--n", "16", "--k", "8", "--sweep", "lambda", "--values", "0.1,1")
    assert text.startswith("lambda_per_year,") and len(text.splitlines()) == 3
    assert call("mttf", "--n", "16", "--k", "8", "--sweep", "lambda")[0] == 1


def test_usage_errors_exit_nonzero():
    assert call()[0] == 2
    assert call("fail", "--nodes", "a,b")[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "regencore", "ratios", "--n", "6", "--k", "3"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[1] == "1,0.5556,5/9,,"
