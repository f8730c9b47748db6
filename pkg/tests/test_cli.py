import json

import pytest

from kuzcdiff.cli import main
from kuzcdiff.cipher import SBOX
from reference_spectra import SBOX_INNER_DELTA, SBOX_INV_INNER_DELTA

KEY = "8899aabbccddeeff0011223344556677fedcba98765432100123456789abcdef"
PT = "1122334455667700ffeeddccbbaa9988"
CT = "7f679d90bebc24305a468d42b9d4edcd"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_encrypt_decrypt_rfc(capsys):
    code, out, _ = run(capsys, "encrypt", "--key", KEY, PT)
    assert code == 0 and out.strip() == CT
    code, out, _ = run(capsys, "decrypt", "--key", KEY, CT, "--rounds", "9")
    assert out.strip() == PT


def test_reduced_round_roundtrip(capsys):
    _, ct, _ = run(capsys, "encrypt", "--key", KEY, PT, "--rounds", "3")
    _, pt, _ = run(capsys, "decrypt", "--key", KEY, ct.strip(), "--rounds", "3")
    assert pt.strip() == PT and ct.strip() != CT


def test_malformed_hex(capsys):
    code, _, err = run(capsys, "encrypt", "--key", KEY, PT[:-1] + "x")
    assert code == 1 and "position 31" in err
    code, _, err = run(capsys, "encrypt", "--key", KEY[:10], PT)
    assert code == 1 and "64 hex" in err
    code, _, _ = run(capsys, "encrypt", "--key", KEY, PT, "--rounds", "10")
    assert code == 1


def parse_csv(text):
    lines = text.strip().splitlines()[1:]
    return {int(c, 16): int(d) for c, d in (line.split(",") for line in lines)}


def test_cdu_table_targets(capsys, tmp_path):
    code, out, _ = run(capsys, "cdu-table", "--format", "csv")
    assert code == 0 and parse_csv(out) == SBOX_INNER_DELTA
    _, out, _ = run(capsys, "cdu-table", "--target", "sbox-inv", "--format", "csv")
    assert parse_csv(out) == SBOX_INV_INNER_DELTA
    _, out, _ = run(capsys, "cdu-table")
    assert len(out.splitlines()) == 52 and "0x02  64" in out
    f = tmp_path / "perm.txt"
    f.write_text(" ".join(str(v) for v in SBOX))
    _, out, _ = run(capsys, "cdu-table", "--target", str(f), "--format", "json")
    assert json.loads(out)["0x02"] == 64
    f.write_text(" ".join(["3"] * 256))
    code, _, err = run(capsys, "cdu-table", "--target", str(f))
    assert code == 1 and "permutation" in err


def test_analyze_low_round_alert(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--rounds", "1", "--c", "01", "--mask", "byte_2",
                       "--trials", "100000", "--seed", "1", "--workers", "1", "--out", str(tmp_path))
    assert code == 2
    assert out.splitlines()[3].startswith("FDR*")
    report = (tmp_path / "1r_0x01_byte_2_in_to_byte_2_out.txt").read_text()
    count = int(report.split("pairs significant before correction")[0].split("Found ")[-1])
    assert count > 1000


def test_analyze_matrix_is_exhaustive(capsys, tmp_path):
    code, _, _ = run(capsys, "analyze", "--rounds", "2", "--rounds", "3", "--c", "02", "--c", "0xbe",
                     "--mask", "byte_0", "--mask", "in=16,17;out=18,19", "--trials", "3000",
                     "--workers", "1", "--out", str(tmp_path), "--format", "csv")
    assert code in (0, 2)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert len(files) == 2 * 2 * 2 * 3 + 1
    assert "summary.csv" in files
    assert "3r_0xbe_in_16_17_to_out_18_19.json" in files


def test_analyze_worker_count_gives_identical_json(capsys, tmp_path):
    outs = []
    for w in ("1", "2", "8"):
        d = tmp_path / w
        run(capsys, "analyze", "--rounds", "4", "--c", "03", "--mask", "byte_8", "--trials", "6000",
            "--seed", "11", "--workers", w, "--out", str(d))
        outs.append((d / "4r_0x03_byte_8_in_to_byte_8_out.json").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_config_file_and_flag_override(capsys, tmp_path):
    conf = tmp_path / "plan.json"
    conf.write_text(json.dumps({"rounds": [2], "c": ["04"], "masks": ["byte_6"], "trials": 2000,
                                "seed": 5, "workers": 1, "out": str(tmp_path / "o")}))
    run(capsys, "analyze", "--config", str(conf), "--c", "91")
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert "2r_0x91_byte_6_in_to_byte_6_out.txt" in files
    assert not any("0x04" in f for f in files)


def test_config_errors(capsys, tmp_path):
    conf = tmp_path / "bad.json"
    conf.write_text(json.dumps({"rounds": [12]}))
    code, _, err = run(capsys, "analyze", "--config", str(conf))
    assert code == 1 and "rounds" in err
    conf.write_text(json.dumps({"colour": 1}))
    assert run(capsys, "analyze", "--config", str(conf))[0] == 1
    assert run(capsys, "analyze", "--config", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "analyze", "--mask", "byte_99")[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--c", "zz"])
    assert exc.value.code == 1


def test_expert_c_vector(capsys, tmp_path):
    vec = "01" * 7 + "04" + "01" * 8
    code, _, _ = run(capsys, "analyze", "--rounds", "2", "--c-vector", vec, "--mask", "byte_8",
                     "--trials", "2000", "--workers", "1", "--out", str(tmp_path))
    doc = json.loads(next(tmp_path.glob("*.json")).read_text())
    assert doc["config"]["c_vector"] == vec


def test_c_scope_active(capsys, tmp_path):
    run(capsys, "analyze", "--rounds", "2", "--c", "04", "--c-scope", "active", "--mask", "byte_8",
        "--trials", "2000", "--workers", "1", "--out", str(tmp_path))
    doc = json.loads(next(tmp_path.glob("2r_*.json")).read_text())
    assert doc["config"]["c_vector"] == "01" * 7 + "04" + "01" * 8


def test_sprt_scan_stops_early_on_strong_bias(capsys):
    code, out, _ = run(capsys, "sprt-scan", "--rounds", "1", "--c", "01", "--mask", "byte_2",
                       "--max-trials", "3000000", "--workers", "1", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["decision"] == "accept_h1"
    assert doc["trials_sampled"] < 3_000_000
    assert doc["boundaries"][0] == pytest.approx(2.7726, abs=1e-4)


def test_sprt_scan_needs_single_config(capsys):
    code, _, err = run(capsys, "sprt-scan", "--c", "01", "--c", "02", "--mask", "byte_2")
    assert code == 1


def test_analyze_sprt_stops_early(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", "--rounds", "1", "--c", "01", "--mask", "byte_2", "--sprt",
                       "--trials", "2000000", "--batch", "50000", "--workers", "1", "--out", str(tmp_path))
    assert code == 2
    assert "stopped early" in err
    doc = json.loads(next(tmp_path.glob("*.json")).read_text())
    assert doc["sprt"]["decision"] == "accept_h1"
    assert doc["config"]["trials"] < 2_000_000


def test_env_worker_override(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("KUZCDIFF_WORKERS", "2")
    code, _, _ = run(capsys, "analyze", "--rounds", "2", "--c", "01", "--mask", "byte_8",
                     "--trials", "2000", "--out", str(tmp_path))
    assert code in (0, 2)
