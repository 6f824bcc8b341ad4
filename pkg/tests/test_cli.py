import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from coherent_averaging.cli import DEFAULT_SEED, run
from coherent_averaging.engine import apply
from coherent_averaging.lattice import CellField, read_field, save_field
from coherent_averaging.schemes import get_family

from conftest import random_rational_field


def cli(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_bf_exits_zero(capsys):
    code, _, err = cli(capsys, "verify", "--family", "bf", "--dim", "2", "--max-factor", "4")
    assert code == 0 and "coherent on 16 factor pairs" in err


def test_weights_csv_has_25_rows_summing_to_one(capsys):
    code, out, _ = cli(capsys, "weights", "--family", "bf", "--d", "3", "--dim", "2", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 25
    assert sum(Fraction(r["weight"]) for r in rows) == 1
    assert {r["weight"] for r in rows if r["i0"] == "0" and r["i1"] == "0"} == {"1/9"}


def test_solve_corner_reports_only_uniform(capsys):
    code, out, _ = cli(capsys, "solve", "--convention", "corner", "--dim", "2", "--generic", "w2-all-nonzero")
    data = json.loads(out)
    assert code == 0 and [f["name"] for f in data["families"]] == ["uniform"]
    assert set(data["families"][0]["base_values"].values()) == {"1/4", "1/9"}


def test_weights_json_roundtrip(capsys):
    code, out, _ = cli(capsys, "weights", "--family", "parity", "--d", "4", "--dim", "1", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["family"] == "parity" and data["d"] == 4
    weights = {tuple(w["offset"]): Fraction(w["weight"]) for w in data["weights"]}
    assert weights == get_family("parity", 1)(4).nonzero_weights()


def test_weights_to_file(capsys, tmp_path):
    target = tmp_path / "w.csv"
    code, out, _ = cli(capsys, "weights", "--family", "uniform", "--d", "2", "--dim", "1", "--output", str(target))
    assert code == 0 and out == ""
    assert target.read_text().splitlines() == ["i0,weight", "0,1/2", "1,1/2"]


def test_verify_perturbed_family_exits_one(capsys):
    code, out, err = cli(capsys, "verify", "--family", "uniform", "--dim", "2", "--max-factor", "4",
                         "--perturb-factor", "2", "--perturb-offset", "0,0", "--perturb-value", "17/64", "--json")
    data = json.loads(out)
    assert code == 1 and not data["coherent"] and "INCOHERENT" in err
    assert any(p["discrepancies"] for p in data["pairs"])


def test_verify_with_field_check_is_deterministic(capsys):
    argv = ["verify", "--family", "bf", "--dim", "1", "--max-factor", "3", "--field-check", "--json"]
    first = cli(capsys, *argv)
    second = cli(capsys, *argv, "--seed", str(DEFAULT_SEED))
    assert first[0] == 0 and first[1] == second[1]


def test_apply_roundtrip(capsys, tmp_path, rng):
    src = CellField(random_rational_field(rng, (9, 9)), origin=(-4, -4))
    save_field(src, tmp_path / "in.field")
    code, _, _ = cli(capsys, "apply", "--input", str(tmp_path / "in.field"), "--output", str(tmp_path / "out.field"),
                     "--family", "bf", "--d", "2")
    assert code == 0
    assert read_field(tmp_path / "out.field").equals(apply(get_family("bf", 2)(2), src))


def test_apply_separable_matches_dense(capsys, tmp_path, rng):
    save_field(CellField(rng.normal(size=(12, 12))), tmp_path / "in.field")
    outs = []
    for extra in ([], ["--separable"]):
        path = tmp_path / f"out{len(extra)}.field"
        assert cli(capsys, "apply", "--input", str(tmp_path / "in.field"), "--output", str(path),
                   "--family", "bf", "--d", "3", *extra)[0] == 0
        outs.append(read_field(path).values)
    np.testing.assert_allclose(outs[0], outs[1], rtol=0, atol=1e-14)


def test_apply_rejects_convention_mismatch(capsys, tmp_path):
    save_field(CellField(np.ones((4, 4), dtype=object)), tmp_path / "in.field")
    code, _, err = cli(capsys, "apply", "--input", str(tmp_path / "in.field"), "--output", str(tmp_path / "o"),
                       "--family", "uniform", "--d", "2")
    assert code == 2 and "Convention" in err


def test_malformed_field_file(capsys, tmp_path):
    bad = tmp_path / "bad.field"
    bad.write_text('{"format": "cellfield/1"}\n1,2\n')
    code, _, err = cli(capsys, "apply", "--input", str(bad), "--output", str(tmp_path / "o"),
                       "--family", "bf", "--d", "2")
    assert code == 2 and "malformed field file" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = cli(capsys, "apply", "--input", str(tmp_path / "nope"), "--output", str(tmp_path / "o"),
                       "--family", "bf", "--d", "2")
    assert code == 2 and "error:" in err


def test_unknown_scheme(capsys):
    code, _, err = cli(capsys, "weights", "--family", "gaussian", "--d", "2")
    assert code == 2 and "gaussian" in err


def test_inadmissible_factor(capsys):
    code, _, err = cli(capsys, "weights", "--family", "central", "--d", "2")
    assert code == 2 and "AdmissibilityError" in err


def test_lemma_single_offset(capsys):
    code, out, _ = cli(capsys, "lemma", "--d", "2", "--e", "3", "--i", "4", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["solutions"] == [[2, 0]] and data["case"] == "ii"


def test_lemma_identity_table(capsys):
    code, out, _ = cli(capsys, "lemma", "--d", "3", "--e", "4", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["ok"] and data["checked"] == 23
    assert all(row["sum"] == 12 - abs(row["i"]) for row in data["offsets"])


def test_solve_one_dimension_json(capsys):
    code, out, _ = cli(capsys, "solve", "--dim", "1")
    data = json.loads(out)
    assert code == 0 and data["complete"]
    assert {f["name"]: f["base_values"]["w2[1]"] for f in data["families"]} == {"bf": "1/4", "parity": "1/2"}
    assert all(f["coherence_verified"] for f in data["families"])


def test_solve_is_deterministic(capsys):
    assert cli(capsys, "solve", "--dim", "1", "--generic", "none") == cli(capsys, "solve", "--dim", "1", "--generic", "none")


def test_tower_from_polynomial(capsys, tmp_path):
    code, _, _ = cli(capsys, "tower", "--source", "x^2*y", "--family", "bf", "--factors", "2,3",
                     "--output-dir", str(tmp_path), "--extent=-20:20,-20:20")
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert code == 0 and manifest["complete"] and len(manifest["levels"]) == 2
    top = read_field(tmp_path / "level-2.field")
    assert top.scale.value == 6
    # bf coarsening preserves hat samples of cubics; at scale z the x^2 moment adds z^2/6
    for cell in top.cells():
        x, y = (6 * c for c in cell)
        assert top[cell] == (x * x + 6) * y


def test_tower_from_field_truncates(capsys, tmp_path):
    save_field(CellField(np.ones(10, dtype=object)), tmp_path / "in.field")
    code, _, err = cli(capsys, "tower", "--source", str(tmp_path / "in.field"), "--family", "bf",
                       "--factors", "2,2,2,2", "--output-dir", str(tmp_path / "t"))
    manifest = json.loads((tmp_path / "t" / "manifest.json").read_text())
    assert code == 0 and "warning" in err and manifest["complete"] is False


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "coherent_averaging.cli", "verify", "--family", "parity",
                          "--dim", "1", "--max-factor", "3"], capture_output=True, text=True)
    assert res.returncode == 0


def test_no_subcommand_is_a_usage_error(capsys):
    assert run([]) == 2
