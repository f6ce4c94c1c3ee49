import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import pytest

from mottlab.cli import main, read_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def by_quantity(text, provenance=None):
    return {r["quantity"]: float(r["value"]) for r in rows(text) if provenance in (None, r["provenance"])}


def test_ed_single_site_density(capsys):
    code, out, _ = run(capsys, "ed", "--d", "1", "--L", "1", "--nmax", "2", "--t", "0", "--U", "1", "--mu", "0.3", "--beta", "10")
    assert code == 0
    e = math.exp
    assert by_quantity(out)["density"] == pytest.approx((e(3) + 2 * e(-4)) / (1 + e(3) + e(-4)), rel=1e-12)
    assert {r["provenance"] for r in rows(out)} == {"oracle"}


def test_ed_infinite_temperature_density(capsys):
    # every basis state equally likely: mean occupation of {0, 1, 2} per site
    code, out, _ = run(capsys, "ed", "--L", "3", "--t", "0.3", "--beta", "1e-9")
    assert code == 0
    assert by_quantity(out)["density"] == pytest.approx(1.0, abs=1e-6)


def test_ed_spectrum_rows(capsys):
    code, out, _ = run(capsys, "ed", "--L", "1", "--t", "0", "--mu", "0.3", "--spectrum")
    energies = sorted(float(r["value"]) for r in rows(out) if r["quantity"].startswith("energy"))
    assert energies == pytest.approx(sorted([0.0, -0.3, 1.0 - 0.6]))


def test_invalid_hopping_exits_2(capsys):
    code, _, err = run(capsys, "ed", "--t", "-1")
    assert code == 2 and "t must be" in err


def test_bad_flag_exits_2(capsys):
    assert run(capsys, "ed", "--format", "xml")[0] == 2


def test_outputs_are_deterministic(capsys, tmp_path):
    argv = ["expand", "--t", "0.002", "--mu", "0.2", "--beta", "20", "--K", "2", "--format", "json"]
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    json.loads(a.read_text())


def test_expand_mott_point_within_reported_bound(capsys):
    code, out, _ = run(capsys, "expand", "--t", "0.002", "--mu", "0.2", "--beta", "40", "--check-ed")
    assert code == 0
    exp = by_quantity(out, "expansion")
    ed = by_quantity(out, "oracle")
    assert abs(ed["density"] - 1) <= exp["density_deviation_bound"]
    assert abs(exp["density"] - 1) <= exp["density_deviation_bound"]


def test_expand_dilute_matches_ed(capsys):
    code, out, _ = run(capsys, "expand", "--regime", "dilute", "--t", "0.05", "--mu", "-0.2", "--beta", "20", "--check-ed", "--K", "2")
    assert code == 0
    r = {(x["quantity"], x["provenance"]): x for x in rows(out)}
    diff = abs(float(r["pressure", "expansion"]["value"]) - float(r["pressure", "oracle"]["value"]))
    assert diff <= float(r["pressure", "expansion"]["error"])


def test_expand_without_jumps_is_the_one_site_closed_form(capsys):
    beta, mu, U = 10.0, -0.2, 1.0
    code, out, _ = run(capsys, "expand", "--max-jumps", "0", "--K", "6", "--L", "1", "--t", "0.05", "--mu", str(mu), "--beta", str(beta))
    assert code == 0
    closed = math.log(1 + math.exp(beta * mu) + math.exp(-beta * (U - 2 * mu)))
    (row,) = [r for r in rows(out) if r["quantity"] == "pressure"]
    assert abs(float(row["value"]) - closed) <= float(row["error"])


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# single site\nL = 1\nt = 0\nmu = 0.3\nbeta = 10\nformat = json\n")
    code, out, _ = run(capsys, "ed", "--config", str(cfg))
    assert code == 0
    recs = json.loads(out)
    assert recs[0]["params"]["mu"] == 0.3
    code, out, _ = run(capsys, "ed", "--config", str(cfg), "--mu", "0.5")
    assert json.loads(out)[0]["params"]["mu"] == 0.5


def test_config_errors(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run(capsys, "ed", "--config", str(bad))[0] == 2
    bad.write_text("just words\n")
    assert run(capsys, "ed", "--config", str(bad))[0] == 2
    assert run(capsys, "ed", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    bad.write_text("check-ed = maybe\n")
    assert run(capsys, "expand", "--config", str(bad))[0] == 2


def test_read_config_normalizes_keys(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("max-jumps = 2  # cut\nmu_min=-1\n\n")
    assert read_config(str(f)) == {"max_jumps": "2", "mu_min": "-1"}


def test_kp_verify_theorem_point(capsys):
    # in d = 2 the whole lemma chain closes
    argv = ["--d", "2", "--L", "3", "--t", "0.001", "--mu", "0.2", "--beta", "40", "--max-jumps", "3", "--radius", "2"]
    code, out, _ = run(capsys, "kp-verify", *argv, "--self-check", "20")
    assert code == 0
    names = {r["name"]: r for r in rows(out)}
    assert {"lemma32a", "lemma32b", "lemma32c", "lemma32d", "sigma_rowsum", "loop_factorization_rel_error"} <= set(names)
    assert all(r["satisfied"] == "True" for r in names.values())


def test_kp_verify_reports_violation(capsys):
    # the small-hopping precondition fails at t = 0.01
    code, out, _ = run(capsys, "kp-verify", "--t", "0.01", "--mu", "0.2", "--beta", "40")
    assert code == 4
    (row,) = [r for r in rows(out) if r["name"] == "small_hopping_factor"]
    assert row["satisfied"] == "False" and row["provenance"] == "formula"


def test_kp_verify_self_check_depends_only_on_seed(capsys):
    argv = ["kp-verify", "--t", "0.002", "--beta", "40", "--self-check", "30"]
    a = run(capsys, *argv, "--seed", "5")[1]
    b = run(capsys, *argv, "--seed", "5")[1]
    assert a == b
    assert a != run(capsys, *argv, "--seed", "6")[1]


def test_bounds_command(capsys):
    code, out, _ = run(capsys, "bounds", "--t", "1", "--U", "2", "--mu", "0.5", "--L", "6", "--boundary", "open")
    assert code == 0
    q = {r["quantity"]: r for r in rows(out)}
    assert float(q["tc_hardcore"]["value"]) == pytest.approx(0.25)
    slacks = [float(r["value"]) for k, r in q.items() if k.startswith("variational_slack")]
    assert len(slacks) == 6 and min(slacks) >= 0


def test_phase_diagram_csv_and_svg(capsys, tmp_path):
    svg = tmp_path / "map.svg"
    code, out, _ = run(capsys, "phase-diagram", "--resolution", "20", "--d", "2", "--svg", str(svg))
    assert code == 0
    table = rows(out)
    assert len(table) == 400
    assert {r["provenance"] for r in table} == {"formula"}
    ET.fromstring(svg.read_text())


def test_phase_diagram_empty_grid_keeps_header(capsys):
    code, out, _ = run(capsys, "phase-diagram", "--resolution", "0")
    assert code == 0 and out.startswith("mu,t,U,d,label")
