"""Command-line interface: dispatch, config, exit codes, determinism."""

import json

import pytest

from motint import cli
from motint import ring_a as R
from motint.cells import AffineForm, PCell, VarCell
from motint.presburger import PFun, PTerm
from motint.zeta import CoeffList, RatSeries


def run(capsys, *argv):
    status = cli.main(list(argv))
    out = capsys.readouterr()
    return status, out.out, out.err


@pytest.fixture
def geo_file(tmp_path):
    # L^{-n} on n >= 0
    cell = PCell(("n",), (VarCell(AffineForm.const_form(0), None, 1, 0),))
    pf = PFun(("n",), ((cell, (PTerm(R.ONE, AffineForm.make({"n": -1})),)),))
    path = tmp_path / "geo.json"
    path.write_text(json.dumps(pf.to_json()))
    return str(path)


# ---------------------------------------------------------------------------
# parse


def test_parse_formula(capsys):
    status, out, _ = run(capsys, "parse", "--formula",
                         "exists s : res(1) . s*s = ac_1(t)",
                         "--sorts", "t=vf")
    assert status == 0
    assert "exists s : res(1)" in out
    assert "t : vf" in out


def test_parse_ratfunc_json(capsys):
    status, out, _ = run(capsys, "parse", "--ratfunc", "(L-1)/(1-L^-1)",
                         "--json")
    assert status == 0
    report = json.loads(out)
    assert report["kind"] == "ratfunc"
    assert report["is_nonneg"] is True


def test_parse_poly(capsys):
    status, out, _ = run(capsys, "parse", "--poly", "x*x*y", "--json")
    assert status == 0
    report = json.loads(out)
    assert report["canonical"] == "x^2*y"
    assert report["monomial"] is True


def test_parse_needs_exactly_one_input(capsys):
    status, _, err = run(capsys, "parse", "--formula", "0 = 0",
                         "--poly", "x")
    assert status == 1
    assert "exactly one" in err


# ---------------------------------------------------------------------------
# sum / eval / theta


def test_sum_closed_form_and_theta(capsys, geo_file):
    status, out, _ = run(capsys, "sum", "--file", geo_file, "--q", "2")
    assert status == 0
    assert out.splitlines() == ["L/(L - 1)", "theta_2 = 2"]


def test_sum_json_report(capsys, geo_file):
    status, out, _ = run(capsys, "sum", "--file", geo_file, "--json")
    assert status == 0
    report = json.loads(out)
    assert report["vars_in"] == ["n"] and report["vars_out"] == []
    assert report["value"] == "L/(L - 1)"


def test_sum_unknown_var(capsys, geo_file):
    status, _, err = run(capsys, "sum", "--file", geo_file, "--var", "m")
    assert status == 1
    assert "no variable 'm'" in err


def test_eval_at_point(capsys, geo_file):
    status, out, _ = run(capsys, "eval", "--file", geo_file,
                         "--point", "n=3", "--q", "2")
    assert status == 0
    assert out.splitlines() == ["1/L^3", "theta_2 = 1/8"]


def test_eval_missing_coordinate(capsys, geo_file):
    status, _, err = run(capsys, "eval", "--file", geo_file, "--point", "m=1")
    assert status == 1
    assert "misses variables: n" in err


def test_theta(capsys):
    status, out, _ = run(capsys, "theta", "--expr", "(L-1)/(1-L^-2)",
                         "--q", "4")
    assert status == 0 and out.strip() == "16/5"


def test_theta_needs_q(capsys):
    status, _, err = run(capsys, "theta", "--expr", "L")
    assert status == 1 and "needs --q" in err


# ---------------------------------------------------------------------------
# count


def test_count_example(capsys):
    status, out, _ = run(capsys, "count", "--formula", "x^2 = 0",
                         "--p", "2", "--d", "1", "--level", "2")
    assert status == 0
    assert out.strip() == "2"


def test_count_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("p = 3\nd = 1\nlevel = 1   # comment\n")
    status, out, _ = run(capsys, "count", "--formula", "x^2 = 1",
                         "--config", str(cfg))
    assert status == 0
    assert out.strip() == "2"          # x = 1, 2 mod 3
    # a flag overrides the file
    status, out, _ = run(capsys, "count", "--formula", "x^2 = 1",
                         "--config", str(cfg), "--p", "5")
    assert status == 0
    assert out.strip() == "2"          # x = 1, 4 mod 5


def test_count_rejects_vg_free_vars(capsys):
    status, _, err = run(capsys, "count", "--formula", "x = 0",
                         "--sorts", "x=vg", "--p", "2")
    assert status == 1
    assert "residue-sorted" in err


def test_count_cap(capsys):
    status, _, err = run(capsys, "count", "--formula", "x*y = 0",
                         "--p", "2", "--level", "3", "--cap", "10")
    assert status == 1
    assert "CapExceeded" in err


def test_nonprime_p_rejected(capsys):
    status, _, err = run(capsys, "count", "--formula", "x = 0", "--p", "4")
    assert status == 1
    assert "must be prime" in err


def test_bad_config_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("prime = 2\n")
    status, _, err = run(capsys, "count", "--formula", "x = 0",
                         "--config", str(cfg))
    assert status == 1
    assert "unknown config keys: prime" in err


# ---------------------------------------------------------------------------
# vol / integrate


def test_vol_with_counting(capsys):
    status, out, _ = run(capsys, "vol", "--cond", "ord(t) >= 1",
                         "--order", "t", "--p", "3", "--count")
    assert status == 0
    lines = out.splitlines()
    assert lines[0] == "value = 1/L"
    assert lines[-1] == "N at q=3: 1/3"


def test_integrate_weight_json(capsys):
    status, out, _ = run(capsys, "integrate", "--cond", "ord(t) >= 0",
                         "--order", "t", "--weight", "1:t:0",
                         "--p", "2", "--json")
    assert status == 0
    report = json.loads(out)
    assert report["value"] == "L/(L + 1)"
    assert report["result"]["format"] == "motint.integration/1"
    assert report["weight"] == [[1, "t", "0"]]


def test_integrate_divergence_is_an_error(capsys):
    status, _, err = run(capsys, "integrate", "--cond", "ord(t) <= 0",
                         "--order", "t", "--p", "2")
    assert status == 1
    assert "NotIntegrable" in err


def test_integrate_bad_weight(capsys):
    status, _, err = run(capsys, "integrate", "--cond", "ord(t) >= 0",
                         "--order", "t", "--weight", "t:1")
    assert status == 1
    assert "mult:var:center" in err


# ---------------------------------------------------------------------------
# zeta / verify


def test_zeta_motivic_json_round_trip(capsys):
    status, out, _ = run(capsys, "zeta-motivic", "--H", "x*y", "--json")
    assert status == 0
    report = json.loads(out)
    rs = RatSeries.from_json(report["series"])
    assert rs.denominator == ((-1, 1), (-1, 1))


def test_zeta_count_frozen(capsys):
    status, out, _ = run(capsys, "zeta-count", "--H", "x", "--p", "2",
                         "--imax", "3")
    assert status == 0
    assert [l.split("\t") for l in out.splitlines()] == [
        ["0", "1/2"], ["1", "1/4"], ["2", "1/8"], ["3", "1/16"]]


def test_zeta_count_cap_json(capsys):
    status, out, _ = run(capsys, "zeta-count", "--H", "x*y", "--p", "2",
                         "--imax", "6", "--cap", "20",
                         "--method", "enumerate", "--json")
    assert status == 1
    report = json.loads(out)
    assert report["error"]["code"] == "CapExceeded"
    assert report["error"]["needed"] > report["error"]["cap"] == 20


def test_zeta_count_env_cap(capsys, monkeypatch):
    monkeypatch.setenv("MOTINT_CAP", "20")
    status, _, err = run(capsys, "zeta-count", "--H", "x*y", "--p", "2",
                         "--imax", "6", "--method", "enumerate")
    assert status == 1 and "CapExceeded" in err


def test_verify_meuser_grid(capsys):
    status, out, _ = run(capsys, "verify-meuser", "--H", "x*y",
                         "--grid", "p=2,3;d=1,2", "--imax", "3")
    assert status == 0
    assert out.count("match (4 coefficients)") == 4
    assert out.splitlines()[-1] == "all match: yes"


def test_verify_meuser_thread_determinism(capsys):
    argv = ["verify-meuser", "--H", "x^2", "--grid", "p=2,3;d=1",
            "--imax", "3", "--json"]
    status1, out1, _ = run(capsys, *argv, "--threads", "1")
    status4, out4, _ = run(capsys, *argv, "--threads", "4")
    assert status1 == status4 == 0
    assert out1 == out4                      # byte-identical report


def test_verify_meuser_mismatch_exits_2(capsys, monkeypatch):
    from fractions import Fraction
    real = cli.zprime_count

    def wrong(h, p, d, i_max, **kw):
        values = list(real(h, p, d, i_max, **kw).values)
        values[0] += Fraction(1, 100)
        return CoeffList(i_max, tuple(values))

    monkeypatch.setattr(cli, "zprime_count", wrong)
    monkeypatch.setattr("motint.zeta.zprime_count", wrong)
    status, out, _ = run(capsys, "verify-meuser", "--H", "x",
                         "--p", "2", "--imax", "2")
    assert status == 2
    assert "MISMATCH at i=0" in out
    assert out.splitlines()[-1] == "all match: NO"


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main(["count"])                  # missing --formula
    assert ei.value.code == 1
    assert "--formula" in capsys.readouterr().err


def test_unknown_command_exits_1(capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main(["frobnicate"])
    assert ei.value.code == 1
