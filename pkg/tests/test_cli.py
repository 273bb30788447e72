"""CLI: exit codes, reproducible output, formats, certificate round trips."""

import json

import pytest

from perclab.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def json_records(out: str):
    return [json.loads(line) for line in out.splitlines()]


class TestPhiCommand:
    def test_exact_anchor_quarter(self, capsys):
        code, out, _ = run_cli(capsys, "phi", "--dim", "2", "--box", "0",
                               "--p", "0.25", "--method", "exact")
        assert code == 0
        recs = json_records(out)
        assert recs[0]["kind"] == "config"
        values = [r for r in recs if r["kind"] == "phi-value"]
        assert values == [{"kind": "phi-value", "p": "1/4", "phi": "1/1"}]

    def test_exact_p0(self, capsys):
        code, out, _ = run_cli(capsys, "phi", "--dim", "2", "--box", "0",
                               "--p", "0.0")
        assert code == 0
        assert json_records(out)[-1]["phi"] == "0/1"

    def test_fraction_and_decimal_agree(self, capsys):
        _, out1, _ = run_cli(capsys, "phi", "--box", "1", "--p", "2/5")
        _, out2, _ = run_cli(capsys, "phi", "--box", "1", "--p", "0.4")
        assert (json_records(out1)[-1]["phi"]
                == json_records(out2)[-1]["phi"])

    def test_mc_within_four_sigma_of_exact(self, capsys):
        code, out, _ = run_cli(capsys, "phi", "--dim", "2", "--box", "1",
                               "--p", "0.4", "--method", "mc",
                               "--trials", "100000", "--seed", "7")
        assert code == 0
        rec = [r for r in json_records(out) if r["kind"] == "phi-estimate"][0]
        from fractions import Fraction
        from perclab import exact
        from perclab.lattice import make_box
        exact_val = float(exact.phi_exact(make_box(2, 1))(Fraction(2, 5)))
        se = rec["sample_sd"] / rec["trials"] ** 0.5
        assert abs(rec["mean"] - exact_val) < 4 * se

    def test_p_grid(self, capsys):
        code, out, _ = run_cli(capsys, "phi", "--box", "0",
                               "--p-grid", "0", "1/2", "3")
        assert code == 0
        values = [r["p"] for r in json_records(out)
                  if r["kind"] == "phi-value"]
        assert values == ["0/1", "1/4", "1/2"]

    def test_missing_p_is_config_error(self, capsys):
        code, _, err = run_cli(capsys, "phi", "--box", "0")
        assert code == 2
        assert "probability" in err

    def test_bad_probability(self, capsys):
        code, _, err = run_cli(capsys, "phi", "--box", "0", "--p", "3/2")
        assert code == 2


class TestPcBoundCommand:
    def test_kmax0_d2(self, capsys):
        code, out, _ = run_cli(capsys, "pc-bound", "--dim", "2", "--kmax", "0")
        assert code == 0
        final = json_records(out)[-1]
        assert final["kind"] == "pc-lower-bound"
        assert final["bound"] == "1/4"

    def test_kmax0_d3(self, capsys):
        code, out, _ = run_cli(capsys, "pc-bound", "--dim", "3", "--kmax", "0")
        assert code == 0
        assert json_records(out)[-1]["bound"] == "1/6"

    def test_kmax1_improves_and_stays_below_half(self, capsys):
        from fractions import Fraction
        code, out, _ = run_cli(capsys, "pc-bound", "--dim", "2", "--kmax", "1")
        assert code == 0
        final = json_records(out)[-1]
        bound = Fraction(final["bound"])
        assert Fraction(1, 4) < bound < Fraction(1, 2)

    def test_certificate_out_and_verify(self, capsys, tmp_path):
        cert_file = tmp_path / "bound.json"
        code, _, _ = run_cli(capsys, "pc-bound", "--dim", "2", "--kmax", "1",
                             "--certificate-out", str(cert_file))
        assert code == 0
        code2, out2, _ = run_cli(capsys, "verify", "--certificate",
                                 str(cert_file))
        assert code2 == 0
        recs = json_records(out2)
        assert recs[-1]["pass"] is True

    def test_tampered_certificate_exits_4(self, capsys, tmp_path):
        cert_file = tmp_path / "bound.json"
        run_cli(capsys, "pc-bound", "--dim", "2", "--kmax", "0",
                "--certificate-out", str(cert_file))
        obj = json.loads(cert_file.read_text())
        obj["bound"] = "1/2"
        cert_file.write_text(json.dumps(obj))
        code, out, _ = run_cli(capsys, "verify", "--certificate",
                               str(cert_file))
        assert code == 4


class TestDecayCommand:
    def test_certificate_bound_column(self, capsys):
        code, out, _ = run_cli(capsys, "decay", "--dim", "2", "--p", "0.2",
                               "--box", "0", "--kmax", "4",
                               "--trials", "2000", "--seed", "3")
        assert code == 0
        recs = json_records(out)
        bounds = [r["bound"] for r in recs if r["kind"] == "decay-bound"]
        assert bounds == ["1/1", "4/5", "16/25", "64/125"]

    def test_p1_no_certificate_all_reached(self, capsys):
        code, out, _ = run_cli(capsys, "decay", "--dim", "2", "--p", "1",
                               "--box", "0", "--kmax", "3",
                               "--trials", "500", "--seed", "3")
        assert code == 0
        recs = json_records(out)
        assert any(r["kind"] == "certificate-refused" for r in recs)
        assert not any(r["kind"] == "decay-bound" for r in recs)
        points = [r["point"] for r in recs if r["kind"] == "estimate"]
        assert points == [1.0, 1.0, 1.0]

    def test_n_list(self, capsys):
        code, out, _ = run_cli(capsys, "decay", "--dim", "2", "--p", "0.35",
                               "--box", "0", "--n-list", "2,4,6",
                               "--trials", "2000", "--seed", "5")
        assert code == 0
        ns = [r["n"] for r in json_records(out) if r["kind"] == "estimate"]
        assert ns == [2, 4, 6]


class TestMeanfieldCommand:
    def test_floor_exact_third(self, capsys):
        code, out, _ = run_cli(capsys, "meanfield", "--dim", "2",
                               "--p", "0.6", "--n", "8",
                               "--trials", "4000", "--seed", "11")
        assert code == 0
        recs = json_records(out)
        floor = [r for r in recs if r["kind"] == "meanfield-floor"][0]
        assert floor["floor"] == "1/3"
        check = [r for r in recs if r["kind"] == "meanfield-check"][0]
        assert check["pass"] is True

    def test_vacuous_p_exits_2(self, capsys):
        code, _, err = run_cli(capsys, "meanfield", "--dim", "2",
                               "--p", "0.5", "--n", "4",
                               "--trials", "100", "--seed", "1")
        assert code == 2
        assert "vacuous" in err

    def test_forced_failure_exits_4(self, capsys):
        # an absurd reference makes the floor unreachable
        code, out, _ = run_cli(capsys, "meanfield", "--dim", "2",
                               "--p", "0.55", "--n", "8",
                               "--pc-ref", "1/100",
                               "--trials", "4000", "--seed", "11")
        assert code == 4
        check = [r for r in json_records(out)
                 if r["kind"] == "meanfield-check"][0]
        assert check["pass"] is False

    def test_byte_identical_across_workers(self, capsys):
        outs = []
        for w in ("1", "4", "8"):
            code, out, _ = run_cli(capsys, "meanfield", "--dim", "2",
                                   "--p", "0.6", "--n", "8",
                                   "--trials", "4000", "--seed", "11",
                                   "--workers", w)
            assert code == 0
            outs.append(out)
        assert outs[0] == outs[1] == outs[2]

    def test_byte_identical_across_runs(self, capsys):
        args = ("meanfield", "--dim", "2", "--p", "0.6", "--n", "6",
                "--trials", "2000", "--seed", "12")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2


class TestVerifyCommand:
    def test_identities_n1(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--dim", "2", "--n", "1")
        assert code == 0
        recs = json_records(out)
        russo = [r for r in recs if r["kind"] == "russo-check"][0]
        assert russo["pass"] and russo["residual"] == "0/1"
        blocking = [r for r in recs if r["kind"] == "blocking-check"]
        assert len(blocking) == 5 and all(r["pass"] for r in blocking)
        assert all(r["residual"] == "0/1" for r in blocking)
        lemma = [r for r in recs if r["kind"] == "lemma-check"]
        assert len(lemma) == 5 and all(r["pass"] for r in lemma)

    def test_n0_lemma_not_applicable(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "--dim", "2", "--n", "0",
                               "--p", "1/2")
        assert code == 0
        recs = json_records(out)
        lemma = [r for r in recs if r["kind"] == "lemma-check"][0]
        assert lemma["applicable"] is False
        assert [r for r in recs if r["kind"] == "russo-check"][0]["pass"]

    def test_n2_budget_exit_3(self, capsys):
        code, _, err = run_cli(capsys, "verify", "--dim", "2", "--n", "2")
        assert code == 3
        assert "2^40" in err

    def test_missing_n_is_config_error(self, capsys):
        code, _, _ = run_cli(capsys, "verify", "--dim", "2")
        assert code == 2


class TestOutputFormats:
    def test_csv_json_same_values(self, capsys, tmp_path):
        import csv as csvmod
        args = ("pc-bound", "--dim", "2", "--kmax", "1")
        _, json_out, _ = run_cli(capsys, *args)
        code, csv_out, _ = run_cli(capsys, *args, "--format", "csv")
        assert code == 0
        recs = json_records(json_out)
        rows = list(csvmod.reader(csv_out.splitlines()))
        header, data = rows[0], rows[1:]
        assert len(data) == len(recs)
        for rec, row in zip(recs, data):
            by_name = dict(zip(header, row))
            for key, value in rec.items():
                cell = by_name[key]
                parsed = cell if isinstance(value, str) else json.loads(cell)
                assert parsed == value

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "records.jsonl"
        code, out, _ = run_cli(capsys, "pc-bound", "--kmax", "0",
                               "--out", str(path))
        assert code == 0
        assert out == ""
        assert json.loads(path.read_text().splitlines()[-1])["bound"] == "1/4"


class TestSeedPolicy:
    def test_required_in_test_mode(self, capsys, monkeypatch):
        monkeypatch.setenv("PERCLAB_REQUIRE_SEED", "1")
        code, _, err = run_cli(capsys, "meanfield", "--p", "0.6", "--n", "4",
                               "--trials", "100")
        assert code == 2
        assert "seed" in err

    def test_entropy_seed_printed(self, capsys, monkeypatch):
        monkeypatch.delenv("PERCLAB_REQUIRE_SEED", raising=False)
        code, out, err = run_cli(capsys, "meanfield", "--p", "0.6", "--n", "4",
                                 "--trials", "100")
        assert code == 0
        assert "seed drawn from system entropy" in err
        config = json_records(out)[0]
        assert isinstance(config["seed"], int)

    def test_workers_env_default(self, capsys, monkeypatch):
        monkeypatch.setenv("PERCLAB_WORKERS", "3")
        code, out, _ = run_cli(capsys, "meanfield", "--p", "0.6", "--n", "4",
                               "--trials", "1000", "--seed", "2")
        assert code == 0
        monkeypatch.setenv("PERCLAB_WORKERS", "1")
        _, out2, _ = run_cli(capsys, "meanfield", "--p", "0.6", "--n", "4",
                             "--trials", "1000", "--seed", "2")
        assert out == out2  # workers never change records


class TestSetFile:
    def test_phi_from_set_file(self, capsys, tmp_path):
        path = tmp_path / "square.txt"
        path.write_text("# unit square\n0 0\n1 0\n0 1\n1 1\n")
        code, out, _ = run_cli(capsys, "phi", "--dim", "2",
                               "--set-file", str(path), "--p", "1/2")
        assert code == 0
        recs = json_records(out)
        from fractions import Fraction
        from perclab import exact
        from perclab.lattice import VertexSet
        square = VertexSet([(0, 0), (1, 0), (0, 1), (1, 1)])
        expected = exact.phi_exact(square)(Fraction(1, 2))
        got = Fraction(recs[-1]["phi"])
        assert got == expected

    def test_dimension_mismatch(self, capsys, tmp_path):
        path = tmp_path / "line.txt"
        path.write_text("0 0 0\n1 0 0\n")
        code, _, err = run_cli(capsys, "phi", "--dim", "2",
                               "--set-file", str(path), "--p", "1/2")
        assert code == 2
        assert "dimension" in err
