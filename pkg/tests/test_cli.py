import json

import numpy as np
import pytest

from pptlab import zoo
from pptlab.cli import main
from pptlab.qstate import BipartiteDims, BipartiteState, HermitianOperator, load_state, save_state


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestConstruct:
    @pytest.mark.parametrize("family,extra,m,n", [
        ("good-3x4", [], 3, 4),
        ("good-3xN", ["--b", "2,3"], 3, 5),
        ("bad-3x4", ["--params", "1,1,1,1,1,0,0"], 3, 4),
        ("bad-3xN", [], 3, 6),
        ("bad-MxN", [], 4, 5),
        ("kon-mnogo", [], 3, 4),
        ("upb-complement", [], 3, 4),
    ])
    def test_state_families(self, tmp_path, capsys, family, extra, m, n):
        out = tmp_path / "state.json"
        code, stdout, _ = run_cli(capsys, "construct", family,
                                  "--m", str(m), "--n", str(n), "--out", str(out), *extra)
        assert code == 0
        assert "rank" in stdout
        state = load_state(out)
        assert (state.dims.m, state.dims.n) == (m, n)

    def test_good_3xn_rank_printed(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        code, stdout, _ = run_cli(capsys, "construct", "good-3xN",
                                  "--n", "5", "--b", "2,3", "--out", str(out))
        assert code == 0
        assert "rank 6" in stdout

    def test_gentiles2_writes_basis_file(self, tmp_path, capsys):
        out = tmp_path / "upb.json"
        code, stdout, _ = run_cli(capsys, "construct", "gentiles2",
                                  "--m", "3", "--n", "4", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload["vectors"]) == 7

    def test_bad_mxn_at_m3_matches_bad_3xn(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        code, _, _ = run_cli(capsys, "construct", "bad-MxN",
                             "--m", "3", "--n", "4", "--out", str(out))
        assert code == 0
        assert np.array_equal(load_state(out).matrix, zoo.bad_3xn(4).matrix)

    def test_invalid_parameters_exit_2(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        code, _, err = run_cli(capsys, "construct", "good-3xN",
                               "--n", "5", "--b", "1,1", "--out", str(out))
        assert code == 2
        assert "error" in err


class TestAnalyze:
    def test_good_3x4_report(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        save_state(zoo.good_3x4(), path)
        out = tmp_path / "report.json"
        code, _, _ = run_cli(capsys, "analyze", str(path), "--out", str(out))
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["schema"] == "pptlab-report/1"
        assert rep["rank_profile"]["birank"] == [5, 5]
        assert rep["ppt"]["verdict"] is True
        assert rep["kernel"]["count"] == 10
        assert rep["kernel"]["general_position"] is True
        assert rep["goodness"]["verdict"] == "good"
        assert rep["extremality"]["verdict"] == "extreme"
        assert rep["strongly_extreme"] == "yes"
        assert rep["edge"]["is_edge"] is True
        assert rep["range_ces"]["verdict"] is True

    def test_kon_mnogo_report(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        state, _ = zoo.kon_mnogo()
        save_state(state, path)
        code, stdout, _ = run_cli(capsys, "analyze", str(path))
        assert code == 0
        rep = json.loads(stdout)
        assert rep["rank_profile"]["rank"] == 5
        assert (rep["rank_profile"]["rank_a"], rep["rank_profile"]["rank_b"]) == (3, 4)
        assert rep["kernel"]["count"] == 10
        assert rep["kernel"]["general_position"] is False

    def test_pure_product_report(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        rho = np.zeros((4, 4))
        rho[0, 0] = 1.0
        save_state(BipartiteState(HermitianOperator(BipartiteDims(2, 2), rho)), path)
        code, stdout, _ = run_cli(capsys, "analyze", str(path))
        assert code == 0
        rep = json.loads(stdout)
        assert rep["rank_profile"]["rank"] == 1
        assert rep["ppt"]["verdict"] is True
        assert rep["extremality"]["verdict"] == "extreme"

    def test_markdown_output(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        save_state(zoo.good_3x4(), path)
        code, stdout, _ = run_cli(capsys, "analyze", str(path), "--md", "--fast")
        assert code == 0
        assert stdout.startswith("# State report")

    def test_byte_determinism(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        save_state(zoo.good_3x4(), path)
        _, first, _ = run_cli(capsys, "analyze", str(path), "--fast")
        _, second, _ = run_cli(capsys, "analyze", str(path), "--fast")
        assert first == second

    def test_reports_are_strict_json(self, tmp_path, capsys):
        # no NaN/Infinity tokens even for degenerate inputs such as full rank
        from pptlab.cli import analyze_state
        state = BipartiteState(HermitianOperator(
            BipartiteDims(2, 2), np.eye(4) + np.diag([1.0, 0, 0, 1.0])))
        rep = analyze_state(state, {"case": "full-rank"})
        json.dumps(rep.to_json(), sort_keys=True, allow_nan=False)
        assert rep.to_markdown().startswith("# State report")

    def test_malformed_file_exit_2(self, tmp_path, capsys):
        path = tmp_path / "nonsense.json"
        path.write_text("{\"m\": 2}")
        code, _, err = run_cli(capsys, "analyze", str(path))
        assert code == 2
        assert "error" in err


class TestSweep:
    def test_bad_3x4_draws(self, tmp_path, capsys):
        out = tmp_path / "sweep.jsonl"
        code, _, err = run_cli(capsys, "sweep", "bad-3x4", "--draws", "2",
                               "--seed", "7", "--fast", "--out", str(out))
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 2
        for line in lines:
            rep = json.loads(line)
            assert rep["extremality"]["verdict"] == "extreme"
            assert rep["goodness"]["verdict"] == "bad"
        assert "sweep summary" in err

    def test_seed_determinism(self, tmp_path, capsys):
        out1 = tmp_path / "a.jsonl"
        out2 = tmp_path / "b.jsonl"
        run_cli(capsys, "sweep", "bad-3x4", "--draws", "2", "--seed", "3",
                "--fast", "--out", str(out1))
        run_cli(capsys, "sweep", "bad-3x4", "--draws", "2", "--seed", "3",
                "--fast", "--parallel", "2", "--out", str(out2))
        assert out1.read_text() == out2.read_text()

    def test_grid_sweep_bad_3xn(self, tmp_path, capsys):
        out = tmp_path / "grid.jsonl"
        code, _, _ = run_cli(capsys, "sweep", "bad-3xN", "--n-range", "4:5",
                             "--fast", "--out", str(out))
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().strip().splitlines()]
        assert [rep["input"]["n"] for rep in lines] == [4, 5]
        assert all(rep["extremality"]["nullity"] == 1 for rep in lines)


class TestVerifyIdentities:
    def test_small_bound_passes(self, capsys):
        code, stdout, _ = run_cli(capsys, "verify-identities", "--max-mn", "6")
        assert code == 0
        payload = json.loads(stdout)
        assert payload["pass"] is True
        assert payload["binomial_identity"]["failed"] == 0
        assert payload["circulant_determinant"]["failed"] == 0

    def test_trivial_bound(self, capsys):
        code, stdout, _ = run_cli(capsys, "verify-identities", "--max-mn", "1")
        assert code == 0
        assert json.loads(stdout)["pass"] is True

    def test_bound_cap(self, capsys):
        code, _, err = run_cli(capsys, "verify-identities", "--max-mn", "13")
        assert code == 2
        assert "at most 12" in err
