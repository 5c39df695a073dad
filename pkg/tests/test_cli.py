import re

import pytest

from polynl import bench, cli, gradcheck, oracle


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestVerify:
    def test_default_passes(self, capsys):
        code, out, _ = run(capsys, "verify")
        assert code == 0
        assert out.rstrip().endswith("result: PASS")
        for name in ("oracle-triangle", "reassociation", "homogeneity", "permutation"):
            assert name in out

    def test_zero_tolerance_fails_with_replay(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "reassociation", "--tolerance", "0")
        assert code == 1
        assert "replay: polynl verify --suite reassociation --seed" in out

    def test_repeatable(self, capsys):
        first = run(capsys, "verify", "--seed", "7")
        second = run(capsys, "verify", "--seed", "7")
        assert first == second

    def test_f32_rejected(self, capsys):
        code, _, err = run(capsys, "verify", "--dtype", "f32")
        assert code == 2 and "f64" in err


class TestGradcheck:
    def test_default_passes(self, capsys):
        code, out, _ = run(capsys, "gradcheck")
        assert code == 0
        assert out.rstrip().endswith("result: PASS")

    def test_perturbed_backward_fails(self, capsys):
        cfg = cli.build_parser().parse_args(["gradcheck", "--seeds", "2"])

        def off_by_one_percent(p, x, up):
            return gradcheck.polynl_backward(p, x, up).scaled(1.01)

        assert cli.cmd_gradcheck(cfg, backwards={"PolyNL": off_by_one_percent}) == 1
        out = capsys.readouterr().out
        assert "result: FAIL" in out
        assert "replay: polynl gradcheck --sizes 5x3 --seed 42 --seeds 1" in out
        nl_rows = [line for line in out.splitlines() if line.startswith("NL ")]
        assert nl_rows and all(line.endswith("yes") for line in nl_rows)

    def test_smallest_size_is_tight(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--sizes", "1x1", "--seeds", "1")
        assert code == 0
        rows = [line.split() for line in out.splitlines() if re.match(r"(NL|PolyNL)\s", line)]
        assert len(rows) == 3 + 6
        for row in rows:
            assert float(row[3]) <= 1e-9

    def test_bad_sizes(self, capsys):
        assert run(capsys, "gradcheck", "--sizes", "5by3")[0] == 2


class TestBench:
    def test_tiny_grid(self, capsys, tmp_path):
        prefix = tmp_path / "tiny"
        code, out, _ = run(capsys, "bench", "--grid", "tiny", "--trials", "1", "--out", str(prefix))
        assert code == 0
        records = bench.parse_csv((tmp_path / "tiny.csv").read_bytes())
        assert {r.method for r in records} == set(bench.Method)
        assert len(records) == 4 * len(bench.Method)
        assert (tmp_path / "tiny.svg").read_bytes().startswith(b"<svg")
        assert len(re.findall(r"exponent=\d", out)) == len(bench.Method)

    def test_method_filter(self, capsys, tmp_path):
        prefix = tmp_path / "p"
        code, _, _ = run(capsys, "bench", "--methods", "polynl", "--ns", "16,32", "--cs", "4",
                         "--trials", "1", "--warmup", "0", "--out", str(prefix))
        assert code == 0
        records = bench.parse_csv((tmp_path / "p.csv").read_bytes())
        assert [(r.method, r.n) for r in records] == [(bench.Method.POLYNL, 16), (bench.Method.POLYNL, 32)]

    def test_unknown_method(self, capsys, tmp_path):
        assert run(capsys, "bench", "--methods", "tesa", "--out", str(tmp_path / "x"))[0] == 2


class TestOracle:
    def test_unit_scalar(self, capsys, tmp_path):
        code, _, _ = run(capsys, "oracle", "--n", "1", "--c", "1", "--weights", "unit",
                         "--out", str(tmp_path / "w"))
        assert code == 0
        assert (tmp_path / "w.txt").read_text() == "1 1\n1.0\n"

    def test_over_cap(self, capsys, tmp_path):
        code, _, err = run(capsys, "oracle", "--n", "3", "--c", "3", "--out", str(tmp_path / "w"))
        assert code == 2 and "cap" in err
        assert not (tmp_path / "w.txt").exists()

    def test_nl_census(self, capsys, tmp_path):
        code, out, _ = run(capsys, "oracle", "--block", "nl", "--n", "2", "--c", "2",
                           "--out", str(tmp_path / "w"))
        assert code == 0
        w3 = oracle.parse_dump((tmp_path / "w.txt").read_text())
        assert w3.count_nonzero() == 64
        assert "64 nonzero" in out


class TestConfig:
    def test_file_values_and_flag_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# oracle settings\nn=1\nc=1\nweights=unit\n")
        out = tmp_path / "w"
        assert run(capsys, "oracle", "--config", str(cfg), "--out", str(out))[0] == 0
        assert (tmp_path / "w.txt").read_text() == "1 1\n1.0\n"
        assert run(capsys, "oracle", "--config", str(cfg), "--c", "2", "--out", str(out))[0] == 0
        assert (tmp_path / "w.txt").read_text().startswith("1 2\n")

    def test_repeatable_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("suite=homogeneity,permutation\ninstances=2\n")
        code, out, _ = run(capsys, "verify", "--config", str(cfg))
        assert code == 0
        assert "homogeneity" in out and "oracle-triangle" not in out

    @pytest.mark.parametrize("text", ["bogus=1\n", "n 3\n", "dtype=f16\n"])
    def test_bad_config(self, capsys, tmp_path, text):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(text)
        code, _, err = run(capsys, "oracle", "--config", str(cfg))
        assert code == 2 and err

    def test_missing_config(self, capsys, tmp_path):
        assert run(capsys, "verify", "--config", str(tmp_path / "nope"))[0] == 2


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["verify", "--no-such-flag"], ["bench", "--trials", "0"]])
def test_usage_errors(capsys, argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(capsys, *argv)[0] == 2
