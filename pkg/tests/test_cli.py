from pathlib import Path

import pytest
from click.testing import CliRunner

from hetsched.cli import _parse_sizes, main


@pytest.fixture
def runner():
    return CliRunner()


GEN = ["--kernels", "10", "--edges", "14", "--kind", "MA",
       "--size", "256", "--seed", "3"]


class TestGenerate:
    def test_prints_dot(self, runner):
        r = runner.invoke(main, ["generate", *GEN])
        assert r.exit_code == 0
        assert r.output.startswith("digraph")

    def test_byte_identical_reruns(self, runner):
        a = runner.invoke(main, ["generate", *GEN]).output
        b = runner.invoke(main, ["generate", *GEN]).output
        assert a == b

    def test_writes_out_dir(self, runner, tmp_path):
        r = runner.invoke(main, ["generate", *GEN, "--out", str(tmp_path / "o")])
        assert r.exit_code == 0
        assert (tmp_path / "o" / "graph.dot").read_text().startswith("digraph")

    def test_infeasible_exits_nonzero(self, runner):
        r = runner.invoke(main, ["generate", "--kernels", "3", "--edges", "50"])
        assert r.exit_code == 1
        assert "error:" in r.output

    def test_config_file_defaults(self, runner, tmp_path):
        cfg = tmp_path / "hetsched.cfg"
        cfg.write_text("kernels = 5  # small\nedges = 6\n")
        r = runner.invoke(main, ["generate", "--kind", "MA", "--size", "128",
                                 "--config", str(cfg)])
        assert r.exit_code == 0
        assert "kernels=5 edges=6" in r.output


class TestPartition:
    def test_summary_line(self, runner):
        r = runner.invoke(main, ["partition", *GEN])
        assert r.exit_code == 0
        assert "r_cpu=" in r.output and "edge_cut=" in r.output

    def test_outputs(self, runner, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(main, ["partition", *GEN, "--out", str(out)])
        assert r.exit_code == 0
        assert len((out / "partition.txt").read_text().splitlines()) == 10
        assert (out / "graph.metis").read_text().splitlines()[0].endswith("011")
        assert "fillcolor" in (out / "partitioned.dot").read_text()

    def test_targets_override(self, runner):
        r = runner.invoke(main, ["partition", *GEN, "--targets", "0,1"])
        assert r.exit_code == 0
        assert "r_cpu=0.0" in r.output

    def test_bad_targets(self, runner):
        r = runner.invoke(main, ["partition", *GEN, "--targets", "0.5,0.6"])
        assert r.exit_code != 0
        assert "sum to 1" in r.output

    def test_graph_file_input(self, runner, tmp_path):
        gen = runner.invoke(main, ["generate", *GEN]).output
        p = tmp_path / "g.dot"
        p.write_text(gen)
        r = runner.invoke(main, ["partition", "--graph", str(p)])
        assert r.exit_code == 0

    def test_graph_and_generator_conflict(self, runner, tmp_path):
        p = tmp_path / "g.dot"
        p.write_text("digraph t { a -> b; }")
        r = runner.invoke(main, ["partition", "--graph", str(p), "--kernels", "5"])
        assert r.exit_code != 0


class TestSimulate:
    @pytest.mark.parametrize("policy", ["eager", "dmda", "gp"])
    def test_policies(self, runner, policy):
        r = runner.invoke(main, ["simulate", *GEN, "--policy", policy])
        assert r.exit_code == 0
        assert f"policy={policy}" in r.output
        assert "makespan=" in r.output

    def test_trace_outputs(self, runner, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(main, ["simulate", *GEN, "--out", str(out)])
        assert r.exit_code == 0
        trace = (out / "trace.csv").read_text()
        assert trace.splitlines()[0] == "time,kind,subject,resource"
        assert "device=" in (out / "annotated.dot").read_text()

    def test_deterministic(self, runner):
        a = runner.invoke(main, ["simulate", *GEN, "--policy", "dmda"]).output
        b = runner.invoke(main, ["simulate", *GEN, "--policy", "dmda"]).output
        assert a == b


class TestCompare:
    def test_csv_output(self, runner):
        r = runner.invoke(main, ["compare", *GEN, "--iterations", "2",
                                 "--policies", "eager,gp"])
        assert r.exit_code == 0
        lines = r.output.splitlines()
        assert lines[0] == "policy,size,mean_makespan,sd_makespan,mean_transfers,sd_transfers"
        assert len(lines) == 3

    def test_byte_identical_reruns(self, runner, tmp_path):
        args = ["compare", *GEN, "--iterations", "2"]
        a = runner.invoke(main, [*args, "--out", str(tmp_path / "a")])
        b = runner.invoke(main, [*args, "--out", str(tmp_path / "b")])
        assert a.exit_code == b.exit_code == 0
        assert (tmp_path / "a" / "compare.csv").read_bytes() == \
            (tmp_path / "b" / "compare.csv").read_bytes()

    def test_size_sweep(self, runner):
        r = runner.invoke(main, ["compare", *GEN, "--policies", "eager",
                                 "--sizes", "128,256"])
        assert r.exit_code == 0
        assert len(r.output.splitlines()) == 3

    def test_unknown_policy_fails(self, runner):
        r = runner.invoke(main, ["compare", *GEN, "--policies", "hef"])
        assert r.exit_code == 1


class TestParseSizes:
    def test_comma_list(self):
        assert _parse_sizes("128,256") == [128, 256]

    def test_range_uses_grid(self):
        assert _parse_sizes("256..1024") == [256, 384, 512, 768, 1024]

    def test_range_outside_grid(self):
        assert _parse_sizes("3000..4000") == [3000, 4000]


class TestDumpModel:
    def test_csv(self, runner):
        r = runner.invoke(main, ["dump-model", "--sizes", "64,128"])
        assert r.exit_code == 0
        assert r.output.startswith("kind,size,time_cpu_ms,time_gpu_ms")

    def test_roundtrip_as_calibration(self, runner, tmp_path):
        out = tmp_path / "o"
        runner.invoke(main, ["dump-model", "--sizes", "256", "--out", str(out)])
        r = runner.invoke(main, ["simulate", *GEN,
                                 "--model", str(out / "model.csv")])
        ref = runner.invoke(main, ["simulate", *GEN])
        assert r.exit_code == 0
        assert r.output == ref.output


class TestVisualize:
    def test_canonicalize(self, runner, tmp_path):
        p = tmp_path / "g.dot"
        p.write_text("digraph t { a -> b; }")
        r = runner.invoke(main, ["visualize", str(p)])
        assert r.exit_code == 0
        assert r.output.startswith("digraph")

    def test_with_partition(self, runner, tmp_path):
        gen = runner.invoke(main, ["generate", "--kernels", "4", "--edges", "3",
                                   "--kind", "MA", "--size", "128"]).output
        g = tmp_path / "g.dot"
        g.write_text(gen)
        pf = tmp_path / "part.txt"
        pf.write_text("0\n1\n0\n1\n")
        r = runner.invoke(main, ["visualize", str(g),
                                 "--partition-file", str(pf)])
        assert r.exit_code == 0
        assert "fillcolor" in r.output
