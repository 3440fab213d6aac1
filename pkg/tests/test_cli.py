import numpy as np
import pytest

from etpf.cli import main
from etpf.model import linear_certificate
from etpf.monitor import MonitorConfig, compute_V
from etpf.presets import linear2d_system


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


class TestSimulate:
    def test_linear_preset_artifacts(self, tmp_path):
        out = tmp_path / "lin"
        code = main([
            "simulate", "--preset", "linear2d",
            "--override", "sim.T=3.0", "--out", str(out),
        ])
        assert code == 0
        for name in ("trace.csv", "events.csv", "summary.txt", "plot.gp"):
            assert (out / name).exists()
        header, rows = read_csv(out / "trace.csv")
        assert header[:6] == ["t", "x_1", "x_2", "u_1", "p_1", "p_2"]
        assert len(rows) == 3001

    def test_v_column_roundtrip(self, tmp_path):
        # recomputing V from the stored x and L columns reproduces the stored V
        out = tmp_path / "lin"
        assert main([
            "simulate", "--preset", "linear2d",
            "--override", "sim.T=3.0", "--out", str(out),
        ]) == 0
        header, rows = read_csv(out / "trace.csv")
        data = np.array([[float(v) for v in row] for row in rows])
        cols = {name: data[:, i] for i, name in enumerate(header)}
        cert = linear_certificate(linear2d_system())
        mon = MonitorConfig(form="integral")
        mask = np.isfinite(cols["V"])
        for x1, x2, L, V in zip(
            cols["x_1"][mask], cols["x_2"][mask], cols["L"][mask], cols["V"][mask]
        ):
            assert compute_V(mon, [x1, x2], L, cert) == pytest.approx(V, abs=1e-9)

    def test_divergence_exit_code(self, tmp_path):
        code = main([
            "simulate", "--preset", "example2", "--out", str(tmp_path / "e2"),
        ])
        assert code == 2

    def test_malformed_config_exit_code(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("sim:\n  T: [1, 2\n")
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1

    def test_unknown_preset_exit_code(self, tmp_path):
        assert main(["simulate", "--preset", "nope", "--out", str(tmp_path)]) == 1

    def test_no_source_exit_code(self, tmp_path):
        assert main(["simulate", "--out", str(tmp_path)]) == 1


class TestHeatmap:
    def test_single_cell_config(self, tmp_path):
        cfgfile = tmp_path / "hm.yaml"
        cfgfile.write_text(
            "preset: example1\n"
            "heatmap:\n"
            "  delta_tau_grid: [2.0]\n"
            "  d_psi_grid: [1.0]\n"
            "  n_ic: 2\n"
            "  seed: 42\n"
        )
        out = tmp_path / "hm"
        assert main(["heatmap", "--config", str(cfgfile), "--out", str(out)]) == 0
        header, rows = read_csv(out / "heatmap.csv")
        assert header == ["delta_tau", "d_psi", "avg_xT"]
        assert len(rows) == 1
        assert float(rows[0][2]) <= 0.5

    def test_determinism(self, tmp_path):
        cfgfile = tmp_path / "hm.yaml"
        cfgfile.write_text(
            "preset: example1\n"
            "heatmap:\n"
            "  delta_tau_grid: [2.0]\n"
            "  d_psi_grid: [0.5, 1.0]\n"
            "  n_ic: 2\n"
            "  seed: 3\n"
        )
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["heatmap", "--config", str(cfgfile), "--out", str(out)]) == 0
            outs.append(out / "heatmap.csv")
        assert outs[0].read_bytes() == outs[1].read_bytes()


class TestTradeoff:
    def test_tables(self, tmp_path):
        out = tmp_path / "to"
        assert main(["tradeoff", "--out", str(out)]) == 0
        header, rows = read_csv(out / "tradeoff_nu.csv")
        assert header == ["nu", "delta", "mu"]
        deltas = [float(r[1]) for r in rows]
        mus = [float(r[2]) for r in rows]
        assert all(b > a for a, b in zip(deltas, deltas[1:]))
        assert all(b < a for a, b in zip(mus, mus[1:]))
        header, rows = read_csv(out / "tradeoff_lambda.csv")
        assert header == ["lambda", "nu_star", "flag"]
        nus = [float(r[1]) for r in rows]
        assert all(b >= a - 1e-12 for a, b in zip(nus, nus[1:]))
        assert rows[-1][2] == "degenerate"
