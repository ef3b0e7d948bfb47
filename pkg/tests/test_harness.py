import csv
import json
import math
import os

import numpy as np
import pytest

from bergmanlab.cli import main as cli_main
from bergmanlab.harness import (ConfigError, EXIT_COMPUTE, EXIT_CONFIG,
                                EXIT_OK, EXIT_SYMBOL, EXIT_UNSUPPORTED,
                                ExperimentConfig, SymbolParseError,
                                bump_symbol, resolve_symbol, run,
                                symbol_parse)


class TestSymbolParse:
    def test_conj_basic(self):
        sym = symbol_parse("conj(z1)", 1)
        z = np.array([[0.3 + 0.4j]])
        assert sym(z)[0] == pytest.approx(0.3 - 0.4j)
        assert sym.dbar_values(z)[0, 0] == pytest.approx(1.0)

    def test_product_rule(self):
        sym = symbol_parse("z1*conj(z2)", 2)
        z = np.array([[0.3 + 0.1j, 0.2 - 0.4j]])
        db = sym.dbar_values(z)[0]
        assert db[0] == pytest.approx(0.0)
        assert db[1] == pytest.approx(0.3 + 0.1j)

    def test_abs2(self):
        sym = symbol_parse("abs2(z1)", 2)
        z = np.array([[0.3 + 0.1j, 0.5]])
        assert sym(z)[0] == pytest.approx(abs(0.3 + 0.1j) ** 2)
        assert sym.dbar_values(z)[0, 0] == pytest.approx(0.3 + 0.1j)

    def test_linear_combination(self):
        sym = symbol_parse("conj(z1) + 2*conj(z2) - 0.5", 2)
        z = np.array([[0.1j, 0.2]])
        assert sym(z)[0] == pytest.approx(-0.1j + 0.4 - 0.5)

    def test_fd_consistency(self):
        sym = symbol_parse("z1*abs2(z2) + conj(z1)*z2", 2)
        z = np.array([[0.2 + 0.1j, -0.3 + 0.2j]])
        assert sym.dbar_consistency(z) < 1e-7

    @pytest.mark.parametrize("bad", [
        "z1/z2", "z1**2", "z9", "foo(z1)", "conj(z1*z2)", "1j*z1",
        "import os", "z1 +",
    ])
    def test_rejections(self, bad):
        with pytest.raises(SymbolParseError):
            symbol_parse(bad, 2)

    def test_bump_is_compactly_supported(self):
        sym = bump_symbol(2)
        z = np.array([[0.0j, 0.0j], [0.7, 0.0j], [0.3, 0.3j]])
        vals = sym(z)
        assert vals[0] != 0.0
        assert vals[1] == 0.0
        assert vals[2] != 0.0

    def test_resolve_named_builtin(self):
        assert resolve_symbol("bump", 2).label.startswith("bump")
        assert resolve_symbol("conj(z1)", 2).label == "conj(z1)"


class TestConfig:
    def test_roundtrip_lossless(self, tmp_path):
        cfg = ExperimentConfig(domain="polydisc2", symbol="conj(z2)")
        path = tmp_path / "config.json"
        cfg.to_json(path)
        back = ExperimentConfig.from_json(path)
        assert back.to_json() == cfg.to_json()
        assert back.config_hash() == cfg.config_hash()

    def test_unknown_domain_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(domain="torus")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(json.dumps({"domain": "disc",
                                                   "frobnicate": 1}))

    def test_nonpositive_field_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(radius=-1.0)

    def test_default_resolution_filled(self):
        assert ExperimentConfig(domain="disc").resolution == 0.025


class TestRun:
    def _cfg(self, tmp_path, **kw):
        kw.setdefault("domain", "disc")
        kw.setdefault("out_dir", str(tmp_path))
        return ExperimentConfig(**kw)

    def test_unknown_command(self, tmp_path):
        assert run(self._cfg(tmp_path), "explode") == EXIT_CONFIG

    def test_kernel_smoke(self, tmp_path):
        cfg = self._cfg(tmp_path, resolution=0.05)
        assert run(cfg, "kernel") == EXIT_OK
        assert (tmp_path / "kernel.csv").exists()
        report = json.loads((tmp_path / "kernel_report.json").read_text())
        assert report["provenance"]["config_hash"] == cfg.config_hash()

    def test_kernel_csv_matches_closed_form(self, tmp_path, disc_engine):
        cfg = self._cfg(tmp_path, resolution=0.05)
        run(cfg, "kernel")
        with open(tmp_path / "kernel.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        for row in rows[:10]:
            z = np.array([[complex(float(row["re_z1"]),
                                   float(row["im_z1"]))]])
            w = np.array([[complex(float(row["re_w1"]),
                                   float(row["im_w1"]))]])
            val = complex(float(row["re_B"]), float(row["im_B"]))
            assert val == pytest.approx(disc_engine.kernel(z, w)[0],
                                        rel=1e-12)

    def test_reproducible_bytes(self, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        for d in (a_dir, b_dir):
            cfg = ExperimentConfig(domain="disc", resolution=0.05,
                                   scheme="quasi-random",
                                   out_dir=str(d))
            assert run(cfg, "kernel") == EXIT_OK
        assert (a_dir / "kernel.csv").read_bytes() \
            == (b_dir / "kernel.csv").read_bytes()

    def test_omega_scan_decays_on_disc(self, tmp_path):
        cfg = self._cfg(tmp_path, rays=2,
                        steps=(0.3, 0.5, 0.7, 0.85, 0.92))
        assert run(cfg, "omega-scan") == EXIT_OK
        summary = json.loads((tmp_path / "omega_summary.json").read_text())
        assert summary["tail_trend"] < 0.2

    def test_bad_symbol_exit_code(self, tmp_path):
        cfg = self._cfg(tmp_path, symbol="z1/z2", resolution=0.05)
        assert run(cfg, "omega-scan") == EXIT_SYMBOL

    def test_variety_unsupported_on_disc(self, tmp_path):
        cfg = self._cfg(tmp_path, resolution=0.05)
        assert run(cfg, "variety") == EXIT_UNSUPPORTED

    def test_variety_on_bidisc(self, tmp_path):
        cfg = self._cfg(tmp_path, domain="polydisc2", symbol="conj(z2)",
                        resolution=0.2)
        assert run(cfg, "variety") == EXIT_OK
        res = json.loads((tmp_path / "variety.json").read_text())
        assert res["residual"] == pytest.approx(1.0, abs=1e-3)

    def test_net_smoke(self, tmp_path):
        cfg = self._cfg(tmp_path, resolution=0.05)
        assert run(cfg, "net") == EXIT_OK
        report = json.loads((tmp_path / "net_report.json").read_text())
        assert report["summary"]["separation_min"] >= cfg.net_radius
        assert report["summary"]["covering_max"] == 1.0

    def test_sbg_check_smoke(self, tmp_path):
        cfg = self._cfg(tmp_path, resolution=0.05)
        assert run(cfg, "sbg-check") == EXIT_OK
        rep = json.loads((tmp_path / "sbg_check_report.json").read_text())
        assert rep["summary"]["C5"] == pytest.approx(2 * math.pi,
                                                     abs=1e-6)

    def test_report_gathers_artifacts(self, tmp_path):
        cfg = self._cfg(tmp_path, resolution=0.05)
        run(cfg, "kernel")
        assert run(cfg, "report") == EXIT_OK
        rep = json.loads((tmp_path / "report.json").read_text())
        assert "kernel_report.json" in rep["summary"]["artifacts"]


class TestCli:
    def test_help_like_invocation_and_exit_codes(self, tmp_path):
        out = tmp_path / "o"
        code = cli_main(["kernel", "--out", str(out),
                        "--resolution", "0.05"])
        assert code == EXIT_OK
        assert (out / "kernel.csv").exists()

    def test_symbol_override(self, tmp_path):
        code = cli_main(["omega-scan", "--out", str(tmp_path / "s"),
                         "--resolution", "0.05", "--symbol", "z1/z1"])
        assert code == EXIT_SYMBOL

    def test_config_loading(self, tmp_path):
        cfg = ExperimentConfig(domain="disc", resolution=0.05,
                               out_dir=str(tmp_path / "c"))
        path = tmp_path / "cfg.json"
        cfg.to_json(path)
        assert cli_main(["kernel", "--config", str(path)]) == EXIT_OK
