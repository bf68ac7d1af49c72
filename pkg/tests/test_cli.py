"""
End-to-end runs of the ps-teleport command line: main() is called with a prepared sys.argv and its
exit code, stdout and written files are checked.
"""
import json
import logging
import os

import numpy as np
import pandas as pd
import pytest
from testfixtures import log_capture

from tests import unittestcore

from ps_teleport import closed_form as cf
from ps_teleport.exceptions import ValidationError

logging.basicConfig(level=logging.DEBUG)
logger = logging.getLogger(__name__)


class TestEval(unittestcore.BaseUnitTest):

    def test_spd_optimum_point(self):
        from ps_teleport import main

        self.set_cli_args("eval", detector="spd", T=0.77, eta=1, **{"lambda": 0.56})
        ret = main()
        self.assertEqual(ret, 0, msg="Exit code is not 0!")

    def test_json_record(self):
        from ps_teleport import commands

        records = commands.cmd_eval({"detector": "spd", "lambda": "0.56", "T": "0.77", "eta": "1", "json": True})
        assert records[0]["merit"] == pytest.approx(9.5e-4, rel=0.05)
        assert records[0]["mean_photon"] == cf.n_sps(0.56, 0.77)

    def test_vacuum(self):
        from ps_teleport import commands

        record = commands.cmd_eval({"detector": "spd", "lambda": "0", "T": "0.5", "eta": "1"})[0]
        assert record["fidelity"] == pytest.approx(0.5)
        assert record["success_prob"] == 0.0
        assert record["merit"] == 0.0

    def test_both_detectors(self):
        from ps_teleport import commands

        records = commands.cmd_eval({"detector": "both", "lambda": "0.5", "T": "0.9", "eta": "0.6"})
        assert [r["detector"] for r in records] == ["spd", "onoff"]
        assert "mean_photon" not in records[1]

    def test_lambda_out_of_domain(self):
        from ps_teleport import main

        self.set_cli_args("eval", detector="spd", T=0.5, **{"lambda": 1.2})
        self.assertEqual(main(), 3)

    def test_range_not_allowed(self):
        from ps_teleport import main

        self.set_cli_args("eval", T="0.5:0.9", **{"lambda": 0.5})
        self.assertEqual(main(), 3)

    def test_usage_error(self):
        from ps_teleport import main

        self.set_cli_args("eval", flag="--no-such-flag")
        self.assertEqual(main(), 2)

        self.set_cli_args("teleport")
        self.assertEqual(main(), 2)


class TestSweep(unittestcore.BaseUnitTest):

    def test_small_grid(self):
        from ps_teleport import main

        out = self.tmp_path("grid.csv")
        self.set_cli_args("sweep", detector="spd", T="0.5:0.9", grid="2x2", out=out, **{"lambda": "0.2:0.6"})
        self.assertEqual(main(), 0)

        df = pd.read_csv(out)
        assert list(df.columns) == ["lambda", "T", "eta", "detector", "F", "P", "dF", "R", "N", "dN"]
        assert len(df) == 4
        assert list(df["lambda"]) == [0.2, 0.2, 0.6, 0.6]
        assert list(df["T"]) == [0.5, 0.9, 0.5, 0.9]

        # full precision round trip
        assert df["F"][3] == pytest.approx(cf.f_eta("spd", 0.6, 0.9, 1.0), rel=1e-15)
        assert df["R"][1] == pytest.approx(cf.merit_r("spd", 0.2, 0.9, 1.0), rel=1e-12)

        with open(out, "rb") as f:
            assert b"\r\n" not in f.read()

    def test_fixed_t_lambda_sweep_from_config(self):
        from ps_teleport import main

        out = self.tmp_path("fixed_t.csv")
        self.set_cli_args("sweep", config=self.config_path("sweep.cfg"), out=out)
        self.assertEqual(main(), 0)

        df = pd.read_csv(out)
        assert list(df.columns) == ["lambda", "T", "eta", "detector", "F", "P", "dF", "R"]
        spd = df[df["detector"] == "spd"].reset_index()
        on_off = df[df["detector"] == "onoff"].reset_index()
        assert len(spd) == len(on_off) == 10
        # the on-off detector also clicks on multi-photon events
        assert np.all(on_off["P"] >= spd["P"])
        assert spd["F"][0] == pytest.approx(0.5) and on_off["F"][0] == pytest.approx(0.5)

    def test_efficiency_sweep_with_literature_curve(self):
        from ps_teleport import main

        out = self.tmp_path("eta.csv")
        self.set_cli_args("sweep", config=self.config_path("sweep.json"), detector="both", out=out,
                          flag="--emit-plot")
        self.assertEqual(main(), 0)

        df = pd.read_csv(out)
        assert "F_lit" in df.columns
        assert df[df["detector"] == "spd"]["F_lit"].isna().all()
        on_off = df[df["detector"] == "onoff"]
        assert len(on_off) == 8
        # the substituted curve only agrees with the real fidelity at unit efficiency
        assert on_off["F_lit"].iloc[-1] == pytest.approx(on_off["F"].iloc[-1], rel=1e-12)
        assert abs(on_off["F_lit"].iloc[0] - on_off["F"].iloc[0]) > 1e-6

        spd = df[df["detector"] == "spd"]
        # fidelity decreases as the efficiency decreases
        assert np.all(np.diff(spd["F"].to_numpy()) > 0)
        assert os.path.exists(self.tmp_path("eta_plot.py"))

    def test_quantities_subset(self):
        from ps_teleport import commands

        out = self.tmp_path("subset.csv")
        count = commands.cmd_sweep({"detector": "onoff", "lambda": "0.3:0.6", "T": "0.8", "grid": "3x3",
                                    "quantities": "F,R", "out": out})
        assert count == 3
        assert list(pd.read_csv(out).columns) == ["lambda", "T", "eta", "detector", "F", "R"]

    def test_unwritable_path(self):
        from ps_teleport import main

        blocker = self.tmp_path("file")
        with open(blocker, "w") as f:
            f.write("")
        self.set_cli_args("sweep", grid="2x2", out=os.path.join(blocker, "out.csv"))
        self.assertEqual(main(), 2)


class TestContoursAndCurves(unittestcore.BaseUnitTest):

    def test_zero_contours(self):
        from ps_teleport import main

        out = self.tmp_path("contours.csv")
        self.set_cli_args("contours", detector="spd", eta=1, grid="60x60", out=out)
        self.assertEqual(main(), 0)

        df = pd.read_csv(out)
        assert list(df.columns) == ["quantity", "level", "segment", "lambda", "T"]
        assert set(df["quantity"]) == {"dF", "dN"}
        dn = df[df["quantity"] == "dN"]
        assert np.all(np.abs(cf.delta_n_sps(dn["lambda"].to_numpy(), dn["T"].to_numpy())) < 1e-8)

    @log_capture()
    def test_level_never_reached(self, logcapture):
        from ps_teleport import main

        out = self.tmp_path("empty.csv")
        self.set_cli_args("contours", quantity="dF", levels=5, grid="20x20", out=out)
        self.assertEqual(main(), 0)
        assert len(pd.read_csv(out)) == 0
        assert any(r.levelname == "WARNING" and "never crosses" in r.getMessage() for r in logcapture.records)

    def test_fidelity_against_photon_number(self):
        from ps_teleport import main

        out = self.tmp_path("fvsn.csv")
        self.set_cli_args("fvsn", out=out)
        self.assertEqual(main(), 0)

        df = pd.read_csv(out)
        tmsv = df[df["state"] == "TMSV"]
        sps = df[df["state"] == "SPS-TMSV"]
        for curve in (tmsv, sps):
            assert curve["N"].iloc[0] == 0.0 and curve["F"].iloc[0] == 0.5
            assert np.all(np.diff(curve["N"].to_numpy()) > 0)
            assert np.all(np.diff(curve["F"].to_numpy()) > 0)

        # at equal mean photon number the bare TMSV teleports better
        n = sps["N"].to_numpy()
        f_tmsv = cf.f_tmsv(np.sqrt(n / (n + 2.0)))
        assert np.all(f_tmsv >= sps["F"].to_numpy() - 1e-12)
        assert np.all(f_tmsv[1:] > sps["F"].to_numpy()[1:])


class TestOptimizeCommands(unittestcore.BaseUnitTest):

    def test_optimize_json(self):
        from ps_teleport import main

        out = self.tmp_path("opt.json")
        self.set_cli_args("optimize", detector="spd", eta=0.95, out=out)
        self.assertEqual(main(), 0)

        with open(out) as f:
            record = json.load(f)
        assert record["detector"] == "spd"
        assert record["r_max"] == pytest.approx(7.6e-4, rel=0.10)
        assert record["r_max"] == cf.merit_r("spd", record["lambda_star"], record["t_star"], 0.95)

    def test_both_detectors_to_one_file(self):
        from ps_teleport import main

        out = self.tmp_path("opt_both.json")
        self.set_cli_args("optimize", detector="both", eta=1, grid="64x64", out=out)
        self.assertEqual(main(), 0)

        with open(out) as f:
            records = [json.loads(line) for line in f if line.strip()]
        assert [r["detector"] for r in records] == ["spd", "onoff"]
        assert records[0]["r_max"] > records[1]["r_max"]

    def test_table(self):
        from ps_teleport import commands

        records = commands.cmd_table2({"grid": "128x128"})
        assert len(records) == 4
        text = commands.render_table(records)
        assert text.splitlines()[0].split()[:3] == ["detector", "eta", "1e4*R"]
        assert len(text.splitlines()) == 6

    def test_single_table_row(self):
        from ps_teleport import commands

        records = commands.cmd_table2({"rows": "onoff:1", "grid": "64x64", "json": True})
        assert len(records) == 1


class TestOracleCheck(unittestcore.BaseUnitTest):

    def test_small_run(self):
        from ps_teleport import commands

        report = commands.cmd_oracle_check({"samples": 2, "seed": 5, "json": True})
        assert len(report) == 6
        for case in report.values():
            assert case["passed"]
            assert case["max_dF"] < 1e-6
            assert case["max_dP"] < 1e-8

    def test_default_run(self):
        from ps_teleport import commands

        report = commands.cmd_oracle_check({"seed": 7})
        assert len(report) == 6
        for case in report.values():
            assert case["points"] == 25
            assert case["failed"] == 0
            assert case["passed"]

    def test_tolerance_key_is_separate(self):
        from ps_teleport import commands

        # the optimizer tolerance in the same settings leaves the oracle comparison alone
        report = commands.cmd_oracle_check({"samples": 2, "seed": 5, "detector": "spd", "eta": "1", "tol": 1e-20})
        assert report["spd@1"]["passed"]
        with pytest.raises(ValidationError, match="spd@1"):
            commands.cmd_oracle_check({"samples": 2, "seed": 5, "detector": "spd", "eta": "1", "oracle_tol": 1e-20})

    def test_samples_must_be_positive(self):
        from ps_teleport import main

        self.set_cli_args("oracle-check", samples=0, detector="spd", eta=1)
        self.assertEqual(main(), 3)

    def test_deterministic(self):
        from ps_teleport import commands

        settings = {"samples": 2, "seed": 3, "detector": "onoff", "eta": "0.6"}
        assert commands.cmd_oracle_check(settings) == commands.cmd_oracle_check(settings)

    def test_cutoff_too_small(self):
        from ps_teleport import main

        self.set_cli_args("oracle-check", samples=2, nmax=3, detector="spd", eta=1)
        self.assertEqual(main(), 5)
