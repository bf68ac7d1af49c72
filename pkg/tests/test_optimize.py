import logging

import numpy as np
import pytest
from testfixtures import log_capture

from tests import unittestcore

from ps_teleport import closed_form as cf
from ps_teleport import optimize as opt
from ps_teleport.closed_form import DetectorKind
from ps_teleport.exceptions import ParameterError

logging.basicConfig(level=logging.DEBUG)
logger = logging.getLogger(__name__)


class TestGridScan(unittestcore.BaseUnitTest):

    def test_spd_grid_optimum(self):
        scan = opt.grid_scan("spd", 1.0)
        cell = (opt.LAMBDA_BOUNDS[1] - opt.LAMBDA_BOUNDS[0]) / 255
        assert abs(scan.x[0] - 0.56) <= cell + 0.005
        assert abs(scan.x[1] - 0.77) <= cell + 0.005
        assert scan.fun == scan.values.max()
        assert scan.nfev == 256 * 256
        assert scan.values.shape == (256, 256)

    def test_on_off_grid_optimum(self):
        scan = opt.grid_scan("onoff", 1.0)
        assert scan.x[0] == pytest.approx(0.49, abs=0.01)
        assert scan.x[1] == pytest.approx(0.84, abs=0.01)

    def test_merit_nonnegative_at_argmax(self):
        for detector in DetectorKind:
            assert opt.grid_scan(detector, 0.01, resolution=32).fun >= 0.0

    def test_lexicographic_tie_break(self):
        scan = opt.grid_scan("spd", 1.0, resolution=(40, 50))
        flat = np.flatnonzero(scan.values == scan.values.max())[0]
        assert scan.index == np.unravel_index(flat, (40, 50))

    def test_resolution_too_small(self):
        with pytest.raises(ParameterError, match=">= 32"):
            opt.grid_scan("spd", 1.0, resolution=16)


class TestRefine(unittestcore.BaseUnitTest):

    def test_spd_ideal_optimum(self):
        record = opt.optimize("spd", 1.0)
        assert record.r_max == pytest.approx(9.5e-4, rel=0.05)
        assert record.lambda_star == pytest.approx(0.56, abs=0.01)
        assert record.t_star == pytest.approx(0.77, abs=0.01)
        assert record.evaluations <= opt.DEFAULT_MAX_EVALUATIONS

    def test_on_off_lossy_optimum(self):
        record = opt.optimize("onoff", 0.60)
        assert record.r_max == pytest.approx(1.1e-4, rel=0.10)
        assert record.lambda_star == pytest.approx(0.47, abs=0.02)
        assert record.t_star == pytest.approx(0.85, abs=0.02)

    def test_record_recomputed_at_optimum(self):
        record = opt.optimize("spd", 0.95)
        assert record.r_max == cf.merit_r(DetectorKind.SPD, record.lambda_star, record.t_star, 0.95)
        assert record.delta_f_at_opt == cf.delta_f(DetectorKind.SPD, record.lambda_star, record.t_star, 0.95)
        assert record.as_dict()["detector"] == "spd"

    def test_refine_improves_on_grid(self):
        for detector, eta in opt.DEFAULT_TABLE_ROWS:
            scan = opt.grid_scan(detector, eta, resolution=64)
            record = opt.refine(detector, eta, scan.x)
            assert record.r_max >= scan.fun

    def test_seed_at_optimum_stays(self):
        best = opt.optimize("spd", 1.0)
        again = opt.refine("spd", 1.0, (best.lambda_star, best.t_star), step=(1e-4, 1e-4))
        assert again.lambda_star == pytest.approx(best.lambda_star, abs=1e-6)
        assert again.t_star == pytest.approx(best.t_star, abs=1e-6)
        assert again.r_max >= best.r_max - 1e-15
        assert again.evaluations <= opt.DEFAULT_MAX_EVALUATIONS

    def test_deterministic(self):
        assert opt.optimize("onoff", 1.0) == opt.optimize("onoff", 1.0)

    @log_capture()
    def test_budget_exhausted(self, logcapture):
        record = opt.refine("spd", 1.0, (0.3, 0.5), max_evaluations=5)
        assert not record.converged
        assert record.evaluations <= 5 + 3
        assert record.r_max == cf.merit_r("spd", record.lambda_star, record.t_star, 1.0)
        assert any(r.levelname == "WARNING" and "refine spd" in r.getMessage() for r in logcapture.records)

    def test_seed_outside_domain(self):
        with pytest.raises(ParameterError):
            opt.refine("spd", 1.0, (1.5, 0.5))


class TestTable(unittestcore.BaseUnitTest):

    def test_default_rows(self):
        records = opt.table2()
        assert [(r.detector, r.eta) for r in records] == opt.DEFAULT_TABLE_ROWS

        for record in records:
            ref = opt.reference_for(record)
            assert 1e4 * record.r_max == pytest.approx(1e4 * ref["r_max"], rel=0.05 if record.eta == 1.0 else 0.10)
            assert record.lambda_star == pytest.approx(ref["lambda"], abs=0.02)
            assert record.t_star == pytest.approx(ref["T"], abs=0.02)

        by_row = {(r.detector, r.eta): r for r in records}
        assert by_row[(DetectorKind.SPD, 1.0)].r_max > by_row[(DetectorKind.ON_OFF, 1.0)].r_max
        assert by_row[(DetectorKind.SPD, 0.95)].r_max > by_row[(DetectorKind.ON_OFF, 0.60)].r_max

    def test_lossy_spd_row(self):
        record = opt.table2([(DetectorKind.SPD, 0.95)])[0]
        assert record.delta_f_at_opt == pytest.approx(0.036, abs=0.002)
        assert 10 * record.p_at_opt == pytest.approx(0.21, abs=0.02)

    def test_single_row(self):
        assert len(opt.table2([("onoff", 1.0)], resolution=64)) == 1
