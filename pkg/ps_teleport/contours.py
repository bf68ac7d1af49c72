"""
Level sets of dF and dN over the (lambda, T) plane.

Marching squares (skimage.measure.find_contours) on a sampled grid gives the polylines; every
point lies on a grid edge and is then bisected along that edge onto the level.
"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import singer
from scipy.optimize import bisect
from skimage import measure

from ps_teleport import closed_form
from ps_teleport.closed_form import DetectorKind
from ps_teleport.exceptions import ParameterError, ValidationError

LOGGER = singer.get_logger()

CONTOUR_TOL = 1e-8
DEFAULT_LAMBDA_RANGE = (0.01, 0.95)
DEFAULT_T_RANGE = (0.05, 0.999)
DEFAULT_STEPS = 200
EDGE_EPS = 1e-9
QUANTITIES = ("dF", "dN")


@dataclass
class ContourPolyline:
    quantity: str
    level: float
    points: List[Tuple[float, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.points)


def contour_quantity(quantity, detector=DetectorKind.SPD, eta=1.0):
    """
    Returns f(lam, T) for "dF" (any detector, any eta) or "dN" (ideal SPD only).
    """
    detector = DetectorKind.parse(detector)
    if quantity == "dF":
        return lambda lam, T: closed_form.delta_f(detector, lam, T, eta)
    if quantity == "dN":
        if detector is not DetectorKind.SPD or eta != 1.0:
            raise ParameterError("dN is only available for the ideal SPD resource (--detector spd --eta 1)")
        return closed_form.delta_n_sps
    raise ParameterError(f"unknown contour quantity '{quantity}'; expected one of: {', '.join(QUANTITIES)}")


def _on_edge(func, level, lambdas, ts, row, col):
    """
    Bisects one marching-squares point (fractional grid indices) along the grid edge it lies on.
    """
    i, j = int(np.floor(row)), int(np.floor(col))
    if col - j > EDGE_EPS and j + 1 < len(ts):
        lam = lambdas[int(round(row))]
        return float(lam), float(bisect(lambda x: func(lam, x) - level, ts[j], ts[j + 1], xtol=1e-14))
    if row - i > EDGE_EPS and i + 1 < len(lambdas):
        t = ts[int(round(col))]
        return float(bisect(lambda x: func(x, t) - level, lambdas[i], lambdas[i + 1], xtol=1e-14)), float(t)
    # on a grid node: the sampled value is the level itself
    return float(lambdas[int(round(row))]), float(ts[int(round(col))])


def _polylines(func, level, lambdas, ts):
    values = np.asarray(func(*np.meshgrid(lambdas, ts, indexing="ij")), dtype=float)
    return [[_on_edge(func, level, lambdas, ts, row, col) for row, col in path]
            for path in measure.find_contours(values, level)]


def extract_contours(quantity, level=0.0, detector=DetectorKind.SPD, eta=1.0,
                     lambda_range=DEFAULT_LAMBDA_RANGE, t_range=DEFAULT_T_RANGE,
                     steps=(DEFAULT_STEPS, DEFAULT_STEPS), tol=CONTOUR_TOL):
    """
    :return: list of ContourPolyline (empty, with a warning, when the level is never crossed)
    :raises ValidationError: if a bisected point misses the level by tol or more
    """
    if min(steps) < 2:
        raise ParameterError(f"contour grid needs at least 2 steps per axis, got {steps}")
    func = contour_quantity(quantity, detector, eta)
    lambdas = np.linspace(*lambda_range, steps[0])
    ts = np.linspace(*t_range, steps[1])

    chains = _polylines(func, level, lambdas, ts)
    points = [p for chain in chains for p in chain]
    if not points:
        LOGGER.warning(f"{quantity} never crosses {level} on lambda in {lambda_range}, T in {t_range}")
        return []

    residual = np.abs(np.asarray(func(*np.asarray(points).T)) - level)
    if residual.max() >= tol:
        raise ValidationError(f"{quantity} contour point misses level {level} by {residual.max():.3e}")

    polylines = [ContourPolyline(quantity=quantity, level=float(level), points=chain) for chain in chains]
    LOGGER.info(f"{quantity}={level}: {len(points)} points in {len(polylines)} polylines")
    return polylines
