"""
Maximisation of the figure of merit R = P * dF over (lambda, T) at fixed detector and efficiency:
a vectorised grid scan followed by a bounded Nelder-Mead polish.
"""
from dataclasses import dataclass, asdict

import numpy as np
import singer
from scipy.optimize import OptimizeResult, minimize

from ps_teleport import closed_form
from ps_teleport.closed_form import DetectorKind
from ps_teleport.exceptions import ParameterError

LOGGER = singer.get_logger()

LAMBDA_BOUNDS = (0.01, 0.95)
T_BOUNDS = (0.05, 0.999)
DEFAULT_RESOLUTION = 256
MIN_RESOLUTION = 32
DEFAULT_TOL = 1e-10
DEFAULT_MAX_EVALUATIONS = 500

DEFAULT_TABLE_ROWS = [
    (DetectorKind.ON_OFF, 1.0),
    (DetectorKind.ON_OFF, 0.60),
    (DetectorKind.SPD, 1.0),
    (DetectorKind.SPD, 0.95),
]

# published optima (two significant digits) used for the side-by-side comparison of `table2`
REFERENCE_OPTIMA = {
    (DetectorKind.ON_OFF, 1.0): {"r_max": 3.9e-4, "lambda": 0.49, "T": 0.84, "dF": 0.033, "P": 0.012},
    (DetectorKind.ON_OFF, 0.60): {"r_max": 1.1e-4, "lambda": 0.47, "T": 0.85, "dF": 0.032, "P": 0.004},
    (DetectorKind.SPD, 1.0): {"r_max": 9.5e-4, "lambda": 0.56, "T": 0.77, "dF": 0.037, "P": 0.026},
    (DetectorKind.SPD, 0.95): {"r_max": 7.6e-4, "lambda": 0.55, "T": 0.77, "dF": 0.036, "P": 0.021},
}


@dataclass(frozen=True)
class OptimumRecord:
    detector: DetectorKind
    eta: float
    lambda_star: float
    t_star: float
    r_max: float
    delta_f_at_opt: float
    p_at_opt: float
    evaluations: int
    converged: bool

    @classmethod
    def at(cls, detector, eta, lam, T, evaluations, converged):
        """
        Builds the record with every figure recomputed at (lam, T).
        """
        lam, T = float(lam), float(T)
        return cls(detector=detector,
                   eta=float(eta),
                   lambda_star=lam,
                   t_star=T,
                   r_max=closed_form.merit_r(detector, lam, T, eta),
                   delta_f_at_opt=closed_form.delta_f(detector, lam, T, eta),
                   p_at_opt=closed_form.p_eta(detector, lam, T, eta),
                   evaluations=int(evaluations),
                   converged=bool(converged))

    def as_dict(self):
        record = asdict(self)
        record["detector"] = self.detector.value
        return record


def grid_scan(detector, eta, resolution=DEFAULT_RESOLUTION, lambda_bounds=LAMBDA_BOUNDS, t_bounds=T_BOUNDS):
    """
    Evaluates R on a uniform grid (resolution per axis, or a (lambda, T) pair) and picks the best cell. Ties go to the
    smallest (lambda, T) in lexicographic order.

    :return: OptimizeResult with x=(lambda, T), fun=R, nfev, and the grid (lambdas, ts, values)
    """
    detector = DetectorKind.parse(detector)
    n_lam, n_t = (resolution, resolution) if np.isscalar(resolution) else resolution
    if min(n_lam, n_t) < MIN_RESOLUTION or int(n_lam) != n_lam or int(n_t) != n_t:
        raise ParameterError(f"grid resolution must be an integer >= {MIN_RESOLUTION} per axis, got {resolution}")

    lambdas = np.linspace(*lambda_bounds, int(n_lam))
    ts = np.linspace(*t_bounds, int(n_t))
    lam_grid, t_grid = np.meshgrid(lambdas, ts, indexing="ij")
    values = closed_form.require_finite(closed_form.merit_r(detector, lam_grid, t_grid, eta),
                                        f"R on the {detector.value} eta={eta} grid")

    # np.argmax returns the first maximum of the lambda-major array
    i, j = np.unravel_index(np.argmax(values), values.shape)
    LOGGER.debug(f"grid_scan {detector.value} eta={eta}: best cell lambda={lambdas[i]:.4f} T={ts[j]:.4f} "
                 f"R={values[i, j]:.6e}")

    return OptimizeResult(x=np.array([lambdas[i], ts[j]]),
                          fun=float(values[i, j]),
                          nfev=values.size,
                          success=True,
                          status=0,
                          message="Grid complete",
                          index=(int(i), int(j)),
                          lambdas=lambdas,
                          ts=ts,
                          values=values)


def _initial_simplex(seed, step, bounds):
    simplex = [np.array(seed, dtype=float)]
    for axis in range(2):
        vertex = simplex[0].copy()
        lo, hi = bounds[axis]
        vertex[axis] = vertex[axis] + step[axis] if vertex[axis] + step[axis] <= hi else vertex[axis] - step[axis]
        vertex[axis] = min(max(vertex[axis], lo), hi)
        simplex.append(vertex)
    return np.array(simplex)


def refine(detector, eta, seed_point, tol=DEFAULT_TOL, max_evaluations=DEFAULT_MAX_EVALUATIONS,
           step=None, lambda_bounds=LAMBDA_BOUNDS, t_bounds=T_BOUNDS):
    """
    Polishes seed_point with a bounded Nelder-Mead search on -R.

    Converged when the simplex is smaller than tol in both coordinates and the merit spread is below
    tol * |R(seed)|. Hitting max_evaluations is not an error: the record comes back with converged=False.

    :param step, (float, float): initial simplex edge per coordinate (default: one cell of a 256 grid)
    """
    detector = DetectorKind.parse(detector)
    closed_form.ResourceParams(seed_point[0], seed_point[1], eta, detector).validate()
    bounds = [lambda_bounds, t_bounds]
    if step is None:
        step = [(hi - lo) / (DEFAULT_RESOLUTION - 1) for lo, hi in bounds]

    def objective(x):
        # project onto the search box
        lam = min(max(x[0], lambda_bounds[0]), lambda_bounds[1])
        T = min(max(x[1], t_bounds[0]), t_bounds[1])
        return -closed_form.merit_r(detector, lam, T, eta)

    seed_value = abs(objective(seed_point))
    result = minimize(objective,
                      np.asarray(seed_point, dtype=float),
                      method="Nelder-Mead",
                      bounds=bounds,
                      options={"xatol": tol,
                               "fatol": tol * seed_value,
                               "maxfev": max_evaluations,
                               "initial_simplex": _initial_simplex(seed_point, step, bounds)})

    lam = min(max(result.x[0], lambda_bounds[0]), lambda_bounds[1])
    T = min(max(result.x[1], t_bounds[0]), t_bounds[1])
    if not result.success:
        LOGGER.warning(f"refine {detector.value} eta={eta}: {result.message}")

    return OptimumRecord.at(detector, eta, lam, T, evaluations=result.nfev, converged=result.success)


def optimize(detector, eta, resolution=DEFAULT_RESOLUTION, tol=DEFAULT_TOL, max_evaluations=DEFAULT_MAX_EVALUATIONS):
    """
    grid_scan followed by refine from the best cell.
    """
    scan = grid_scan(detector, eta, resolution=resolution)
    step = (scan.lambdas[1] - scan.lambdas[0], scan.ts[1] - scan.ts[0])
    record = refine(detector, eta, scan.x, tol=tol, max_evaluations=max_evaluations, step=step)
    LOGGER.info(f"optimum {record.detector.value} eta={record.eta}: lambda={record.lambda_star:.4f} "
                f"T={record.t_star:.4f} R={record.r_max:.4e} ({record.evaluations} evaluations)")
    return record


def table2(rows=None, resolution=DEFAULT_RESOLUTION, tol=DEFAULT_TOL, max_evaluations=DEFAULT_MAX_EVALUATIONS):
    """
    Optimum of R for every (detector, eta) pair in rows (default: the four rows of DEFAULT_TABLE_ROWS).

    :return: list of OptimumRecord in the order of rows
    """
    rows = DEFAULT_TABLE_ROWS if rows is None else rows
    return [optimize(DetectorKind.parse(detector), float(eta), resolution=resolution, tol=tol,
                     max_evaluations=max_evaluations)
            for detector, eta in rows]


def reference_for(record):
    return REFERENCE_OPTIMA.get((record.detector, record.eta))
