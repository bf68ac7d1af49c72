"""
The ps-teleport subcommands. Each cmd_* takes the merged settings dict built by main() and returns
the data it emitted, so tests can call them directly.
"""
import sys
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import singer

from ps_teleport import closed_form, contours, fock_oracle, optimize
from ps_teleport.closed_form import DetectorKind, ResourceParams
from ps_teleport.exceptions import (HeraldingError, ParameterError, QuadratureError, TruncationError,
                                    ValidationError)
from ps_teleport.utils import (emit_json, emit_json_lines, emit_plot_script, parse_grid, parse_levels, parse_range,
                               write_csv)

LOGGER = singer.get_logger()

SWEEP_QUANTITIES = ("F", "P", "dF", "R", "N", "dN")
ORACLE_ETAS = (1.0, 0.95, 0.6)
ORACLE_LAMBDA_RANGE = (0.05, 0.8)
ORACLE_T_RANGE = (0.3, 0.98)
ORACLE_F_TOL = 1e-6
ORACLE_P_TOL = 1e-8
ORACLE_SAMPLES = 25


def _detectors(value, default="spd"):
    value = value or default
    if str(value).lower() == "both":
        return [DetectorKind.SPD, DetectorKind.ON_OFF]
    return [DetectorKind.parse(value)]


def _scalar(value, name, default=None):
    bounds = parse_range(value, name) if value is not None else None
    if bounds is None:
        if default is None:
            raise ParameterError(f"--{name} is required")
        return default
    if bounds[0] != bounds[1]:
        raise ParameterError(f"--{name} must be a single value here, got a range")
    return bounds[0]


@dataclass
class SweepSpec:
    detectors: List[DetectorKind]
    lambda_range: Tuple[float, float]
    lambda_steps: int
    t_range: Tuple[float, float]
    t_steps: int
    eta_range: Tuple[float, float]
    eta_steps: int
    quantities: List[str]
    out: Optional[str] = None
    literature: bool = False

    @classmethod
    def from_settings(cls, settings):
        lambda_steps, t_steps = parse_grid(settings.get("grid") or "64x64")
        lambda_range = parse_range(settings.get("lambda") or "0:0.95", "lambda")
        t_range = parse_range(settings.get("T") or "0.05:1", "T")
        eta_range = parse_range(settings.get("eta") or 1.0, "eta")
        quantities = settings.get("quantities") or ",".join(SWEEP_QUANTITIES)
        spec = cls(detectors=_detectors(settings.get("detector")),
                   lambda_range=lambda_range,
                   lambda_steps=1 if lambda_range[0] == lambda_range[1] else lambda_steps,
                   t_range=t_range,
                   t_steps=1 if t_range[0] == t_range[1] else t_steps,
                   eta_range=eta_range,
                   eta_steps=1 if eta_range[0] == eta_range[1] else int(settings.get("eta_steps") or 36),
                   quantities=[q.strip() for q in quantities.split(",") if q.strip()],
                   out=settings.get("out"),
                   literature=bool(settings.get("literature")))
        return spec.validate()

    def validate(self):
        closed_form.ResourceParams(self.lambda_range[0], self.t_range[0], self.eta_range[0]).validate()
        closed_form.ResourceParams(self.lambda_range[1], self.t_range[1], self.eta_range[1]).validate()
        for name, lo_hi, steps in (("lambda", self.lambda_range, self.lambda_steps),
                                   ("T", self.t_range, self.t_steps),
                                   ("eta", self.eta_range, self.eta_steps)):
            if lo_hi[0] != lo_hi[1] and steps < 2:
                raise ParameterError(f"a {name} range needs at least 2 steps, got {steps}")
        unknown = [q for q in self.quantities if q not in SWEEP_QUANTITIES]
        if unknown or not self.quantities:
            raise ParameterError(f"unknown sweep quantities {unknown}; choose from {','.join(SWEEP_QUANTITIES)}")
        return self

    def axes(self):
        return (np.linspace(*self.lambda_range, self.lambda_steps),
                np.linspace(*self.t_range, self.t_steps),
                np.linspace(*self.eta_range, self.eta_steps))


def cmd_eval(settings):
    """
    Prints F, P, dF and R (plus N and dN for the ideal SPD resource) for one parameter point.
    """
    lam = _scalar(settings.get("lambda"), "lambda")
    T = _scalar(settings.get("T"), "T")
    eta = _scalar(settings.get("eta"), "eta", default=1.0)

    results = []
    for detector in _detectors(settings.get("detector")):
        params = ResourceParams(lam=lam, T=T, eta=eta, detector=detector)
        metrics = closed_form.evaluate(params)
        record = {"detector": detector.value, "lambda": lam, "T": T, "eta": eta}
        record.update(metrics.as_dict())
        results.append(record)

        if settings.get("json"):
            emit_json(record)
        else:
            labels = [("detector", detector.value), ("lambda", lam), ("T", T), ("eta", eta),
                      ("F", metrics.fidelity), ("P", metrics.success_prob), ("dF", metrics.delta_f),
                      ("R", metrics.merit)]
            if metrics.mean_photon is not None:
                labels += [("N", metrics.mean_photon), ("dN", metrics.delta_n)]
            for label, value in labels:
                text = value if isinstance(value, str) else "%.10g" % value
                sys.stdout.write(f"{label:<9} {text}\n")
            sys.stdout.flush()
    return results


def _sweep_rows(spec):
    lambdas, ts, etas = spec.axes()
    lam, T, eta = (a.ravel() for a in np.meshgrid(lambdas, ts, etas, indexing="ij"))

    columns = {}
    for detector in spec.detectors:
        f = np.broadcast_to(closed_form.f_eta(detector, lam, T, eta), lam.shape)
        p = np.broadcast_to(closed_form.p_eta(detector, lam, T, eta), lam.shape)
        df = f - np.broadcast_to(closed_form.f_tmsv(lam), lam.shape)
        columns[detector] = {"F": f, "P": p, "dF": df, "R": p * df}
        for name, values in columns[detector].items():
            closed_form.require_finite(values, f"sweep {name} ({detector.value})")
        ideal_spd = (detector is DetectorKind.SPD) & (eta == 1.0)
        if ideal_spd.any():
            n = np.broadcast_to(closed_form.n_sps(lam, T), lam.shape)
            dn = n - np.broadcast_to(closed_form.n_tmsv(lam), lam.shape)
            columns[detector]["N"] = np.where(ideal_spd, n, np.nan)
            columns[detector]["dN"] = np.where(ideal_spd, dn, np.nan)
        if spec.literature and detector is DetectorKind.ON_OFF:
            columns[detector]["F_lit"] = np.broadcast_to(closed_form.f_ips_substituted(lam, T, eta), lam.shape)

    quantities = [q for q in spec.quantities
                  if q not in ("N", "dN") or any(q in c for c in columns.values())]
    if spec.literature and DetectorKind.ON_OFF in columns:
        quantities.append("F_lit")
    header = ["lambda", "T", "eta", "detector"] + quantities

    def rows():
        for k in range(lam.size):
            for detector in spec.detectors:
                row = [lam[k], T[k], eta[k], detector.value]
                for q in quantities:
                    value = columns[detector].get(q)
                    value = None if value is None or np.isnan(value[k]) else value[k]
                    row.append("" if value is None else value)
                yield row

    return header, rows()


def cmd_sweep(settings):
    """
    Writes F, P, dF, R (and N, dN where defined) over a lambda x T (x eta) grid as CSV.
    Row order: lambda-major, then T, then eta, then detector.
    """
    spec = SweepSpec.from_settings(settings)
    header, rows = _sweep_rows(spec)
    LOGGER.info(f"sweep: {spec.lambda_steps} x {spec.t_steps} x {spec.eta_steps} points, "
                f"detectors {[d.value for d in spec.detectors]}")
    count = write_csv(spec.out, header, rows)

    if settings.get("emit_plot") and spec.out not in (None, "-"):
        x = "eta" if spec.eta_steps > 1 else ("lambda" if spec.lambda_steps > 1 else "T")
        emit_plot_script(spec.out, x=x, y="F", group_by="detector")
    return count


def cmd_contours(settings):
    """
    Writes the level sets of dF and/or dN as CSV with columns quantity,level,segment,lambda,T.
    """
    detectors = _detectors(settings.get("detector"))
    if len(detectors) != 1:
        raise ParameterError("contours need a single detector")
    detector = detectors[0]
    eta = _scalar(settings.get("eta"), "eta", default=1.0)
    steps = parse_grid(settings.get("grid") or "200x200")
    lambda_range = parse_range(settings.get("lambda") or "%r:%r" % contours.DEFAULT_LAMBDA_RANGE, "lambda")
    t_range = parse_range(settings.get("T") or "%r:%r" % contours.DEFAULT_T_RANGE, "T")
    closed_form.ResourceParams(lambda_range[0], t_range[0], eta).validate()
    closed_form.ResourceParams(lambda_range[1], t_range[1], eta).validate()

    quantity = settings.get("quantity") or "both"
    quantities = list(contours.QUANTITIES) if quantity == "both" else [quantity]
    if quantity == "both" and (detector is not DetectorKind.SPD or eta != 1.0):
        LOGGER.warning("dN is only defined for the ideal SPD resource, extracting dF only")
        quantities = ["dF"]

    polylines = []
    for q in quantities:
        for level in parse_levels(0.0 if settings.get("levels") is None else settings["levels"]):
            polylines += contours.extract_contours(q, level, detector=detector, eta=eta,
                                                   lambda_range=lambda_range, t_range=t_range, steps=steps)

    rows = [(p.quantity, p.level, segment, lam, T)
            for segment, p in enumerate(polylines) for lam, T in p.points]
    write_csv(settings.get("out"), ["quantity", "level", "segment", "lambda", "T"], rows)

    out = settings.get("out")
    if settings.get("emit_plot") and out not in (None, "-"):
        emit_plot_script(out, x="lambda", y="T", group_by="segment")
    return polylines


def fvsn_curves(lambdas):
    """
    (N, F) along lambda for the bare TMSV and for the unit-transmissivity SPS-TMSV resource.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    tmsv = (np.asarray(closed_form.n_tmsv(lambdas)), np.asarray(closed_form.f_tmsv(lambdas)))
    sps = (np.asarray(closed_form.n_sps(lambdas, 1.0)), np.asarray(closed_form.f_limit_T1(lambdas)))
    return tmsv, sps


def cmd_fvsn(settings):
    """
    Writes fidelity against mean photon number for TMSV and SPS-TMSV (T = 1) as CSV with columns N,F,state.
    """
    lo, hi = parse_range(settings.get("lambda") or "0:0.9", "lambda")
    steps = (parse_grid(settings["grid"])[0] if settings.get("grid") else 200) if lo != hi else 1
    lambdas = np.linspace(lo, hi, steps)
    tmsv, sps = fvsn_curves(lambdas)

    rows = [(n, f, "TMSV") for n, f in zip(*tmsv)] + [(n, f, "SPS-TMSV") for n, f in zip(*sps)]
    out = settings.get("out")
    write_csv(out, ["N", "F", "state"], rows)
    if settings.get("emit_plot") and out not in (None, "-"):
        emit_plot_script(out, x="N", y="F", group_by="state")
    return rows


def cmd_optimize(settings):
    """
    Prints the optimum of R for each requested detector at one efficiency, one JSON record per line.
    """
    detectors = _detectors(settings.get("detector"))
    eta = _scalar(settings.get("eta"), "eta", default=1.0)
    resolution = parse_grid(settings.get("grid") or "256x256")
    records = [optimize.optimize(detector, eta, resolution=resolution, tol=settings.get("tol") or optimize.DEFAULT_TOL,
                                 max_evaluations=settings.get("max_evaluations") or optimize.DEFAULT_MAX_EVALUATIONS)
               for detector in detectors]
    emit_json_lines([record.as_dict() for record in records], settings.get("out"))
    return records


def _table_rows(value):
    if not value:
        return None
    rows = []
    for item in str(value).split(","):
        detector, eta = item.split(":")
        rows.append((DetectorKind.parse(detector), float(eta)))
    return rows


def render_table(records):
    header = (f"{'detector':<9}{'eta':>6}{'1e4*R':>9}{'lambda':>9}{'T':>8}{'dF':>9}{'10*P':>8}"
              f"   {'ref 1e4*R':>10}{'lambda':>8}{'T':>7}{'dF':>8}{'10*P':>7}{'dR %':>8}")
    lines = [header, "-" * len(header)]
    for r in records:
        line = (f"{r.detector.value:<9}{r.eta:>6.2f}{1e4 * r.r_max:>9.3f}{r.lambda_star:>9.4f}{r.t_star:>8.4f}"
                f"{r.delta_f_at_opt:>9.4f}{10 * r.p_at_opt:>8.3f}")
        ref = optimize.reference_for(r)
        if ref:
            line += (f"   {1e4 * ref['r_max']:>10.1f}{ref['lambda']:>8.2f}{ref['T']:>7.2f}{ref['dF']:>8.3f}"
                     f"{10 * ref['P']:>7.2f}{100 * (r.r_max - ref['r_max']) / ref['r_max']:>8.1f}")
        lines.append(line)
    return "\n".join(lines) + "\n"


def cmd_table2(settings):
    """
    Optimises every (detector, eta) row and prints them next to the published optima.
    """
    records = optimize.table2(rows=_table_rows(settings.get("rows")),
                              resolution=parse_grid(settings.get("grid") or "256x256"),
                              tol=settings.get("tol") or optimize.DEFAULT_TOL,
                              max_evaluations=settings.get("max_evaluations") or optimize.DEFAULT_MAX_EVALUATIONS)
    if settings.get("json"):
        emit_json_lines([record.as_dict() for record in records])
    else:
        sys.stdout.write(render_table(records))
        sys.stdout.flush()
    return records


def _oracle_cases(settings):
    detectors = _detectors(settings.get("detector"), default="both")
    if settings.get("eta") is None:
        etas = ORACLE_ETAS
    else:
        etas = (_scalar(settings.get("eta"), "eta"),)
    return [(detector, eta) for detector in detectors for eta in etas]


def cmd_oracle_check(settings):
    """
    Compares the Fock oracle with the closed forms on seeded random points.

    :return: report dict keyed by "<detector>@<eta>"
    :raises ValidationError: if a deviation exceeds tolerance
    :raises TruncationError: (or another numerical error) if a point could not be evaluated
    """
    samples = int(settings["samples"]) if settings.get("samples") is not None else ORACLE_SAMPLES
    if samples < 1:
        raise ParameterError(f"--samples must be at least 1, got {samples}")
    rng = np.random.default_rng(int(settings.get("seed") if settings.get("seed") is not None else 7))
    lams = rng.uniform(*ORACLE_LAMBDA_RANGE, samples)
    ts = rng.uniform(*ORACLE_T_RANGE, samples)
    f_tol = settings.get("oracle_tol") or ORACLE_F_TOL
    p_tol = ORACLE_P_TOL if settings.get("oracle_tol") is None else f_tol / 100.0
    nmax = settings.get("nmax")

    report = {}
    failures = []
    for detector, eta in _oracle_cases(settings):
        df, dp, cutoffs = [], [], []
        for lam, T in zip(lams, ts):
            params = ResourceParams(lam=float(lam), T=float(T), eta=eta, detector=detector)
            try:
                cutoff = fock_oracle.FockCutoff(nmax) if nmax else None
                f_oracle, p_oracle, n_max = fock_oracle.oracle_metrics(params, cutoff=cutoff)
            except (TruncationError, QuadratureError, HeraldingError) as e:
                LOGGER.warning(f"oracle failed at lambda={lam:.6f} T={T:.6f} ({detector.value}, eta={eta}): {e}")
                failures.append(e)
                continue
            df.append(abs(f_oracle - closed_form.f_eta(detector, lam, T, eta)))
            dp.append(abs(p_oracle - closed_form.p_eta(detector, lam, T, eta)))
            cutoffs.append(n_max)

        key = f"{detector.value}@{eta:g}"
        report[key] = {"detector": detector.value,
                       "eta": eta,
                       "points": len(df),
                       "failed": samples - len(df),
                       "max_dF": max(df) if df else None,
                       "max_dP": max(dp) if dp else None,
                       "n_max": [min(cutoffs), max(cutoffs)] if cutoffs else None,
                       "passed": bool(df) and max(df) < f_tol and max(dp) < p_tol and len(df) == samples}
        LOGGER.info(f"oracle-check {key}: {report[key]}")

    if settings.get("json"):
        emit_json(report)
    else:
        for key, case in report.items():
            max_df = "n/a" if case["max_dF"] is None else "%.3e" % case["max_dF"]
            max_dp = "n/a" if case["max_dP"] is None else "%.3e" % case["max_dP"]
            sys.stdout.write(f"{key:<12} points={case['points']:<4} max|dF|={max_df:<10} max|dP|={max_dp:<10} "
                             f"n_max={case['n_max']} {'ok' if case['passed'] else 'FAIL'}\n")
        sys.stdout.flush()

    if failures:
        raise failures[0]
    bad = [key for key, case in report.items() if not case["passed"]]
    if bad:
        raise ValidationError(f"oracle and closed forms disagree beyond tolerance for {', '.join(bad)}")
    return report


COMMANDS = {
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "contours": cmd_contours,
    "fvsn": cmd_fvsn,
    "optimize": cmd_optimize,
    "table2": cmd_table2,
    "oracle-check": cmd_oracle_check,
}
