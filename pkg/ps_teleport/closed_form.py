"""
Closed-form figures for photon-subtracted two-mode squeezed vacuum (TMSV) resources
used in unit-gain continuous-variable teleportation of coherent states.

Every function accepts floats or numpy arrays (broadcast together) and returns a float
for scalar input, so the same code evaluates single points and whole (lambda, T) grids.

Fidelity convention: F = <alpha| rho_tel |alpha>, for which the bare TMSV gives (lambda + 1) / 2.
"""
import enum
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
import singer

from ps_teleport.exceptions import ParameterError, ValidationError

LOGGER = singer.get_logger()

CLASSICAL_FIDELITY = 0.5


class DetectorKind(enum.Enum):
    SPD = "spd"
    ON_OFF = "onoff"

    @classmethod
    def parse(cls, value):
        """
        Accepts a DetectorKind or one of its names ("spd", "onoff", "on-off", "ON_OFF", ...).
        """
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ParameterError(f"unknown detector '{value}'; expected one of: spd, onoff")


@dataclass(frozen=True)
class ResourceParams:
    """
    One point of parameter space: squeezing lam = tanh r, beam splitter transmissivity T,
    detector efficiency eta and the heralding detector kind.
    """
    lam: float
    T: float
    eta: float = 1.0
    detector: DetectorKind = DetectorKind.SPD

    def validate(self):
        _domain(lam=self.lam, T=self.T, eta=self.eta)
        DetectorKind.parse(self.detector)
        return self

    @property
    def t_eff(self):
        return t_eff(self.T, self.eta)


@dataclass(frozen=True)
class Metrics:
    fidelity: float
    success_prob: float
    delta_f: float
    merit: float
    mean_photon: Optional[float] = None
    delta_n: Optional[float] = None

    def as_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


def require_finite(values, what):
    """
    :raises ValidationError: if any value is NaN or infinite
    """
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if bad.any():
        raise ValidationError(f"{what}: {int(bad.sum())} of {values.size} values are not finite")
    return values


def _first_offender(values, ok):
    bad = np.asarray(values)[~np.asarray(ok)]
    return bad.flat[0] if bad.size else values


def _domain(lam=None, T=None, eta=None, allow_zero_T=False):
    """
    Converts the given parameters to float arrays and checks them against the parameter domain
    0 <= lam < 1, 0 < T <= 1, 0 < eta <= 1.
    """
    out = []
    if lam is not None:
        lam = np.asarray(lam, dtype=float)
        ok = (lam >= 0.0) & (lam < 1.0)
        if not np.all(ok):
            raise ParameterError(f"squeezing lambda must satisfy 0 <= lambda < 1, got {_first_offender(lam, ok)}")
        out.append(lam)
    if T is not None:
        T = np.asarray(T, dtype=float)
        ok = ((T >= 0.0) if allow_zero_T else (T > 0.0)) & (T <= 1.0)
        if not np.all(ok):
            raise ParameterError(f"transmissivity T must satisfy 0 < T <= 1, got {_first_offender(T, ok)}")
        out.append(T)
    if eta is not None:
        eta = np.asarray(eta, dtype=float)
        ok = (eta > 0.0) & (eta <= 1.0)
        if not np.all(ok):
            raise ParameterError(f"detector efficiency eta must satisfy 0 < eta <= 1, got {_first_offender(eta, ok)}")
        out.append(eta)
    return out[0] if len(out) == 1 else out


def _result(x):
    return float(x) if np.ndim(x) == 0 else x


def t_eff(T, eta):
    """
    Effective transmissivity 1 - eta (1 - T) of a tap followed by an efficiency-eta detector.
    Valid for success probabilities only.
    """
    T, eta = _domain(T=T, eta=eta)
    return _result(1.0 - eta * (1.0 - T))


def f_tmsv(lam):
    lam = _domain(lam=lam)
    return _result(CLASSICAL_FIDELITY + lam / 2.0)


def f_sps_ideal(lam, T):
    lam, T = _domain(lam=lam, T=T)
    t = lam * T
    return _result((t + 1.0) ** 3 * (2.0 - t * (2.0 - t)) / (4.0 * (t * t + 1.0)))


def f_ips_ideal(lam, T):
    """
    On-off heralded fidelity with ideal detectors. The printed denominator factor
    (lambda (1 - tau) + 2) is read with tau = T, which is what the eta -> 1 limit of f_ips_eta gives.
    """
    lam, T = _domain(lam=lam, T=T)
    num = (lam + 1.0) * (lam * T + 1.0) * (2.0 - (2.0 - lam) * lam * T) * (1.0 - lam ** 2 * T)
    den = (2.0 * (lam * (1.0 - T) + 1.0) * (lam ** 2 * T + 1.0)
           * (2.0 - lam * T * (lam * (1.0 - T) + 2.0)))
    return _result(num / den)


def p_sps_ideal(lam, T):
    lam, T = _domain(lam=lam, T=T)
    x = lam ** 2 * T ** 2
    return _result(lam ** 2 * (1.0 - lam ** 2) * (1.0 - T) ** 2 * (x + 1.0) / (1.0 - x) ** 3)


def p_ips_ideal(lam, T):
    lam, T = _domain(lam=lam, T=T)
    return _result(lam ** 2 * (1.0 - T) ** 2 * (lam ** 2 * T + 1.0)
                   / ((1.0 - lam ** 2 * T) * (1.0 - lam ** 2 * T ** 2)))


def f_sps_eta(lam, T, eta):
    """
    SPD heralded fidelity with an efficiency-eta detector.

    The last denominator factor is ((lam - eta lam (1 - T))^2 + 1) = 1 + (lam T_eff)^2; with a plus sign
    the expression does not reduce to f_sps_ideal at eta = 1 and disagrees with the Fock oracle.
    """
    lam, T, eta = _domain(lam=lam, T=T, eta=eta)
    r = 1.0 - T
    shape = 2.0 * eta ** 2 * r ** 2 - 2.0 * eta * (2.0 - T) * r - (2.0 - T) * T + 2.0
    num = (lam - eta * lam * r + 1.0) ** 3 * (lam ** 2 * shape - 2.0 * lam * T + 2.0)
    den = 4.0 * ((1.0 - eta) * lam * r + 1.0) ** 3 * ((lam - eta * lam * r) ** 2 + 1.0)
    return _result(num / den)


def f_ips_eta(lam, T, eta):
    lam, T, eta = _domain(lam=lam, T=T, eta=eta)
    r = 1.0 - T
    te = 1.0 - eta * r
    num = ((lam + 1.0) * (1.0 + lam - r * eta * lam) * (1.0 - te * lam ** 2)
           * (2.0 - lam * (-2.0 * lam - lam * (2.0 - T) * ((1.0 - eta) * (-T) - eta) + 2.0 * T)))
    den = (2.0 * (lam * r + 1.0) * ((1.0 - eta) * lam * r + 1.0)
           * (2.0 - lam ** 2 * r * (2.0 - eta * (2.0 - T)) - 2.0 * lam * T)
           * (lam ** 2 * te + 1.0))
    return _result(num / den)


def f_ips_substituted(lam, T, eta):
    """
    Earlier literature's non-ideal on-off fidelity: the ideal expression evaluated at T_eff.
    Kept only for comparison plots and the substitution check; it is not the correct fidelity.
    """
    return f_ips_ideal(lam, t_eff(T, eta))


def f_eta(detector, lam, T, eta):
    detector = DetectorKind.parse(detector)
    if detector is DetectorKind.SPD:
        return f_sps_eta(lam, T, eta)
    return f_ips_eta(lam, T, eta)


def p_eta(detector, lam, T, eta):
    """
    Success probability with an efficiency-eta detector: the ideal probability at T_eff = 1 - eta (1 - T).
    """
    detector = DetectorKind.parse(detector)
    lam = _domain(lam=lam)
    te = t_eff(T, eta)
    if detector is DetectorKind.SPD:
        return p_sps_ideal(lam, te)
    return p_ips_ideal(lam, te)


def delta_f(detector, lam, T, eta):
    return _result(np.asarray(f_eta(detector, lam, T, eta)) - np.asarray(f_tmsv(lam)))


def merit_r(detector, lam, T, eta):
    return _result(np.asarray(p_eta(detector, lam, T, eta)) * np.asarray(delta_f(detector, lam, T, eta)))


def f_limit_T1(lam):
    """
    Common unit-transmissivity limit of the SPD and on-off fidelities.
    """
    lam = _domain(lam=lam)
    return _result((lam + 1.0) ** 3 * (2.0 - (2.0 - lam) * lam) / (4.0 * (lam ** 2 + 1.0)))


def n_tmsv(lam):
    lam = _domain(lam=lam)
    return _result(2.0 * lam ** 2 / (1.0 - lam ** 2))


def n_sps(lam, T):
    # depends on lam * T only; T = 0 is accepted and gives 0
    lam, T = _domain(lam=lam, T=T, allow_zero_T=True)
    x = lam ** 2 * T ** 2
    return _result(4.0 * x * (x + 2.0) / (1.0 - x ** 2))


def delta_n_sps(lam, T):
    return _result(np.asarray(n_sps(lam, T)) - np.asarray(n_tmsv(lam)))


def evaluate(params):
    """
    All metrics at one ResourceParams point. Mean photon numbers are only available in closed form
    for the ideal SPD resource.

    :param params, ResourceParams:
    :return: Metrics
    """
    params = params.validate()
    detector = DetectorKind.parse(params.detector)

    fidelity = f_eta(detector, params.lam, params.T, params.eta)
    success_prob = p_eta(detector, params.lam, params.T, params.eta)
    enhancement = fidelity - f_tmsv(params.lam)

    mean_photon = photon_gain = None
    if detector is DetectorKind.SPD and params.eta == 1.0:
        mean_photon = n_sps(params.lam, params.T)
        photon_gain = delta_n_sps(params.lam, params.T)

    return Metrics(fidelity=fidelity,
                   success_prob=success_prob,
                   delta_f=enhancement,
                   merit=success_prob * enhancement,
                   mean_photon=mean_photon,
                   delta_n=photon_gain)
