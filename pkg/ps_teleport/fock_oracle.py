"""
Brute-force Fock-space oracle for the closed forms.

A TMSV state is built on a truncated number basis, each mode is tapped by a beam splitter whose
reflected port is measured with a diagonal detector POVM, and the heralded resource is kept as an
ensemble of pure two-mode coefficient grids (one per pair of ancilla photon numbers). Teleportation
fidelity of a coherent state through the unit-gain protocol is

    F = (1/pi) Int d^2xi exp(-|xi|^2) chi(xi*, xi),    chi(xi1, xi2) = Tr[rho D1(xi1) D2(xi2)],

evaluated with displacement-operator matrix elements in the number basis.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
import singer
from scipy.sparse import coo_matrix
from scipy.special import gammaln, roots_laguerre, roots_legendre, xlogy

from ps_teleport.closed_form import DetectorKind, _domain
from ps_teleport.exceptions import HeraldingError, ParameterError, QuadratureError, TruncationError

LOGGER = singer.get_logger()

DEFAULT_TAIL_TOL = 1e-10
DEFAULT_QUAD_TOL = 1e-10
N_MAX_FLOOR = 20
N_MAX_CAP = 80
MAX_RADIAL_NODES = 200


@dataclass(frozen=True)
class FockCutoff:
    """
    Largest photon number kept per mode (inclusive).
    """
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ParameterError(f"n_max must be an integer >= 1, got {self.n_max}")

    @property
    def dim(self):
        return self.n_max + 1

    @staticmethod
    def tail_bound(lam, n_max):
        """
        Upper bound lam^(2 (n_max + 1)) / (1 - lam^2) on the TMSV probability above n_max.
        """
        lam = _domain(lam=lam)
        return float(lam ** (2 * (n_max + 1)) / (1.0 - lam ** 2))

    def require(self, lam, tol):
        bound = self.tail_bound(lam, self.n_max)
        if bound > tol:
            raise TruncationError(
                f"n_max={self.n_max} leaves a TMSV tail bound of {bound:.3e} at lambda={float(lam)}, "
                f"above the tolerance {tol:.1e}")
        return bound

    @classmethod
    def for_squeezing(cls, lam, tol=DEFAULT_TAIL_TOL, floor=N_MAX_FLOOR, cap=N_MAX_CAP):
        """
        Smallest n_max whose tail bound is below tol, but at least floor.

        :raises TruncationError: if even cap is not enough
        """
        for n_max in range(1, cap + 1):
            if cls.tail_bound(lam, n_max) < tol:
                return cls(max(n_max, floor))
        raise TruncationError(
            f"lambda={float(lam)} needs n_max above the cap {cap} to reach a tail bound of {tol:.1e}")


@dataclass(frozen=True)
class DetectorPovm:
    """
    Diagonal POVM element (number basis) that heralds a successful subtraction on one ancilla mode.
    """
    detector: DetectorKind
    eta: float
    weights: np.ndarray


def build_povm(detector, eta, cutoff):
    """
    SPD:    w_n = n eta (1 - eta)^(n - 1), w_0 = 0   (ideal: |1><1|)
    on-off: w_n = 1 - (1 - eta)^n                   (ideal: 1 - |0><0|)
    """
    detector = DetectorKind.parse(detector)
    eta = float(_domain(eta=eta))
    n = np.arange(cutoff.dim, dtype=float)

    if detector is DetectorKind.SPD:
        weights = np.zeros(cutoff.dim)
        weights[1:] = n[1:] * eta * (1.0 - eta) ** (n[1:] - 1.0)
    else:
        weights = 1.0 - (1.0 - eta) ** n

    return DetectorPovm(detector=detector, eta=eta, weights=weights)


@dataclass(frozen=True)
class BeamSplitterKernel:
    """
    amplitudes[n, k]: amplitude of |n, 0> -> |n - k, k> for transmissivity T (zero for k > n).
    """
    T: float
    amplitudes: np.ndarray

    @classmethod
    def for_transmissivity(cls, T, cutoff):
        T = float(_domain(T=T))
        n = np.arange(cutoff.dim, dtype=float)[:, None]
        k = np.arange(cutoff.dim, dtype=float)[None, :]
        valid = k <= n
        nk = np.where(valid, n - k, 0.0)
        log_amp = 0.5 * (gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(nk + 1.0)
                         + xlogy(nk, T) + xlogy(k, 1.0 - T))
        amplitudes = np.where(valid, np.exp(log_amp), 0.0)
        return cls(T=T, amplitudes=amplitudes)

    def sector_norms(self):
        return np.sum(self.amplitudes ** 2, axis=1)


@dataclass
class FockComponent:
    weight: float
    grid: coo_matrix


@dataclass
class FockResource:
    """
    Heralded two-mode resource as an ensemble sum_k weight_k |psi_k><psi_k| of unit-norm coefficient
    grids, plus the probability with which it was heralded.
    """
    components: List[FockComponent]
    herald_prob: float
    dim: int
    _bands: dict = field(default=None, repr=False)

    @classmethod
    def pure(cls, grid):
        """
        Deterministic resource made of the single (normalised) coefficient grid.
        """
        grid = np.asarray(grid)
        norm2 = float(np.sum(np.abs(grid) ** 2))
        if norm2 == 0.0:
            raise HeraldingError("cannot build a resource from an all-zero coefficient grid")
        return cls(components=[FockComponent(weight=1.0, grid=coo_matrix(grid / np.sqrt(norm2)))],
                   herald_prob=1.0,
                   dim=grid.shape[0])

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    def density_bands(self):
        """
        Groups the density matrix by the photon-number difference delta = n - m of the two modes:
        bands[delta] = (m_lo, M) with M[i, j] = sum_k w_k conj(c_k[m_lo+i, m_lo+i+delta]) c_k[m_lo+j, m_lo+j+delta].

        Only these blocks survive the angular average of chi(xi*, xi).
        """
        if self._bands is not None:
            return self._bands

        bands = {}
        for component in self.components:
            grid = component.grid
            deltas = grid.col - grid.row
            for delta in np.unique(deltas):
                delta = int(delta)
                m_lo = max(0, -delta)
                size = self.dim - abs(delta)
                sel = deltas == delta
                v = np.zeros(size, dtype=grid.dtype)
                v[grid.row[sel] - m_lo] = grid.data[sel]
                block = component.weight * np.outer(np.conj(v), v)
                if delta in bands:
                    bands[delta] = (m_lo, bands[delta][1] + block)
                else:
                    bands[delta] = (m_lo, block)

        self._bands = bands
        return bands


def tmsv_coeffs(lam, cutoff, tol=None):
    """
    Diagonal grid c[n, n] = sqrt(1 - lam^2) lam^n, n <= n_max. The norm deficit equals lam^(2 (n_max + 1)).

    :param tol: if given, raise TruncationError when the cutoff's tail bound exceeds it
    """
    lam = float(_domain(lam=lam))
    if tol is not None:
        cutoff.require(lam, tol)
    n = np.arange(cutoff.dim, dtype=float)
    return np.diag(np.sqrt(1.0 - lam ** 2) * lam ** n)


def subtract_photons(state, T, povm_mode1, povm_mode2, tol=DEFAULT_TAIL_TOL):
    """
    Taps both modes of state with a transmissivity-T beam splitter (vacuum ancilla), weights each
    ancilla outcome pair (k1, k2) by the POVM elements and traces the ancillas out.

    :param state: two-mode coefficient grid c[m, n], normalised up to the truncation tail
    :return: FockResource with one component per outcome pair with non-zero weight
    :raises TruncationError: if more than tol of the probability lies beyond n_max
    :raises HeraldingError: if no outcome pair has non-zero probability
    """
    state = np.asarray(state)
    dim = state.shape[0]
    deficit = 1.0 - float(np.sum(np.abs(state) ** 2))
    if deficit > tol:
        raise TruncationError(f"{deficit:.3e} of the probability lies beyond n_max={dim - 1} (tolerance {tol:.1e})")

    kernel = BeamSplitterKernel.for_transmissivity(T, FockCutoff(dim - 1))
    b = kernel.amplitudes
    rows, cols = np.nonzero(state)
    values = state[rows, cols]
    w1, w2 = povm_mode1.weights[:dim], povm_mode2.weights[:dim]

    weighted = []
    for k1 in np.flatnonzero(w1):
        rows_ok = rows >= k1
        for k2 in np.flatnonzero(w2):
            sel = rows_ok & (cols >= k2)
            if not sel.any():
                continue
            r, c = rows[sel], cols[sel]
            amp = values[sel] * b[r, k1] * b[c, k2]
            norm2 = float(np.sum(np.abs(amp) ** 2))
            if norm2 == 0.0:
                continue
            grid = coo_matrix((amp / np.sqrt(norm2), (r - k1, c - k2)), shape=(dim, dim))
            weighted.append((w1[k1] * w2[k2] * norm2, grid))

    herald_prob = float(sum(w for w, _ in weighted))
    if herald_prob <= 0.0:
        raise HeraldingError(f"photon subtraction at T={T} is never heralded")

    components = [FockComponent(weight=w / herald_prob, grid=g) for w, g in weighted if w > 0.0]
    LOGGER.debug(f"subtract_photons: {len(components)} components, herald_prob={herald_prob:.6e}")
    return FockResource(components=components, herald_prob=herald_prob, dim=dim)


def annihilate_pair(state):
    """
    Resource proportional to a1 a2 |psi>, the unit-transmissivity limit of single-photon subtraction.
    """
    state = np.asarray(state)
    dim = state.shape[0]
    scale = np.sqrt(np.arange(1, dim, dtype=float))
    lowered = np.zeros_like(state)
    lowered[:-1, :-1] = scale[:, None] * scale[None, :] * state[1:, 1:]
    return FockResource.pure(lowered)


def displacement_matrix(r, dim):
    """
    Number-basis matrix <m|D(r)|n> for real r >= 0 (array of shape (len(r), dim, dim)), built column by
    column with D[m, n] = (sqrt(m) D[m-1, n-1] - r D[m, n-1]) / sqrt(n), starting from the coherent
    state column D[m, 0]. All entries stay bounded by 1, so no rescaling is needed.

    D(r e^{i phi})[m, n] = D(r)[m, n] e^{i (m - n) phi}.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    sq = np.sqrt(np.arange(dim, dtype=float))
    d = np.zeros((r.size, dim, dim))
    d[:, 0, 0] = np.exp(-0.5 * r ** 2)
    for m in range(1, dim):
        d[:, m, 0] = r / sq[m] * d[:, m - 1, 0]
    for n in range(1, dim):
        d[:, 0, n] = -r / sq[n] * d[:, 0, n - 1]
        d[:, 1:, n] = (sq[1:] * d[:, :-1, n - 1] - r[:, None] * d[:, 1:, n - 1]) / sq[n]
    return d


def _dense_components(resource):
    return [(c.weight, c.grid.toarray()) for c in resource.components]


def _chi_from_matrices(resource, d1, d2):
    """
    sum_k w_k <psi_k| D1 (x) D2 |psi_k> for stacks of single-mode matrices d1, d2 of shape (K, dim, dim).
    """
    total = np.zeros(d1.shape[0], dtype=complex)
    for weight, grid in _dense_components(resource):
        total += weight * np.einsum("pq,kpm,kqn,mn->k", np.conj(grid), d1, d2, grid, optimize=True)
    return total


def characteristic(resource, xi):
    """
    chi(xi*, xi) = Tr[rho D1(xi*) D2(xi)] of the resource at complex xi (scalar or 1-d array).
    """
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    a = displacement_matrix(np.abs(xi), resource.dim)
    idx = np.arange(resource.dim)
    diff = (idx[:, None] - idx[None, :])[None, :, :]
    phase = np.exp(1j * diff * np.angle(xi)[:, None, None])
    chi = _chi_from_matrices(resource, a * np.conj(phase), a * phase)
    return complex(chi[0]) if scalar else chi


def _angular_mean_chi(resource, a):
    """
    Exact angular average of chi(xi*, xi) on the radii of a: only same-difference blocks contribute.
    """
    total = np.zeros(a.shape[0])
    for delta, (m_lo, block) in resource.density_bands().items():
        size = block.shape[0]
        a1 = a[:, m_lo:m_lo + size, m_lo:m_lo + size]
        a2 = a[:, m_lo + delta:m_lo + delta + size, m_lo + delta:m_lo + delta + size]
        total += np.real(np.einsum("ij,kij,kij->k", block, a1, a2))
    return total


def _angular_quadrature_chi(resource, a, angular_nodes):
    x, gw = roots_legendre(angular_nodes)
    phis = np.pi * (x + 1.0)
    idx = np.arange(resource.dim)
    diff = idx[:, None] - idx[None, :]
    total = np.zeros(a.shape[0])
    for phi, weight in zip(phis, gw / 2.0):
        phase = np.exp(1j * diff * phi)[None, :, :]
        total += weight * np.real(_chi_from_matrices(resource, a * np.conj(phase), a * phase))
    return total


def _radial_fidelity(resource, nodes, angular_nodes):
    # v = 2 |xi|^2: the integrand is exp(-v) times a polynomial of degree <= 2 n_max in v
    v, w = roots_laguerre(nodes)
    omega = 0.5 * w * np.exp(0.5 * v)
    a = displacement_matrix(np.sqrt(0.5 * v), resource.dim)
    if angular_nodes is None:
        chi = _angular_mean_chi(resource, a)
    else:
        chi = _angular_quadrature_chi(resource, a, angular_nodes)
    return float(np.dot(omega, chi))


def teleport_fidelity(resource, nodes=None, tol=DEFAULT_QUAD_TOL, max_doublings=1, angular_nodes=None):
    """
    Fidelity of teleporting a coherent state (any amplitude) through the unit-gain protocol with the
    given resource.

    :param nodes: initial number of Gauss-Laguerre radial nodes (default n_max + 1, exact for the angular mean)
    :param tol: maximum change allowed when the node count is doubled
    :param angular_nodes: use Gauss-Legendre angular nodes instead of the exact angular average
    :raises QuadratureError: if doubling the node count (at most MAX_RADIAL_NODES) changes F by more than tol
    """
    nodes = nodes or resource.dim
    value = _radial_fidelity(resource, nodes, angular_nodes)
    error = np.inf
    for _ in range(max_doublings):
        refined_nodes = min(2 * nodes, MAX_RADIAL_NODES)
        if refined_nodes <= nodes:
            # already at the node cap; n_max + 1 nodes integrate the exact angular mean exactly
            if angular_nodes is None and nodes >= resource.dim:
                LOGGER.debug(f"radial quadrature at the {MAX_RADIAL_NODES} node cap, keeping {nodes} nodes")
                return value
            break
        nodes = refined_nodes
        refined = _radial_fidelity(resource, nodes, angular_nodes)
        error, value = abs(refined - value), refined
        if error <= tol:
            return value
    raise QuadratureError(f"radial quadrature did not reach {tol:.1e} with {nodes} nodes "
                          f"(last change {error:.3e})", error_estimate=error)


def mean_photon(resource):
    """
    <a1^dag a1 + a2^dag a2> of the resource.
    """
    total = 0.0
    for component in resource.components:
        grid = component.grid
        total += component.weight * float(np.sum((grid.row + grid.col) * np.abs(grid.data) ** 2))
    return total


def heralded_resource(params, cutoff=None, tol=DEFAULT_TAIL_TOL):
    """
    TMSV -> photon subtraction on both modes, heralded by params.detector with efficiency params.eta.
    """
    params = params.validate()
    cutoff = cutoff or FockCutoff.for_squeezing(params.lam, tol=tol)
    state = tmsv_coeffs(params.lam, cutoff, tol=tol)
    povm = build_povm(params.detector, params.eta, cutoff)
    return subtract_photons(state, params.T, povm, povm, tol=tol)


def oracle_metrics(params, cutoff=None, tol=DEFAULT_TAIL_TOL):
    """
    (fidelity, heralding probability, n_max) computed by the oracle for one parameter point.
    """
    cutoff = cutoff or FockCutoff.for_squeezing(params.lam, tol=tol)
    resource = heralded_resource(params, cutoff=cutoff, tol=tol)
    return teleport_fidelity(resource), resource.herald_prob, cutoff.n_max


def tmsv_resource(lam, cutoff=None, tol=DEFAULT_TAIL_TOL):
    cutoff = cutoff or FockCutoff.for_squeezing(lam, tol=tol)
    return FockResource.pure(tmsv_coeffs(lam, cutoff, tol=tol))
