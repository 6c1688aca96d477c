"""Coordinate transformations for the three-body (O, p, mu) system.

Three coordinate layers are used, all exactly invertible:

1. Mass-scaled Jacobi sets (R_lam, r_lam, gamma_lam) for the two
   arrangements lam=1: O + (p mu) and lam=2: p + (mu O).  The two sets are
   related by a kinematic rotation through the angle theta_mu with
   tan(theta_mu) = m_mu / m, m being the three-body scaling mass.
2. Delves hyperspherical coordinates (rho, chi_lam, gamma_lam) with the
   common hyper-radius rho^2 = R^2 + r^2 and tan(chi_lam/2) = r_lam/R_lam.
3. Hyperspherical elliptic coordinates (rho, eta, xi) with
   eta = chi_1 - chi_2 in [-2 theta_mu, 2 theta_mu] and
   xi = chi_1 + chi_2 in [2 theta_mu, 2 pi - 2 theta_mu].

The two particle-coalescence points (mu on p, mu on O) sit at the corners
(eta, xi) = (-2 theta_mu, 2 theta_mu) and (+2 theta_mu, 2 theta_mu).

All angles are in radians; gamma angles are kept in [0, pi].  Functions are
pure and accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import CHARGE_MUON, CHARGE_OXYGEN, CHARGE_PROTON


class KinematicsError(ValueError):
    """Invalid masses or out-of-domain coordinate values."""


@dataclass(frozen=True)
class SystemDefinition:
    """Masses, charges and derived kinematic constants of the three-body system.

    Masses are in electron masses, charges in units of e.  Derived fields:

    m_scale
        Scaling mass m = sqrt(m_o * m_p * m_mu / M).
    theta_mu
        Kinematic rotation angle, tan(theta_mu) = m_mu / m_scale.
    m_red_1, m_red_2
        Reduced masses m_{i,jk} of the heavy-particle motion for
        arrangements 1 (O vs pmu) and 2 (p vs muO).
    mu_pair_1, mu_pair_2
        Two-body reduced masses of the bound pairs (p,mu) and (mu,O).
    """

    m_o: float
    m_p: float
    m_mu: float
    z_o: int = CHARGE_OXYGEN
    z_p: int = CHARGE_PROTON
    z_mu: int = CHARGE_MUON

    m_total: float = field(init=False)
    m_scale: float = field(init=False)
    theta_mu: float = field(init=False)
    m_red_1: float = field(init=False)
    m_red_2: float = field(init=False)
    mu_pair_1: float = field(init=False)
    mu_pair_2: float = field(init=False)

    def __post_init__(self):
        if not (self.m_o > 0 and self.m_p > 0 and self.m_mu > 0):
            raise KinematicsError("all masses must be strictly positive")
        m_total = self.m_o + self.m_p + self.m_mu
        m_scale = math.sqrt(self.m_o * self.m_p * self.m_mu / m_total)
        object.__setattr__(self, "m_total", m_total)
        object.__setattr__(self, "m_scale", m_scale)
        object.__setattr__(self, "theta_mu", math.atan2(self.m_mu, m_scale))
        object.__setattr__(self, "m_red_1",
                           self.m_o * (self.m_p + self.m_mu) / m_total)
        object.__setattr__(self, "m_red_2",
                           self.m_p * (self.m_mu + self.m_o) / m_total)
        object.__setattr__(self, "mu_pair_1",
                           self.m_p * self.m_mu / (self.m_p + self.m_mu))
        object.__setattr__(self, "mu_pair_2",
                           self.m_mu * self.m_o / (self.m_mu + self.m_o))

    # Length scalings between mass-scaled and physical Jacobi vectors:
    # X_ms = scale * X_phys.
    @property
    def scale_big_1(self) -> float:
        return math.sqrt(self.m_red_1 / self.m_scale)

    @property
    def scale_big_2(self) -> float:
        return math.sqrt(self.m_red_2 / self.m_scale)

    @property
    def scale_small_1(self) -> float:
        return math.sqrt(self.mu_pair_1 / self.m_scale)

    @property
    def scale_small_2(self) -> float:
        return math.sqrt(self.mu_pair_2 / self.m_scale)

    @property
    def a_mu(self) -> float:
        """Muonic length unit 1/m_mu in bohr, used for hyper-radius grids."""
        return 1.0 / self.m_mu

    def in_transfer_regime(self) -> bool:
        """True when the transferred particle is the light one (theta_mu < pi/4).

        Holds for any muonic-hydrogen + nucleus system; not enforced at
        construction so that symmetric test systems (equal masses) remain
        representable.
        """
        return 0.0 < self.theta_mu < math.pi / 4


def derive_kinematics(m_o, m_p, m_mu, **charges) -> SystemDefinition:
    """Build a SystemDefinition from the three masses (electron-mass units)."""
    return SystemDefinition(float(m_o), float(m_p), float(m_mu), **charges)


def jacobi_rotation(system: SystemDefinition, big_r1, small_r1):
    """Map arrangement-1 mass-scaled Jacobi vectors to arrangement 2.

    Applies the orthogonal 2x2 block rotation

        (R2)   (-cos th  -sin th) (R1)
        (r2) = ( sin th  -cos th) (r1)

    componentwise on vectors (any trailing shape).  The hyper-radius
    R^2 + r^2 is preserved exactly.
    """
    c, s = math.cos(system.theta_mu), math.sin(system.theta_mu)
    big_r1 = np.asarray(big_r1, dtype=float)
    small_r1 = np.asarray(small_r1, dtype=float)
    return -c * big_r1 - s * small_r1, s * big_r1 - c * small_r1


def jacobi_rotation_inverse(system: SystemDefinition, big_r2, small_r2):
    """Inverse of jacobi_rotation (transpose of the orthogonal block)."""
    c, s = math.cos(system.theta_mu), math.sin(system.theta_mu)
    big_r2 = np.asarray(big_r2, dtype=float)
    small_r2 = np.asarray(small_r2, dtype=float)
    return -c * big_r2 + s * small_r2, -s * big_r2 - c * small_r2


def delves_from_jacobi(big_r, small_r):
    """Delves (rho, chi) from mass-scaled Jacobi lengths of one arrangement.

    rho = sqrt(R^2 + r^2), tan(chi/2) = r/R with chi in [0, pi].
    Raises at the triple-coalescence origin R = r = 0.
    """
    big_r = np.asarray(big_r, dtype=float)
    small_r = np.asarray(small_r, dtype=float)
    rho = np.hypot(big_r, small_r)
    if np.any(rho == 0.0):
        raise KinematicsError("Delves angles undefined at the origin rho = 0")
    chi = 2.0 * np.arctan2(small_r, big_r)
    return rho, chi


def jacobi_from_delves(rho, chi):
    """Inverse of delves_from_jacobi: R = rho cos(chi/2), r = rho sin(chi/2)."""
    rho = np.asarray(rho, dtype=float)
    chi = np.asarray(chi, dtype=float)
    return rho * np.cos(chi / 2.0), rho * np.sin(chi / 2.0)


def _delves_triple(chi, gamma):
    return (np.cos(chi),
            np.sin(chi) * np.cos(gamma),
            np.sin(chi) * np.sin(gamma))


def _triple_to_angles(x, y, z):
    # chi from the first component, gamma from the remaining two; the map
    # keeps z = sin(chi) sin(gamma) >= 0 so gamma lands in [0, pi].
    chi = np.arccos(np.clip(x, -1.0, 1.0))
    gamma = np.arctan2(np.maximum(z, 0.0), y)
    return chi, gamma


def arrangement_rotation_matrix(system: SystemDefinition) -> np.ndarray:
    """The 3x3 rotation relating the two sets of Delves shape angles."""
    c, s = math.cos(2 * system.theta_mu), math.sin(2 * system.theta_mu)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def delves_arrangement_map(system: SystemDefinition, chi1, gamma1):
    """Shape angles (chi2, gamma2) of arrangement 2 from (chi1, gamma1)."""
    c, s = math.cos(2 * system.theta_mu), math.sin(2 * system.theta_mu)
    x, y, z = _delves_triple(np.asarray(chi1, float), np.asarray(gamma1, float))
    return _triple_to_angles(c * x + s * y, -s * x + c * y, z)


def delves_arrangement_map_inverse(system: SystemDefinition, chi2, gamma2):
    """Shape angles (chi1, gamma1) of arrangement 1 from (chi2, gamma2)."""
    c, s = math.cos(2 * system.theta_mu), math.sin(2 * system.theta_mu)
    x, y, z = _delves_triple(np.asarray(chi2, float), np.asarray(gamma2, float))
    return _triple_to_angles(c * x - s * y, s * x + c * y, z)


def elliptic_from_delves(system: SystemDefinition, chi1, chi2, validate=True):
    """Elliptic hyper-angles (eta, xi) from the two Delves angles."""
    chi1 = np.asarray(chi1, dtype=float)
    chi2 = np.asarray(chi2, dtype=float)
    eta = chi1 - chi2
    xi = chi1 + chi2
    if validate and not in_elliptic_domain(system, eta, xi):
        raise KinematicsError(
            "chi values are inconsistent with a physical configuration")
    return eta, xi


def delves_from_elliptic(eta, xi):
    """Inverse of elliptic_from_delves: chi1 = (xi+eta)/2, chi2 = (xi-eta)/2."""
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return (xi + eta) / 2.0, (xi - eta) / 2.0


def in_elliptic_domain(system: SystemDefinition, eta, xi, tol=1e-12) -> bool:
    t2 = 2.0 * system.theta_mu
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return bool(np.all(np.abs(eta) <= t2 + tol)
                and np.all(xi >= t2 - tol)
                and np.all(xi <= 2.0 * math.pi - t2 + tol))


def volume_weight(eta, xi):
    """Angular weight cos(eta) - cos(xi) of the elliptic volume element.

    Nonnegative on the whole domain, vanishing only at the two coalescence
    corners.  The constant measure prefactor pi^2 / (4 sin 2 theta_mu) and
    the rho^5 factor are applied by callers where they matter.
    """
    return np.cos(eta) - np.cos(xi)


@dataclass(frozen=True)
class EllipticPoint:
    """A single point (rho, eta, xi) in hyperspherical elliptic coordinates."""

    rho: float
    eta: float
    xi: float

    def validate(self, system: SystemDefinition):
        if self.rho < 0.0:
            raise KinematicsError("hyper-radius must be nonnegative")
        if not in_elliptic_domain(system, self.eta, self.xi):
            raise KinematicsError(
                f"(eta, xi) = ({self.eta}, {self.xi}) outside elliptic domain")
        return self


@dataclass(frozen=True)
class JacobiPair:
    """Mass-scaled Jacobi lengths and angle of one arrangement."""

    arrangement: int
    big_r: float
    small_r: float
    gamma: float

    def __post_init__(self):
        if self.arrangement not in (1, 2):
            raise KinematicsError("arrangement index must be 1 or 2")
        if self.big_r < 0.0 or self.small_r < 0.0:
            raise KinematicsError("Jacobi lengths must be nonnegative")


def _cos_gamma1(system, chi1, chi2):
    c, s = math.cos(2 * system.theta_mu), math.sin(2 * system.theta_mu)
    sin_chi1 = np.sin(chi1)
    num = np.cos(chi2) - c * np.cos(chi1)
    den = s * np.where(sin_chi1 > 1e-300, sin_chi1, 1e-300)
    return np.clip(num / den, -1.0, 1.0)


def _cos_gamma2(system, chi1, chi2):
    c, s = math.cos(2 * system.theta_mu), math.sin(2 * system.theta_mu)
    sin_chi2 = np.sin(chi2)
    num = c * np.cos(chi2) - np.cos(chi1)
    den = s * np.where(sin_chi2 > 1e-300, sin_chi2, 1e-300)
    return np.clip(num / den, -1.0, 1.0)


def jacobi_arrays_from_elliptic(system: SystemDefinition, rho, eta, xi,
                                arrangement: int):
    """Vectorized inverse map (rho, eta, xi) -> (R_lam, r_lam, cos gamma_lam).

    Returns mass-scaled lengths.  At coalescence corners, where gamma is
    geometrically undefined, cos gamma is clamped into [-1, 1]; the
    accompanying length r_lam vanishes there, so downstream products are
    well behaved.
    """
    chi1, chi2 = delves_from_elliptic(eta, xi)
    rho = np.asarray(rho, dtype=float)
    if arrangement == 1:
        big_r, small_r = jacobi_from_delves(rho, chi1)
        cosg = _cos_gamma1(system, chi1, chi2)
    elif arrangement == 2:
        big_r, small_r = jacobi_from_delves(rho, chi2)
        cosg = _cos_gamma2(system, chi1, chi2)
    else:
        raise KinematicsError("arrangement index must be 1 or 2")
    return big_r, small_r, cosg


def jacobi_from_elliptic(system: SystemDefinition, point: EllipticPoint,
                         arrangement: int) -> JacobiPair:
    """Single-point inverse map returning a JacobiPair (mass-scaled)."""
    big_r, small_r, cosg = jacobi_arrays_from_elliptic(
        system, point.rho, point.eta, point.xi, arrangement)
    return JacobiPair(arrangement, float(big_r), float(small_r),
                      float(np.arccos(cosg)))


def elliptic_from_jacobi(system: SystemDefinition,
                         pair: JacobiPair) -> EllipticPoint:
    """Forward map from one arrangement's Jacobi triple to (rho, eta, xi)."""
    rho, chi_own = delves_from_jacobi(pair.big_r, pair.small_r)
    if pair.arrangement == 1:
        chi2, _ = delves_arrangement_map(system, chi_own, pair.gamma)
        chi1 = chi_own
    else:
        chi1, _ = delves_arrangement_map_inverse(system, chi_own, pair.gamma)
        chi2 = chi_own
    eta, xi = elliptic_from_delves(system, chi1, chi2)
    return EllipticPoint(float(rho), float(eta), float(xi))
