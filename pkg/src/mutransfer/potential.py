"""Three-body Coulomb potential on the hyperspherical elliptic domain.

The full interaction is

    V = z_p z_mu / d_pmu + z_mu z_o / d_muO + z_p z_o / d_pO

with two attractive singularities at the coalescence corners of the
(eta, xi) rectangle.  Because every interparticle distance scales linearly
with rho at fixed hyper-angles, V(rho, eta, xi) = v(eta, xi) / rho exactly;
the angular profile v is computed once and rescaled everywhere else.

The renormalized potential W = (cos eta - cos xi) (V - eps) is finite on
the closed domain (the weight zero cancels the 1/d divergences) and is
approximately separable; its exact separable split is

    W_eta(eta) = W(eta, 2 theta_mu)
    W_xi(xi)   = W(-2 theta_mu, xi) - W(-2 theta_mu, 2 theta_mu)
    Delta W    = W - W_eta - W_xi.

The long-range entrance-channel formulas (polarization tail, centrifugal
barrier) live here as diagnostics only; the coupled-channel potential is
the full Coulomb V and already contains them.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import HARTREE_EV
from .kinematics import (SystemDefinition, jacobi_arrays_from_elliptic,
                         volume_weight)

# Distances are clamped at this floor before forming 1/d; the vanishing
# angular weight at the coalescence corners makes the products finite.
_D_FLOOR = 1e-30


class PotentialError(ValueError):
    """Evaluation at a singular point or with invalid arguments."""


class ThreeBodyCoulomb:
    """Coulomb interaction of (O, p, mu) expressed in elliptic coordinates."""

    def __init__(self, system: SystemDefinition):
        self.system = system
        # Center-of-mass offsets of p and mu within the (p, mu) pair.
        self._c_p = system.m_mu / (system.m_p + system.m_mu)
        self._c_mu = system.m_p / (system.m_p + system.m_mu)

    def distances(self, rho, eta, xi):
        """Physical interparticle distances (d_pmu, d_muO, d_pO) in bohr.

        Vectorized over (rho, eta, xi).  Uses the arrangement-1 inversion;
        d_muO obtained from the same triangle agrees with the direct
        arrangement-2 route by the orthogonality of the kinematic rotation.
        """
        sys = self.system
        big_r, small_r, cosg = jacobi_arrays_from_elliptic(
            sys, rho, eta, xi, arrangement=1)
        r1p = small_r / sys.scale_small_1
        big_r1p = big_r / sys.scale_big_1
        d_pmu = r1p
        d_po = np.sqrt(big_r1p**2 + (self._c_p * r1p)**2
                       + 2.0 * self._c_p * big_r1p * r1p * cosg)
        d_muo = np.sqrt(big_r1p**2 + (self._c_mu * r1p)**2
                        - 2.0 * self._c_mu * big_r1p * r1p * cosg)
        return d_pmu, d_muo, d_po

    def energy(self, rho, eta, xi):
        """Full Coulomb energy V in hartree; raises at a coalescence corner."""
        d_pmu, d_muo, d_po = self.distances(rho, eta, xi)
        if np.any(d_pmu < _D_FLOOR) or np.any(d_muo < _D_FLOOR) \
                or np.any(d_po < _D_FLOOR):
            raise PotentialError("Coulomb potential evaluated at coalescence")
        sys = self.system
        return (sys.z_p * sys.z_mu / d_pmu
                + sys.z_mu * sys.z_o / d_muo
                + sys.z_p * sys.z_o / d_po)

    def angular_energy(self, eta, xi):
        """rho-independent profile v(eta, xi) with V = v / rho (exact scaling).

        Distances are clamped at a tiny floor so corner evaluations stay
        finite; callers multiply by the vanishing angular weight there.
        """
        eta = np.asarray(eta, dtype=float)
        d_pmu, d_muo, d_po = self.distances(np.ones_like(eta), eta, xi)
        sys = self.system
        return (sys.z_p * sys.z_mu / np.maximum(d_pmu, _D_FLOOR)
                + sys.z_mu * sys.z_o / np.maximum(d_muo, _D_FLOOR)
                + sys.z_p * sys.z_o / np.maximum(d_po, _D_FLOOR))

    def corner_constant(self, arrangement: int) -> float:
        """Corner limit of the weighted profile (cos eta - cos xi) V rho.

        At the coalescence corner of arrangement lam the product of the
        vanishing weight with the diverging Coulomb term tends to
        4 z_a z_b s_small sin(2 theta_mu); the regular terms drop out.
        """
        sys = self.system
        s2t = math.sin(2.0 * sys.theta_mu)
        if arrangement == 1:
            return 4.0 * sys.z_p * sys.z_mu * sys.scale_small_1 * s2t
        if arrangement == 2:
            return 4.0 * sys.z_mu * sys.z_o * sys.scale_small_2 * s2t
        raise PotentialError("arrangement index must be 1 or 2")

    def renormalized(self, rho_n, eta, xi, eps):
        """W(rho_n, eta, xi) = (cos eta - cos xi)(V - eps), finite everywhere.

        At the two coalescence corners the exact directional limit
        corner_constant / rho_n is returned instead of the indeterminate
        0 * inf product.
        """
        eta = np.asarray(eta, dtype=float)
        xi = np.asarray(xi, dtype=float)
        w = volume_weight(eta, xi)
        out = w * self.angular_energy(eta, xi) / rho_n - w * eps
        t2 = 2.0 * self.system.theta_mu
        near1 = (np.abs(eta + t2) < 1e-13) & (np.abs(xi - t2) < 1e-13)
        near2 = (np.abs(eta - t2) < 1e-13) & (np.abs(xi - t2) < 1e-13)
        if np.any(near1):
            out = np.where(near1, self.corner_constant(1) / rho_n, out)
        if np.any(near2):
            out = np.where(near2, self.corner_constant(2) / rho_n, out)
        return out

    def split(self, rho_n, eps) -> "SeparableSplit":
        return SeparableSplit(self, float(rho_n), float(eps))


class SeparableSplit:
    """Exact decomposition W = W_eta + W_xi + Delta W at one (rho_n, eps).

    W_eta samples W along the edge xi = 2 theta_mu; W_xi samples it along
    eta = -2 theta_mu minus the shared corner value W(-2 theta, 2 theta),
    so the three parts sum to W identically and Delta W vanishes on both
    of those edges by construction.
    """

    def __init__(self, potential: ThreeBodyCoulomb, rho_n: float, eps: float):
        self.potential = potential
        self.rho_n = rho_n
        self.eps = eps
        self._t2 = 2.0 * potential.system.theta_mu
        self._corner = potential.corner_constant(1) / rho_n

    def w_eta(self, eta):
        eta = np.asarray(eta, dtype=float)
        return self.potential.renormalized(
            self.rho_n, eta, np.full_like(eta, self._t2), self.eps)

    def w_xi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.potential.renormalized(
            self.rho_n, np.full_like(xi, -self._t2), xi, self.eps) - self._corner

    def delta(self, eta, xi):
        eta = np.asarray(eta, dtype=float)
        xi = np.asarray(xi, dtype=float)
        total = self.potential.renormalized(self.rho_n, eta, xi, self.eps)
        return total - self.w_eta(eta) - self.w_xi(xi)

    def total(self, eta, xi):
        return self.potential.renormalized(self.rho_n, eta, xi, self.eps)


def polarizability(system: SystemDefinition) -> float:
    """Dipole polarizability (9/2) a^3 of the ground-state (p mu) atom, a.u."""
    return 4.5 / system.mu_pair_1**3


def polarization_tail(big_r_phys, z: float, alpha: float):
    """Entrance-channel tail V = -alpha Z^2 / (2 R^4) in hartree.

    big_r_phys is the physical O to (p mu) center-of-mass distance in bohr.
    """
    big_r_phys = np.asarray(big_r_phys, dtype=float)
    if np.any(big_r_phys <= 0.0):
        raise PotentialError("polarization tail requires R > 0")
    return -alpha * z**2 / (2.0 * big_r_phys**4)


def centrifugal_barrier_height(system: SystemDefinition, j: int) -> float:
    """Height of the J-wave entrance-channel barrier in hartree.

    For V = -alpha Z^2/(2 R^4) plus the centrifugal term the barrier
    maximum is (J(J+1) / (m_red Z))^2 / (8 alpha); zero for J = 0.
    """
    if j < 0 or j != int(j):
        raise PotentialError("J must be a nonnegative integer")
    if j == 0:
        return 0.0
    alpha = polarizability(system)
    return (j * (j + 1) / (system.m_red_1 * system.z_o))**2 / (8.0 * alpha)


def effective_range(system: SystemDefinition, energy_ev: float) -> float:
    """R (bohr) where the magnitude of the polarization tail equals energy_ev."""
    if energy_ev <= 0.0:
        raise PotentialError("effective range requires positive energy")
    alpha = polarizability(system)
    e_h = energy_ev / HARTREE_EV
    return (alpha * system.z_o**2 / (2.0 * e_h))**0.25


def tail_coefficient_ms(system: SystemDefinition) -> float:
    """Polarization coefficient C4 in the mass-scaled entrance coordinate.

    V(R_ms) = -C4 / R_ms^4 with R_ms the mass-scaled O-(p mu) separation.
    """
    alpha = polarizability(system)
    return alpha * system.z_o**2 / 2.0 * system.scale_big_1**4


def coulomb_tail_ms(system: SystemDefinition) -> float:
    """Residual charge coefficient of the exit channel, mass-scaled.

    The proton sees the net charge z_o + z_mu of the (mu O) fragment:
    V(R_ms) = +C1 / R_ms with C1 = z_p (z_o + z_mu) scale_big_2.
    """
    return system.z_p * (system.z_o + system.z_mu) * system.scale_big_2
