"""Diabatic-by-sector channel basis on the elliptic hyper-angles.

At each sector center rho_n the fixed-rho eigenproblem

    { -(16/(2 m rho_n^2)) [L(eta) - L(xi)] + W(rho_n, eta, xi; eps) } phi = 0,
    L(u) = d/du (cos u - cos 2 theta_mu) d/du,
    W = (cos eta - cos xi) (V - eps),

is a zero-eigenvalue problem in the channel energy eps.  Equivalently it is
the generalized eigenproblem H phi = eps B phi with B the multiplication
operator (cos eta - cos xi).  The solution pipeline follows the separable
structure of W:

1. Galerkin 1D eigenproblems in eta and xi over normalized Legendre
   polynomials in the stretched variables etabar = eta / 2 theta_mu and
   xibar = (xi - pi) / (pi - 2 theta_mu), using the edge potentials
   W_eta, W_xi of the separable split.
2. For each 1D index pair (k, l) the root of
   eps_eta_k(eps) + eps_xi_l(eps) = 0 located by a bracketed Newton
   iteration (the classic bisection target; both eigenvalue curves are
   strictly decreasing in eps).
3. The lowest separable products seed a subspace in which the full
   (H, B) pencil is diagonalized, giving channel energies eps_i(rho_n)
   and eigenfunctions as coefficient tensors over the primitive
   Legendre x Legendre product basis.

Because the Coulomb interaction is homogeneous of degree -1, the potential
matrix scales exactly as 1/rho and the angular kinetic matrix as 1/rho^2;
each sector therefore stores two small matrices from which the coupling
matrix at any rho inside the sector is exact.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .constants import HARTREE_EV
from .kinematics import SystemDefinition
from .potential import ThreeBodyCoulomb
from .specfun import legendre_norm_table


class BasisError(RuntimeError):
    """Failure while constructing a sector basis."""


@dataclass(frozen=True)
class BasisParams:
    """Sizes and tolerances of the sector-basis construction.

    eta_stretch in [0, 1] blends the identity map with a cubic that
    clusters collocation resolution at both eta endpoints (the two
    coalescence corners); xi_stretch >= 1 is the power of the one-sided
    map clustering at the xi = 2 theta_mu edge, where every atomic
    channel localizes at large rho.
    """

    n_eta: int = 48
    n_xi: int = 96
    quad_eta: int = 0          # 0 -> derived from n_eta
    quad_xi: int = 0
    n_ch: int = 24
    n_sep: int = 0             # 0 -> derived from n_ch
    floor_ev: float | None = None
    sep_floor_margin_ev: float = 2500.0
    bisect_tol: float = 1e-10  # hartree, residual of the eigenvalue sum
    gram_cutoff: float = 1e-11
    eta_stretch: float = 1.0
    xi_stretch: float = 2.0

    def resolved(self) -> "BasisParams":
        qe = self.quad_eta or 2 * self.n_eta
        qx = self.quad_xi or 2 * self.n_xi
        ns = self.n_sep or (int(1.6 * self.n_ch) + 10)
        return BasisParams(self.n_eta, self.n_xi, qe, qx, self.n_ch, ns,
                           self.floor_ev, self.sep_floor_margin_ev,
                           self.bisect_tol, self.gram_cutoff,
                           self.eta_stretch, self.xi_stretch)


class Primitives:
    """Quadrature tables and primitive-basis matrices for one (system, sizes).

    The expansion functions are normalized Legendre polynomials in the
    collocation variables (s, t); the physical angles are reached through
    the stretching maps

        etabar(s) = (1 - a) s + a s (3 - s^2) / 2,    eta = 2 theta_mu etabar,
        xi(t)     = 2 theta_mu + (2 pi - 4 theta_mu) ((1 + t) / 2)^p,

    whose Jacobians are folded into every quadrature weight.  All matrices
    are plain integral arrays in the common product measure
    (d eta / 2 theta_mu) d xi, so no orthonormality of the primitives is
    assumed anywhere.  The potential profile v = rho V is rho-independent
    (Coulomb homogeneity); everything stored here is shared by all sectors.
    """

    def __init__(self, system: SystemDefinition, potential: ThreeBodyCoulomb,
                 params: BasisParams):
        params = params.resolved()
        self.system = system
        self.potential = potential
        self.params = params
        theta = system.theta_mu
        t2 = 2.0 * theta
        self.t2 = t2
        span = 2.0 * math.pi - 2.0 * t2

        a = params.eta_stretch
        p = params.xi_stretch

        def eta_map(s):
            return t2 * ((1.0 - a) * s + a * s * (3.0 - s * s) / 2.0)

        def eta_jac(s):      # d etabar / d s
            return (1.0 - a) + a * 1.5 * (1.0 - s * s)

        def xi_map(s):
            return t2 + span * ((1.0 + s) / 2.0)**p

        def xi_jac(s):       # d xi / d s
            return span * p * ((1.0 + s) / 2.0)**(p - 1.0) / 2.0

        self.eta_map, self.eta_jac = eta_map, eta_jac
        self.xi_map, self.xi_jac = xi_map, xi_jac

        # 2D quadrature grid (Gauss-Legendre in the collocation variables)
        xq_e, wq_e = np.polynomial.legendre.leggauss(params.quad_eta)
        xq_x, wq_x = np.polynomial.legendre.leggauss(params.quad_xi)
        self.eta_q = eta_map(xq_e)
        self.xi_q = xi_map(xq_x)
        je = eta_jac(xq_e)
        jx = xi_jac(xq_x)
        self.we_q = wq_e * je          # measure weights, d eta / (2 theta)
        self.wx_q = wq_x * jx          # measure weights, d xi

        self.pe, self.dpe = legendre_norm_table(params.n_eta, xq_e)
        self.px, self.dpx = legendre_norm_table(params.n_xi, xq_x)

        # separable angular weights w_eta = cos eta - cos 2theta >= 0,
        # w_xi = cos 2theta - cos xi >= 0
        w_eta_q = np.cos(self.eta_q) - math.cos(t2)
        w_xi_q = math.cos(t2) - np.cos(self.xi_q)
        self.w_eta_q = w_eta_q
        self.w_xi_q = w_xi_q

        # 1D matrices; the kinetic forms carry 1/jacobian from the chain rule
        self.t_eta = self._sym((self.dpe * (wq_e * w_eta_q / je)) @ self.dpe.T)
        self.t_xi = self._sym((self.dpx * (wq_x * w_xi_q / jx)) @ self.dpx.T)
        self.b_eta = self._sym((self.pe * (self.we_q * w_eta_q)) @ self.pe.T)
        self.b_xi = self._sym((self.px * (self.wx_q * w_xi_q)) @ self.px.T)
        self.m_eta = self._sym((self.pe * self.we_q) @ self.pe.T)
        self.m_xi = self._sym((self.px * self.wx_q) @ self.px.T)

        # edge potentials of the separable split; the xi edge carries the
        # shared corner value subtracted per its definition
        v_edge_eta = potential.angular_energy(self.eta_q, np.full_like(self.eta_q, t2))
        v_edge_xi = potential.angular_energy(np.full_like(self.xi_q, -t2), self.xi_q)
        corner = potential.corner_constant(1)
        self.v_eta = self._sym((self.pe * (self.we_q * w_eta_q * v_edge_eta)) @ self.pe.T)
        self.v_xi = self._sym(
            (self.px * (self.wx_q * (w_xi_q * v_edge_xi - corner))) @ self.px.T)

        # full 2D angular profile, quadrature-weighted:  sum_ij wv_q * u_ij
        # realizes the integral of (cos eta - cos xi) v u over the domain
        v2d = potential.angular_energy(self.eta_q[:, None], self.xi_q[None, :])
        w2d = w_eta_q[:, None] + w_xi_q[None, :]
        self.w2d_q = w2d
        self.wq_2d = np.outer(self.we_q, self.wx_q)
        self.wv_q = self.wq_2d * w2d * v2d

        self._pe_w = self.pe * self.we_q
        self._px_w = self.px * self.wx_q

    @staticmethod
    def _sym(a):
        return 0.5 * (a + a.T)

    # kinetic prefactors of the two 1D operators (hartree, rho in bohr)
    def c_eta(self, rho: float) -> float:
        th = self.system.theta_mu
        return 2.0 / (self.system.m_scale * rho * rho * th * th)

    def c_xi(self, rho: float) -> float:
        return 8.0 / (self.system.m_scale * rho * rho)

    # actions on coefficient tensors C of shape (n_eta, n_xi)
    def h_action(self, rho: float, coeff: np.ndarray) -> np.ndarray:
        grid = self.pe.T @ coeff @ self.px
        pot = self.pe @ (self.wv_q * grid) @ self.px.T / rho
        return (self.c_eta(rho) * (self.t_eta @ coeff @ self.m_xi.T)
                + self.c_xi(rho) * (self.m_eta @ coeff @ self.t_xi.T) + pot)

    def b_action(self, coeff: np.ndarray) -> np.ndarray:
        return self.b_eta @ coeff @ self.m_xi.T + self.m_eta @ coeff @ self.b_xi.T

    def grid_values(self, coeff: np.ndarray) -> np.ndarray:
        """Values of the expansion on the 2D quadrature grid."""
        return self.pe.T @ coeff @ self.px

    def project(self, grid_func: np.ndarray) -> np.ndarray:
        """Weighted projection <P_a P_b | (cos eta - cos xi) grid_func>."""
        return self._pe_w @ (self.w2d_q * grid_func) @ self._px_w.T


def solve_1d_eta(prim: Primitives, rho_n: float, eps: float):
    """Eigenpairs of the 1D eta operator at trial channel energy eps.

    Returns (eigenvalues ascending, coefficient columns over the Legendre
    primitives in the collocation variable); columns are orthonormal under
    the measure mass matrix.
    """
    if prim.params.n_eta < 4:
        raise BasisError("n_eta must be at least 4")
    a = (prim.c_eta(rho_n) * prim.t_eta + prim.v_eta / rho_n
         - eps * prim.b_eta)
    return eigh(a, prim.m_eta)


def solve_1d_xi(prim: Primitives, rho_n: float, eps: float):
    """Eigenpairs of the 1D xi operator at trial channel energy eps."""
    if prim.params.n_xi < 4:
        raise BasisError("n_xi must be at least 4")
    a = (prim.c_xi(rho_n) * prim.t_xi + prim.v_xi / rho_n
         - eps * prim.b_xi)
    return eigh(a, prim.m_xi)


@dataclass
class SeparableLevel:
    """One converged separable product: eps root and 1D eigenvectors."""

    eps: float
    k_eta: int
    k_xi: int
    vec_eta: np.ndarray
    vec_xi: np.ndarray
    residual: float


def _pair_root(prim, rho_n, k, l, eps0, tol):
    """Root of eps_eta_k(eps) + eps_xi_l(eps) = 0 by bracketed Newton.

    Both eigenvalue curves are strictly decreasing in eps (Hellmann-
    Feynman with positive weights), so the root is unique and the Newton
    slope is available from the eigenvectors for free.
    """

    def evaluate(eps):
        evals_e, vecs_e = solve_1d_eta(prim, rho_n, eps)
        evals_x, vecs_x = solve_1d_xi(prim, rho_n, eps)
        g = evals_e[k] + evals_x[l]
        ve = vecs_e[:, k]
        vx = vecs_x[:, l]
        slope = -(ve @ prim.b_eta @ ve + vx @ prim.b_xi @ vx)
        return g, slope, ve, vx

    eps = eps0
    lo, hi = -np.inf, np.inf        # g(lo) > 0 > g(hi)
    g, slope, ve, vx = evaluate(eps)
    for _ in range(200):
        if abs(g) < tol:
            return SeparableLevel(eps, k, l, ve, vx, abs(g))
        if g > 0.0:
            lo = max(lo, eps)
        else:
            hi = min(hi, eps)
        step = -g / slope
        eps_new = eps + step
        if not (lo < eps_new < hi):
            if np.isfinite(lo) and np.isfinite(hi):
                eps_new = 0.5 * (lo + hi)
            else:
                eps_new = eps + 2.0 * step
        eps = eps_new
        g, slope, ve, vx = evaluate(eps)
    raise BasisError(
        f"bisection for separable level (k={k}, l={l}) at rho={rho_n:.4g} "
        f"did not reach |residual| < {tol:g} (last {g:.3e})")


def find_separable_levels(prim: Primitives, rho_n: float, count: int,
                          floor: float | None = None) -> list[SeparableLevel]:
    """The `count` lowest separable levels at rho_n, ascending in eps.

    Levels below `floor` (hartree) are located but not returned; the
    frontier walk continues through them, which is how deep united-atom
    states are excluded from the working window.
    """
    tol = prim.params.bisect_tol
    kmax = prim.params.n_eta - 2
    lmax = prim.params.n_xi - 2
    out: list[SeparableLevel] = []
    seen = {(0, 0)}
    root0 = _pair_root(prim, rho_n, 0, 0, 0.0, tol)
    heap = [(root0.eps, 0, 0, root0)]
    while heap and len(out) < count:
        eps, k, l, level = heapq.heappop(heap)
        if floor is None or eps >= floor:
            out.append(level)
        for k2, l2 in ((k + 1, l), (k, l + 1)):
            if k2 > kmax or l2 > lmax or (k2, l2) in seen:
                continue
            seen.add((k2, l2))
            nxt = _pair_root(prim, rho_n, k2, l2, eps, tol)
            heapq.heappush(heap, (nxt.eps, k2, l2, nxt))
    if len(out) < count:
        raise BasisError(
            f"only {len(out)} separable levels available at rho={rho_n:.4g}; "
            f"increase primitive sizes")
    return out


@dataclass
class SectorBasis:
    """Channel basis of one sector, frozen at its center rho_n.

    coeffs[i] holds the expansion of channel i over the primitive Legendre
    product basis; columns are orthonormal under the (cos eta - cos xi)
    weighted inner product.  kin and pot are the angular kinetic and
    weighted-potential matrices at rho_n; inside the sector they scale
    exactly as (rho_n/rho)^2 and (rho_n/rho).
    """

    rho_n: float
    half_width: float
    energies: np.ndarray
    coeffs: np.ndarray
    labels: np.ndarray
    kin: np.ndarray
    pot: np.ndarray
    gram_cond: float
    offdiag_resid: float
    assignments: list | None = None

    @property
    def n_ch(self) -> int:
        return len(self.energies)


def _harvest_products(prim: Primitives, rho_n: float,
                      levels: list[SeparableLevel], width: int):
    """Separable products plus index-neighbors sharing each level's eps.

    The paired products alone converge slowly onto compact corner states
    (their 1D factors have linear-well profiles rather than the exponential
    decay of an atomic state); the neighbor columns from the same 1D
    solves enrich the span at negligible extra cost, and near-duplicates
    are pruned by the canonical orthogonalization downstream.
    """
    tensors = [np.outer(lv.vec_eta, lv.vec_xi) for lv in levels]
    tags = [(lv.k_eta, lv.k_xi) for lv in levels]
    if width > 0:
        offsets = [(dk, dl) for dk in range(-width, width + 1)
                   for dl in range(-width, width + 1)
                   if (dk, dl) != (0, 0) and abs(dk) + abs(dl) <= width]
        for lv in levels:
            _, vecs_e = solve_1d_eta(prim, rho_n, lv.eps)
            _, vecs_x = solve_1d_xi(prim, rho_n, lv.eps)
            for dk, dl in offsets:
                k2, l2 = lv.k_eta + dk, lv.k_xi + dl
                if k2 < 0 or l2 < 0 or k2 >= vecs_e.shape[1] or l2 >= vecs_x.shape[1]:
                    continue
                tensors.append(np.outer(vecs_e[:, k2], vecs_x[:, l2]))
                tags.append((k2, l2))
    return np.stack(tensors), tags


def build_sector_basis(prim: Primitives, rho_n: float,
                       half_width: float = 0.0,
                       harvest: int = 1) -> SectorBasis:
    """Diagonalize the fixed-rho_n Hamiltonian in the separable product basis."""
    params = prim.params
    floor = None
    if params.floor_ev is not None:
        floor = (params.floor_ev - params.sep_floor_margin_ev) / HARTREE_EV
    levels = find_separable_levels(prim, rho_n, params.n_sep, floor)

    basis, tags = _harvest_products(prim, rho_n, levels, harvest)
    h_img = np.stack([prim.h_action(rho_n, u) for u in basis])
    b_img = np.stack([prim.b_action(u) for u in basis])
    n_prod = basis.shape[0]
    flat = basis.reshape(n_prod, -1)
    h_sub = flat @ h_img.reshape(n_prod, -1).T
    b_sub = flat @ b_img.reshape(n_prod, -1).T
    h_sub = 0.5 * (h_sub + h_sub.T)
    b_sub = 0.5 * (b_sub + b_sub.T)

    # canonical orthogonalization guards against near-dependent products
    gw, gv = eigh(b_sub)
    keep = gw > params.gram_cutoff * gw[-1]
    if not np.any(keep):
        raise BasisError(f"separable overlap matrix singular at rho={rho_n:.4g}")
    gram_cond = float(gw[-1] / gw[keep][0])
    x = gv[:, keep] / np.sqrt(gw[keep])
    h_t = x.T @ h_sub @ x
    evals, q = eigh(0.5 * (h_t + h_t.T))
    mix = x @ q

    if floor is not None:
        sel = np.where(evals >= params.floor_ev / HARTREE_EV)[0]
    else:
        sel = np.arange(len(evals))
    if len(sel) < params.n_ch:
        raise BasisError(
            f"only {len(sel)} states above floor at rho={rho_n:.4g}; "
            f"increase n_sep or lower the floor")
    sel = sel[:params.n_ch]
    energies = evals[sel]

    coeffs = np.einsum("as,aij->sij", mix[:, sel], basis)
    norms = np.sqrt(np.einsum("sij,sij->s", coeffs,
                              np.stack([prim.b_action(c) for c in coeffs])))
    coeffs /= norms[:, None, None]

    # labels: dominant separable product in the weighted metric
    b_cols = np.stack([prim.b_action(c) for c in coeffs])
    salience = np.abs(flat @ b_cols.reshape(len(sel), -1).T)
    lbl_idx = np.argmax(salience, axis=0)
    labels = np.array([tags[a] for a in lbl_idx])

    h_cols = np.stack([prim.h_action(rho_n, c) for c in coeffs])
    hmat = coeffs.reshape(len(sel), -1) @ h_cols.reshape(len(sel), -1).T
    hmat = 0.5 * (hmat + hmat.T)
    offdiag = hmat - np.diag(energies)
    offdiag_resid = float(np.max(np.abs(offdiag)) / max(1.0, np.max(np.abs(energies))))

    pot_cols = np.stack([
        prim.pe @ (prim.wv_q * prim.grid_values(c)) @ prim.px.T / rho_n
        for c in coeffs])
    pot = coeffs.reshape(len(sel), -1) @ pot_cols.reshape(len(sel), -1).T
    pot = 0.5 * (pot + pot.T)
    kin = hmat - pot

    return SectorBasis(rho_n=float(rho_n), half_width=float(half_width),
                       energies=energies, coeffs=coeffs, labels=labels,
                       kin=kin, pot=pot, gram_cond=gram_cond,
                       offdiag_resid=offdiag_resid)


def coupling_matrix(system: SystemDefinition, sector: SectorBasis,
                    rho: float, slack: float = 1e-9) -> np.ndarray:
    """Coupling matrix W_cc(rho) of F'' = 2 m (W_cc - E) F inside a sector.

    Exact within the sector by Coulomb 1/rho homogeneity: the kinetic block
    scales as (rho_n/rho)^2, the potential block as (rho_n/rho); the
    (15/4) hbar^2 / (2 m rho^2) term comes from the rho^(5/2) reduction.
    """
    if abs(rho - sector.rho_n) > sector.half_width * (1.0 + 1e-8) + slack:
        raise BasisError(
            f"rho={rho:.6g} outside sector at rho_n={sector.rho_n:.6g}")
    s = sector.rho_n / rho
    red = 15.0 / (8.0 * system.m_scale * rho * rho)
    n = sector.n_ch
    return s * s * sector.kin + s * sector.pot + red * np.eye(n)


def sector_overlap(prim: Primitives, sector_a: SectorBasis,
                   sector_b: SectorBasis) -> np.ndarray:
    """Weighted overlap O_ij = <phi_i(rho_a) | phi_j(rho_b)>."""
    b_cols = np.stack([prim.b_action(c) for c in sector_b.coeffs])
    return (sector_a.coeffs.reshape(sector_a.n_ch, -1)
            @ b_cols.reshape(sector_b.n_ch, -1).T)


def eta_moment(prim: Primitives, sector: SectorBasis) -> np.ndarray:
    """<sign(eta)> per channel; negative favors the (p mu) arrangement side."""
    sgn = np.sign(prim.eta_q)[:, None]
    out = np.empty(sector.n_ch)
    for i, c in enumerate(sector.coeffs):
        grid = prim.grid_values(c)
        out[i] = float(np.sum(prim.wq_2d * prim.w2d_q * sgn * grid * grid))
    return out


@dataclass
class SectorGrid:
    """Geometric sector layout on [rho_min, rho_max]."""

    boundaries: np.ndarray

    @classmethod
    def geometric(cls, rho_min: float, rho_max: float, n_sectors: int):
        if not (0.0 < rho_min < rho_max) or n_sectors < 1:
            raise BasisError("invalid sector grid parameters")
        b = np.geomspace(rho_min, rho_max, n_sectors + 1)
        return cls(boundaries=b)

    @property
    def centers(self) -> np.ndarray:
        b = self.boundaries
        return np.sqrt(b[:-1] * b[1:])

    @property
    def half_widths(self) -> np.ndarray:
        b = self.boundaries
        c = self.centers
        return np.maximum(c - b[:-1], b[1:] - c)

    @property
    def n_sectors(self) -> int:
        return len(self.boundaries) - 1


def build_sectors(prim: Primitives, grid: SectorGrid, jobs: int = 1,
                  progress=None) -> list[SectorBasis]:
    """Construct every sector basis; embarrassingly parallel across sectors."""
    centers = grid.centers
    widths = grid.half_widths
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(build_sector_basis, prim, c, w)
                       for c, w in zip(centers, widths)]
            sectors = []
            for i, fut in enumerate(futures):
                sectors.append(fut.result())
                if progress:
                    progress(i + 1, len(centers))
            return sectors
    sectors = []
    for i, (c, w) in enumerate(zip(centers, widths)):
        sectors.append(build_sector_basis(prim, c, w))
        if progress:
            progress(i + 1, len(centers))
    return sectors


def boundary_rotations(prim: Primitives, sectors: list[SectorBasis]) -> np.ndarray:
    """max_i |1 - |O_ii|| at each interior boundary; the diabatic-quality gauge."""
    out = np.zeros(max(len(sectors) - 1, 0))
    for n in range(len(sectors) - 1):
        o = sector_overlap(prim, sectors[n], sectors[n + 1])
        out[n] = np.max(np.abs(1.0 - np.abs(np.diag(o))))
    return out
