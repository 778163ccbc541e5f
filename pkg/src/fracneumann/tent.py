"""The tent test function and the closed-form constants of the energy bound.

The tent bump ``phi(x) = eps**(-dim) (1 - |x|/eps)`` for ``|x| <= eps`` (zero
outside) drives every quantitative certificate of the small-energy regime:
its Lq masses have the closed form ``K_q eps**((1-q) dim)``, a unique level
``sigma`` splits its squared mass in half, and the ray energy
``g(t) = energy(t phi)`` is provably negative beyond an explicit threshold.
All constants here are exact or bisection-accurate so the solver-side
certificates have something rigid to lean on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import beta as _beta, gamma as _gamma

from .mesh import DomainMesh
from .operators import bilinear_form
from .problem import ProblemSpec, energy, f_eval

__all__ = [
    "unit_ball_volume",
    "phi_eps",
    "K_q",
    "solve_sigma",
    "g_of_t",
    "g_prime",
    "TentThresholds",
    "thresholds",
]


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in ``dim`` dimensions."""
    return float(np.pi ** (dim / 2.0) / _gamma(dim / 2.0 + 1.0))


def phi_eps(mesh: DomainMesh, eps: float) -> np.ndarray:
    """Nodal values of the tent bump of width eps centered at the origin.

    Requires the ball of radius eps around the origin to fit inside the
    domain; the bump vanishes identically on the collar.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    origin = np.zeros((1, mesh.dim))
    if not bool(mesh.contains(origin)[0]):
        raise ValueError("domain must contain the origin for the tent bump")
    if float(mesh.distance_to_domain(origin)[0]) == 0.0:
        d = mesh.domain_descriptor
        if d["kind"] == "interval":
            clearance = min(-d["a"], d["b"])
        else:
            clearance = min(-d["ax"], d["bx"], -d["ay"], d["by"])
        if eps > clearance:
            raise ValueError(
                f"eps={eps} too large: the ball B_eps(0) leaves the domain "
                f"(clearance {clearance:.6g})"
            )
    r = np.linalg.norm(mesh.nodes, axis=1)
    return eps ** (-mesh.dim) * np.maximum(1.0 - r / eps, 0.0)


def K_q(dim: int, q: float) -> float:
    """Closed form of the tent Lq mass constant.

    ``K_q = dim * omega_dim * integral_0^1 (1-rho)**q rho**(dim-1) drho``,
    evaluated exactly through the Beta function ``B(dim, q+1)``.
    """
    if q <= 0.0:
        raise ValueError(f"need q > 0, got q={q}")
    return float(dim * unit_ball_volume(dim) * _beta(dim, q + 1.0))


def _sigma_gap(sigma: float, dim: int) -> float:
    t = 1.0 - sigma
    poly = 1.0 / dim - 2.0 * t / (dim + 1.0) + t * t / (dim + 2.0)
    full = 1.0 / dim - 2.0 / (dim + 1.0) + 1.0 / (dim + 2.0)
    return t**dim * poly - 0.5 * full


def solve_sigma(dim: int, tol: float = 1e-12) -> float:
    """The unique level sigma in (0, 1) at which the superlevel set
    ``{phi > sigma eps**(-dim)}`` carries half the squared mass of the tent.

    Solved by bisection on the dimensionless half-mass equation; the
    displayed equation carries the factor 1/2 on the full-mass side (without
    it the root degenerates to sigma = 0).  In 1D the equation reduces to
    ``(t-1)^3 = -1/2`` and the root is ``sigma = 2**(-1/3)``.
    """
    if dim < 1:
        raise ValueError(f"need dim >= 1, got {dim}")
    lo, hi = 0.0, 1.0
    flo = _sigma_gap(1e-15, dim)
    fhi = _sigma_gap(1.0 - 1e-15, dim)
    if not (flo > 0.0 > fhi):
        raise RuntimeError(
            "half-mass equation has no sign change on (0, 1); "
            "the tent-mass implementation is broken"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _sigma_gap(mid, dim) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def g_of_t(spec: ProblemSpec, phi: np.ndarray, t: float) -> float:
    """Energy along the tent ray: ``g(t) = energy(t * phi)``."""
    return energy(spec, t * phi)


def g_prime(spec: ProblemSpec, phi: np.ndarray, t: float) -> float:
    """Exact derivative of the ray energy:
    ``t ||phi||^2 - integral f(t phi) phi``."""
    norm_sq = bilinear_form(spec.op, phi, phi)
    ni = spec.mesh.n_interior
    vol = spec.mesh.cell_volume
    fi = f_eval(spec.nonlinearity, t * phi[:ni])
    return t * norm_sq - vol * float(fi @ phi[:ni])


@dataclass(frozen=True)
class TentThresholds:
    """Ray-energy thresholds and the small-energy bound, with certificates."""

    t1: float              # ray energy decreases beyond t1
    t2: float              # ray energy is negative from t2 on
    bound: float           # max_t g(t) <= bound = c1 * eps**dim
    c_est: float           # measured eps**dim * ||phi||^2
    g_max: float           # largest ray energy seen on the certificate scan
    scan_ok: bool          # both scan certificates passed
    failures: list


def thresholds(spec: ProblemSpec, phi: np.ndarray,
               scan_points: int = 160) -> TentThresholds:
    """Compute the ray-energy thresholds (t1, t2) and the energy bound.

    Only available for the power model, whose superlinearity threshold is
    explicit: ``f(xi) >= R xi`` exactly when ``xi >= R**(1/(p-2))``.  The
    slope thresholds are taken at twice their minimal values (R1 = 4 C / K2,
    R2 = 2 C / K2, with C the measured tent energy ``eps**dim ||phi||^2``)
    so the scan certificates are robust to quadrature error.  The scan
    checks ``g'(t) < 0`` for sampled ``t > t1`` and ``g(t) < 0`` for sampled
    ``t >= t2``; failures are collected, not raised.
    """
    nl = spec.nonlinearity
    if nl.model != "power":
        raise ValueError(
            "thresholds need the explicit power-model superlinearity "
            "constant; screen other models separately"
        )
    eps, dim, p = spec.eps, spec.dim, nl.p
    norm_sq = bilinear_form(spec.op, phi, phi)
    c_est = eps**dim * norm_sq
    k2 = K_q(dim, 2.0)
    sigma = solve_sigma(dim)
    omega = spec.mesh.domain_measure()

    r1 = 4.0 * c_est / k2
    m_r1 = r1 ** (1.0 / (p - 2.0))
    t1 = m_r1 * eps**dim / sigma

    r2 = 2.0 * c_est / k2
    m_r2 = r2 ** (1.0 / (p - 2.0))
    m_small = m_r2 * m_r2 * r2 / 2.0
    t2_energy = np.sqrt(2.0 * m_small * omega * eps**dim / (r2 * k2 - c_est))
    t2 = max(1.01 * t1, 1.01 * t2_energy)

    c1 = c_est * m_r1 * m_r1 / (2.0 * sigma * sigma)
    bound = c1 * eps**dim

    failures = []
    g_max = -np.inf
    for t in np.geomspace(1e-6, 10.0 * t2, scan_points):
        g_max = max(g_max, g_of_t(spec, phi, t))
    for t in np.geomspace(1.01 * t1, 10.0 * t2, scan_points):
        if g_prime(spec, phi, t) >= 0.0:
            failures.append(("g_prime_nonnegative", float(t)))
    for t in np.geomspace(t2, 10.0 * t2, scan_points):
        if g_of_t(spec, phi, t) >= 0.0:
            failures.append(("g_nonnegative", float(t)))
    if g_max > bound:
        failures.append(("g_max_exceeds_bound", float(g_max)))

    return TentThresholds(
        t1=float(t1), t2=float(t2), bound=float(bound), c_est=float(c_est),
        g_max=float(g_max), scan_ok=not failures, failures=failures,
    )
