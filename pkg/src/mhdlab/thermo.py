"""Constitutive laws for the planar MHD gas.

Pressure, internal energy and entropy combine a molecular part (Boyle term
plus a gamma-law cold component) with a quartic radiative part:

    p(rho, theta) = rho*theta + rho**gamma + (a/3)*theta**4
    e(rho, theta) = rho**(gamma-1)/(gamma-1) + c_V*theta + a*theta**4/rho
    s(rho, theta) = log(theta**c_V / rho) + (4a/3)*theta**3/rho

The three are tied together by the Gibbs relation
theta*Ds = De + p*D(1/rho), which this module can verify numerically
(`gibbs_residual`).  All functions accept scalars or numpy arrays and reject
non-positive densities and temperatures outright; flooring is a solver
decision, not a property of the math layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "EosParams",
    "ThermoPoint",
    "pressure",
    "pressure_split",
    "internal_energy",
    "internal_energy_split",
    "entropy",
    "entropy_split",
    "gibbs_residual",
    "stability_check",
    "helmholtz",
    "helmholtz_drho",
    "coercivity_margin",
    "transport",
    "viscous_stress",
    "heat_flux",
]


@dataclass(frozen=True)
class EosParams:
    """Constitutive constants.

    gamma   : adiabatic exponent, > 1
    a       : radiation constant, > 0
    c_V     : specific heat at constant volume, > 0
    mu0,mu1 : shear viscosity mu(theta) = mu0 + mu1*theta
    kappa0, kappa2, kappa3 : conductivity kappa(theta) = k0 + k2 th^2 + k3 th^3

    Defaults are the documented desk-scale choice (gamma = 5/3, all other
    constants 1); the functional forms are fixed, the magnitudes are not.
    """

    gamma: float = 5.0 / 3.0
    a: float = 1.0
    c_V: float = 1.0
    mu0: float = 1.0
    mu1: float = 1.0
    kappa0: float = 1.0
    kappa2: float = 1.0
    kappa3: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must be > 1, got {self.gamma}")
        for name in ("a", "c_V", "mu0", "mu1", "kappa0", "kappa2", "kappa3"):
            val = getattr(self, name)
            if not val > 0.0:
                raise DomainError(f"{name} must be > 0, got {val}")

    def mu(self, theta):
        """Shear viscosity mu(theta) = mu0 + mu1*theta."""
        return self.mu0 + self.mu1 * theta

    def kappa(self, theta):
        """Heat conductivity kappa(theta) = kappa0 + kappa2 th^2 + kappa3 th^3."""
        return self.kappa0 + self.kappa2 * theta**2 + self.kappa3 * theta**3


@dataclass(frozen=True)
class ThermoPoint:
    """A density/temperature pair; both strictly positive (scalar or array)."""

    rho: object
    theta: object

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if rho.size == 0 or theta.size == 0:
            raise DomainError("empty thermodynamic state")
        if not np.all(rho > 0.0):
            raise DomainError(f"rho must be > 0, min={rho.min() if rho.size else '∅'}")
        if not np.all(theta > 0.0):
            raise DomainError(f"theta must be > 0, min={theta.min()}")
        object.__setattr__(self, "rho", rho if rho.ndim else float(rho))
        object.__setattr__(self, "theta", theta if theta.ndim else float(theta))


def pressure_split(pt: ThermoPoint, p: EosParams):
    """Molecular and radiative pressure parts (p_M, p_R)."""
    rho, theta = pt.rho, pt.theta
    p_m = rho * theta + rho**p.gamma
    p_r = (p.a / 3.0) * theta**4
    return p_m, p_r


def pressure(pt: ThermoPoint, p: EosParams):
    p_m, p_r = pressure_split(pt, p)
    return p_m + p_r


def internal_energy_split(pt: ThermoPoint, p: EosParams):
    """Molecular and radiative specific internal energy parts (e_M, e_R)."""
    rho, theta = pt.rho, pt.theta
    e_m = rho ** (p.gamma - 1.0) / (p.gamma - 1.0) + p.c_V * theta
    e_r = p.a * theta**4 / rho
    return e_m, e_r


def internal_energy(pt: ThermoPoint, p: EosParams):
    e_m, e_r = internal_energy_split(pt, p)
    return e_m + e_r


def entropy_split(pt: ThermoPoint, p: EosParams):
    """Molecular and radiative specific entropy parts (s_M, s_R)."""
    rho, theta = pt.rho, pt.theta
    s_m = p.c_V * np.log(theta) - np.log(rho)
    s_r = (4.0 * p.a / 3.0) * theta**3 / rho
    return s_m, s_r


def entropy(pt: ThermoPoint, p: EosParams):
    s_m, s_r = entropy_split(pt, p)
    return s_m + s_r


def _central4(f, x, h):
    """Five-point fourth-order central difference of f at x."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def gibbs_residual(pt: ThermoPoint, p: EosParams, h: float) -> float:
    """Central-difference check of theta*Ds = De + p*D(1/rho).

    Both partial-derivative identities (in rho and in theta) are formed with
    five-point central differences of step ``h`` and the larger violation is
    returned, relative to max(1, |e|).  The analytic identity holds exactly,
    so the result is pure truncation error; the fourth-order stencil keeps it
    below 1e-6 even at rho = 0.1 where the log term's high derivatives blow
    up a second-order stencil.
    """
    if not h > 0.0:
        raise DomainError(f"step h must be > 0, got {h}")
    rho = np.asarray(pt.rho, dtype=float)
    theta = np.asarray(pt.theta, dtype=float)
    if np.any(rho - 2 * h <= 0.0) or np.any(theta - 2 * h <= 0.0):
        raise DomainError("finite-difference stencil leaves the domain rho, theta > 0")

    p_val = pressure(pt, p)
    e_val = internal_energy(pt, p)

    ds_drho = _central4(lambda r: entropy(ThermoPoint(r, theta), p), rho, h)
    de_drho = _central4(lambda r: internal_energy(ThermoPoint(r, theta), p), rho, h)
    dinv_drho = _central4(lambda r: 1.0 / r, rho, h)
    res_rho = theta * ds_drho - de_drho - p_val * dinv_drho

    ds_dth = _central4(lambda t: entropy(ThermoPoint(rho, t), p), theta, h)
    de_dth = _central4(lambda t: internal_energy(ThermoPoint(rho, t), p), theta, h)
    res_th = theta * ds_dth - de_dth

    scale = np.maximum(1.0, np.abs(e_val))
    return float(np.max(np.maximum(np.abs(res_rho), np.abs(res_th)) / scale))


def stability_check(pt: ThermoPoint, p: EosParams, h: float | None = None):
    """Thermodynamic stability partials (dp/drho, de/dtheta), both > 0.

    With the default ``h=None`` the closed forms
    dp/drho = theta + gamma*rho**(gamma-1) and
    de/dtheta = c_V + 4a theta^3 / rho are returned; passing a step ``h``
    returns the central-difference estimates instead, so the two routes can
    be compared against each other.
    """
    rho, theta = pt.rho, pt.theta
    if h is None:
        dpdrho = theta + p.gamma * rho ** (p.gamma - 1.0)
        dedtheta = p.c_V + 4.0 * p.a * theta**3 / rho
        return dpdrho, dedtheta
    if not h > 0.0:
        raise DomainError(f"step h must be > 0, got {h}")
    if np.any(np.asarray(rho) - h <= 0.0) or np.any(np.asarray(theta) - h <= 0.0):
        raise DomainError("finite-difference stencil leaves the domain rho, theta > 0")
    inv2h = 1.0 / (2.0 * h)
    dpdrho = (
        pressure(ThermoPoint(rho + h, theta), p)
        - pressure(ThermoPoint(rho - h, theta), p)
    ) * inv2h
    dedtheta = (
        internal_energy(ThermoPoint(rho, theta + h), p)
        - internal_energy(ThermoPoint(rho, theta - h), p)
    ) * inv2h
    return dpdrho, dedtheta


def helmholtz(pt: ThermoPoint, p: EosParams, theta_bar: float):
    """Helmholtz function H = rho*e - theta_bar * rho*s.

    For fixed rho the map theta -> H is minimized at theta = theta_bar.
    """
    if not theta_bar > 0.0:
        raise DomainError(f"theta_bar must be > 0, got {theta_bar}")
    rho = pt.rho
    return rho * internal_energy(pt, p) - theta_bar * rho * entropy(pt, p)


def helmholtz_drho(rho, p: EosParams, theta_bar: float, theta):
    """d/drho of H_theta_bar(rho, theta), closed form."""
    d_rhoe = p.gamma * rho ** (p.gamma - 1.0) / (p.gamma - 1.0) + p.c_V * theta
    d_rhos = p.c_V * np.log(theta) - np.log(rho) - 1.0
    return d_rhoe - theta_bar * d_rhos


def coercivity_margin(pt: ThermoPoint, p: EosParams, theta_bar: float = 1.0,
                      rho_bar: float = 1.0):
    """Margin (LHS - RHS) of the Helmholtz coercivity bound.

    The bound controls H_tb(rho, theta) from below by
    (1/4)(rho e + tb rho |s|) minus an affine-in-rho pivot evaluated at
    (rho_bar, 2 tb); a nonnegative margin certifies it at the sampled point.
    """
    rho = pt.rho
    lhs = helmholtz(pt, p, theta_bar)
    e_val = internal_energy(pt, p)
    s_val = entropy(pt, p)
    pivot_pt = ThermoPoint(rho_bar, 2.0 * theta_bar)
    h_pivot = helmholtz(pivot_pt, p, 2.0 * theta_bar)
    dh_pivot = helmholtz_drho(rho_bar, p, 2.0 * theta_bar, 2.0 * theta_bar)
    rhs = 0.25 * (rho * e_val + theta_bar * rho * np.abs(s_val)) - np.abs(
        (rho - rho_bar) * dh_pivot + h_pivot
    )
    return lhs - rhs


def transport(theta, p: EosParams, delta: float, Gamma: float):
    """Transport coefficients and the augmented-conductivity primitive.

    Returns (mu, kappa, kappa_delta, K_delta) where
    kappa_delta = kappa + delta*(theta**Gamma + 1/theta) and
    K_delta(theta) = int_1^theta kappa_delta(z) dz in closed form.
    """
    theta = np.asarray(theta, dtype=float)
    if not np.all(theta > 0.0):
        raise DomainError("theta must be > 0")
    if delta < 0.0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    if Gamma < 2.0:
        raise DomainError(f"Gamma must be >= 2, got {Gamma}")
    mu = p.mu(theta)
    kappa = p.kappa(theta)
    kappa_delta = kappa + delta * (theta**Gamma + 1.0 / theta)
    K_delta = (
        p.kappa0 * (theta - 1.0)
        + p.kappa2 * (theta**3 - 1.0) / 3.0
        + p.kappa3 * (theta**4 - 1.0) / 4.0
        + delta * ((theta ** (Gamma + 1.0) - 1.0) / (Gamma + 1.0) + np.log(theta))
    )
    if theta.ndim == 0:
        return float(mu), float(kappa), float(kappa_delta), float(K_delta)
    return mu, kappa, kappa_delta, K_delta


def viscous_stress(grad_u, theta, p: EosParams):
    """Traceless viscous stress S = mu(theta)(grad u + grad u^T - div u I)."""
    g = np.asarray(grad_u, dtype=float)
    if g.shape != (2, 2):
        raise DomainError(f"grad_u must be 2x2, got shape {g.shape}")
    div = g[0, 0] + g[1, 1]
    s = g + g.T
    s[0, 0] -= div
    s[1, 1] -= div
    return p.mu(theta) * s


def heat_flux(grad_theta, theta, p: EosParams):
    """Fourier flux q = -kappa(theta) * grad theta."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(theta > 0.0):
        raise DomainError("theta must be > 0")
    return -p.kappa(theta) * np.asarray(grad_theta, dtype=float)
