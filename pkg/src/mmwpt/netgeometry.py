"""Blockage geometry and Poisson-network primitives.

Distances are in metres, densities in BS per m^2. LoS probability is
exponential in distance, which gives closed forms for the LoS/NLoS
mean-measure functions used throughout the analytic engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .params import ConfigError, LinkClass, SystemParams
from .quadrature import CumulativeTail, QuadSpec, integrate, integrate_semi_inf

__all__ = [
    "BsPoint",
    "NetworkRealization",
    "EmptyDeployment",
    "los_probability",
    "theta_fn",
    "xi_fn",
    "boundary_los_to_nlos",
    "boundary_nlos_to_los",
    "assoc_pdf_los",
    "assoc_pdf_nlos",
    "los_assoc_probability",
    "nlos_assoc_probability",
    "integrate_assoc",
    "assoc_tail",
    "AssocKernel",
    "realization_from_points",
    "assoc_breakpoints",
    "path_gain",
    "serving_index",
    "sample_realization",
    "empty_probability",
    "default_sim_radius",
]


def _check_distance(x, name="distance"):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError(f"{name} must be >= 0")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def los_probability(r, params: SystemParams):
    """exp(-r / L) with L the blockage decay length."""
    r = _check_distance(r)
    return _out(np.exp(-r / params.los_decay_length))


def theta_fn(x, params: SystemParams):
    """int_0^x t f_Pr(t) dt = L^2 * P(2, x/L) (regularised lower gamma)."""
    x = _check_distance(x)
    L = params.los_decay_length
    return _out(L * L * special.gammainc(2.0, x / L))


def xi_fn(x, params: SystemParams):
    """int_0^x t (1 - f_Pr(t)) dt, defined as x^2/2 - theta so the pair sums exactly."""
    x = _check_distance(x)
    return _out(0.5 * x * x - np.asarray(theta_fn(x, params)))


def boundary_los_to_nlos(x, params: SystemParams):
    """NLoS distance with the same path loss as a LoS link of length ``x``."""
    x = _check_distance(x)
    p = params
    return _out((p.beta_nlos / p.beta_los) ** (1.0 / p.alpha_nlos) * x ** (p.alpha_los / p.alpha_nlos))


def boundary_nlos_to_los(x, params: SystemParams):
    """LoS distance with the same path loss as a NLoS link of length ``x``."""
    x = _check_distance(x)
    p = params
    return _out((p.beta_los / p.beta_nlos) ** (1.0 / p.alpha_los) * x ** (p.alpha_nlos / p.alpha_los))


def assoc_pdf_los(x, params: SystemParams):
    """Joint density of {serving BS is LoS, serving distance = x}.

    Unnormalised: integrates to the LoS association probability, and together
    with :func:`assoc_pdf_nlos` to one.
    """
    x = _check_distance(x)
    two_pi_rho = 2.0 * math.pi * params.bs_density
    void = np.asarray(theta_fn(x, params)) + np.asarray(xi_fn(boundary_los_to_nlos(x, params), params))
    return _out(two_pi_rho * x * np.asarray(los_probability(x, params)) * np.exp(-two_pi_rho * void))


def assoc_pdf_nlos(x, params: SystemParams):
    """Joint density of {serving BS is NLoS, serving distance = x}."""
    x = _check_distance(x)
    two_pi_rho = 2.0 * math.pi * params.bs_density
    void = np.asarray(theta_fn(boundary_nlos_to_los(x, params), params)) + np.asarray(xi_fn(x, params))
    # 1 - exp(-x/L) without cancellation near zero
    nlos = -np.expm1(-x / params.los_decay_length)
    return _out(two_pi_rho * x * nlos * np.exp(-two_pi_rho * void))


def assoc_breakpoints(params: SystemParams, link: LinkClass) -> list[float]:
    """Length scales where the association densities change character."""
    mean_nn = 0.5 / math.sqrt(params.bs_density)
    L = params.los_decay_length
    pts = {params.ref_dist_m, L, mean_nn, 4 * mean_nn}
    if link is LinkClass.NLOS:
        pts.add(float(boundary_los_to_nlos(L, params)))
    return sorted(p for p in pts if p > 0)


def _theta_scalar(x: float, L: float) -> float:
    u = x / L
    if u < 1e-3:
        # 1 - e^-u (1 + u) by series; the closed form cancels for small u
        g = u * u * (0.5 - u * (1.0 / 3.0 - u * (0.125 - u / 30.0)))
    else:
        g = -math.expm1(-u) - u * math.exp(-u)
    return L * L * g


class AssocKernel:
    """Scalar fast path for the association densities of one parameter set.

    Used inside nested quadrature where numpy's per-call overhead dominates.
    """

    def __init__(self, params: SystemParams):
        p = params
        self.params = p
        self.L = float(p.los_decay_length)
        self.two_pi_rho = 2.0 * math.pi * p.bs_density
        self.c_ln = (p.beta_nlos / p.beta_los) ** (1.0 / p.alpha_nlos)
        self.e_ln = p.alpha_los / p.alpha_nlos
        self.c_nl = (p.beta_los / p.beta_nlos) ** (1.0 / p.alpha_los)
        self.e_nl = p.alpha_nlos / p.alpha_los

    def pdf_los(self, x: float) -> float:
        L = self.L
        y = self.c_ln * x ** self.e_ln
        void = _theta_scalar(x, L) + (0.5 * y * y - _theta_scalar(y, L))
        return self.two_pi_rho * x * math.exp(-x / L - self.two_pi_rho * void)

    def pdf_nlos(self, x: float) -> float:
        L = self.L
        y = self.c_nl * x ** self.e_nl
        void = _theta_scalar(y, L) + (0.5 * x * x - _theta_scalar(x, L))
        return self.two_pi_rho * x * -math.expm1(-x / L) * math.exp(-self.two_pi_rho * void)

    def pdf(self, link: LinkClass):
        return self.pdf_los if link is LinkClass.LOS else self.pdf_nlos


def _assoc_scale(params: SystemParams) -> float:
    return max(min(params.ref_dist_m, 0.5 / math.sqrt(params.bs_density), params.los_decay_length), 1e-3)


def integrate_assoc(link: LinkClass, params: SystemParams, lo: float = 0.0, hi: float = math.inf,
                    weight=None, spec: QuadSpec | None = None):
    """int_lo^hi weight(x) * assoc_pdf_<link>(x) dx as a QuadResult."""
    pdf = AssocKernel(params).pdf(link)
    if weight is None:
        f = pdf
    else:
        f = lambda x: weight(x) * pdf(x)  # noqa: E731
    bps = assoc_breakpoints(params, link)
    if math.isinf(hi):
        return integrate_semi_inf(f, lo, spec, scale=_assoc_scale(params), breakpoints=bps)
    return integrate(f, lo, hi, spec, breakpoints=bps)


def assoc_tail(link: LinkClass, params: SystemParams, spec: QuadSpec | None = None) -> CumulativeTail:
    """Tabulated ``y -> int_y^inf assoc_pdf_<link>`` for repeated tail queries."""
    scale = _assoc_scale(params)
    top = 40.0 * max(0.5 / math.sqrt(params.bs_density), params.los_decay_length)
    grid = np.geomspace(scale * 1e-3, top, 121)
    return CumulativeTail(AssocKernel(params).pdf(link), grid, spec,
                          breakpoints=assoc_breakpoints(params, link))


def los_assoc_probability(params: SystemParams, spec: QuadSpec | None = None) -> float:
    """Probability that the typical user is served by a LoS BS."""
    spec = spec or QuadSpec(rel_tol=1e-10, abs_tol=1e-13)
    return integrate_assoc(LinkClass.LOS, params, spec=spec).require("LoS association probability")


def nlos_assoc_probability(params: SystemParams, spec: QuadSpec | None = None) -> float:
    spec = spec or QuadSpec(rel_tol=1e-10, abs_tol=1e-13)
    return integrate_assoc(LinkClass.NLOS, params, spec=spec).require("NLoS association probability")


# ---------------------------------------------------------------------------
# Deployment sampling

@dataclass(frozen=True)
class BsPoint:
    radius_m: float
    azimuth_rad: float
    link: LinkClass

    def __post_init__(self):
        if self.radius_m < 0:
            raise ValueError("radius_m must be >= 0")
        if not 0.0 <= self.azimuth_rad < 2 * math.pi:
            raise ValueError("azimuth_rad must lie in [0, 2pi)")


@dataclass(frozen=True)
class NetworkRealization:
    bss: tuple[BsPoint, ...]
    serving_idx: int
    sim_radius_m: float
    radii: np.ndarray = field(repr=False, compare=False, default=None)
    azimuths: np.ndarray = field(repr=False, compare=False, default=None)
    is_los: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def serving(self) -> BsPoint:
        return self.bss[self.serving_idx]

    def __eq__(self, other):
        if not isinstance(other, NetworkRealization):
            return NotImplemented
        return (self.bss, self.serving_idx, self.sim_radius_m) == (
            other.bss, other.serving_idx, other.sim_radius_m)

    __hash__ = None


class EmptyDeployment(RuntimeError):
    """No BS fell inside the simulation disk."""

    def __init__(self, seed, sim_radius_m):
        super().__init__(f"empty deployment (seed={seed}, sim_radius_m={sim_radius_m})")
        self.seed = seed
        self.sim_radius_m = sim_radius_m


def path_gain(r, is_los, params: SystemParams):
    """beta * max(r, D)^-alpha per link class (vectorised)."""
    r = np.maximum(np.asarray(r, dtype=float), params.ref_dist_m)
    is_los = np.asarray(is_los, dtype=bool)
    return np.where(is_los,
                    params.beta_los * r ** -params.alpha_los,
                    params.beta_nlos * r ** -params.alpha_nlos)


def serving_index(gains) -> int:
    """Index of the largest path gain; first occurrence wins ties."""
    return int(np.argmax(np.asarray(gains)))


def empty_probability(params: SystemParams, sim_radius_m: float) -> float:
    return math.exp(-params.bs_density * math.pi * sim_radius_m ** 2)


def default_sim_radius(params: SystemParams, p_empty: float = 1e-9, tail_tol: float = 1e-2) -> float:
    """Simulation-disk radius for a parameter set.

    The radius is the larger of (a) the radius with P(empty disk) <= p_empty
    and (b) the radius beyond which the mean interference from all BSs is at
    most ``tail_tol`` times the mean power received from a single unit-gain
    BS at the typical serving distance. Rounded up to whole metres.
    """
    rho = params.bs_density
    r_empty = math.sqrt(-math.log(p_empty) / (math.pi * rho))
    L = params.los_decay_length
    r_nn = 0.5 / math.sqrt(rho)
    ref = float(path_gain(max(r_nn, params.ref_dist_m), r_nn < L, params))

    def tail(R):
        los = params.beta_los * _upper_gamma_tail(2.0 - params.alpha_los, R, L)
        nlos = params.beta_nlos * R ** (2.0 - params.alpha_nlos) / (params.alpha_nlos - 2.0) \
            if params.alpha_nlos > 2.0 else math.inf
        return 2.0 * math.pi * rho * (los + nlos)

    r_tail = max(params.ref_dist_m, r_nn)
    while tail(r_tail) > tail_tol * ref and r_tail < 1e7:
        r_tail *= 1.25
    return float(math.ceil(max(r_empty, r_tail)))


def _upper_gamma_tail(s: float, R: float, L: float) -> float:
    """int_R^inf t^(s-1) exp(-t/L) dt for R > 0, any real s."""
    if s > 0:
        return L ** s * special.gamma(s) * special.gammaincc(s, R / L)
    if s == 0:
        return float(special.exp1(R / L))
    # crude bound for negative s: t^(s-1) <= R^(s-1)
    return R ** (s - 1.0) * L * math.exp(-R / L)


def sample_realization(params: SystemParams, sim_radius_m: float | None = None,
                       rng_seed=None) -> NetworkRealization:
    """Draw one PPP deployment around the typical user at the origin.

    Raises :class:`EmptyDeployment` when the disk holds no BS, and
    :class:`ConfigError` when the radius makes that event likelier than 1e-6.
    """
    if sim_radius_m is None:
        sim_radius_m = default_sim_radius(params)
    if sim_radius_m <= 0:
        raise ConfigError("must be > 0", "sim_radius_m")
    if empty_probability(params, sim_radius_m) > 1e-6:
        raise ConfigError(
            f"P(empty disk) = {empty_probability(params, sim_radius_m):.3g} exceeds 1e-6; "
            "increase the simulation radius", "sim_radius_m")
    rng = np.random.default_rng(rng_seed)
    n = rng.poisson(params.bs_density * math.pi * sim_radius_m ** 2)
    if n == 0:
        raise EmptyDeployment(rng_seed, sim_radius_m)
    radii = sim_radius_m * np.sqrt(rng.random(n))
    azimuths = 2.0 * math.pi * rng.random(n)
    # guard the open upper end of [0, 2pi) against rounding
    azimuths[azimuths >= 2.0 * math.pi] = 0.0
    is_los = rng.random(n) < np.exp(-radii / params.los_decay_length)
    idx = serving_index(path_gain(radii, is_los, params))
    bss = tuple(BsPoint(float(r), float(a), LinkClass.LOS if l else LinkClass.NLOS)
                for r, a, l in zip(radii, azimuths, is_los))
    return NetworkRealization(bss, idx, float(sim_radius_m), radii, azimuths, is_los)


def realization_from_points(points, params: SystemParams, sim_radius_m: float) -> NetworkRealization:
    """Build a realization from explicit BS points (degenerate scenarios and tests)."""
    pts = tuple(points)
    if not pts:
        raise EmptyDeployment(None, sim_radius_m)
    radii = np.array([p.radius_m for p in pts])
    az = np.array([p.azimuth_rad for p in pts])
    los = np.array([p.link is LinkClass.LOS for p in pts])
    idx = serving_index(path_gain(radii, los, params))
    return NetworkRealization(pts, idx, float(sim_radius_m), radii, az, los)
