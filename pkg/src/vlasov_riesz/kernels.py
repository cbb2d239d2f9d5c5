r"""Interaction potentials and force fields for the Riesz-type coupling.

Two equivalent descriptions of the interaction are supported:

* multiplier form: Phi = kappa * Lambda^{-beta} rho, where Lambda^{-beta} is
  the Fourier multiplier |k|^{-beta} (k = 0 gauged to zero on the torus);
* kernel-sum form: Phi = K * rho with K(x) = sum_i c_i |x|^{-alpha_i},
  evaluated as a free-space convolution.

On R^d the two are related by Lambda^{-beta} = r(d, beta) * |x|^{beta-d} *
with the Riesz normalization

    r(d, beta) = Gamma((d - beta)/2) / (2^beta pi^{d/2} Gamma(beta/2)),

so a kernel term c |x|^{-alpha} corresponds to kappa = c / r(d, beta) with
beta = d - alpha.  Evolution on the periodic box always uses the torus
multiplier; the blow-up functionals always use free-space kernels, so the
normalization enters conversions only and is reported in run metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve
from scipy.special import gamma as gamma_fn, hyp2f1

from .grid import GridShapeError, PhaseGrid


class KernelFormError(ValueError):
    """Operation received the wrong KernelSpec variant."""


class UnsupportedOrderError(ValueError):
    """Kernel exponent outside the convertible range."""


class DivergentKernelError(ValueError):
    """Interaction integral diverges for alpha >= d."""


class QuadratureToleranceError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, achieved_error):
        super().__init__(message)
        self.estimate = estimate
        self.achieved_error = achieved_error


@dataclass(frozen=True)
class KernelSpec:
    """Interaction potential, multiplier or kernel-sum form.

    Use the :meth:`multiplier` / :meth:`kernel_sum` constructors.  ``terms``
    is a tuple of (coefficient, exponent) pairs; coefficients may be signed
    (attractive/repulsive mixtures), exponents must be positive and are
    checked against the dimension by :meth:`validate_for_dim`.
    """

    form: str
    kappa: float | None = None
    beta: float | None = None
    terms: tuple[tuple[float, float], ...] | None = None
    mollify_eps: float | None = None

    @classmethod
    def multiplier(cls, kappa: float, beta: float, mollify_eps: float | None = None):
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        if mollify_eps is not None and not mollify_eps > 0:
            raise ValueError("mollify_eps must be strictly positive")
        return cls(form="multiplier", kappa=float(kappa), beta=float(beta),
                   mollify_eps=mollify_eps)

    @classmethod
    def kernel_sum(cls, terms, mollify_eps: float | None = None):
        terms = tuple((float(c), float(a)) for c, a in terms)
        if not terms:
            raise ValueError("kernel_sum needs at least one (c, alpha) term")
        for _, alpha in terms:
            if not alpha > 0:
                raise ValueError(f"kernel exponent must be positive, got {alpha}")
        if mollify_eps is not None and not mollify_eps > 0:
            raise ValueError("mollify_eps must be strictly positive")
        return cls(form="kernel_sum", terms=terms, mollify_eps=mollify_eps)

    def validate_for_dim(self, d: int) -> None:
        if self.form == "multiplier":
            # beta = d (log-kernel endpoint) is admitted: the torus multiplier
            # stays bounded on nonzero modes; only the free-space kernel
            # correspondence needs beta < d.
            if not 0 < self.beta <= d:
                raise ValueError(f"beta must lie in (0, d] = (0, {d}], got {self.beta}")
        else:
            for _, alpha in self.terms:
                if not 0 < alpha < d:
                    raise ValueError(
                        f"kernel exponent must lie in (0, d) = (0, {d}), got {alpha}"
                    )


# -- mollifier ---------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(200)


@lru_cache(maxsize=1)
def _bump_mass() -> float:
    x = 0.5 * (_GL_NODES + 1.0)  # map to (0, 1)
    return float(2.0 * 0.5 * np.sum(_GL_WEIGHTS * np.exp(-1.0 / (1.0 - x**2))))


def mollifier_hat_1d(s) -> np.ndarray:
    """Fourier transform of the normalized standard bump on [-1, 1].

    phi(x) = exp(-1/(1-x^2)) / Z, so phi_hat(0) = 1 and phi_hat is smooth and
    rapidly decaying.  Evaluated by fixed Gauss-Legendre quadrature, accurate
    to machine precision for |s| well below the node count.
    """
    s = np.asarray(s, dtype=np.float64)
    x = 0.5 * (_GL_NODES + 1.0)
    w = 0.5 * _GL_WEIGHTS * np.exp(-1.0 / (1.0 - x**2))
    vals = 2.0 * np.tensordot(np.cos(np.multiply.outer(s, x)), w, axes=([-1], [0]))
    return vals / _bump_mass()


# -- multiplier-form solver ----------------------------------------------------

def riesz_multiplier_symbol(grid: PhaseGrid, spec: KernelSpec) -> np.ndarray:
    """kappa |k|^{-beta} on the spatial spectral grid, zero mode gauged out."""
    if spec.form != "multiplier":
        raise KernelFormError(
            "kernel-sum spec: use kernel_to_multiplier first or call the "
            "quadrature path (interaction_energy / free-space force)"
        )
    spec.validate_for_dim(grid.d)
    k_sq = grid.kx_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        symbol = np.where(k_sq > 0.0, spec.kappa * k_sq ** (-spec.beta / 2.0), 0.0)
    if spec.mollify_eps is not None:
        for j in range(grid.d):
            shape = [1] * grid.d
            shape[j] = grid.nx
            symbol = symbol * mollifier_hat_1d(
                spec.mollify_eps * grid.kx1d
            ).reshape(shape)
    return symbol


def _check_spatial(grid: PhaseGrid, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != grid.spatial_shape:
        raise GridShapeError(
            f"density shape {rho.shape} does not match spatial grid "
            f"{grid.spatial_shape}"
        )
    return rho


def riesz_potential(rho: np.ndarray, grid: PhaseGrid, spec: KernelSpec) -> np.ndarray:
    """Phi with Phi_hat(k) = kappa |k|^{-beta} rho_hat(k), Phi_hat(0) = 0."""
    rho = _check_spatial(grid, rho)
    symbol = riesz_multiplier_symbol(grid, spec)
    rho_hat = np.fft.fftn(rho)
    return np.fft.ifftn(symbol * rho_hat).real


def force_field(rho: np.ndarray, grid: PhaseGrid, spec: KernelSpec) -> np.ndarray:
    """u = grad Phi, shape (d,) + spatial_shape; curl-free by construction."""
    rho = _check_spatial(grid, rho)
    symbol = riesz_multiplier_symbol(grid, spec)
    phi_hat = symbol * np.fft.fftn(rho)
    u = np.empty((grid.d,) + grid.spatial_shape)
    for j in range(grid.d):
        shape = [1] * grid.d
        shape[j] = grid.nx
        kj = grid.kx1d.reshape(shape)
        u[j] = np.fft.ifftn(1j * kj * phi_hat).real
    return u


# -- kernel <-> multiplier conversion -----------------------------------------

def riesz_normalization(d: int, beta: float) -> float:
    """r(d, beta) = Gamma((d-beta)/2) / (2^beta pi^{d/2} Gamma(beta/2))."""
    return float(
        gamma_fn((d - beta) / 2.0) / (2.0**beta * np.pi ** (d / 2.0) * gamma_fn(beta / 2.0))
    )


def kernel_to_multiplier(spec: KernelSpec, d: int):
    """Convert kernel-sum terms to multiplier form (beta = d - alpha).

    Single-term input returns one KernelSpec; multi-term input returns the
    per-term list.  Requires beta = d - alpha in (0, 2], i.e. no more singular
    than Coulomb and less singular than the log endpoint.
    """
    if spec.form != "kernel_sum":
        raise KernelFormError("kernel_to_multiplier expects a kernel-sum spec")
    out = []
    for c, alpha in spec.terms:
        beta = d - alpha
        if not (0 < alpha < d) or not (0 < beta <= 2):
            raise UnsupportedOrderError(
                f"alpha = {alpha} not convertible in d = {d}: need "
                f"beta = d - alpha in (0, 2]"
            )
        kappa = c / riesz_normalization(d, beta)
        out.append(KernelSpec.multiplier(kappa, beta, mollify_eps=spec.mollify_eps))
    return out[0] if len(out) == 1 else out


def multiplier_to_kernel(spec: KernelSpec, d: int) -> KernelSpec:
    """Inverse of :func:`kernel_to_multiplier` on (kappa, beta)."""
    if spec.form != "multiplier":
        raise KernelFormError("multiplier_to_kernel expects a multiplier spec")
    beta = spec.beta
    if not (0 < beta <= 2) or not (0 < d - beta < d):
        raise UnsupportedOrderError(
            f"beta = {beta} not convertible in d = {d}: need alpha = d - beta in (0, d)"
        )
    c = spec.kappa * riesz_normalization(d, beta)
    return KernelSpec.kernel_sum([(c, d - beta)], mollify_eps=spec.mollify_eps)


# -- free-space grid path ------------------------------------------------------

def _unit_ball_volume(d: int) -> float:
    return float(np.pi ** (d / 2.0) / gamma_fn(d / 2.0 + 1.0))


def _self_cell_average(alpha: float, dx: float, d: int) -> float:
    """Cell-averaged |x|^{-alpha} over the ball of volume dx^d.

    Integrating the singularity analytically removes the O(1) error a naive
    skip of the self-cell would make.
    """
    omega = _unit_ball_volume(d)
    r_eq = (dx**d / omega) ** (1.0 / d)
    integral = d * omega * r_eq ** (d - alpha) / (d - alpha)
    return integral / dx**d


def _offset_radii(n: int, dx: float, d: int) -> np.ndarray:
    off = dx * np.arange(-(n - 1), n)
    r_sq = 0.0
    for j in range(d):
        shape = [1] * d
        shape[j] = 2 * n - 1
        r_sq = r_sq + off.reshape(shape) ** 2
    return np.sqrt(r_sq)


def _kernel_table(terms, n: int, dx: float, d: int) -> np.ndarray:
    r = _offset_radii(n, dx, d)
    center = (n - 1,) * d
    table = np.zeros_like(r)
    rr = r.copy()
    rr[center] = 1.0  # placeholder, overwritten below
    for c, alpha in terms:
        if alpha >= d:
            raise DivergentKernelError(
                f"alpha = {alpha} >= d = {d}: interaction integral diverges"
            )
        term = c * rr ** (-alpha)
        term[center] = c * _self_cell_average(alpha, dx, d)
        table += term
    return table


def free_space_convolution(rho: np.ndarray, terms, dx: float) -> np.ndarray:
    """(K * rho)(x_i) with K = sum c_i |x|^{-alpha_i}, truncated free space.

    Direct quadrature over grid pairs, evaluated as a zero-padded linear
    convolution; the self-cell uses the analytic ball-equivalent average.
    """
    rho = np.asarray(rho, dtype=np.float64)
    d = rho.ndim
    n = rho.shape[0]
    table = _kernel_table(terms, n, dx, d)
    return fftconvolve(rho, table, mode="valid") * dx**d


def free_space_force(rho: np.ndarray, terms, dx: float) -> np.ndarray:
    """grad(K * rho) on the grid, as the central-difference gradient of the
    convolved potential.

    Sampling the gradient kernel |x|^{-alpha-1} directly converges only like
    dx^{1-alpha} (it exists as a principal value for alpha >= d-1); the
    potential with its analytic self-cell is markedly more accurate.
    """
    rho = np.asarray(rho, dtype=np.float64)
    d = rho.ndim
    phi = free_space_convolution(rho, terms, dx)
    u = np.empty((d,) + rho.shape)
    for j in range(d):
        u[j] = np.gradient(phi, dx, axis=j)
    return u


def interaction_energy_grid(rho: np.ndarray, grid: PhaseGrid, terms) -> float:
    """int rho (K * rho) dx by direct free-space quadrature on the grid."""
    rho = _check_spatial(grid, rho)
    conv = free_space_convolution(rho, terms, grid.dx)
    return float(np.sum(rho * conv) * grid.x_cell_volume)


# -- closed-form radial path ---------------------------------------------------

def sphere_area(d: int) -> float:
    return float(2.0 * np.pi ** (d / 2.0) / gamma_fn(d / 2.0))


def angular_average(d: int, alpha: float, r: float, rp: float) -> float:
    """Mean of |r e1 - rp w|^{-alpha} over unit vectors w, dimension d."""
    if r == 0.0 or rp == 0.0:
        return max(r, rp) ** (-alpha)
    if d == 1:
        return 0.5 * (abs(r - rp) ** (-alpha) + (r + rp) ** (-alpha))
    if d == 2:
        a = r * r + rp * rp
        z = 2.0 * r * rp / a
        s = alpha / 2.0
        return a ** (-s) * hyp2f1(s / 2.0, (s + 1.0) / 2.0, 1.0, z * z)
    if d == 3:
        if abs(alpha - 2.0) < 1e-13:
            return np.log((r + rp) / abs(r - rp)) / (2.0 * r * rp)
        p = 2.0 - alpha
        return ((r + rp) ** p - abs(r - rp) ** p) / (2.0 * r * rp * p)
    raise ValueError(f"angular average implemented for d <= 3, got d = {d}")


def interaction_energy_closed_form(
    density, terms, rel_tol: float = 1e-6
) -> float:
    """int rho (K * rho) dx for a radial closed-form density, d <= 3.

    ``density`` is a :class:`~vlasov_riesz.profiles.RadialDensity`; adaptive
    quadrature on the radial mass profile with the angular kernel averaged
    analytically.  Raises QuadratureToleranceError when the achieved error
    estimate exceeds ``rel_tol`` relative.
    """
    d = density.d
    if d > 3:
        raise ValueError("closed-form path supports d <= 3")
    for _, alpha in terms:
        if alpha >= d:
            raise DivergentKernelError(
                f"alpha = {alpha} >= d = {d}: interaction integral diverges"
            )
    m = density.radial_mass_density
    R = density.radius
    total = 0.0
    gross = 0.0
    total_err = 0.0
    for c, alpha in terms:
        def inner(r):
            val, _ = quad(
                lambda rp: m(rp) * angular_average(d, alpha, r, rp),
                0.0, R, points=[r], limit=200,
            )
            return m(r) * val

        val, err = quad(inner, 0.0, R, limit=200)
        total += c * val
        gross += abs(c * val)
        total_err += abs(c) * err
    # per-term accuracy: signed sums are judged against the gross magnitude
    if total_err > rel_tol * max(1.0, gross):
        raise QuadratureToleranceError(
            f"interaction quadrature reached {total_err:.3e}, requested "
            f"{rel_tol:.3e} relative",
            estimate=total, achieved_error=total_err,
        )
    return float(total)


def interaction_energy(density, spec: KernelSpec, grid: PhaseGrid | None = None,
                       rel_tol: float = 1e-6) -> float:
    """Unsigned interaction integral int rho (K * rho) dx (kernel-sum form).

    Grid arrays use the free-space grid path (requires ``grid``); radial
    closed-form densities use adaptive quadrature.
    """
    if spec.form != "kernel_sum":
        raise KernelFormError(
            "interaction_energy needs a kernel-sum spec; convert multipliers "
            "with multiplier_to_kernel first"
        )
    if isinstance(density, np.ndarray):
        if grid is None:
            raise ValueError("grid path needs the PhaseGrid")
        return interaction_energy_grid(density, grid, spec.terms)
    return interaction_energy_closed_form(density, spec.terms, rel_tol=rel_tol)
