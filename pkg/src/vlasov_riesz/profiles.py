r"""Closed-form radial densities and separable phase-space data.

The blow-up checks in d = 3 are evaluated without a grid: initial data of the
form f0(x, v) = mass * g(|x - x0|) h(|v - v0|) (normalized radial profiles)
has every functional the criteria need -- moments, entropy, interaction --
reducible to one-dimensional radial quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .kernels import interaction_energy_closed_form, sphere_area


@dataclass(frozen=True)
class RadialProfile:
    """Unnormalized radial shape g(r) >= 0 with finite support/truncation radius."""

    func: Callable[[np.ndarray], np.ndarray]
    radius: float

    def __call__(self, r):
        return self.func(np.asarray(r, dtype=np.float64))

    def scaled(self, s: float) -> "RadialProfile":
        """Profile r -> g(r/s); support radius scales by s."""
        f = self.func
        return RadialProfile(lambda r: f(np.asarray(r) / s), self.radius * s)


def gaussian_profile(width: float, cut: float = 12.0) -> RadialProfile:
    """exp(-r^2 / 2 width^2), truncated where it is ~1e-31 of the peak."""
    w = float(width)
    return RadialProfile(lambda r: np.exp(-0.5 * (r / w) ** 2), cut * w)


def bump_profile(scale: float = 1.0) -> RadialProfile:
    """Standard smooth bump exp(-1/(1 - (r/scale)^2)) on r < scale."""
    s = float(scale)

    def f(r):
        r = np.asarray(r, dtype=np.float64)
        t = r / s
        out = np.zeros_like(t)
        inside = t < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out

    return RadialProfile(f, s)


def _radial_quad(profile: RadialProfile, d: int, weight=None) -> float:
    """int_0^R S_{d-1} r^{d-1} g(r) weight(r) dr."""
    S = sphere_area(d)

    def integrand(r):
        val = S * r ** (d - 1) * float(profile(r))
        return val * weight(r, float(profile(r))) if weight is not None else val

    val, _ = quad(integrand, 0.0, profile.radius, limit=200)
    return float(val)


@dataclass(frozen=True)
class RadialDensity:
    """Radial density of total ``mass`` in dimension d (center irrelevant)."""

    d: int
    profile: RadialProfile
    mass: float = 1.0

    @cached_property
    def norm(self) -> float:
        return _radial_quad(self.profile, self.d)

    @property
    def radius(self) -> float:
        return self.profile.radius

    @cached_property
    def radial_mass_density(self) -> Callable[[float], float]:
        """m(r) with int_0^R m = mass; the 1D reduction used by quadrature."""
        S = sphere_area(self.d)
        amp = self.mass / self.norm

        def m(r):
            return amp * S * r ** (self.d - 1) * float(self.profile(r))

        return m

    def second_moment(self) -> float:
        """int |y|^2 rho(y) dy for the centered density."""
        w = _radial_quad(self.profile, self.d, weight=lambda r, g: r * r)
        return self.mass * w / self.norm

    def amplitude(self) -> float:
        """Peak value of the normalized density mass * g / norm at g = g(0)."""
        return self.mass * float(self.profile(0.0)) / self.norm


@dataclass(frozen=True)
class SeparablePhaseDensity:
    """f(x, v) = mass * g(|x - x0|) h(|v - v0|) with normalized g, h."""

    d: int
    x_profile: RadialProfile
    v_profile: RadialProfile
    mass: float = 1.0
    x_center: tuple[float, ...] | None = None
    v_center: tuple[float, ...] | None = None

    def _center(self, which: str) -> np.ndarray:
        c = self.x_center if which == "x" else self.v_center
        return np.zeros(self.d) if c is None else np.asarray(c, dtype=np.float64)

    @cached_property
    def x_norm(self) -> float:
        return _radial_quad(self.x_profile, self.d)

    @cached_property
    def v_norm(self) -> float:
        return _radial_quad(self.v_profile, self.d)

    def spatial_density(self) -> RadialDensity:
        return RadialDensity(self.d, self.x_profile, self.mass)

    def second_moment_x(self) -> float:
        """int int |x|^2 f dx dv about the origin."""
        r2 = _radial_quad(self.x_profile, self.d, weight=lambda r, g: r * r)
        c = self._center("x")
        return self.mass * (r2 / self.x_norm + float(c @ c))

    def second_moment_v(self) -> float:
        r2 = _radial_quad(self.v_profile, self.d, weight=lambda r, g: r * r)
        c = self._center("v")
        return self.mass * (r2 / self.v_norm + float(c @ c))

    def xv_moment(self) -> float:
        """int int (x . v) f dx dv; reduces to x0 . v0 by radial symmetry."""
        return self.mass * float(self._center("x") @ self._center("v"))

    def inertia(self) -> float:
        return 0.5 * self.second_moment_x()

    def entropy(self) -> float:
        """int int f ln f dx dv via the product decomposition."""
        ax = self.mass / (self.x_norm * self.v_norm)

        def xlogg(r, g):
            gn = g
            return 0.0 if gn <= 0.0 else np.log(gn)

        gx = _radial_quad(self.x_profile, self.d, weight=xlogg) / self.x_norm
        gv = _radial_quad(self.v_profile, self.d, weight=xlogg) / self.v_norm
        return self.mass * (np.log(ax) + gx + gv)

    def interaction(self, terms, rel_tol: float = 1e-6) -> float:
        """int rho (K * rho) dx for the spatial marginal."""
        return interaction_energy_closed_form(
            self.spatial_density(), terms, rel_tol=rel_tol
        )

    def with_velocity_scale(self, s: float) -> "SeparablePhaseDensity":
        """Inflate velocities by s: h(|v|/s); second v-moment scales by s^2."""
        c = tuple(float(s) * self._center("v"))
        return replace(self, v_profile=self.v_profile.scaled(s), v_center=c)

    def to_grid(self, grid) -> np.ndarray:
        """Sample mass * g h on a PhaseGrid (not renormalized)."""
        from .grid import PhaseGrid  # avoid import cycle at module load

        assert isinstance(grid, PhaseGrid) and grid.d == self.d
        cx = self._center("x")
        cv = self._center("v")
        rx = np.zeros(grid.spatial_shape)
        for j in range(self.d):
            rx = rx + (grid.x_axis(j, spatial_only=True) - cx[j]) ** 2
        rv = np.zeros((grid.nv,) * self.d)
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = grid.nv
            rv = rv + (grid.v1d.reshape(shape) - cv[j]) ** 2
        gx = self.x_profile(np.sqrt(rx)) / self.x_norm
        hv = self.v_profile(np.sqrt(rv)) / self.v_norm
        return self.mass * np.multiply.outer(gx, hv).reshape(grid.shape)


def concentrated_data(
    d: int, eps_x: float, eps_v: float, mass: float = 1.0
) -> SeparablePhaseDensity:
    """Concentrated family: bumps at spatial scale eps_x and velocity scale eps_v.

    As the scales shrink, inertia and its rate vanish while the attractive
    interaction energy (hence -E) grows without bound.
    """
    return SeparablePhaseDensity(
        d=d,
        x_profile=bump_profile(eps_x),
        v_profile=bump_profile(eps_v),
        mass=mass,
    )


def gaussian_phase_density(
    d: int, x_width: float, v_width: float, mass: float = 1.0,
    x_center=None, v_center=None,
) -> SeparablePhaseDensity:
    return SeparablePhaseDensity(
        d=d,
        x_profile=gaussian_profile(x_width),
        v_profile=gaussian_profile(v_width),
        mass=mass,
        x_center=x_center,
        v_center=v_center,
    )
