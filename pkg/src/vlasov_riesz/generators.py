r"""Initial-data generators.

Every generator returns a nonnegative DistributionField normalized on the
grid to the requested total mass (exactly, by discrete rescaling).  Profiles
are kept well inside the box by the caller's parameter choice; compact
supports are validated against the box.
"""

from __future__ import annotations

import numpy as np

from .grid import DistributionField, PhaseGrid
from .profiles import bump_profile

__all__ = ["generate_initial", "GENERATORS", "UnknownGeneratorError", "DomainFitError"]


class UnknownGeneratorError(ValueError):
    pass


class DomainFitError(ValueError):
    """Requested support does not fit inside the periodic box."""


def _radial_sq(grid: PhaseGrid, center, which: str) -> np.ndarray:
    d = grid.d
    c = np.zeros(d) if center is None else np.asarray(center, dtype=np.float64)
    out = np.zeros(grid.shape)
    for j in range(d):
        axis = grid.x_axis(j) if which == "x" else grid.v_axis(j)
        out = out + (axis - c[j]) ** 2
    return out


def _normalize(grid: PhaseGrid, values: np.ndarray, mass: float) -> DistributionField:
    total = values.sum() * grid.cell_volume
    if total <= 0:
        raise ValueError("generator produced a nonpositive field")
    return DistributionField(grid, values * (mass / total), 0.0)


def _check_fit(center, radius, half_width, label):
    c = 0.0 if center is None else float(np.max(np.abs(center)))
    if c + radius >= half_width:
        raise DomainFitError(
            f"{label}: support radius {radius} at center offset {c} exceeds "
            f"the box half-width {half_width}"
        )


def _perturbation(grid: PhaseGrid, amp: float, mode: int) -> np.ndarray:
    """1 + amp * cos(pi * mode * x_0 / Lx) along the first spatial axis."""
    if abs(amp) >= 1.0:
        raise ValueError("perturbation amplitude must satisfy |amp| < 1")
    k = np.pi * mode / grid.Lx
    return 1.0 + amp * np.cos(k * grid.x_axis(0))


def gaussian(grid, mass=1.0, x_width=1.0, v_width=1.0, x_center=None,
             v_center=None, perturb_amp=0.0, perturb_mode=1):
    vals = np.exp(-0.5 * _radial_sq(grid, x_center, "x") / x_width**2)
    vals = vals * np.exp(-0.5 * _radial_sq(grid, v_center, "v") / v_width**2)
    if perturb_amp:
        vals = vals * _perturbation(grid, perturb_amp, perturb_mode)
    return _normalize(grid, vals, mass)


def bump(grid, mass=1.0, x_radius=1.0, v_radius=1.0, x_center=None, v_center=None):
    _check_fit(x_center, x_radius, grid.Lx, "bump (x)")
    _check_fit(v_center, v_radius, grid.Lv, "bump (v)")
    px = bump_profile(x_radius)
    pv = bump_profile(v_radius)
    vals = px(np.sqrt(_radial_sq(grid, x_center, "x")))
    vals = vals * pv(np.sqrt(_radial_sq(grid, v_center, "v")))
    return _normalize(grid, vals, mass)


def concentrated(grid, mass=1.0, eps_x=0.1, eps_v=0.1):
    """Concentrated family: compact bumps at scales eps_x (space), eps_v (velocity).

    Shrinking the scales drives inertia and its rate to zero while the
    attractive interaction energy blows up.
    """
    return bump(grid, mass=mass, x_radius=eps_x, v_radius=eps_v)


def two_stream(grid, mass=1.0, v_drift=2.0, v_width=0.5, perturb_amp=0.05,
               perturb_mode=1):
    """Counter-streaming double Maxwellian with a single-mode seed (drift on v_0)."""
    r_sq = _radial_sq(grid, None, "v")
    shifted = (grid.v_axis(0) - v_drift) ** 2 + (r_sq - grid.v_axis(0) ** 2)
    shifted_m = (grid.v_axis(0) + v_drift) ** 2 + (r_sq - grid.v_axis(0) ** 2)
    vals = 0.5 * (
        np.exp(-0.5 * shifted / v_width**2) + np.exp(-0.5 * shifted_m / v_width**2)
    ) * np.ones(grid.shape)
    vals = vals * _perturbation(grid, perturb_amp, perturb_mode)
    return _normalize(grid, vals, mass)


_EVAL_NAMES = {
    name: getattr(np, name)
    for name in (
        "exp", "cos", "sin", "tanh", "cosh", "sinh", "sqrt", "abs",
        "maximum", "minimum", "where", "pi", "log",
    )
}


def _eval_profile(expr: str, coords: dict) -> np.ndarray:
    ns = dict(_EVAL_NAMES)
    ns.update(coords)
    try:
        return np.asarray(eval(expr, {"__builtins__": {}}, ns), dtype=np.float64)
    except Exception as exc:  # noqa: BLE001 - report the config error verbatim
        raise ValueError(f"could not evaluate profile expression {expr!r}: {exc}")


def custom_separable(grid, mass=1.0, x_expr="exp(-r**2)", v_expr="exp(-r**2)"):
    """f = g(x) h(v) from expressions in x0[, x1] and r (numpy vocabulary)."""
    xc = {f"x{j}": grid.x_axis(j) for j in range(grid.d)}
    xc["r"] = np.sqrt(_radial_sq(grid, None, "x"))
    vc = {f"v{j}": grid.v_axis(j) for j in range(grid.d)}
    vc["r"] = np.sqrt(_radial_sq(grid, None, "v"))
    gx = _eval_profile(x_expr, xc)
    hv = _eval_profile(v_expr, vc)
    vals = np.broadcast_to(gx, grid.shape) * np.broadcast_to(hv, grid.shape)
    if vals.min() < 0:
        raise ValueError("custom profiles must be nonnegative")
    return _normalize(grid, np.array(vals), mass)


GENERATORS = {
    "gaussian": gaussian,
    "bump": bump,
    "concentrated": concentrated,
    "two_stream": two_stream,
    "custom_separable": custom_separable,
}


def generate_initial(name: str, params: dict, grid: PhaseGrid) -> DistributionField:
    try:
        builder = GENERATORS[name]
    except KeyError:
        raise UnknownGeneratorError(
            f"unknown generator {name!r}; available: {sorted(GENERATORS)}"
        ) from None
    try:
        return builder(grid, **params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for generator {name!r}: {exc}") from None
