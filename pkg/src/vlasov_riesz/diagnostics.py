r"""Monitored functionals of a phase-space snapshot.

Conventions:

* entropy integrand f ln f uses 0 ln 0 = 0; values below the negative-value
  tolerance are treated as vacuum;
* the interaction functional int rho (K * rho) dx is the torus-multiplier
  quadratic form for multiplier specs and the free-space kernel quadrature
  for kernel-sum specs -- the record carries the provenance label so identity
  ledgers compare like with like;
* virial_interaction is the moment int rho (x . u) dx of the force actually
  driving the evolution; for free-space kernels this equals the weighted sum
  -(1/2) sum_i c_i alpha_i int rho K_i * rho dx.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    DEFAULT_NEG_TOL,
    DistributionField,
    boundary_mass_fraction,
    boundary_shell_mask,
    integrate_v,
)
from .kernels import (
    KernelSpec,
    force_field,
    free_space_force,
    interaction_energy_grid,
    riesz_potential,
)

DEFAULT_FLOOR_TOL = 1e-30
DEFAULT_SUPPORT_THRESHOLD = 1e-10

#: Stable serialization order of the scalar record fields.
RECORD_COLUMNS = (
    "time",
    "mass",
    "kinetic",
    "interaction",
    "entropy",
    "total_E",
    "tilde_E",
    "inertia_I",
    "inertia_Iprime",
    "fisher_dissipation",
    "support_radius_v",
    "boundary_decay",
    "max_density",
    "virial_interaction",
    "boundary_mass_fraction",
    "negative_cells",
)


class DataQualityError(ValueError):
    """Snapshot violates a positivity requirement beyond tolerance."""

    def __init__(self, message, negative_cells):
        super().__init__(message)
        self.negative_cells = negative_cells


@dataclass
class DiagnosticsRecord:
    time: float
    mass: float
    kinetic: float
    interaction: float
    entropy: float
    total_E: float
    tilde_E: float
    inertia_I: float
    inertia_Iprime: float
    fisher_dissipation: float
    support_radius_v: float
    boundary_decay: float
    max_density: float
    virial_interaction: float
    boundary_mass_fraction: float
    negative_cells: int
    interaction_label: str
    sobolev_norms: dict = field(default_factory=dict)

    def virial_rhs(self, sigma: float) -> float:
        """Right-hand side of the inertia identity I'' = 2K + V - sigma I'."""
        return 2.0 * self.kinetic + self.virial_interaction - sigma * self.inertia_Iprime

    def to_json(self) -> str:
        payload = {name: getattr(self, name) for name in RECORD_COLUMNS}
        payload["interaction_label"] = self.interaction_label
        payload["sobolev_norms"] = {
            f"s{s}_N{N}": val for (s, N), val in sorted(self.sobolev_norms.items())
        }
        return json.dumps(payload, sort_keys=True)


def csv_header(sobolev_orders=()) -> str:
    cols = list(RECORD_COLUMNS) + ["interaction_label"]
    cols += [f"sobolev_s{s}_N{N}" for s, N in sobolev_orders]
    return ",".join(cols)


def csv_row(rec: DiagnosticsRecord, sobolev_orders=()) -> str:
    vals = [repr(getattr(rec, name)) for name in RECORD_COLUMNS]
    vals.append(rec.interaction_label)
    vals += [repr(rec.sobolev_norms[key]) for key in sobolev_orders]
    return ",".join(vals)


def _grad_v(f: DistributionField) -> np.ndarray:
    """Spectral velocity gradient, shape (d,) + grid.shape."""
    g = f.grid
    f_hat = g.fft_v(f.values)
    out = np.empty((g.d,) + g.shape)
    for j in range(g.d):
        shape = [1] * (2 * g.d)
        shape[g.d + j] = g.nv
        mu = g.kv1d.reshape(shape)
        out[j] = g.ifft_v(1j * mu * f_hat).real
    return out


def compute_force(rho: np.ndarray, grid, spec: KernelSpec) -> np.ndarray:
    """Force field per spec form: torus multiplier or free-space kernel."""
    if spec.form == "multiplier":
        return force_field(rho, grid, spec)
    return free_space_force(rho, spec.terms, grid.dx)


def fisher_dissipation(
    f: DistributionField, sigma: float, floor_tol: float = DEFAULT_FLOOR_TOL
) -> float:
    """sigma * int (1/f) |grad_v f + v f|^2; cells below floor_tol contribute 0."""
    if sigma == 0.0:
        return 0.0
    g = f.grid
    grad = _grad_v(f)
    sq = np.zeros(g.shape)
    for j in range(g.d):
        sq += (grad[j] + g.v_axis(j) * f.values) ** 2
    mask = f.values > floor_tol
    val = np.sum(sq[mask] / f.values[mask]) * g.cell_volume
    return float(sigma * val)


def entropy_integral(values: np.ndarray, weight: float,
                     neg_tol: float = DEFAULT_NEG_TOL, strict: bool = True) -> float:
    """int f ln f with 0 ln 0 = 0; values below neg_tol treated as vacuum.

    With ``strict`` (the standalone contract), negatives beyond the tolerance
    raise a data-quality error listing the offending cell count; the
    integrator's in-run records instead report them via negative_cells.
    """
    bad = int(np.count_nonzero(values < -neg_tol))
    if bad and strict:
        raise DataQualityError(
            f"entropy undefined: {bad} cells below -{neg_tol:g}", negative_cells=bad
        )
    pos = values > 0.0
    vals = values[pos]
    return float(np.sum(vals * np.log(vals)) * weight)


def support_radius(f: DistributionField, threshold: float) -> float:
    """Smallest r with |f(x, v)| <= threshold for all |v| > r."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    g = f.grid
    exceed = np.abs(f.values) > threshold
    if not exceed.any():
        return 0.0
    v_mag = np.sqrt(np.broadcast_to(g.v_sq, g.shape)[exceed])
    return float(v_mag.max())


def sobolev_norm(f: DistributionField, s: float, N: int) -> float:
    """Velocity-weighted Sobolev norm ||f||_{H^{s,2N}}.

    Discrete realization of the three-term square sum: the weight <v>^{2N} is
    applied in physical v, the fractional derivative |k|^s spectrally in x
    (resp. v).  s = 0, N = 0 reduces to sqrt(3) times the L^2 norm.
    """
    if s < 0 or N < 0:
        raise ValueError("need s >= 0 and N >= 0")
    g = f.grid
    w = (1.0 + g.v_sq) ** N
    wf = w * f.values
    term0 = np.sum(wf**2)

    fx_hat = g.fft_x(f.values)
    lam_x = np.where(g.kx_sq > 0, g.kx_sq ** (s / 2.0), 0.0 if s > 0 else 1.0)
    lam_x = lam_x.reshape(g.spatial_shape + (1,) * g.d)
    fx = g.ifft_x(lam_x * fx_hat).real
    term1 = np.sum((w * fx) ** 2)

    fv_hat = g.fft_v(f.values)
    lam_v = np.where(g.kv_sq > 0, g.kv_sq ** (s / 2.0), 0.0 if s > 0 else 1.0)
    lam_v = lam_v.reshape((1,) * g.d + (g.nv,) * g.d)
    fv = g.ifft_v(lam_v * fv_hat).real
    term2 = np.sum((w * fv) ** 2)

    return float(np.sqrt((term0 + term1 + term2) * g.cell_volume))


def decay_check(f: DistributionField, spec: KernelSpec, shell_frac: float = 0.1,
                neg_tol: float = DEFAULT_NEG_TOL) -> float:
    """Max over the outermost grid shell of f (|v||x|^2 + (|v|+|x|)|v|^2 + |ln f| + |u|).

    Small values certify the snapshot approximates the decaying solution
    class the analysis assumes.
    """
    g = f.grid
    rho = integrate_v(f)
    u = compute_force(rho, g, spec)
    u_mag = np.sqrt(np.sum(u**2, axis=0))

    x_mag = np.sqrt(np.broadcast_to(g.x_sq, g.shape))
    v_mag = np.sqrt(np.broadcast_to(g.v_sq, g.shape))
    vals = np.where(f.values > neg_tol, f.values, 0.0)
    with np.errstate(divide="ignore"):
        log_term = np.where(vals > 0.0, np.abs(np.log(np.where(vals > 0, vals, 1.0))), 0.0)
    bracket = (
        v_mag * x_mag**2
        + (v_mag + x_mag) * v_mag**2
        + log_term
        + u_mag.reshape(g.spatial_shape + (1,) * g.d)
    )
    quantity = vals * bracket
    shell = boundary_shell_mask(g, shell_frac)
    return float(quantity[shell].max()) if shell.any() else 0.0


def compute_record(
    f: DistributionField,
    spec: KernelSpec,
    sigma: float,
    sobolev_orders=(),
    with_decay: bool = False,
    neg_tol: float = DEFAULT_NEG_TOL,
    floor_tol: float = DEFAULT_FLOOR_TOL,
    support_threshold: float = DEFAULT_SUPPORT_THRESHOLD,
    strict_negatives: bool = True,
) -> DiagnosticsRecord:
    """Populate every monitored functional from one snapshot.

    ``strict_negatives=False`` (used by the integrator's per-step records)
    downgrades the beyond-tolerance-negatives error to the negative_cells
    count in the record.
    """
    g = f.grid
    w = g.cell_volume
    vals = f.values

    mass = float(vals.sum() * w)
    kinetic = float(0.5 * np.sum(g.v_sq * vals) * w)
    entropy = entropy_integral(vals, w, neg_tol=neg_tol, strict=strict_negatives)

    rho = integrate_v(f)
    u = compute_force(rho, g, spec)
    if spec.form == "multiplier":
        phi = riesz_potential(rho, g, spec)
        interaction = float(np.sum(rho * phi) * g.x_cell_volume)
        label = "torus-multiplier"
        x_dot_u = np.zeros(g.spatial_shape)
        for j in range(g.d):
            x_dot_u += g.x_axis(j, spatial_only=True) * u[j]
        virial_interaction = float(np.sum(rho * x_dot_u) * g.x_cell_volume)
    else:
        per_term = [
            interaction_energy_grid(rho, g, [(c, a)]) for c, a in spec.terms
        ]
        interaction = float(sum(per_term))
        label = "free-space-kernel"
        # per_term already carries c_i, so the identity's weighted sum
        # -(1/2) sum c_i alpha_i int rho K_i * rho needs only the alpha factor
        virial_interaction = float(
            -0.5 * sum(a * e for (_, a), e in zip(spec.terms, per_term))
        )

    total_E = kinetic + entropy - 0.5 * interaction
    tilde_E = kinetic - 0.5 * interaction
    inertia_I = float(0.5 * np.sum(g.x_sq * vals) * w)
    xv = np.zeros(g.shape)
    for j in range(g.d):
        xv += g.x_axis(j) * g.v_axis(j)
    inertia_Iprime = float(np.sum(xv * vals) * w)

    record = DiagnosticsRecord(
        time=f.time,
        mass=mass,
        kinetic=kinetic,
        interaction=interaction,
        entropy=entropy,
        total_E=total_E,
        tilde_E=tilde_E,
        inertia_I=inertia_I,
        inertia_Iprime=inertia_Iprime,
        fisher_dissipation=fisher_dissipation(f, sigma, floor_tol=floor_tol),
        support_radius_v=support_radius(f, support_threshold),
        boundary_decay=decay_check(f, spec, neg_tol=neg_tol) if with_decay else 0.0,
        max_density=float(rho.max()) if rho.size else 0.0,
        virial_interaction=virial_interaction,
        boundary_mass_fraction=boundary_mass_fraction(f),
        negative_cells=int(np.count_nonzero(vals < -neg_tol)),
        interaction_label=label,
        sobolev_norms={(s, N): sobolev_norm(f, s, N) for s, N in sobolev_orders},
    )
    return record


# -- identity ledgers ----------------------------------------------------------

def energy_ledger(records, sigma: float) -> np.ndarray:
    """|E(t) + int_0^t dissipation - E(0)| along a run (trapezoid in time)."""
    t = np.array([r.time for r in records])
    E = np.array([r.total_E for r in records])
    D = np.array([r.fisher_dissipation for r in records])
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (D[1:] + D[:-1]) * np.diff(t))]
    )
    return np.abs(E + cum - E[0])


def tilde_energy_drift(records) -> float:
    """Max relative drift of the diffusion-free invariant tilde E."""
    tE = np.array([r.tilde_E for r in records])
    scale = max(abs(tE[0]), 1e-300)
    return float(np.max(np.abs(tE - tE[0])) / scale)


def virial_ledger(records, sigma: float):
    """Centered second difference of I against the identity right-hand side.

    Returns (times, deviation, scale); records must be equispaced in time.
    """
    t = np.array([r.time for r in records])
    I = np.array([r.inertia_I for r in records])
    rhs = np.array([r.virial_rhs(sigma) for r in records])
    if len(t) < 3:
        raise ValueError("need at least three records for a second difference")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-8):
        raise ValueError("virial ledger needs equispaced records")
    fd2 = (I[2:] - 2.0 * I[1:-1] + I[:-2]) / dt[0] ** 2
    dev = np.abs(fd2 - rhs[1:-1])
    scale = float(np.max(np.abs(rhs)))
    return t[1:-1], dev, scale
