r"""Time integration of the kinetic equation by operator splitting.

Each substep is solved exactly in a spectral representation:

* free transport  f_t + v . grad_x f = 0  is a phase shift per velocity node,
  f_hat(k, v) <- exp(-i k.v dt) f_hat(k, v);
* acceleration    f_t + u(x) . grad_v f = 0 (force frozen) is a phase shift
  per spatial node in the velocity spectrum;
* the linear Fokker-Planck (Ornstein-Uhlenbeck) operator
  sigma grad_v.(grad_v f + v f) maps the velocity spectrum as
  f_hat(mu) <- f_hat(mu e^{-sigma dt}) exp(-|mu|^2 (1 - e^{-2 sigma dt})/2);
  the argument scaling is realized by chirp (CZT) resampling on a grid
  zero-padded by a factor 2 to control wrap-around.  A backward-Euler
  finite-difference solve of the same operator is provided as an independent
  cross-check scheme.

The default splitting is the time-symmetric palindrome
T(dt/2) FP(dt/2) A(dt) FP(dt/2) T(dt/2) with the force evaluated after the
first half transport (temporal midpoint), which keeps second-order accuracy
also when sigma > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.signal import czt

from .diagnostics import compute_record, support_radius  # noqa: F401 (re-export)
from .grid import DistributionField, PhaseGrid, clip_negatives, integrate_v
from .kernels import KernelSpec, kernel_to_multiplier, riesz_multiplier_symbol

SPLITTINGS = ("strang", "lie")
FP_SCHEMES = ("exact_ou", "implicit_fd")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    sigma: float = 0.0
    splitting: str = "strang"
    fp_scheme: str = "exact_ou"
    cfl_guard: float = 1.0
    diag_interval: int = 1
    halt_density_factor: float = 1e3
    neg_tol: float = 1e-12
    sobolev_orders: tuple = ()
    with_decay: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.splitting not in SPLITTINGS:
            raise ValueError(f"splitting must be one of {SPLITTINGS}")
        if self.fp_scheme not in FP_SCHEMES:
            raise ValueError(f"fp_scheme must be one of {FP_SCHEMES}")
        if not 0 < self.cfl_guard <= 1:
            raise ValueError("cfl_guard must lie in (0, 1]")
        if self.diag_interval < 1:
            raise ValueError("diag_interval must be >= 1")


@dataclass
class RunResult:
    field: DistributionField
    status: str  # "completed" | "concentration-halt" | "nan-halt"
    records: list
    meta: dict = field(default_factory=dict)


# -- substeps -------------------------------------------------------------------

def step_transport(f: DistributionField, dt: float) -> DistributionField:
    """Exact free transport over dt via spectral phase shift in x."""
    g = f.grid
    f_hat = g.fft_x(f.values)
    for j in range(g.d):
        k_shape = [1] * (2 * g.d)
        k_shape[j] = g.nx
        v_shape = [1] * (2 * g.d)
        v_shape[g.d + j] = g.nv
        phase = np.exp(
            -1j * dt * g.kx1d.reshape(k_shape) * g.v1d.reshape(v_shape)
        )
        f_hat *= phase
    return DistributionField(g, g.ifft_x(f_hat).real, f.time + dt)


def step_acceleration(f: DistributionField, u: np.ndarray, dt: float) -> DistributionField:
    """Exact acceleration by the frozen force u(x) via phase shift in v."""
    g = f.grid
    f_hat = g.fft_v(f.values)
    for j in range(g.d):
        mu_shape = [1] * (2 * g.d)
        mu_shape[g.d + j] = g.nv
        uj = u[j].reshape(g.spatial_shape + (1,) * g.d)
        phase = np.exp(-1j * dt * uj * g.kv1d.reshape(mu_shape))
        f_hat *= phase
    return DistributionField(g, g.ifft_v(f_hat).real, f.time)


def _ou_axis(values: np.ndarray, axis: int, n: int, dv: float, s: float) -> np.ndarray:
    """Exact OU map along one velocity axis via zero-padded chirp resampling."""
    N = 2 * n
    pad_shape = list(values.shape)
    pad_shape[axis] = N
    padded = np.zeros(pad_shape, dtype=np.complex128)
    sl = [slice(None)] * values.ndim
    sl[axis] = slice(n // 2, n // 2 + n)
    padded[tuple(sl)] = values

    theta = s * 2.0 * np.pi / N
    w = np.exp(-1j * theta)
    a = np.exp(-1j * theta * N / 2.0)
    spec = czt(padded, m=N, w=w, a=a, axis=axis)

    dmu = 2.0 * np.pi / (N * dv)
    mu = dmu * (np.arange(N) - N / 2.0)
    Lv2 = n * dv  # padded half-width = 2 Lv
    damp = np.exp(-0.5 * mu**2 * (1.0 - s * s))
    fwd_phase = np.exp(1j * Lv2 * s * mu)  # e^{2 i Lv s mu}
    bwd_phase = (-1.0) ** np.arange(N)  # unshift of the padded-grid origin
    bshape = [1] * values.ndim
    bshape[axis] = N
    spec = spec * (dv * fwd_phase * damp * (-1.0) ** np.arange(N)).reshape(bshape)

    # the output's total mass is carried by the mu = 0 entry alone; pin it to
    # the directly-summed value so chirp roundoff cannot drift the mass
    zero_sl = [slice(None)] * values.ndim
    zero_sl[axis] = N // 2
    spec[tuple(zero_sl)] = dv * padded.sum(axis=axis) * (-1.0) ** (N // 2)

    out = np.fft.ifft(spec, axis=axis)
    sign = (-1.0) ** (n % 2)
    j_phase = (sign / dv) * bwd_phase  # combines e^{-i pi j} and (-1)^n
    out = out * j_phase.reshape(bshape)
    return out[tuple(sl)]


def step_fokker_planck(
    f: DistributionField, sigma: float, dt: float, scheme: str = "exact_ou"
) -> DistributionField:
    """One Fokker-Planck substep; sigma = 0 is the identity."""
    if sigma == 0.0:
        return DistributionField(f.grid, f.values.copy(), f.time)
    if scheme == "exact_ou":
        return _step_ou_exact(f, sigma, dt)
    if scheme == "implicit_fd":
        return _step_ou_implicit(f, sigma, dt)
    raise ValueError(f"unknown fp_scheme {scheme!r}")


@lru_cache(maxsize=8)
def _ou_matrix(n: int, dv: float, s: float) -> np.ndarray:
    """Exact one-axis OU step as an n x n matrix.

    Same operator the chirp pipeline realizes, M_ij = (1/N) sum_m damp(mu_m)
    exp(i mu_m (v_i - s v_j)) over the zero-padded frequency set, but built
    directly (one complex matmul) so the cached matrix is accurate to matmul
    roundoff rather than the chirp transform's ~1e-12.  The raw operator is
    kept as is: its column-sum deviations are oscillatory truncated-sinc
    tails that cancel against smooth fields (renormalizing them was measured
    to degrade the Maxwellian fixed point from 1e-15 to 1e-5).
    """
    N = 2 * n
    v = -0.5 * n * dv + dv * np.arange(n)  # original grid nodes
    dmu = 2.0 * np.pi / (N * dv)
    mu = dmu * (np.arange(N) - N / 2.0)
    damp = np.exp(-0.5 * mu**2 * (1.0 - s * s))
    A = np.exp(1j * np.outer(v, mu)) * (damp / N)
    B = np.exp(-1j * s * np.outer(mu, v))
    return np.ascontiguousarray((A @ B).real)


def _step_ou_exact(f: DistributionField, sigma: float, dt: float) -> DistributionField:
    g = f.grid
    s = np.exp(-sigma * dt)
    M = _ou_matrix(g.nv, g.dv, s)
    vals = f.values
    for j in range(g.d):
        axis = g.d + j
        vals = np.moveaxis(np.tensordot(M, vals, axes=([1], [axis])), 0, axis)
    return DistributionField(g, np.ascontiguousarray(vals), f.time)


def _ou_matrix_1d(n: int, dv: float, Lv: float) -> sp.csc_matrix:
    """Flux-form central discretization of d/dv(d/dv + v), periodic faces.

    F_{j+1/2} = (f[j+1] - f[j])/dv + v_{j+1/2} (f[j] + f[j+1])/2 and
    L f|_j = (F_{j+1/2} - F_{j-1/2})/dv; fluxes telescope, so the scheme
    conserves mass exactly.
    """
    v_face = -Lv + dv * (np.arange(n) + 0.5)  # face j+1/2
    rows, cols, vals = [], [], []
    for j in range(n):
        jp = (j + 1) % n
        jm = (j - 1) % n
        c_p = 1.0 / dv + 0.5 * v_face[j]          # coeff of f[j+1] in F_{j+1/2}
        c_0p = -1.0 / dv + 0.5 * v_face[j]        # coeff of f[j]   in F_{j+1/2}
        c_0m = 1.0 / dv + 0.5 * v_face[jm]        # coeff of f[j]   in F_{j-1/2}
        c_m = -1.0 / dv + 0.5 * v_face[jm]        # coeff of f[j-1] in F_{j-1/2}
        rows += [j, j, j]
        cols += [jp, j, jm]
        vals += [c_p / dv, (c_0p - c_0m) / dv, -c_m / dv]
    return sp.csc_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))


@lru_cache(maxsize=8)
def _ou_solver(d: int, n: int, dv: float, Lv: float, sigma_dt: float):
    L1 = _ou_matrix_1d(n, dv, Lv)
    if d == 1:
        L = L1
    else:
        eye = sp.identity(n, format="csc")
        L = sp.kron(L1, eye) + sp.kron(eye, L1)
        if d == 3:
            eye2 = sp.identity(n * n, format="csc")
            L = sp.kron(L1, eye2) + sp.kron(eye, sp.kron(L1, eye)) + sp.kron(eye2, L1)
    A = sp.identity(n**d, format="csc") - sigma_dt * L
    return spla.factorized(sp.csc_matrix(A))


class FokkerPlanckSolveError(RuntimeError):
    """Backward-Euler solve failed; carries the residual estimate."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def _step_ou_implicit(f: DistributionField, sigma: float, dt: float) -> DistributionField:
    g = f.grid
    solve = _ou_solver(g.d, g.nv, g.dv, g.Lv, sigma * dt)
    mat = f.values.reshape(g.nx**g.d, g.nv**g.d)
    out = solve(mat.T).T
    if not np.isfinite(out).all():
        bad = int(np.count_nonzero(~np.isfinite(out)))
        raise FokkerPlanckSolveError(
            "implicit Fokker-Planck solve produced non-finite values", residual=bad
        )
    return DistributionField(g, out.reshape(g.shape), f.time)


# -- full system -----------------------------------------------------------------

def evolution_symbol(grid: PhaseGrid, spec: KernelSpec) -> np.ndarray:
    """Torus multiplier symbol driving the evolution.

    Kernel-sum specs are converted term by term (evolution always runs on the
    periodic multiplier; the free-space kernels are reserved for the blow-up
    functionals).
    """
    if spec.form == "multiplier":
        return riesz_multiplier_symbol(grid, spec)
    converted = kernel_to_multiplier(spec, grid.d)
    if isinstance(converted, KernelSpec):
        converted = [converted]
    symbol = np.zeros(grid.spatial_shape)
    for sub in converted:
        if spec.mollify_eps is not None:
            sub = KernelSpec.multiplier(sub.kappa, sub.beta, spec.mollify_eps)
        symbol = symbol + riesz_multiplier_symbol(grid, sub)
    return symbol


def force_from_symbol(rho: np.ndarray, grid: PhaseGrid, symbol: np.ndarray) -> np.ndarray:
    phi_hat = symbol * np.fft.fftn(rho)
    u = np.empty((grid.d,) + grid.spatial_shape)
    for j in range(grid.d):
        shape = [1] * grid.d
        shape[j] = grid.nx
        u[j] = np.fft.ifftn(1j * grid.kx1d.reshape(shape) * phi_hat).real
    return u


def run(
    f0: DistributionField,
    spec: KernelSpec,
    cfg: IntegratorConfig,
    sink=None,
) -> RunResult:
    """Advance f0 to t_end, emitting diagnostics every diag_interval steps.

    Returns the final field, a status flag and the diagnostic time series.
    Halts gracefully on NaN/Inf (returning the last valid state) or when the
    spatial density exceeds halt_density_factor times its initial maximum.
    """
    g = f0.grid
    if g.d > 2:
        raise ValueError("evolution supports d in {1, 2}")
    if not np.isfinite(f0.values).all():
        raise ValueError("initial data must be finite")
    if f0.values.min() < -cfg.neg_tol:
        raise ValueError("initial data must be nonnegative (beyond neg_tol)")
    if g.Lv * cfg.dt > cfg.cfl_guard * 2.0 * g.Lx:
        raise ValueError(
            "transport displacement Lv*dt exceeds cfl_guard * box size; "
            "reduce dt or enlarge the box"
        )

    n_steps = int(round(cfg.t_end / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ValueError("t_end must be an integer number of steps")

    symbol = evolution_symbol(g, spec)
    f = f0.copy()
    clip_negatives(f, cfg.neg_tol)

    records = []

    def emit(fld):
        rec = compute_record(
            fld, spec, cfg.sigma,
            sobolev_orders=cfg.sobolev_orders,
            with_decay=cfg.with_decay,
            neg_tol=cfg.neg_tol,
            strict_negatives=False,
        )
        records.append(rec)
        if sink is not None:
            sink(rec)
        return rec

    rec0 = emit(f)
    rho_max0 = rec0.max_density
    halt_level = cfg.halt_density_factor * rho_max0 if rho_max0 > 0 else np.inf

    status = "completed"
    force_cfl_peak = 0.0
    prev = f.copy()

    for step in range(1, n_steps + 1):
        prev.values[...] = f.values
        prev.time = f.time

        f = step_transport(f, 0.5 * cfg.dt)
        rho = integrate_v(f)
        u = force_from_symbol(rho, g, symbol)
        disp = float(np.abs(u).max()) * cfg.dt
        force_cfl_peak = max(force_cfl_peak, disp / (2.0 * g.Lv))

        if cfg.splitting == "strang":
            if cfg.sigma > 0:
                f = step_fokker_planck(f, cfg.sigma, 0.5 * cfg.dt, cfg.fp_scheme)
            f = step_acceleration(f, u, cfg.dt)
            if cfg.sigma > 0:
                f = step_fokker_planck(f, cfg.sigma, 0.5 * cfg.dt, cfg.fp_scheme)
            f = step_transport(f, 0.5 * cfg.dt)
        else:  # lie: complete the transport, then kick, then diffuse
            f = step_transport(f, 0.5 * cfg.dt)
            f = step_acceleration(f, u, cfg.dt)
            if cfg.sigma > 0:
                f = step_fokker_planck(f, cfg.sigma, cfg.dt, cfg.fp_scheme)

        f.time = step * cfg.dt
        # no in-loop clipping: clipping strictly adds mass while the linear
        # substeps conserve it exactly; diagnostics treat sub-tolerance
        # negatives as vacuum and count anything beyond in negative_cells
        if not np.isfinite(f.values).all():
            status = "nan-halt"
            f = prev
            break

        rho_now = integrate_v(f)
        if rho_now.max() > halt_level:
            status = "concentration-halt"
            emit(f)
            break

        if step % cfg.diag_interval == 0 or step == n_steps:
            emit(f)

    meta = {
        "n_steps": n_steps,
        "dt": cfg.dt,
        "sigma": cfg.sigma,
        "splitting": cfg.splitting,
        "fp_scheme": cfg.fp_scheme,
        "force_cfl_peak": force_cfl_peak,
        "halt_density_level": halt_level,
    }
    return RunResult(field=f, status=status, records=records, meta=meta)
