r"""Explicit finite-time blow-up criteria, constants and Gronwall machinery.

For attractive power-law kernels K = sum_i c_i |x|^{-alpha_i} (c_i > 0,
alpha_i in (0, d), d >= 3) the criteria are strict inequalities on initial
functionals:

* sigma = 0, max alpha_i > 2:
      int |v|^2 f0 + C0(delta=0) < int rho0 (K * rho0);
  when min alpha_i >= 2 the additive constant is absent (pure power branch);
* sigma > 0, 2(1+delta) < max alpha_i:
      2(1+delta) E(0) + b I'(0) < -b (sigma + b) I(0) - C_delta - C0,
  where b is the positive root of b^2 + sigma b - C_delta = 0.

The inertia bound behind the sigma > 0 case is the closed-form solution of
the saturating comparison ODE h'' + c1 h' = c2 h + c3; its first zero is the
predicted singularity horizon.  A repulsive-attractive mixture
K = |x|^{-alpha1} - |x|^{-alpha2} has its own branch with an indicator
correction term active for alpha2 >= 2 (functionals taken at unit mass).

Two distinct symbols on purpose: ``beta`` names the Riesz multiplier order,
``b_rate`` the Gronwall root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .diagnostics import DiagnosticsRecord
from .grid import DistributionField
from .profiles import SeparablePhaseDensity

NEAR_BOUNDARY_REL = 1e-9


class DeltaInfeasibleError(ValueError):
    def __init__(self, message, feasible):
        super().__init__(message)
        self.feasible = feasible


# -- constants -------------------------------------------------------------------

def c_delta(delta: float, d: int) -> float:
    """Entropy-control constant 4(1+d')(1+1/d')^{d/(2+d)} (2^{3d} pi^{2d}/e)^{1/(2+d)}."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    core = (np.exp(-1.0) * 2.0 ** (3 * d) * np.pi ** (2 * d)) ** (1.0 / (2 + d))
    return float(4.0 * (1.0 + delta) * (1.0 + 1.0 / delta) ** (d / (2.0 + d)) * core)


def gronwall_rate(sigma: float, c_del: float) -> float:
    """Positive root of b^2 + sigma b - c_del = 0."""
    if not c_del > 0:
        raise ValueError("need a positive quadratic constant")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return float(0.5 * (-sigma + np.sqrt(sigma * sigma + 4.0 * c_del)))


def _split_terms(terms, delta: float):
    terms = [(float(c), float(a)) for c, a in terms]
    alpha_max = max(a for _, a in terms)
    c_lead = sum(c for c, a in terms if a == alpha_max)
    sub = [(c, a) for c, a in terms if a < 2.0 * (1.0 + delta)]
    return terms, alpha_max, c_lead, sub


def c_zero(terms, delta: float = 0.0) -> float:
    """Additive constant absorbing the sub-threshold attractive terms.

    C0 = (sum_{alpha_i < 2(1+delta)} c_i (1 + delta - alpha_i/2))^{1 - 2/(aM-2)}
         * (c_lead (aM/2 - 1 - delta))^{2/(aM-2)},
    with aM the largest exponent and c_lead its coefficient.  An empty
    sub-threshold sum yields C0 = 0 (nothing to absorb), consistent with the
    constant-free pure power branch.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    terms, alpha_max, c_lead, sub = _split_terms(terms, delta)
    for c, _ in terms:
        if c <= 0:
            raise ValueError("c_zero requires strictly positive coefficients")
    if alpha_max <= 2.0 * (1.0 + delta):
        raise DeltaInfeasibleError(
            f"no supercritical attractive term: max alpha = {alpha_max} "
            f"<= 2(1+delta) = {2 * (1 + delta)}",
            feasible=(0.0, alpha_max / 2.0 - 1.0),
        )
    S = sum(c * (1.0 + delta - a / 2.0) for c, a in sub)
    if S == 0.0:
        return 0.0
    lead = c_lead * (alpha_max / 2.0 - 1.0 - delta)
    p = 2.0 / (alpha_max - 2.0)
    return float(S ** (1.0 - p) * lead**p)


# -- Gronwall machinery ------------------------------------------------------------

def _gronwall_coeffs(h0, h0p, c1, c2, c3):
    b = gronwall_rate(c1, c2)
    corr = (h0p - b * h0 - c3 / (b + c1)) / (c1 + 2.0 * b)
    A = h0 + c3 / (b * (b + c1)) + corr
    return b, A, corr, c3 / (b * (c1 + b))


def gronwall_bound(h0: float, h0p: float, c1: float, c2: float, c3: float, t):
    """Closed-form upper bound for h'' + c1 h' <= c2 h + c3 (c1, c2 > 0).

    h(t) <= A e^{bt} - corr e^{-(c1+b)t} - c3/(b(c1+b)); equals the exact
    solution of the saturated equality ODE, and gronwall_bound(.., t=0) = h0.
    """
    if not (c1 > 0 and c2 > 0):
        raise ValueError("need c1 > 0 and c2 > 0")
    b, A, corr, part = _gronwall_coeffs(h0, h0p, c1, c2, c3)
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):  # +/-inf is the honest value far out
        out = A * np.exp(b * t) - corr * np.exp(-(c1 + b) * t) - part
    return float(out) if out.ndim == 0 else out


def predict_crossing(
    h0: float, h0p: float, c1: float, c2: float, c3: float,
    horizon: float = 100.0, tol: float = 1e-10,
) -> float | None:
    """Smallest t in (0, horizon] where the Gronwall bound reaches 0.

    Bracketing scan followed by bisection; None when no crossing occurs
    before the horizon.
    """
    from scipy.optimize import brentq

    def g(t):
        return gronwall_bound(h0, h0p, c1, c2, c3, t)

    ts = np.linspace(0.0, horizon, 4097)
    vals = g(ts)
    below = np.nonzero(vals <= 0.0)[0]
    below = below[below > 0]
    if below.size == 0:
        return None
    i = below[0]
    if vals[i] == 0.0:
        return float(ts[i])
    return float(brentq(g, ts[i - 1], ts[i], xtol=tol))


# -- initial-data functionals -------------------------------------------------------

@dataclass(frozen=True)
class InitialFunctionals:
    """Functionals of the initial data consumed by the criteria.

    ``velocity_second_moment`` is the full moment int |v|^2 f (twice the
    kinetic energy); ``interaction`` is int rho (K * rho) for the kernel under
    test (signed for mixtures); ``entropy`` may be None when no sigma > 0
    check is requested.
    """

    mass: float
    velocity_second_moment: float
    interaction: float
    inertia: float
    inertia_prime: float
    entropy: float | None = None
    provenance: str = "unspecified"

    def total_energy(self) -> float:
        if self.entropy is None:
            raise ValueError("entropy needed for the total energy")
        return 0.5 * self.velocity_second_moment + self.entropy - 0.5 * self.interaction

    def tilde_energy(self) -> float:
        return 0.5 * self.velocity_second_moment - 0.5 * self.interaction


def functionals_from_closed_form(
    data: SeparablePhaseDensity, terms, rel_tol: float = 1e-6
) -> InitialFunctionals:
    """Quadrature path: moments and interaction of separable radial data."""
    return InitialFunctionals(
        mass=data.mass,
        velocity_second_moment=data.second_moment_v(),
        interaction=data.interaction(terms, rel_tol=rel_tol),
        inertia=data.inertia(),
        inertia_prime=data.xv_moment(),
        entropy=data.entropy(),
        provenance="closed-form quadrature",
    )


def functionals_from_record(rec: DiagnosticsRecord) -> InitialFunctionals:
    """Grid path: reuse a diagnostics record (free-space kernel labeled runs)."""
    return InitialFunctionals(
        mass=rec.mass,
        velocity_second_moment=2.0 * rec.kinetic,
        interaction=rec.interaction,
        inertia=rec.inertia_I,
        inertia_prime=rec.inertia_Iprime,
        entropy=rec.entropy,
        provenance=f"grid ({rec.interaction_label})",
    )


# -- reports ------------------------------------------------------------------------

@dataclass
class BlowupReport:
    case: str
    branch: str
    condition_met: bool | None
    lhs: float | None
    rhs: float | None
    constants: dict = field(default_factory=dict)
    predicted_crossing_time: float | None = None
    near_boundary: bool = False
    reason: str | None = None
    inputs_digest: dict = field(default_factory=dict)
    delta_scan: list | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _digest(fun: InitialFunctionals) -> dict:
    d = asdict(fun)
    return d


def _strict_less(lhs: float, rhs: float) -> tuple[bool, bool]:
    scale = max(abs(lhs), abs(rhs), 1.0)
    near = abs(lhs - rhs) < NEAR_BOUNDARY_REL * scale
    return bool(lhs < rhs), near


# -- criterion evaluators --------------------------------------------------------------

def check_sigma_zero(fun: InitialFunctionals, terms) -> BlowupReport:
    """Diffusion-free criterion; picks the constant-free branch when
    min alpha_i >= 2, the C0 branch when max alpha_i > 2, else inapplicable."""
    alphas = [a for _, a in terms]
    alpha_min, alpha_max = min(alphas), max(alphas)
    m2 = fun.velocity_second_moment
    inter = fun.interaction

    if alpha_min >= 2.0:
        branch, C0 = "pure-power (min alpha >= 2)", 0.0
    elif alpha_max > 2.0:
        branch, C0 = "supercritical with C0", c_zero(terms, delta=0.0)
    else:
        return BlowupReport(
            case="VlasovSigmaZero", branch="inapplicable", condition_met=None,
            lhs=None, rhs=None,
            reason=f"needs max alpha > 2, got {alpha_max}",
            inputs_digest=_digest(fun),
        )

    lhs = m2 + C0
    rhs = inter
    met, near = _strict_less(lhs, rhs)
    crossing = None
    if met:
        # I'' <= 2*tildeE(0) + C0 uniformly, so I sits under an explicit parabola
        a2 = 0.5 * (2.0 * fun.tilde_energy() + C0)
        roots = np.roots([a2, fun.inertia_prime, fun.inertia])
        real = roots[np.abs(roots.imag) < 1e-12].real
        pos = real[real > 0]
        crossing = float(pos.min()) if pos.size else None
    return BlowupReport(
        case="VlasovSigmaZero", branch=branch, condition_met=met,
        lhs=float(lhs), rhs=float(rhs),
        constants={"C0": C0, "delta": 0.0},
        predicted_crossing_time=crossing, near_boundary=near,
        inputs_digest=_digest(fun),
    )


def _feasible_deltas(alpha_max: float, n: int = 16) -> np.ndarray:
    upper = alpha_max / 2.0 - 1.0
    return np.geomspace(upper * 1e-3, upper * 0.999, n)


def check_sigma_positive(
    fun: InitialFunctionals, terms, sigma: float,
    delta: float | None = None, horizon: float = 100.0, d: int = 3,
) -> BlowupReport:
    """Fokker-Planck criterion 2(1+delta)E(0) + b I'(0) < -b(sigma+b) I(0) - C_delta - C0.

    ``delta = None`` scans 16 log-spaced feasible values and reports the most
    favorable one (the criterion only needs *some* delta to work).
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive for this branch")
    alpha_max = max(a for _, a in terms)
    upper = alpha_max / 2.0 - 1.0
    if upper <= 0:
        raise DeltaInfeasibleError(
            f"needs max alpha > 2, got {alpha_max}", feasible=None
        )
    if delta is not None and not 0.0 < delta < upper:
        raise DeltaInfeasibleError(
            f"delta = {delta} infeasible; needs 0 < delta < {upper}",
            feasible=(0.0, upper),
        )

    E0 = fun.total_energy()
    scan = _feasible_deltas(alpha_max) if delta is None else np.array([delta])
    rows = []
    for dl in scan:
        Cd = c_delta(dl, d)
        b = gronwall_rate(sigma, Cd)
        C0 = c_zero(terms, dl)
        lhs = 2.0 * (1.0 + dl) * E0 + b * fun.inertia_prime
        rhs = -b * (sigma + b) * fun.inertia - Cd - C0
        rows.append((float(dl), float(lhs), float(rhs), Cd, b, C0))
    best = min(rows, key=lambda row: row[1] - row[2])
    dl, lhs, rhs, Cd, b, C0 = best
    met, near = _strict_less(lhs, rhs)

    crossing = None
    if met:
        c3 = 2.0 * (1.0 + dl) * E0 + C0 + Cd
        crossing = predict_crossing(
            fun.inertia, fun.inertia_prime, sigma, Cd, c3, horizon=horizon
        )
    return BlowupReport(
        case="VlasovFokkerPlanck", branch="supercritical", condition_met=met,
        lhs=lhs, rhs=rhs,
        constants={"delta": dl, "C_delta": Cd, "b_rate": b, "C0": C0, "sigma": sigma},
        predicted_crossing_time=crossing, near_boundary=near,
        inputs_digest=_digest(fun),
        delta_scan=[
            {"delta": r[0], "lhs": r[1], "rhs": r[2]} for r in rows
        ] if delta is None else None,
    )


def _unit_mass(fun: InitialFunctionals) -> tuple[InitialFunctionals, float]:
    """Rescale f -> f / mass; the mixture bounds are stated at unit mass."""
    M = fun.mass
    if M <= 0:
        raise ValueError("mass must be positive")
    if abs(M - 1.0) < 1e-12:
        return fun, 1.0
    ent = None if fun.entropy is None else fun.entropy / M - np.log(M)
    scaled = InitialFunctionals(
        mass=1.0,
        velocity_second_moment=fun.velocity_second_moment / M,
        interaction=fun.interaction / (M * M),
        inertia=fun.inertia / M,
        inertia_prime=fun.inertia_prime / M,
        entropy=ent,
        provenance=fun.provenance + f" (rescaled from mass {M:g})",
    )
    return scaled, M


def check_mixed(
    fun: InitialFunctionals, alpha1: float, alpha2: float, sigma: float,
    delta: float | None = None, horizon: float = 100.0, d: int = 3,
) -> BlowupReport:
    """Mixture K = |x|^{-alpha1} - |x|^{-alpha2}: attractive vs repulsive.

    ``fun.interaction`` must be the signed integral for this mixture.  The
    indicator term (alpha2/2 - 1)[alpha2 >= 2] (with -delta when sigma > 0)
    enters exactly as stated; all functionals are rescaled to unit mass.
    """
    if alpha2 > alpha1 and alpha2 >= 2.0:
        raise ValueError(
            f"exponent ordering violated: need alpha1 >= max(2, alpha2), "
            f"got alpha1 = {alpha1}, alpha2 = {alpha2}"
        )
    fun, scale = _unit_mass(fun)
    indicator = 1.0 if alpha2 >= 2.0 else 0.0

    if sigma == 0.0:
        if alpha1 < max(2.0, alpha2):
            raise ValueError("sigma = 0 branch needs alpha1 >= max(2, alpha2)")
        lhs = fun.velocity_second_moment
        rhs = fun.interaction + (alpha2 / 2.0 - 1.0) * indicator
        met, near = _strict_less(lhs, rhs)
        return BlowupReport(
            case="MixedSign", branch="sigma-zero", condition_met=met,
            lhs=float(lhs), rhs=float(rhs),
            constants={"alpha1": alpha1, "alpha2": alpha2,
                       "indicator": indicator, "mass_rescale": scale},
            near_boundary=near, inputs_digest=_digest(fun),
        )

    if alpha1 <= max(2.0, alpha2):
        raise ValueError("sigma > 0 branch needs alpha1 > max(2, alpha2)")
    upper = alpha1 / 2.0 - 1.0
    if delta is not None and not 0.0 < delta < upper:
        raise DeltaInfeasibleError(
            f"delta = {delta} infeasible; needs 0 < delta < {upper}",
            feasible=(0.0, upper),
        )
    E0 = fun.total_energy()
    scan = _feasible_deltas(alpha1) if delta is None else np.array([delta])
    rows = []
    for dl in scan:
        Cd = c_delta(dl, d)
        b = gronwall_rate(sigma, Cd)
        ind_term = (alpha2 / 2.0 - 1.0 - dl) * indicator
        lhs = 2.0 * (1.0 + dl) * E0 + b * fun.inertia_prime
        rhs = -b * (sigma + b) * fun.inertia - ind_term
        rows.append((float(dl), float(lhs), float(rhs), Cd, b, ind_term))
    best = min(rows, key=lambda row: row[1] - row[2])
    dl, lhs, rhs, Cd, b, ind_term = best
    met, near = _strict_less(lhs, rhs)

    # crossing horizon from the comparison ODE, which carries C_delta even
    # though the stated inequality does not; a reported crossing therefore
    # certifies the stronger condition and implies condition_met
    crossing = None
    c3 = 2.0 * (1.0 + dl) * E0 + Cd + ind_term
    t_star = predict_crossing(
        fun.inertia, fun.inertia_prime, sigma, Cd, c3, horizon=horizon
    )
    if met and t_star is not None:
        crossing = t_star
    return BlowupReport(
        case="MixedSign", branch="sigma-positive", condition_met=met,
        lhs=lhs, rhs=rhs,
        constants={"alpha1": alpha1, "alpha2": alpha2, "delta": dl,
                   "C_delta": Cd, "b_rate": b, "indicator": indicator,
                   "indicator_term": ind_term, "mass_rescale": scale,
                   "sigma": sigma},
        predicted_crossing_time=crossing, near_boundary=near,
        inputs_digest=_digest(fun),
        delta_scan=[
            {"delta": r[0], "lhs": r[1], "rhs": r[2]} for r in rows
        ] if delta is None else None,
    )


# -- unconditional entropy bound ---------------------------------------------------

def entropy_bound_check(
    f: DistributionField, delta: float
) -> tuple[float, float, bool]:
    """Check -2(1+delta) int f ln f [0 <= f <= 1] <= C_delta (I + 1) + delta int |v|^2 f.

    The bound holds for every nonnegative f; a False return signals a defect,
    not a property of the data.
    """
    g = f.grid
    w = g.cell_volume
    vals = f.values
    mask = (vals > 0.0) & (vals <= 1.0)
    lhs = -2.0 * (1.0 + delta) * float(np.sum(vals[mask] * np.log(vals[mask])) * w)
    inertia = 0.5 * float(np.sum(g.x_sq * vals) * w)
    m2 = float(np.sum(g.v_sq * vals) * w)
    rhs = c_delta(delta, g.d) * (inertia + 1.0) + delta * m2
    return lhs, rhs, bool(lhs <= rhs)
