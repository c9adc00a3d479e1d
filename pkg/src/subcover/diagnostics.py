"""Tilted-exponent diagnostics for the capped-jump process.

For the capped measure at level delta, write ``phi(u)`` for its Laplace
exponent.  The probes here revolve around

* ``g(u) = phi'(u) = d + int x e^(-ux) PiTilde(dx)`` -- strictly
  decreasing from ``d + I(delta)`` to ``d``;
* ``R(u) = phi(u) - u g(u) >= 0`` -- the curvature remainder;
* ``lambda(delta)`` -- the tilt solving ``g(lambda) = x_target`` for a
  target mean slope inside the bracket ``(d, d + I(delta))``.

These feed a concentration lower bound for the capped path staying
small, whose unspecified universal constant is a configurable knob
checked for consistency against Monte Carlo, never derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .models import LevyModel
from .paths import SimConfig, auto_cutoff, sample_skeleton, value_at
from .renewal import estimate_renewal
from .stats import wls_slope


def tilt_derivative(model: LevyModel, delta: float, u: float) -> float:
    """``g(u)``: drift plus the exp-weighted first moment of the capped
    measure (atom included)."""
    if u < 0:
        raise DomainError(f"u must be non-negative, got {u}")
    return model.drift + model.exp_weighted_moment(delta, u)


def tilt_remainder(model: LevyModel, delta: float, u: float) -> float:
    """``R(u) >= 0``; computed from its integral form, which has no
    cancellation (subtracting ``u g(u)`` from the exponent would lose
    all precision for small u)."""
    if u < 0:
        raise DomainError(f"u must be non-negative, got {u}")
    return model.curvature_remainder(delta, u)


@dataclass
class JPState:
    """One evaluated tilt state."""
    delta: float
    u_or_lambda: float
    g_val: float
    R_val: float
    x_target: float = math.nan
    t_used: float = math.nan
    alpha_param: float = math.nan


def solve_lambda(model: LevyModel, delta: float, x_target: float) -> float:
    """Unique ``u`` with ``g(u) = x_target``; bisection in log-u to
    relative tolerance 1e-10.  ``x_target`` must lie strictly between
    the endpoints ``g(inf) = d`` and ``g(0) = d + I(delta)``."""
    lo_val = model.drift
    hi_val = model.drift + model.integrated_tail(delta)
    if not lo_val < x_target < hi_val:
        raise DomainError(
            f"x_target={x_target:g} outside the bracket "
            f"(g(inf)={lo_val:g}, g(0)={hi_val:g})")
    u_lo = 1e-9 / delta
    while tilt_derivative(model, delta, u_lo) <= x_target:
        u_lo /= 8.0
        if u_lo < 1e-280:
            raise DomainError("x_target indistinguishable from g(0)")
    u_hi = 1.0 / delta
    while tilt_derivative(model, delta, u_hi) >= x_target:
        u_hi *= 8.0
        if u_hi > 1e280:
            raise DomainError("x_target indistinguishable from g(inf)")
    llo, lhi = math.log(u_lo), math.log(u_hi)
    for _ in range(200):
        mid = 0.5 * (llo + lhi)
        if tilt_derivative(model, delta, math.exp(mid)) > x_target:
            llo = mid
        else:
            lhi = mid
        if lhi - llo <= 1e-10:
            break
    return math.exp(0.5 * (llo + lhi))


@dataclass
class TiltProbeRow:
    delta: float
    U: float
    t_used: float
    x_target: float
    lam: float
    delta_lambda: float
    tR: float
    in_bracket: bool


@dataclass
class TiltProbeResult:
    alpha_param: float
    rows: list
    slope: float
    slope_se: float

    @property
    def bounded(self):
        """No significant growth of delta*lambda as delta shrinks."""
        return self.slope >= -2.0 * self.slope_se

    def values(self):
        return [r.delta_lambda for r in self.rows if r.in_bracket]


def delta_lambda_probe(model: LevyModel, alpha_param: float, deltas,
                       renewal_n: int = 2000, seed: int = 0) -> TiltProbeResult:
    """Track ``delta * lambda(delta)`` along a grid, with the tilt
    target ``x = delta / ((1 + alpha_param) U(delta))``.

    ``U`` comes from the closed form when available, otherwise from a
    Monte Carlo renewal estimate.  Rows whose target falls outside the
    tilt bracket are flagged, not fatal.
    """
    if alpha_param <= 0:
        raise DomainError(f"alpha_param must be positive, got {alpha_param}")
    rows = []
    for j, delta in enumerate(deltas):
        u_ren = model.closed_form_renewal(delta)
        if u_ren is None:
            u_ren = estimate_renewal(model, delta, renewal_n,
                                     seed=seed + 31 * j).U_hat
        t_used = (1.0 + alpha_param) * u_ren
        x_target = delta / t_used
        hi = model.drift + model.integrated_tail(delta)
        if not model.drift < x_target < hi:
            rows.append(TiltProbeRow(delta=delta, U=u_ren, t_used=t_used,
                                     x_target=x_target, lam=math.nan,
                                     delta_lambda=math.nan, tR=math.nan,
                                     in_bracket=False))
            continue
        lam = solve_lambda(model, delta, x_target)
        tr = t_used * tilt_remainder(model, delta, lam)
        rows.append(TiltProbeRow(delta=delta, U=u_ren, t_used=t_used,
                                 x_target=x_target, lam=lam,
                                 delta_lambda=delta * lam, tR=tr,
                                 in_bracket=True))
    good = [r for r in rows if r.in_bracket]
    if not good:
        raise DomainError("no grid point admits the tilt bracket "
                          "(degenerate measure?)")
    ses = [max(abs(r.delta_lambda) * 1e-3, 1e-12) for r in good]
    slope, slope_se = wls_slope(np.log10([r.delta for r in good]),
                                [r.delta_lambda for r in good], ses)
    return TiltProbeResult(alpha_param=alpha_param, rows=rows,
                           slope=slope, slope_se=slope_se)


def concentration_bound(model: LevyModel, delta: float, t: float,
                        eps_jp: float, c_const: float = 1.0) -> float:
    """Lower bound for ``P(capped path at t <= delta)`` with target
    slope ``x = delta/t``: ``(1 - (1+e)c/(e^2 tR)) exp(-(1+2e) tR)``,
    clamped at zero."""
    if eps_jp <= 0:
        raise DomainError(f"eps_jp must be positive, got {eps_jp}")
    x_target = delta / t
    lam = solve_lambda(model, delta, x_target)
    tr = t * tilt_remainder(model, delta, lam)
    if tr <= 0:
        return 0.0
    factor = 1.0 - (1.0 + eps_jp) * c_const / (eps_jp ** 2 * tr)
    if factor <= 0.0:
        return 0.0
    return factor * math.exp(-(1.0 + 2.0 * eps_jp) * tr)


@dataclass
class BoundCheck:
    delta: float
    t: float
    eps_jp: float
    c_const: float
    bound: float
    empirical_p: float
    se: float

    @property
    def consistent(self):
        return self.bound <= self.empirical_p + 3.0 * self.se


def concentration_bound_check(model: LevyModel, delta: float, t: float,
                              eps_jp: float, c_const: float = 1.0,
                              n: int = 10_000, seed: int = 0) -> BoundCheck:
    """Monte Carlo companion: estimate the left side of the bound and
    report whether bound <= estimate + 3 SE."""
    bound = concentration_bound(model, delta, t, eps_jp, c_const)
    eps_cut = min(auto_cutoff(model, delta), delta / 100.0)
    hits = 0
    for r in range(n):
        sk = sample_skeleton(model, SimConfig(t=t, eps=eps_cut, seed=seed,
                                              replica_index=r))
        if value_at(sk, t, "shortened", delta) <= delta:
            hits += 1
    p_hat = hits / n
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / n) / n)
    return BoundCheck(delta=delta, t=t, eps_jp=eps_jp, c_const=c_const,
                      bound=bound, empirical_p=p_hat, se=se)


def condition_ratio_probe(model: LevyModel, deltas,
                          measure: str = "integrated_tail"):
    """Doubling-ratio probe, either on the integrated tail I or on the
    truncated first moment H (``measure='first_moment'``); the two
    conditions differ materially, so both are exposed."""
    if measure == "integrated_tail":
        return model.check_condition_2(deltas)
    if measure != "first_moment":
        raise DomainError(f"unknown measure mode {measure!r}")
    deltas = [float(d) for d in deltas]
    h_vals = [model.truncated_moment(d, 1) for d in deltas]
    from .models import Condition2Result
    if all(v == 0.0 for v in h_vals):
        return Condition2Result(deltas, [math.nan] * len(deltas), math.nan,
                                applicable=False)
    ratios = [model.truncated_moment(2 * d, 1) / hv if hv > 0 else math.inf
              for d, hv in zip(deltas, h_vals)]
    est = min(ratios[len(ratios) // 2:])
    return Condition2Result(deltas, ratios, est, applicable=True)
