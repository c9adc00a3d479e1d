"""Subordinator models: drift plus a Levy-measure functional family.

A model is determined by a non-negative drift ``d`` and the jump tail
``tail(x) = Pi((x, inf))``.  Everything else the lab needs derives from
those two objects:

* ``integrated_tail(delta)``  -- ``I(delta) = int_0^delta tail(x) dx``
* ``truncated_moment(delta, k)`` -- ``int_0^delta x^k Pi(dx)``
* ``laplace_exponent(lam)``   -- ``d*lam + int (1 - e^(-lam x)) Pi(dx)``
* ``shortened_exponent(delta, u)`` -- exponent of the jump-capped process
* ``mu(delta) = (d + I(delta)) / delta`` and
  ``v(delta) = sqrt(int (x ^ delta)^2 Pi(dx)) / delta`` -- the scaling
  constants of the capped-jump count statistic.

Generic evaluation goes through adaptive quadrature against the tail
(integration by parts removes the need for a density); the stable and
gamma families override with closed forms.  All integrals use absolute
tolerance 1e-12 and relative tolerance 1e-9, with a log substitution
``x = e^y`` to tame the singularity of infinite-activity tails at 0.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special

from .errors import ConfigError, DomainError, ModelInvalidError

QUAD_ABS_TOL = 1e-12
QUAD_REL_TOL = 1e-9
_LOG_FLOOR = math.log(1e-300)


class DegenerateModelWarning(RuntimeWarning):
    """Raised (as a warning) when an operation hits a zero jump measure."""


def _quad(f, lo, hi):
    val, _err = integrate.quad(f, lo, hi, epsabs=QUAD_ABS_TOL,
                               epsrel=QUAD_REL_TOL, limit=200)
    return val


def _quad_from_zero(g, hi):
    """``int_0^hi g(x) dx`` via ``x = e^y``; safe for integrable
    power-law blowups of g at the origin."""
    if hi <= 0.0:
        raise DomainError(f"upper limit must be positive, got {hi}")

    def h(y):
        x = math.exp(y)
        if x == 0.0:
            return 0.0
        return g(x) * x

    return _quad(h, -np.inf, math.log(hi))


class LevyModel:
    """Base class; subclasses provide ``tail`` and may override the
    derived functionals with closed forms.

    Instances are immutable value objects: every operation is a pure
    function of its arguments, safe for concurrent reads.
    """

    family = "custom"
    infinite_activity = True  # the built-in families all have infinite mass

    def __init__(self, drift=0.0, description=""):
        if drift < 0:
            raise DomainError(f"drift must be non-negative, got {drift}")
        self.drift = float(drift)
        self.description = description or self.family

    # -- primitives ---------------------------------------------------

    def tail(self, x):
        """Upper tail of the Levy measure, ``Pi((x, inf))``.  Accepts
        scalars or arrays; must be non-increasing with tail(inf) = 0."""
        raise NotImplementedError

    def tail_inverse(self, p):
        """Generalised inverse ``inf{x : tail(x) <= p}``.

        Generic route: monotone bisection in log-x over
        [1e-300, 1e300] to relative tolerance 1e-12.  Vectorised.
        """
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any(p_arr <= 0.0):
            raise DomainError("tail_inverse needs p > 0")
        if np.any(p_arr >= self.tail(1e-300)) and self._mass_is_finite():
            raise DomainError("p at or above the total mass of the measure")
        lo = np.full(p_arr.shape, _LOG_FLOOR)
        hi = np.full(p_arr.shape, -_LOG_FLOOR)
        # invariant: tail(e^lo) > p >= tail(e^hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            above = self.tail(np.exp(mid)) > p_arr
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo <= 1e-12):
                break
        out = np.exp(0.5 * (lo + hi))
        return out if np.ndim(p) else float(out[0])

    def _mass_is_finite(self):
        return math.isfinite(float(self.tail(1e-300)))

    # -- derived functionals ------------------------------------------

    def _tail_integral(self, w, hi):
        """``int_0^hi w(x) tail(x) dx``; the workhorse behind every
        generic functional below."""
        return _quad_from_zero(lambda x: w(x) * float(self.tail(x)), hi)

    def integrated_tail(self, delta):
        """``I(delta)``, finite for every valid measure."""
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        val = self._tail_integral(lambda x: 1.0, delta)
        if not math.isfinite(val):
            raise ModelInvalidError(
                "integrated tail diverges; the measure fails the "
                "(1 ^ x)-integrability requirement")
        return val

    def truncated_moment(self, delta, k):
        """``int_0^delta x^k Pi(dx)`` for k in {1, 2, 3}.

        Computed from the tail by parts:
        ``k * int_0^delta x^(k-1) tail(x) dx - delta^k tail(delta)``.
        """
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        if k not in (1, 2, 3):
            raise DomainError(f"moment order must be 1, 2 or 3, got {k}")
        val = (k * self._tail_integral(lambda x: x ** (k - 1), delta)
               - delta ** k * float(self.tail(delta)))
        if not math.isfinite(val):
            raise ModelInvalidError("truncated moment diverges")
        return max(val, 0.0)

    def laplace_exponent(self, lam):
        """``Phi(lam) = d lam + lam int_0^inf e^(-lam x) tail(x) dx``."""
        if lam < 0:
            raise DomainError(f"lambda must be non-negative, got {lam}")
        if lam == 0.0:
            return 0.0
        inner = self._tail_integral(lambda x: math.exp(-lam * x), 1.0)
        inner += _quad(lambda x: math.exp(-lam * x) * float(self.tail(x)),
                       1.0, np.inf)
        return self.drift * lam + lam * inner

    def shortened_exponent(self, delta, u):
        """Exponent of the process with jumps capped at ``delta``:
        ``d u + u int_0^delta e^(-u x) tail(x) dx``."""
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        if u < 0:
            raise DomainError(f"u must be non-negative, got {u}")
        if u == 0.0:
            return 0.0
        return self.drift * u + u * self._tail_integral(
            lambda x: math.exp(-u * x), delta)

    def exp_weighted_moment(self, delta, u):
        """``int_0^delta x e^(-u x) PiTilde(dx)`` including the cap atom;
        this is the derivative of ``shortened_exponent`` in u, minus d."""
        if u == 0.0:
            return self.integrated_tail(delta)
        return self._tail_integral(
            lambda x: math.exp(-u * x) * (1.0 - u * x), delta)

    def curvature_remainder(self, delta, u):
        """``R(u) = u^2 int_0^delta x e^(-u x) tail(x) dx``, the
        non-negative remainder ``exponent - u * exponent'``."""
        if u == 0.0:
            return 0.0
        return u * u * self._tail_integral(
            lambda x: x * math.exp(-u * x), delta)

    def mu(self, delta):
        """Mean scale of the capped count: ``(d + I(delta)) / delta``."""
        return (self.drift + self.integrated_tail(delta)) / delta

    def v(self, delta):
        """Fluctuation scale: ``sqrt(int (x ^ delta)^2 Pi(dx)) / delta``."""
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        v2 = self.truncated_moment(delta, 2) + delta ** 2 * float(self.tail(delta))
        if v2 == 0.0:
            warnings.warn("zero jump measure: v(delta) degenerates to 0",
                          DegenerateModelWarning, stacklevel=2)
            return 0.0
        return math.sqrt(v2) / delta

    def check_condition_2(self, deltas):
        """Ratio probe ``I(2 delta) / I(delta)`` over a decreasing grid.

        The liminf estimate is the minimum over the smaller half of the
        grid; it is an estimate, not a limit.
        """
        deltas = [float(d) for d in deltas]
        if any(d <= 0 for d in deltas):
            raise DomainError("grid must be positive")
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise DomainError("grid must be strictly decreasing")
        i_vals = [self.integrated_tail(d) for d in deltas]
        if all(v == 0.0 for v in i_vals):
            return Condition2Result(deltas, [math.nan] * len(deltas),
                                    math.nan, applicable=False)
        ratios = [self.integrated_tail(2 * d) / iv if iv > 0 else math.inf
                  for d, iv in zip(deltas, i_vals)]
        tail_half = ratios[len(ratios) // 2:]
        est = min(tail_half)
        return Condition2Result(deltas, ratios, est, applicable=True)

    def closed_form_renewal(self, delta):
        """Exact ``U(delta)`` when known; None otherwise."""
        return None

    # -- misc ----------------------------------------------------------

    def validate(self):
        """Probe integrability; raises ModelInvalidError on divergence."""
        for d in (1e-3, 1.0):
            self.integrated_tail(d)
        return self

    def model_id(self):
        return self.description

    def to_dict(self):
        return {"family": self.family, "drift": self.drift}

    def __repr__(self):
        return f"<{type(self).__name__} {self.model_id()}>"


class StableModel(LevyModel):
    """alpha-stable subordinator: ``tail(x) = x^-alpha / Gamma(1-alpha)``,
    normalised so the Laplace exponent of the driftless process is
    exactly ``lam^alpha``."""

    family = "stable"

    def __init__(self, alpha, drift=0.0):
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie in (0,1), got {alpha}")
        self.alpha = float(alpha)
        self._gamma_1ma = math.gamma(1.0 - self.alpha)
        super().__init__(drift, f"stable(alpha={alpha:g},drift={drift:g})")

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("tail needs x > 0")
        out = x ** (-self.alpha) / self._gamma_1ma
        return out if out.ndim else float(out)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = self.alpha * x ** (-1.0 - self.alpha) / self._gamma_1ma
        return out if out.ndim else float(out)

    def tail_inverse(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr <= 0.0):
            raise DomainError("tail_inverse needs p > 0")
        out = (p_arr * self._gamma_1ma) ** (-1.0 / self.alpha)
        return out if out.ndim else float(out)

    def integrated_tail(self, delta):
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        return delta ** (1.0 - self.alpha) / math.gamma(2.0 - self.alpha)

    def truncated_moment(self, delta, k):
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        if k not in (1, 2, 3):
            raise DomainError(f"moment order must be 1, 2 or 3, got {k}")
        a = self.alpha
        return a * delta ** (k - a) / ((k - a) * self._gamma_1ma)

    def laplace_exponent(self, lam):
        if lam < 0:
            raise DomainError(f"lambda must be non-negative, got {lam}")
        return self.drift * lam + lam ** self.alpha

    def shortened_exponent(self, delta, u):
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        if u < 0:
            raise DomainError(f"u must be non-negative, got {u}")
        if u == 0.0:
            return 0.0
        a = self.alpha
        return self.drift * u + u ** a * special.gammainc(1.0 - a, u * delta)

    def exp_weighted_moment(self, delta, u):
        if u == 0.0:
            return self.integrated_tail(delta)
        a = self.alpha
        body = a * u ** (a - 1.0) * special.gammainc(1.0 - a, u * delta)
        atom = delta ** (1.0 - a) * math.exp(-u * delta) / self._gamma_1ma
        return body + atom

    def curvature_remainder(self, delta, u):
        if u == 0.0:
            return 0.0
        a = self.alpha
        return (1.0 - a) * u ** a * special.gammainc(2.0 - a, u * delta)

    def closed_form_renewal(self, delta):
        # Laplace transform of the renewal measure is 1/Phi, so for the
        # driftless stable exponent U(x) = x^alpha / Gamma(1+alpha).
        if self.drift != 0.0:
            return None
        return delta ** self.alpha / math.gamma(1.0 + self.alpha)

    def to_dict(self):
        return {"family": "stable", "alpha": self.alpha, "drift": self.drift}


class GammaModel(LevyModel):
    """Gamma subordinator with Levy density ``shape * x^-1 e^(-rate x)``
    and exponent ``shape * log(1 + lam/rate)``."""

    family = "gamma"

    def __init__(self, rate=1.0, shape=1.0, drift=0.0):
        if rate <= 0 or shape <= 0:
            raise DomainError(f"rate and shape must be positive, "
                              f"got rate={rate}, shape={shape}")
        self.rate = float(rate)
        self.shape = float(shape)
        super().__init__(drift, f"gamma(rate={rate:g},shape={shape:g},"
                                f"drift={drift:g})")

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("tail needs x > 0")
        out = self.shape * special.exp1(self.rate * x)
        return out if out.ndim else float(out)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = self.shape * np.exp(-self.rate * x) / x
        return out if out.ndim else float(out)

    def integrated_tail(self, delta):
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        z = self.rate * delta
        return (self.shape / self.rate) * (-math.expm1(-z) + z * special.exp1(z))

    def truncated_moment(self, delta, k):
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        if k not in (1, 2, 3):
            raise DomainError(f"moment order must be 1, 2 or 3, got {k}")
        # int_0^d x^(k-1) e^(-rate x) dx = gamma_lower(k, rate*d) / rate^k
        z = self.rate * delta
        return (self.shape * math.gamma(k) * special.gammainc(k, z)
                / self.rate ** k)

    def laplace_exponent(self, lam):
        if lam < 0:
            raise DomainError(f"lambda must be non-negative, got {lam}")
        return self.drift * lam + self.shape * math.log1p(lam / self.rate)

    def to_dict(self):
        return {"family": "gamma", "rate": self.rate, "shape": self.shape,
                "drift": self.drift}


class TruncatedStableModel(LevyModel):
    """Stable jump density cut off above ``cut``: infinite activity with
    bounded jump sizes."""

    family = "truncated_stable"

    def __init__(self, alpha, cut, drift=0.0):
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie in (0,1), got {alpha}")
        if cut <= 0:
            raise DomainError(f"cut must be positive, got {cut}")
        self.alpha = float(alpha)
        self.cut = float(cut)
        self._gamma_1ma = math.gamma(1.0 - self.alpha)
        super().__init__(drift, f"truncated_stable(alpha={alpha:g},"
                                f"cut={cut:g},drift={drift:g})")

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("tail needs x > 0")
        out = np.where(x < self.cut,
                       (np.minimum(x, self.cut) ** (-self.alpha)
                        - self.cut ** (-self.alpha)) / self._gamma_1ma,
                       0.0)
        return out if out.ndim else float(out)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < self.cut,
                       self.alpha * x ** (-1.0 - self.alpha) / self._gamma_1ma,
                       0.0)
        return out if out.ndim else float(out)

    def tail_inverse(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr <= 0.0):
            raise DomainError("tail_inverse needs p > 0")
        out = (p_arr * self._gamma_1ma + self.cut ** (-self.alpha)) \
            ** (-1.0 / self.alpha)
        return out if out.ndim else float(out)

    def integrated_tail(self, delta):
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        a, c = self.alpha, self.cut
        d = min(delta, c)
        base = (d ** (1.0 - a) / (1.0 - a) - d * c ** (-a)) / self._gamma_1ma
        return base

    def truncated_moment(self, delta, k):
        if delta <= 0:
            raise DomainError(f"delta must be positive, got {delta}")
        if k not in (1, 2, 3):
            raise DomainError(f"moment order must be 1, 2 or 3, got {k}")
        a = self.alpha
        d = min(delta, self.cut)
        return a * d ** (k - a) / ((k - a) * self._gamma_1ma)

    def to_dict(self):
        return {"family": "truncated_stable", "alpha": self.alpha,
                "cut": self.cut, "drift": self.drift}


class CustomModel(LevyModel):
    """User-supplied tail; optional inverse and density.  The tail must
    be non-increasing, right-continuous and vanish at infinity; the
    constructor probes integrability (the witness) unless told not to."""

    family = "custom"

    def __init__(self, tail, drift=0.0, tail_inverse=None, density=None,
                 name="custom", check=True, infinite_activity=None):
        self._tail = tail
        self._tail_inverse = tail_inverse
        self._density = density
        super().__init__(drift, f"custom({name},drift={drift:g})")
        self.name = name
        if infinite_activity is None:
            infinite_activity = self._probe_infinite_activity()
        self.infinite_activity = infinite_activity
        if check:
            self.validate()

    def _probe_infinite_activity(self):
        # heuristic only; callers with slowly diverging tails should
        # declare infinite_activity explicitly
        t_mid = float(self._tail(np.asarray(1e-120)))
        t_low = float(self._tail(np.asarray(1e-250)))
        if t_low == 0.0:
            return False
        if not math.isfinite(t_mid) or t_mid > 1e12:
            return True
        return t_low >= 1.05 * t_mid

    def tail(self, x):
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr <= 0):
            raise DomainError("tail needs x > 0")
        out = np.asarray(self._tail(x_arr), dtype=float)
        return out if out.ndim else float(out)

    def tail_inverse(self, p):
        if self._tail_inverse is not None:
            return self._tail_inverse(p)
        return super().tail_inverse(p)

    def density(self, x):
        if self._density is None:
            raise NotImplementedError("custom model has no density")
        return self._density(x)

    def integrated_tail(self, delta):
        if self.tail(min(delta, 1.0)) == 0.0 and self.tail(delta * 1e-6) == 0.0:
            return 0.0
        return super().integrated_tail(delta)

    def to_dict(self):
        return {"family": "custom", "tail": self.name, "drift": self.drift}


@dataclass(frozen=True)
class Condition2Result:
    """Outcome of the integrated-tail doubling probe."""
    deltas: list
    ratios: list
    liminf_estimate: float
    applicable: bool

    @property
    def satisfied(self):
        return self.applicable and self.liminf_estimate > 1.0


@dataclass(frozen=True)
class ShortenedModel:
    """The jump-capped companion of ``base``: jumps above ``delta``
    are replaced by jumps of exactly ``delta`` (an atom of mass
    ``tail(delta)`` at ``delta``)."""

    base: LevyModel
    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise DomainError(f"delta must be positive, got {self.delta}")

    def moment(self, k):
        """``int x^k`` against the capped measure; k in {1, 2, 3}."""
        d = self.delta
        return (self.base.truncated_moment(d, k)
                + d ** k * float(self.base.tail(d)))

    def exponent(self, u):
        return self.base.shortened_exponent(self.delta, u)

    def tail(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = np.where(x_arr < self.delta, self.base.tail(np.maximum(x_arr, 1e-300)), 0.0)
        return out if out.ndim else float(out)

    def mean_rate(self):
        """Drift-inclusive mean slope ``d + I(delta)`` of the capped path."""
        return self.base.drift + self.base.integrated_tail(self.delta)


def zero_tail(x):
    """Tail of the null measure; the one built-in custom tail."""
    return np.zeros_like(np.asarray(x, dtype=float))


NAMED_TAILS = {"zero": zero_tail}


def drift_only(drift=1.0):
    """Pure-drift model (no jumps)."""
    return CustomModel(zero_tail, drift=drift, name="zero", check=False)


def model_from_dict(spec):
    """Build a model from a JSON-compatible mapping.

    Custom entries must reference a named built-in tail; arbitrary
    expressions are rejected.
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("model spec must be a mapping with a 'family' key")
    family = spec["family"]
    drift = float(spec.get("drift", 0.0))
    if family == "stable":
        return StableModel(alpha=float(spec["alpha"]), drift=drift)
    if family == "gamma":
        return GammaModel(rate=float(spec.get("rate", 1.0)),
                          shape=float(spec.get("shape", 1.0)), drift=drift)
    if family == "truncated_stable":
        return TruncatedStableModel(alpha=float(spec["alpha"]),
                                    cut=float(spec["cut"]), drift=drift)
    if family == "custom":
        name = spec.get("tail")
        if name not in NAMED_TAILS:
            raise ConfigError(
                f"custom tail {name!r} is not a named built-in; "
                f"choices: {sorted(NAMED_TAILS)}")
        return CustomModel(NAMED_TAILS[name], drift=drift, name=name,
                           check=False)
    raise ConfigError(f"unknown model family {family!r}")


def load_model(path):
    """Read a model definition file (JSON)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file {path} is not valid JSON: {exc}") from None
    return model_from_dict(spec)
