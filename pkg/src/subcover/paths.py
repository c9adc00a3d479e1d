"""Event-driven path sampling for subordinators.

A path is represented exactly above a jump cutoff ``eps`` by a finite
list of (time, size) events; jumps below the cutoff are replaced by
their mean drift ``int_0^eps x Pi(dx)``.  No Gaussian refinement is
applied: it would break monotonicity, which every counting routine
relies on.  Accuracy is instead enforced by the cutoff selection rule
(neglected small-jump variance must be far below the fluctuation scale
of the finest box size queried).

Randomness comes from counter-based Philox streams keyed by
``(seed, replica_index, role)``, so replicas are independent,
reproducible, and insensitive to scheduling order.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, PrecisionError
from .models import LevyModel

ROLE_COUNT = 0
ROLE_TIMES = 1
ROLE_SIZES = 2
ROLE_WINDOW = 3  # lazy horizon extensions (first-passage sampling)

VALUE_MODES = ("raw", "shortened", "truncated")


def stream(seed, *key):
    """Deterministic Generator for a (seed, key...) stream."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SimConfig:
    """Simulation request: horizon, cutoff policy and stream identity.

    ``eps="auto"`` resolves the cutoff from ``delta_min``, the smallest
    box size the consumer will query: the cutoff starts at
    ``delta_min/100`` and halves until the neglected small-jump second
    moment is at most 1e-4 of the capped second moment at delta_min.
    """

    t: float
    eps: object = "auto"
    seed: int = 0
    replica_index: int = 0
    small_jump_policy: str = "drift_only"
    delta_min: float = None

    def __post_init__(self):
        if self.t <= 0:
            raise ConfigError(f"horizon must be positive, got {self.t}")
        if self.small_jump_policy != "drift_only":
            raise ConfigError(
                f"unsupported small-jump policy {self.small_jump_policy!r}")
        if self.eps != "auto":
            self.eps = float(self.eps)
            if self.eps <= 0:
                raise ConfigError(f"cutoff must be positive, got {self.eps}")


def auto_cutoff(model: LevyModel, delta_min: float) -> float:
    """Resolve the 'auto' cutoff for a consumer that will query box
    sizes down to ``delta_min``."""
    if delta_min is None or delta_min <= 0:
        raise ConfigError("auto cutoff needs a positive delta_min "
                          "declared by the consumer")
    eps = delta_min / 100.0
    m2_cap = (model.truncated_moment(delta_min, 2)
              + delta_min ** 2 * float(model.tail(delta_min)))
    if m2_cap == 0.0:
        return eps
    for _ in range(200):
        if model.truncated_moment(eps, 2) <= 1e-4 * m2_cap:
            return eps
        eps /= 2.0
    raise ConfigError("cutoff resolution did not converge; the measure's "
                      "small-jump second moment decays too slowly")


def resolve_cutoff(model: LevyModel, cfg: SimConfig) -> float:
    if cfg.eps == "auto":
        if cfg.delta_min is None:
            raise ConfigError("eps='auto' but no delta_min was declared")
        return auto_cutoff(model, cfg.delta_min)
    return cfg.eps


@dataclass(frozen=True)
class JumpSkeleton:
    """One simulated path: sorted jump events above the cutoff plus the
    compensating drift.  Immutable after construction; cumulative sums
    are precomputed since every counting routine needs them."""

    t: float
    eps: float
    effective_drift: float
    times: np.ndarray
    sizes: np.ndarray
    model_id: str = ""
    seed: int = 0
    replica: int = 0
    poisson_mean: float = 0.0
    cum_sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=float)
        sizes = np.ascontiguousarray(self.sizes, dtype=float)
        if times.shape != sizes.shape:
            raise ConfigError("times and sizes must align")
        times.flags.writeable = False
        sizes.flags.writeable = False
        cum = np.cumsum(sizes)
        cum.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "cum_sizes", cum)

    def __len__(self):
        return self.times.size

    def values_after_jumps(self):
        """Path value at each event time (right limits)."""
        return self.effective_drift * self.times + self.cum_sizes

    def final_value(self):
        total = self.cum_sizes[-1] if len(self) else 0.0
        return self.effective_drift * self.t + total


def _strictify(times):
    # ties among sorted uniforms are measure-zero but floats can collide
    for _ in range(64):
        dup = np.flatnonzero(np.diff(times) <= 0.0)
        if dup.size == 0:
            return times
        times = times.copy()
        times[dup + 1] = np.nextafter(times[dup], np.inf)
        times.sort()
    raise ConfigError("could not deduplicate event times")


def sample_skeleton(model: LevyModel, cfg: SimConfig) -> JumpSkeleton:
    """Compound-Poisson-above-cutoff construction.

    Event count ~ Poisson(t * tail(eps)); times are sorted uniforms on
    (0, t]; sizes come from the inverse-transform of the conditional
    tail.  Deterministic given (model, cfg).
    """
    eps = resolve_cutoff(model, cfg)
    mass = float(model.tail(eps))
    if not math.isfinite(mass):
        raise ConfigError(f"tail({eps:g}) is infinite: cutoff invalid")
    lam = cfg.t * mass
    n = int(stream(cfg.seed, cfg.replica_index, ROLE_COUNT).poisson(lam)) \
        if lam > 0 else 0
    if n > 0:
        u_t = stream(cfg.seed, cfg.replica_index, ROLE_TIMES).random(n)
        times = np.sort(cfg.t * (1.0 - u_t))
        times = _strictify(times)
        u_s = stream(cfg.seed, cfg.replica_index, ROLE_SIZES).random(n)
        sizes = np.maximum(
            np.asarray(model.tail_inverse(mass * (1.0 - u_s)), dtype=float),
            eps)
    else:
        times = np.empty(0)
        sizes = np.empty(0)
    d_eff = model.drift + (model.truncated_moment(eps, 1) if mass > 0 else 0.0)
    return JumpSkeleton(t=cfg.t, eps=eps, effective_drift=d_eff,
                        times=times, sizes=sizes, model_id=model.model_id(),
                        seed=cfg.seed, replica=cfg.replica_index,
                        poisson_mean=lam)


def value_at(skel: JumpSkeleton, s: float, mode: str = "raw",
             delta: float = None) -> float:
    """Path value at time ``s`` for the raw, jump-capped (shortened) or
    jump-dropped (truncated) path."""
    if not 0.0 <= s <= skel.t:
        raise DomainError(f"s={s} outside [0, {skel.t}]")
    if mode not in VALUE_MODES:
        raise DomainError(f"unknown mode {mode!r}")
    k = int(np.searchsorted(skel.times, s, side="right"))
    base = skel.effective_drift * s
    if mode == "raw":
        return base + (skel.cum_sizes[k - 1] if k else 0.0)
    if delta is None:
        raise DomainError(f"mode {mode!r} needs a delta")
    if delta < skel.eps:
        raise PrecisionError(
            f"delta={delta:g} below the skeleton cutoff {skel.eps:g}: "
            f"sub-cutoff behaviour is not represented")
    head = skel.sizes[:k]
    if mode == "shortened":
        return base + float(np.minimum(head, delta).sum())
    return base + float(head[head <= delta].sum())


def truncate(skel: JumpSkeleton, delta: float) -> JumpSkeleton:
    """Skeleton of the path with all jumps larger than ``delta`` removed."""
    if delta < skel.eps:
        raise PrecisionError(
            f"delta={delta:g} below the skeleton cutoff {skel.eps:g}")
    keep = skel.sizes <= delta
    return JumpSkeleton(t=skel.t, eps=skel.eps,
                        effective_drift=skel.effective_drift,
                        times=skel.times[keep], sizes=skel.sizes[keep],
                        model_id=skel.model_id + f"|truncated({delta:g})",
                        seed=skel.seed, replica=skel.replica,
                        poisson_mean=skel.poisson_mean)


def first_passage(skel: JumpSkeleton, level: float):
    """First time the raw path strictly exceeds ``level``; None if the
    passage does not happen within the horizon."""
    if level < 0:
        raise DomainError(f"level must be non-negative, got {level}")
    d = skel.effective_drift
    vr = skel.values_after_jumps()
    n = len(skel)
    idx = int(np.searchsorted(vr, level, side="right"))
    if idx < n:
        v0 = vr[idx - 1] if idx else 0.0
        t0 = skel.times[idx - 1] if idx else 0.0
        if d > 0 and v0 + d * (skel.times[idx] - t0) > level:
            return t0 + (level - v0) / d
        return float(skel.times[idx])
    v0 = vr[-1] if n else 0.0
    t0 = skel.times[-1] if n else 0.0
    if d > 0 and v0 + d * (skel.t - t0) > level:
        return t0 + (level - v0) / d
    return None


def dump_skeleton(skel: JumpSkeleton, path_or_file):
    """Debug dump: metadata comment, then one ``tau,size`` row per event."""
    close = False
    if isinstance(path_or_file, (str, bytes, os.PathLike)):
        fh = open(path_or_file, "w", encoding="utf-8")
        close = True
    else:
        fh = path_or_file
    try:
        fh.write(f"# t={skel.t:.17g} eps={skel.eps:.17g} "
                 f"d_eff={skel.effective_drift:.17g} seed={skel.seed} "
                 f"replica={skel.replica}\n")
        fh.write("tau,size\n")
        for tau, j in zip(skel.times, skel.sizes):
            fh.write(f"{tau:.17g},{j:.17g}\n")
    finally:
        if close:
            fh.close()


def load_skeleton(path_or_file) -> JumpSkeleton:
    close = False
    if isinstance(path_or_file, (str, bytes, os.PathLike)):
        fh = open(path_or_file, "r", encoding="utf-8")
        close = True
    else:
        fh = path_or_file
    try:
        meta_line = fh.readline().strip()
        if not meta_line.startswith("#"):
            raise ConfigError("skeleton file must start with a metadata line")
        meta = dict(tok.split("=", 1) for tok in meta_line[1:].split())
        header = fh.readline().strip()
        if header != "tau,size":
            raise ConfigError(f"unexpected skeleton header {header!r}")
        body = fh.read().strip()
    finally:
        if close:
            fh.close()
    if body:
        rows = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    else:
        rows = np.empty((0, 2))
    return JumpSkeleton(t=float(meta["t"]), eps=float(meta["eps"]),
                        effective_drift=float(meta["d_eff"]),
                        times=rows[:, 0], sizes=rows[:, 1],
                        seed=int(meta.get("seed", 0)),
                        replica=int(meta.get("replica", 0)))
