"""Parameter sets, the observer derivation and its feasibility test.

A :class:`ParamSet` is either ``paper_faithful`` (every value produced by
:func:`derive_observer_params` from a-priori bounds) or ``practical`` (the
scales epsilon < eta < delta < r chosen directly, all algorithm thresholds
still expressed relative to them).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError, DerivationError
from .linkfn import LinkFunction, certify_constants, eval_link

C_GAP = 2.0 ** 10
MODES = ("paper_faithful", "practical")


@dataclass(frozen=True)
class ParamSet:
    varsigma: float
    n: int
    epsilon: float
    eta: float
    delta: float
    r: float
    c1: float
    C2: float
    c3: float
    d: int
    C_gap: float = C_GAP
    mode: str = "practical"
    derivation: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown parameter mode {self.mode!r}")
        if not 0 < self.varsigma < 0.25:
            raise ConfigError("varsigma must lie in (0, 1/4)")
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be positive")
        if self.mode == "paper_faithful":
            if not _close(self.delta, self.C_gap * math.sqrt(self.d) * self.eta):
                raise ConfigError("paper_faithful mode needs delta = C_gap sqrt(d) eta")
            if not _close(self.r, self.C_gap * self.d ** 2 * self.delta):
                raise ConfigError("paper_faithful mode needs r = C_gap d^2 delta")

    def validate(self):
        """Raise unless the scale ordering and practical-mode ratios hold."""
        if not (self.epsilon < self.eta < self.delta < self.r):
            raise ConfigError("need epsilon < eta < delta < r")
        if self.mode == "practical" and (self.delta < 2 * self.eta or self.r < 2 * self.delta):
            raise ConfigError("practical mode needs delta/eta >= 2 and r/delta >= 2")
        for name in ("c1", "C2", "c3"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def cluster_min_size(self) -> float:
        """Size floor ``n^(1 - varsigma)`` of a cluster."""
        return self.n ** (1.0 - self.varsigma)

    @property
    def groups(self) -> int:
        """Number of batch groups ``ceil(n^varsigma)``."""
        return math.ceil(self.n ** self.varsigma)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("derivation")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSet":
        known = {f for f in cls.__dataclass_fields__ if f != "derivation"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown parameter fields: {sorted(extra)}")
        return cls(**data)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(abs(a), abs(b))


@dataclass(frozen=True)
class ObserverInputs:
    total_vertices: int
    varsigma: float
    d: int
    D: float
    kappa: float
    r_M0: float
    C: float
    link: LinkFunction

    def __post_init__(self):
        for name in ("total_vertices", "d", "D", "kappa", "r_M0", "C"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"observer input {name} must be positive")
        if not 0 < self.varsigma < 0.25:
            raise ConfigError("varsigma must lie in (0, 1/4)")


OBSERVER_ITEMS = (
    ("i", "n"), ("ii", "r_M"), ("iii", "L_p"), ("iv", "ell_p"), ("v", "epsilon"),
    ("vi", "c1"), ("vii", "C2"), ("viii", "c3"), ("ix", "eta"), ("x", "delta"), ("xi", "r"),
)


def _floor_pow(base: float, exponent: float) -> int:
    # guard the floor against pow landing a few ulps below an exact integer
    x = base ** exponent
    n = math.floor(x)
    if n + 1 - x <= 1e-12 * max(1.0, x):
        n += 1
    return int(n)


def derive_observer_params(inp: ObserverInputs, C_gap: float = C_GAP) -> ParamSet:
    """Derive the full parameter set from the observer's a-priori bounds."""
    d = inp.d
    s = inp.varsigma
    items: dict[str, float] = {}

    def keep(key: str, value: float) -> float:
        if not math.isfinite(value):
            raise DerivationError(key, value)
        items[key] = value
        return value

    n = keep("i", _floor_pow(inp.total_vertices, 1.0 - 2.0 * s))
    r_M = keep("ii", 0.01 * min(1.0 / inp.kappa, inp.r_M0))
    L_p, ell_p = certify_constants(inp.link, inp.D)
    keep("iii", L_p)
    keep("iv", ell_p)
    eps = keep("v", max(
        6.0 * (2.0 / inp.C) ** (1.0 / d) * n ** (-s / d),
        n ** (-0.5 + s) / (eval_link(inp.link, inp.D) * L_p),
    ))
    c1 = keep("vi", (1.0 / 800.0) * ell_p ** 2 * inp.C * (r_M / 4.0) ** d)
    C2 = keep("vii", 4.0 * C_gap ** 0.5 * d ** 0.5 * L_p / (ell_p ** 0.5 * c1 ** 0.5))
    c3 = keep("viii", ell_p / (C_gap * math.sqrt(d)))
    eta = keep("ix", max(C2 * eps ** 0.5, L_p ** 2 * eps / (c3 * ell_p * math.sqrt(d))))
    delta = keep("x", C_gap * math.sqrt(d) * eta)
    r = keep("xi", C_gap * d ** 2 * delta)
    derivation = {f"({k}) {name}": items[k] for k, name in OBSERVER_ITEMS}
    return ParamSet(
        varsigma=s, n=n, epsilon=eps, eta=eta, delta=delta, r=r, c1=c1, C2=C2, c3=c3, d=d,
        C_gap=C_gap, mode="paper_faithful", derivation=derivation,
    )


def feasibility_test(ps: ParamSet, r_M_lower: float) -> bool:
    """The observer's test: enough room for the net scale, and n >= 100."""
    return r_M_lower >= 2 ** 4 * ps.C_gap * ps.d ** 2 * ps.r and ps.n >= 100


def validate_practical(ps: ParamSet, model) -> list[str]:
    """Names of the violated geometric constraints (empty means usable)."""
    violations = []
    if not (ps.epsilon < ps.eta < ps.delta < ps.r):
        violations.append("eps<eta<delta<r")
    if not ps.delta <= model.r_M / 4:
        violations.append("delta<=r_M/4")
    if not ps.r <= model.r_M:
        violations.append("r<=r_M")
    return violations
