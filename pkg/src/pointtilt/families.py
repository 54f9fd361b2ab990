"""Parameter sequences indexed by the running jump count, and link functions.

Sequences supply per-state parameters (birth rates ``alpha_n``, reset levels
``xi_n``, drift coefficients ``a_n``, ``b_n``).  Each family is a small closed
form so positivity and nonvanishing can be decided exactly for every n, not
just the sampled prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvariantError


def _eval(n, fn):
    arr = np.asarray(n, dtype=float)
    out = fn(arr)
    if np.ndim(out) == 0 and arr.ndim == 0:
        return float(out)
    return np.broadcast_to(out, arr.shape).astype(float)


@dataclass(frozen=True)
class ConstantSeq:
    """a_n = c."""

    c: float

    def value(self, n):
        return _eval(n, lambda a: np.full(a.shape, float(self.c)) if a.ndim else float(self.c))


@dataclass(frozen=True)
class AffineSeq:
    """a_n = a + b*n."""

    a: float
    b: float

    def value(self, n):
        return _eval(n, lambda x: self.a + self.b * x)


@dataclass(frozen=True)
class PolynomialSeq:
    """a_n = c * (n+1)**p."""

    c: float
    p: float

    def value(self, n):
        return _eval(n, lambda x: self.c * (x + 1.0) ** self.p)


@dataclass(frozen=True)
class GeometricSeq:
    """a_n = c * r**n."""

    c: float
    r: float

    def value(self, n):
        return _eval(n, lambda x: self.c * self.r ** x)


@dataclass(frozen=True)
class ExplicitSeq:
    """First len(head) terms listed explicitly, then a tail rule."""

    head: tuple[float, ...]
    tail: "Seq"

    def value(self, n):
        head = np.asarray(self.head, dtype=float)

        def fn(x):
            idx = x.astype(int)
            out = np.where(idx < len(head), head[np.minimum(idx, len(head) - 1)] if len(head) else 0.0,
                           np.asarray(self.tail.value(x), dtype=float))
            return out

        if len(self.head) == 0:
            return self.tail.value(n)
        return _eval(n, fn)


Seq = Union[ConstantSeq, AffineSeq, PolynomialSeq, GeometricSeq, ExplicitSeq]


def seq_always_positive(seq: Seq) -> bool:
    """Exact check that seq.value(n) > 0 for every n >= 0."""
    if isinstance(seq, ConstantSeq):
        return seq.c > 0
    if isinstance(seq, AffineSeq):
        return seq.a > 0 and seq.b >= 0
    if isinstance(seq, PolynomialSeq):
        return seq.c > 0
    if isinstance(seq, GeometricSeq):
        return seq.c > 0 and seq.r > 0
    if isinstance(seq, ExplicitSeq):
        return all(h > 0 for h in seq.head) and seq_always_positive(seq.tail)
    raise TypeError(f"not a sequence family: {seq!r}")


def seq_never_zero(seq: Seq) -> bool:
    """Exact check that seq.value(n) != 0 for every n >= 0."""
    if isinstance(seq, ConstantSeq):
        return seq.c != 0
    if isinstance(seq, AffineSeq):
        if seq.b == 0:
            return seq.a != 0
        root = -seq.a / seq.b
        return not (root >= 0 and root == int(root))
    if isinstance(seq, PolynomialSeq):
        return seq.c != 0
    if isinstance(seq, GeometricSeq):
        return seq.c != 0 and seq.r != 0
    if isinstance(seq, ExplicitSeq):
        return all(h != 0 for h in seq.head) and seq_never_zero(seq.tail)
    raise TypeError(f"not a sequence family: {seq!r}")


@dataclass(frozen=True)
class AlphaFamily:
    """Strictly positive sequence of birth rates alpha_n, n >= 0."""

    seq: Seq

    def __post_init__(self):
        if not seq_always_positive(self.seq):
            raise InvariantError("alphas", "alpha_n must be positive for all n >= 0")

    def value(self, n):
        return self.seq.value(n)


# Link functions map the real line to [0, inf).  The catalog is closed so the
# phi(x) <= |x| certificate and monotonicity are decidable per family.


@dataclass(frozen=True)
class AbsLink:
    def __call__(self, x):
        return np.abs(x)


@dataclass(frozen=True)
class ReluLink:
    def __call__(self, x):
        return np.maximum(x, 0.0)


@dataclass(frozen=True)
class ClippedLinearLink:
    """x -> min(max(slope*x, 0), cap)."""

    slope: float
    cap: float

    def __post_init__(self):
        if self.slope < 0:
            raise InvariantError("link.slope", "slope must be nonnegative")
        if self.cap <= 0:
            raise InvariantError("link.cap", "cap must be positive")

    def __call__(self, x):
        return np.clip(self.slope * np.asarray(x, dtype=float), 0.0, self.cap)


Link = Union[AbsLink, ReluLink, ClippedLinearLink]


def link_identity_on_nonneg(link: Link) -> bool:
    """True when link(x) = x for all x >= 0 (abs and relu)."""
    return isinstance(link, (AbsLink, ReluLink))


def link_dominated_by_abs(link: Link) -> bool:
    """Analytic certificate for phi(x) <= |x| on the whole line."""
    if isinstance(link, (AbsLink, ReluLink)):
        return True
    if isinstance(link, ClippedLinearLink):
        return link.slope <= 1.0
    raise TypeError(f"not a link: {link!r}")


def link_id(link: Link) -> str:
    if isinstance(link, AbsLink):
        return "abs"
    if isinstance(link, ReluLink):
        return "relu"
    if isinstance(link, ClippedLinearLink):
        return "clipped-linear"
    raise TypeError(f"not a link: {link!r}")
