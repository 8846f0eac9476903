"""Sparse Fock-space states over (path, winding number) modes.

A photon lives in a :class:`Mode`, a pair of a path label and an integer
winding number ``ell``.  A :class:`BasisState` is a canonically ordered
tuple of ``(mode, count)`` pairs and a :class:`PureState` maps basis
states to complex amplitudes.  States are immutable; every operation
returns a new state.
"""

from __future__ import annotations

import math
import os
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from types import MappingProxyType
from typing import NamedTuple, Union

from .errors import EllOutOfRange, NotNormalized, NotSeparable, PhotonNumberMismatch, SchemaError

Path = Union[int, str]

NORM_TOL = 1e-9
AMP_PRUNE = 1e-14
DEFAULT_L_MAX = 4096

L_MAX = int(os.environ.get("OAMSIM_LMAX", DEFAULT_L_MAX))

_PATH_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")


def set_l_max(value: int) -> int:
    """Change the winding-number bound; returns the previous value."""
    global L_MAX
    if value < 1:
        raise ValueError("L_MAX must be positive")
    old, L_MAX = L_MAX, int(value)
    return old


def check_ell(ell: int) -> int:
    if abs(ell) > L_MAX:
        raise EllOutOfRange(f"|ell|={abs(ell)} exceeds L_MAX={L_MAX}")
    return ell


def check_path(path) -> Path:
    """Validate a user-supplied path label.

    Integer labels must be non-negative.  String labels must look like
    identifiers so that the ``path:ell:count`` text form stays unambiguous.
    """
    if isinstance(path, bool):
        raise SchemaError(f"invalid path label {path!r}")
    if isinstance(path, int):
        if path < 0:
            raise SchemaError(f"path index must be non-negative, got {path}")
        return path
    if isinstance(path, str) and _PATH_RE.match(path):
        return path
    raise SchemaError(f"invalid path label {path!r}")


class Mode(NamedTuple):
    path: Path
    ell: int

    def key(self):
        return (isinstance(self.path, str), self.path, self.ell)

    # integer paths sort before string paths so mixed labels stay totally ordered
    def __lt__(self, other):
        return self.key() < other.key()

    def __le__(self, other):
        return self.key() <= other.key()

    def __gt__(self, other):
        return self.key() > other.key()

    def __ge__(self, other):
        return self.key() >= other.key()


class BasisState(tuple):
    """One Fock basis element: sorted ``((Mode, count), ...)`` with counts >= 1.

    The empty tuple is the vacuum.  Use :meth:`from_modes` or
    :meth:`from_counts` rather than the raw constructor unless the input is
    already canonical.
    """

    __slots__ = ()

    @classmethod
    def from_counts(cls, counts: Mapping[Mode, int]) -> BasisState:
        items = [(Mode(*m), int(c)) for m, c in counts.items() if c]
        if any(c < 0 for _, c in items):
            raise ValueError("occupation counts must be non-negative")
        items.sort(key=lambda mc: mc[0].key())
        return cls(items)

    @classmethod
    def from_modes(cls, modes: Iterable) -> BasisState:
        """Build from an iterable of modes or ``(path, ell)`` pairs; repeats add up."""
        counts: dict[Mode, int] = {}
        for m in modes:
            m = Mode(*m)
            counts[m] = counts.get(m, 0) + 1
        return cls.from_counts(counts)

    @property
    def n_photons(self) -> int:
        return sum(c for _, c in self)

    def counts(self) -> dict[Mode, int]:
        return dict(self)

    def on_path(self, path) -> int:
        return sum(c for m, c in self if m.path == path)

    def paths(self) -> set:
        return {m.path for m, _ in self}

    def text(self) -> str:
        return ";".join(f"{m.path}:{m.ell}:{c}" for m, c in self)

    @classmethod
    def from_text(cls, text: str) -> BasisState:
        text = text.strip()
        if not text:
            return cls()
        counts: dict[Mode, int] = {}
        for chunk in text.split(";"):
            parts = chunk.split(":")
            if len(parts) != 3:
                raise SchemaError(f"malformed basis-state chunk {chunk!r}")
            p, ell, count = parts
            path: Path = int(p) if p.isdigit() else check_path(p)
            try:
                mode = Mode(path, int(ell))
                n = int(count)
            except ValueError as exc:
                raise SchemaError(f"malformed basis-state chunk {chunk!r}") from exc
            if n < 1:
                raise SchemaError(f"occupation count must be >= 1 in {chunk!r}")
            counts[mode] = counts.get(mode, 0) + n
        return cls.from_counts(counts)

    def __repr__(self):
        return f"|{self.text() or 'v'}>"


VACUUM = BasisState()


class PureState:
    """Sparse superposition of basis states with a fixed photon number.

    Amplitudes below ``AMP_PRUNE`` are dropped on construction.  The
    constructor does not renormalize, so linear combinations are allowed;
    element applications preserve the norm.
    """

    __slots__ = ("_terms", "n_photons")

    def __init__(self, terms: Mapping[BasisState, complex], n_photons: int | None = None):
        clean: dict[BasisState, complex] = {}
        for b, a in terms.items():
            a = complex(a)
            if abs(a) < AMP_PRUNE:
                continue
            if not isinstance(b, BasisState):
                b = BasisState.from_counts(dict(b))
            clean[b] = clean.get(b, 0j) + a
        counts = {b.n_photons for b in clean}
        if len(counts) > 1:
            raise PhotonNumberMismatch(f"terms mix photon numbers {sorted(counts)}")
        if counts:
            (n,) = counts
            if n_photons is not None and n_photons != n:
                raise PhotonNumberMismatch(f"declared {n_photons} photons, terms carry {n}")
            n_photons = n
        self._terms = clean
        self.n_photons = 0 if n_photons is None else n_photons

    @classmethod
    def _raw(cls, terms: dict, n_photons: int) -> PureState:
        # trusted fast path for element implementations: terms already canonical
        self = object.__new__(cls)
        self._terms = {b: a for b, a in terms.items() if abs(a) >= AMP_PRUNE}
        self.n_photons = n_photons
        return self

    @classmethod
    def vacuum(cls) -> PureState:
        return cls({VACUUM: 1.0}, 0)

    @classmethod
    def basis(cls, modes: Iterable, amplitude: complex = 1.0) -> PureState:
        b = BasisState.from_modes(modes)
        return cls({b: amplitude}, b.n_photons)

    @property
    def terms(self) -> Mapping[BasisState, complex]:
        return MappingProxyType(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def amplitude(self, basis) -> complex:
        if not isinstance(basis, BasisState):
            basis = BasisState.from_modes(basis)
        return self._terms.get(basis, 0j)

    def sorted_items(self) -> list[tuple[BasisState, complex]]:
        return sorted(self._terms.items(), key=lambda ba: [m.key() + (c,) for m, c in ba[0]])

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._terms.values()))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> PureState:
        nrm = self.norm()
        if nrm == 0:
            raise NotNormalized("cannot normalize the zero vector")
        return PureState._raw({b: a / nrm for b, a in self._terms.items()}, self.n_photons)

    def paths(self) -> set:
        out = set()
        for b in self._terms:
            out |= b.paths()
        return out

    def max_abs_ell(self) -> int:
        return max((abs(m.ell) for b in self._terms for m, _ in b), default=0)

    def _check_compatible(self, other: PureState):
        if self._terms and other._terms and self.n_photons != other.n_photons:
            raise PhotonNumberMismatch(f"{self.n_photons} vs {other.n_photons} photons")

    def __add__(self, other: PureState) -> PureState:
        self._check_compatible(other)
        out = dict(self._terms)
        for b, a in other._terms.items():
            out[b] = out.get(b, 0j) + a
        n = self.n_photons if self._terms else other.n_photons
        return PureState._raw(out, n)

    def __sub__(self, other: PureState) -> PureState:
        return self + (-1) * other

    def __mul__(self, scalar) -> PureState:
        s = complex(scalar)
        return PureState._raw({b: a * s for b, a in self._terms.items()}, self.n_photons)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __eq__(self, other):
        # exact term-map equality; physics comparisons should use fidelity()
        if not isinstance(other, PureState):
            return NotImplemented
        return self.n_photons == other.n_photons and self._terms == other._terms

    __hash__ = None

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for b, a in self.sorted_items():
            parts.append(f"({a.real:.6g}{a.imag:+.6g}j){b!r}")
        return " + ".join(parts)

    def to_text(self) -> list[tuple[str, str, str]]:
        """Canonical serialization: ``(basis text, re, im)`` with 17 significant digits."""
        return [(b.text(), format(a.real, ".17g"), format(a.imag, ".17g")) for b, a in self.sorted_items()]

    @classmethod
    def from_text(cls, rows: Iterable, n_photons: int | None = None) -> PureState:
        terms: dict[BasisState, complex] = {}
        for text, re_, im in rows:
            b = BasisState.from_text(text)
            terms[b] = terms.get(b, 0j) + complex(float(re_), float(im))
        return cls(terms, n_photons)


@dataclass(frozen=True)
class QubitSpec:
    """Path dual-rail qubit ``alpha|0> + beta|1>`` on two paths with ell=0."""

    alpha: complex
    beta: complex
    path_zero: Path = 0
    path_one: Path = 1

    def check(self) -> None:
        p = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(p - 1.0) > NORM_TOL:
            raise NotNormalized(f"|alpha|^2+|beta|^2 = {p!r}")
        if self.path_zero == self.path_one:
            raise ValueError("a dual-rail qubit needs two distinct paths")


def make_single_photon(path, ell: int) -> PureState:
    check_ell(ell)
    return PureState.basis([(check_path(path), int(ell))])


def make_qubit(spec: QubitSpec) -> PureState:
    spec.check()
    z = BasisState.from_modes([(check_path(spec.path_zero), 0)])
    o = BasisState.from_modes([(check_path(spec.path_one), 0)])
    return PureState({z: spec.alpha, o: spec.beta}, 1)


def tensor(a: PureState, b: PureState) -> PureState:
    """Product state; coinciding modes have their counts added, amplitudes just multiply."""
    out: dict[BasisState, complex] = {}
    for ba, aa in a.items():
        ca = dict(ba)
        for bb, ab in b.items():
            if ca and bb:
                merged = dict(ca)
                for m, c in bb:
                    merged[m] = merged.get(m, 0) + c
                key = BasisState.from_counts(merged)
            else:
                key = ba or bb
            out[key] = out.get(key, 0j) + aa * ab
    return PureState._raw(out, a.n_photons + b.n_photons)


def tensor_all(states: Iterable[PureState]) -> PureState:
    acc = PureState.vacuum()
    for s in states:
        acc = tensor(acc, s)
    return acc


def inner(a: PureState, b: PureState) -> complex:
    """<a|b>."""
    if a.n_photons != b.n_photons:
        raise PhotonNumberMismatch(f"{a.n_photons} vs {b.n_photons} photons")
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for basis, amp in small.items():
        other = large._terms.get(basis)
        if other is not None:
            total += amp.conjugate() * other if small is a else other.conjugate() * amp
    return total


def fidelity(a: PureState, b: PureState) -> float:
    return min(1.0, abs(inner(a, b)) ** 2)


def marginal_path_probability(state: PureState, path) -> float:
    return sum(abs(amp) ** 2 for basis, amp in state.items() if basis.on_path(path))


def project_path(state: PureState, path, occupied: bool) -> tuple[float, PureState | None]:
    """Projector onto (un)occupied ``path``; returns probability and renormalized state."""
    kept = {b: a for b, a in state.items() if bool(b.on_path(path)) == occupied}
    p = sum(abs(a) ** 2 for a in kept.values())
    if p == 0:
        return 0.0, None
    scale = 1 / math.sqrt(p)
    return p, PureState._raw({b: a * scale for b, a in kept.items()}, state.n_photons)


def split_paths(state: PureState, paths: Iterable) -> dict[BasisState, PureState]:
    """Group terms by the configuration of photons on ``paths``.

    Returns a map from the configuration on ``paths`` to the (unnormalized)
    conditional state of the remaining photons.
    """
    paths = set(paths)
    groups: dict[BasisState, dict] = {}
    for basis, amp in state.items():
        inside = BasisState(mc for mc in basis if mc[0].path in paths)
        outside = BasisState(mc for mc in basis if mc[0].path not in paths)
        groups.setdefault(inside, {})[outside] = amp
    return {k: PureState._raw(v, state.n_photons - k.n_photons) for k, v in groups.items()}


def discard_paths(state: PureState, paths: Iterable, tol: float = NORM_TOL) -> PureState:
    """Drop the photons on ``paths``, which must be unentangled with the rest.

    The state has to factor as (discarded part) x (kept part); otherwise
    :class:`NotSeparable` is raised.  The kept part inherits the phase of
    the dominant discarded configuration, so a definite configuration is
    dropped without touching the remaining amplitudes.
    """
    groups = split_paths(state, paths)
    if not groups:
        return state
    weights = {k: v.norm() ** 2 for k, v in groups.items()}
    total = sum(weights.values())
    best = max(weights, key=weights.get)
    ref = groups[best]
    missing = 0.0
    for key, cond in groups.items():
        if key is best:
            continue
        if cond.n_photons != ref.n_photons:
            missing += weights[key]
        else:
            missing += weights[key] - abs(inner(ref, cond)) ** 2 / weights[best]
    if missing / total > tol:
        raise NotSeparable(f"photons on {sorted(map(str, set(paths)))} are entangled with the rest")
    return ref * math.sqrt(total / weights[best])


def rename_path(state: PureState, old, new) -> PureState:
    """Reroute every photon on ``old`` to the (empty) path ``new``; ell is untouched."""
    if old == new:
        return state
    if any(b.on_path(new) for b in state):
        raise ValueError(f"path {new!r} is already occupied")
    return swap_paths(state, old, new)


def swap_paths(state: PureState, a, b) -> PureState:
    swap = {a: b, b: a}
    out = {
        BasisState.from_counts({Mode(swap.get(m.path, m.path), m.ell): c for m, c in basis}): amp
        for basis, amp in state.items()
    }
    return PureState._raw(out, state.n_photons)
