"""Primitive optical transforms acting on :class:`~oamsim.fock.PureState`.

Every ``apply_*`` function is a pure map from state to state.  Angles are
either plain radians or :class:`PiAngle` instances; the latter keep phases
such as ``exp(i*pi*ell/K)`` exact at quarter turns, which the parity
routing of the sorting interferometer relies on.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from . import fock
from .fock import BasisState, Mode, PureState, marginal_path_probability, project_path


@dataclass(frozen=True)
class PiAngle:
    """An angle stored as an exact rational multiple of pi."""

    turns: Fraction

    @classmethod
    def over(cls, k: int) -> PiAngle:
        return cls(Fraction(1, k))

    @property
    def radians(self) -> float:
        return math.pi * float(self.turns)

    def __neg__(self):
        return PiAngle(-self.turns)


def pi_over(k: int) -> PiAngle:
    return PiAngle.over(k)


Angle = Union[float, PiAngle]

_QUARTER = (1 + 0j, 1j, -1 + 0j, -1j)


def exp_i(ell: int, alpha: Angle) -> complex:
    """``exp(i * ell * alpha)``, exact when ``ell * alpha`` is a multiple of pi/2."""
    if isinstance(alpha, PiAngle):
        t = (alpha.turns * ell) % 2
        q = t * 2
        if q.denominator == 1:
            return _QUARTER[int(q)]
        return cmath.exp(1j * math.pi * float(t))
    return cmath.exp(1j * ell * alpha)


def _relabel(state: PureState, path, fn) -> PureState:
    """Apply an injective per-mode relabel ``fn(ell) -> (new_ell, amp_factor)`` on ``path``."""
    out: dict[BasisState, complex] = {}
    for basis, amp in state.items():
        if not basis.on_path(path):
            out[basis] = out.get(basis, 0j) + amp
            continue
        counts: dict[Mode, int] = {}
        factor = 1 + 0j
        for mode, c in basis:
            if mode.path == path:
                new_ell, f = fn(mode.ell)
                mode = Mode(path, new_ell)
                if f != 1:
                    factor *= f**c
            counts[mode] = counts.get(mode, 0) + c
        key = BasisState.from_counts(counts)
        out[key] = out.get(key, 0j) + amp * factor
    return PureState._raw(out, state.n_photons)


def apply_hologram(state: PureState, path, delta_ell: int) -> PureState:
    delta_ell = int(delta_ell)
    if delta_ell == 0:
        return state
    return _relabel(state, path, lambda ell: (fock.check_ell(ell + delta_ell), 1))


def apply_dove(state: PureState, path, alpha: Angle) -> PureState:
    return _relabel(state, path, lambda ell: (-ell, exp_i(ell, alpha)))


def apply_oam_flip(state: PureState, path) -> PureState:
    return _relabel(state, path, lambda ell: (-ell, 1))


def apply_arm_phase(state: PureState, path, alpha: Angle) -> PureState:
    return _relabel(state, path, lambda ell: (ell, exp_i(ell, alpha)))


def apply_oam_scale(state: PureState, path, factor: int) -> PureState:
    factor = int(factor)
    if factor < 1:
        raise ValueError("scale factor must be a positive integer")
    if factor == 1:
        return state
    return _relabel(state, path, lambda ell: (fock.check_ell(ell * factor), 1))


def apply_dual_rail_cnot(state: PureState, control_path, target_a, target_b) -> PureState:
    """Swap ``target_a`` and ``target_b`` in every term with a photon on ``control_path``."""
    if len({control_path, target_a, target_b}) != 3:
        raise ValueError("CNOT paths must be pairwise distinct")
    swap = {target_a: target_b, target_b: target_a}
    out: dict[BasisState, complex] = {}
    for basis, amp in state.items():
        if basis.on_path(control_path):
            basis = BasisState.from_counts({Mode(swap.get(m.path, m.path), m.ell): c for m, c in basis})
        out[basis] = amp
    return PureState._raw(out, state.n_photons)


@lru_cache(maxsize=None)
def _bs_expansion(n_up: int, n_down: int) -> tuple[tuple[int, int, float], ...]:
    # (a_u^+)^nu (a_d^+)^nd |0> / sqrt(nu! nd!) with a_u^+ -> (b_u^+ + b_d^+)/sqrt2,
    # a_d^+ -> (b_u^+ - b_d^+)/sqrt2; coefficients of b_u^p b_d^q, then normalized Fock amps
    total = n_up + n_down
    poly = [0] * (total + 1)
    for k in range(n_up + 1):
        for j in range(n_down + 1):
            poly[k + j] += math.comb(n_up, k) * math.comb(n_down, j) * (-1) ** (n_down - j)
    norm = 2 ** (total / 2) * math.sqrt(math.factorial(n_up) * math.factorial(n_down))
    out = []
    for p, c in enumerate(poly):
        if c:
            q = total - p
            out.append((p, q, c * math.sqrt(math.factorial(p) * math.factorial(q)) / norm))
    return tuple(out)


def apply_beamsplitter(state: PureState, path_up, path_down) -> PureState:
    """50% beamsplitter with matrix [[1, 1], [1, -1]]/sqrt2 on the creation operators.

    Each winding number is an independent pair of modes, so the bosonic
    lifting factorizes over the distinct ``ell`` values present.
    """
    if path_up == path_down:
        raise ValueError("beamsplitter ports must differ")
    out: dict[BasisState, complex] = {}
    for basis, amp in state.items():
        rest: dict[Mode, int] = {}
        pairs: dict[int, list[int]] = {}
        for mode, c in basis:
            if mode.path == path_up:
                pairs.setdefault(mode.ell, [0, 0])[0] += c
            elif mode.path == path_down:
                pairs.setdefault(mode.ell, [0, 0])[1] += c
            else:
                rest[mode] = c
        if not pairs:
            out[basis] = out.get(basis, 0j) + amp
            continue
        ells = list(pairs)
        options = [_bs_expansion(*pairs[e]) for e in ells]
        for combo in itertools.product(*options):
            counts = dict(rest)
            coeff = amp
            for ell, (p, q, c) in zip(ells, combo):
                if p:
                    counts[Mode(path_up, ell)] = p
                if q:
                    counts[Mode(path_down, ell)] = q
                coeff *= c
            key = BasisState.from_counts(counts)
            out[key] = out.get(key, 0j) + coeff
    return PureState._raw(out, state.n_photons)


@dataclass
class VacuumCheck:
    path: object
    probability: float
    tol: float = 1e-10
    label: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.probability <= self.tol

    def as_dict(self) -> dict:
        return {
            "path": self.path,
            "label": self.label,
            "probability": self.probability,
            "tol": self.tol,
            "passed": self.passed,
        }


def assert_vacuum(state: PureState, path, tol: float = 1e-10, label: str | None = None) -> VacuumCheck:
    """Photodetector check: report the probability of finding a photon on ``path``."""
    return VacuumCheck(path, marginal_path_probability(state, path), tol, label)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def qnd_measure_path(state: PureState, path, rng_seed=None) -> tuple[int, PureState]:
    """Non-demolition presence measurement on ``path``.

    ``rng_seed`` may be an int seed or a ``numpy.random.Generator`` (shared
    across calls for repeated trials).  OAM superpositions inside the
    surviving subspace are kept.
    """
    p = marginal_path_probability(state, path) / state.norm() ** 2
    bit = int(_rng(rng_seed).random() < p)
    _, collapsed = project_path(state, path, bool(bit))
    return bit, collapsed


@dataclass
class GateTally:
    counts: Counter = field(default_factory=Counter)

    def record(self, kind: str, n: int = 1) -> None:
        if n < 0:
            raise ValueError("tally counts only grow")
        self.counts[kind] += n

    def __getitem__(self, kind):
        return self.counts[kind]

    @property
    def cnot_count(self) -> int:
        return self.counts["cnot"]

    @property
    def hologram_count(self) -> int:
        return self.counts["hologram"]

    @property
    def interferometer_count(self) -> int:
        return self.counts["interferometer"]

    def update(self, other: GateTally) -> None:
        self.counts.update(other.counts)

    def as_dict(self) -> dict:
        return dict(sorted(self.counts.items()))


# Element descriptions.  ``apply`` is the pure transform; measurement-like
# elements are handled by the circuit runner because they produce reports.


@dataclass(frozen=True)
class Hologram:
    path: object
    delta_ell: int
    label: Optional[str] = None
    kind = "hologram"

    def apply(self, state):
        return apply_hologram(state, self.path, self.delta_ell)

    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class DovePrism:
    path: object
    alpha: Angle
    label: Optional[str] = None
    kind = "dove"

    def apply(self, state):
        return apply_dove(state, self.path, self.alpha)

    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class OamFlip:
    path: object
    label: Optional[str] = None
    kind = "flip"

    def apply(self, state):
        return apply_oam_flip(state, self.path)

    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class Beamsplitter:
    path_up: object
    path_down: object
    label: Optional[str] = None
    kind = "bs"

    def __post_init__(self):
        if self.path_up == self.path_down:
            raise ValueError("beamsplitter ports must differ")

    def apply(self, state):
        return apply_beamsplitter(state, self.path_up, self.path_down)

    def paths(self):
        return (self.path_up, self.path_down)


@dataclass(frozen=True)
class ArmPhase:
    path: object
    alpha: Angle
    label: Optional[str] = None
    kind = "arm_phase"

    def apply(self, state):
        return apply_arm_phase(state, self.path, self.alpha)

    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class DualRailCnot:
    control_path: object
    target_path_a: object
    target_path_b: object
    label: Optional[str] = None
    kind = "cnot"

    def __post_init__(self):
        if len({self.control_path, self.target_path_a, self.target_path_b}) != 3:
            raise ValueError("CNOT paths must be pairwise distinct")

    def apply(self, state):
        return apply_dual_rail_cnot(state, self.control_path, self.target_path_a, self.target_path_b)

    def paths(self):
        return (self.control_path, self.target_path_a, self.target_path_b)


@dataclass(frozen=True)
class OamScale:
    path: object
    factor: int
    label: Optional[str] = None
    kind = "scale"

    def __post_init__(self):
        if int(self.factor) < 1:
            raise ValueError("scale factor must be >= 1")

    def apply(self, state):
        return apply_oam_scale(state, self.path, self.factor)

    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class AssertVacuum:
    path: object
    tol: float = 1e-10
    label: Optional[str] = None
    kind = "assert_vacuum"

    def paths(self):
        return (self.path,)


@dataclass(frozen=True)
class QndMeasure:
    path: object
    label: Optional[str] = None
    kind = "qnd"

    def paths(self):
        return (self.path,)


Element = Union[Hologram, DovePrism, OamFlip, Beamsplitter, ArmPhase, DualRailCnot, OamScale, AssertVacuum, QndMeasure]

UNITARY_KINDS = ("hologram", "dove", "flip", "bs", "arm_phase", "cnot", "scale")

