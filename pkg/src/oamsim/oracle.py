"""Closed-form reference results.

Nothing here touches :mod:`oamsim.elements` or :mod:`oamsim.blocks`; the
formulas are evaluated directly so that agreement with the simulated
circuits is an independent check.
"""

from __future__ import annotations

import cmath
import itertools
import math
from fractions import Fraction

import numpy as np

from .errors import NotNormalized
from .fock import NORM_TOL, BasisState, PureState


def _check_specs(specs):
    out = []
    for k, spec in enumerate(specs):
        a, b = (spec.alpha, spec.beta) if hasattr(spec, "alpha") else spec
        a, b = complex(a), complex(b)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > NORM_TOL:
            raise NotNormalized(f"qubit spec {k} is not normalized")
        out.append((a, b))
    return out


def oracle_mux_amplitudes(specs, n: int) -> np.ndarray:
    """Transmitted-qudit amplitudes: entry ell = prod_k alpha_k^(1-b_k) beta_k^(b_k).

    ``specs[k]`` is the ``(alpha, beta)`` pair of channel ``k``; bit ``k`` of
    ``ell`` is that channel's logical value.
    """
    specs = _check_specs(specs)
    if len(specs) != n:
        raise ValueError(f"expected {n} specs, got {len(specs)}")
    out = np.empty(2**n, dtype=complex)
    for ell in range(2**n):
        amp = 1 + 0j
        for k, (a, b) in enumerate(specs):
            amp *= b if (ell >> k) & 1 else a
        out[ell] = amp
    return out


def oracle_combiner_state(specs, n: int, path="line") -> PureState:
    """n photons on one path: tensor product of alpha_i|-2^i> + beta_i|2^i>."""
    specs = _check_specs(specs)
    if len(specs) != n:
        raise ValueError(f"expected {n} specs, got {len(specs)}")
    terms = {}
    for bits in itertools.product((0, 1), repeat=n):
        amp = 1 + 0j
        modes = []
        for i, bit in enumerate(bits):
            a, b = specs[i]
            amp *= b if bit else a
            modes.append((path, (1 if bit else -1) * 2**i))
        terms[BasisState.from_modes(modes)] = amp
    return PureState(terms, n)


def _exact_phase(theta_over_pi: Fraction) -> complex:
    t = theta_over_pi % 2
    if t == 0:
        return 1 + 0j
    if t == Fraction(1, 2):
        return 1j
    if t == 1:
        return -1 + 0j
    if t == Fraction(3, 2):
        return -1j
    return cmath.exp(1j * math.pi * float(t))


def oracle_interferometer_matrix(ell: int, K: int) -> np.ndarray:
    """Single-photon transfer matrix of the sorting interferometer.

    Rows are output ports (up, down), columns input ports, with
    ``theta = ell*pi/K``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    e = _exact_phase(Fraction(ell, K))
    return np.array([[(1 + e) / 2, (1 - e) / 2], [(1 - e) / 2, (1 + e) / 2]], dtype=complex)


def set_bit_positions(m: int) -> list[int]:
    return [j for j in range(m.bit_length()) if (m >> j) & 1]


def oracle_arithmetic(N: int, M: int, op: str = "add") -> int:
    """Integer outcome of the OAM arithmetic circuits.

    ``"add"`` gives N+M.  ``"scale_shift_composition"`` gives what chaining
    one conditional x2^j block per set bit j of M actually produces:
    N * 2**(sum of set-bit positions), which is N*M only for single-bit M.
    """
    if N < 0 or M < 0:
        raise ValueError("operands must be non-negative")
    if op == "add":
        return N + M
    if op == "scale_shift_composition":
        return N * 2 ** sum(set_bit_positions(M))
    if op == "multiply":
        return N * M
    raise ValueError(f"unknown arithmetic op {op!r}")


def bits_of(value: int, width: int) -> list[int]:
    """LSB-first binary expansion."""
    return [(value >> k) & 1 for k in range(width)]


def sorter_stage_count(M: int) -> int:
    if M < 1:
        raise ValueError("M must be >= 1")
    # ceil(log2(M)) without float rounding
    return (M - 1).bit_length()


def mux_cnot_count(n: int, recycle: bool = False) -> int:
    return 2 * n - (2 if recycle else 0)


def mux_demux_cnot_count(n: int, recycle: bool = False) -> int:
    return 4 * n - (4 if recycle else 0)


def adder_cnot_count(n: int, recycle: bool = False) -> int:
    return 6 * n - 2 if recycle else 6 * n + 2
