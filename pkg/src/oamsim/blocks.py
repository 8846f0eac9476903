"""Composite OAM circuits built from the primitives in :mod:`oamsim.elements`.

Channel ``i`` of a :class:`ChannelPlan` owns a path dual-rail pair
``(q_i0, q_i1)``; the carrier photon of the multiplexer travels on ``u``
with ``d`` as the second interferometer port.  Qubit inputs are indexed by
channel, so ``specs[k]`` is the least-significant-first bit ``k``.

Every block takes an optional :class:`GateTally` and an optional list
that collects :class:`VacuumCheck` reports from the photodetector ports.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .elements import (
    ArmPhase,
    Beamsplitter,
    DualRailCnot,
    GateTally,
    Hologram,
    OamScale,
    PiAngle,
    VacuumCheck,
    assert_vacuum,
    qnd_measure_path,
    _rng,
)
from .errors import (
    CarrierCheckFailed,
    EllOutOfDeclaredRange,
    InputNotDualRail,
    OrderViolation,
)
from .fock import (
    NORM_TOL,
    BasisState,
    PureState,
    QubitSpec,
    discard_paths,
    make_qubit,
    rename_path,
    swap_paths,
    tensor,
    tensor_all,
)
from .oracle import sorter_stage_count

VACUUM_TOL = 1e-10


@dataclass(frozen=True)
class ChannelPlan:
    n: int
    qubit_paths: tuple
    u: object = "u"
    d: object = "d"

    def __post_init__(self):
        if len(self.qubit_paths) != self.n:
            raise ValueError("one path pair per channel is required")
        flat = [p for pair in self.qubit_paths for p in pair] + [self.u, self.d]
        if len(set(flat)) != len(flat):
            raise ValueError("channel plan paths must be pairwise distinct")

    @classmethod
    def default(cls, n: int, prefix: str = "q", u="u", d="d") -> ChannelPlan:
        return cls(n, tuple((f"{prefix}{i}_0", f"{prefix}{i}_1") for i in range(n)), u, d)

    def pair(self, i: int) -> tuple:
        return self.qubit_paths[i]

    def paths(self) -> list:
        return [p for pair in self.qubit_paths for p in pair] + [self.u, self.d]


class MuxResult(NamedTuple):
    state: PureState
    tally: GateTally


class DemuxResult(NamedTuple):
    qubits: PureState
    tally: GateTally


class SorterResult(NamedTuple):
    qubits: PureState
    carrier: PureState
    tally: GateTally


class QndSortResult(NamedTuple):
    bits: list
    carrier: Optional[PureState]
    tally: GateTally
    value: int
    degenerate: bool


class ArithmeticResult(NamedTuple):
    state: PureState
    tally: GateTally


def _do(element, state: PureState, tally: GateTally | None) -> PureState:
    if tally is not None:
        tally.record(element.kind)
    return element.apply(state)


def _check(state, path, checks, label):
    if checks is not None:
        checks.append(assert_vacuum(state, path, VACUUM_TOL, label))


def sorting_interferometer(state: PureState, up, down, K: int, tally=None, inverse: bool = False) -> PureState:
    """Beamsplitter, ell-dependent phase pi*ell/K on the lower arm, beamsplitter.

    ``ell = m*K`` leaves on its input port for even ``m`` and swaps ports for
    odd ``m``.  ``inverse=True`` uses the conjugate phase, which matters only
    for winding numbers that are not multiples of ``K``.
    """
    if K < 1:
        raise ValueError("K must be a positive integer")
    angle = PiAngle.over(K)
    state = _do(Beamsplitter(up, down), state, tally)
    state = _do(ArmPhase(down, -angle if inverse else angle), state, tally)
    state = _do(Beamsplitter(up, down), state, tally)
    if tally is not None:
        tally.record("interferometer")
    return state


def _is_power_of_two(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def _dual_rail_weight(state: PureState, q0, q1) -> float:
    good = 0.0
    for basis, amp in state.items():
        on = [(m, c) for m, c in basis if m.path in (q0, q1)]
        if len(on) == 1 and on[0][1] == 1 and on[0][0].ell == 0:
            good += abs(amp) ** 2
    return good / state.norm() ** 2


def converter(state: PureState, q0, q1, delta: int, symmetric: bool = True, tally=None, tol: float = NORM_TOL) -> PureState:
    """Path dual-rail qubit on (q0, q1) -> OAM qubit on q0.

    Produces ``alpha|0> + beta|delta>``; with ``symmetric`` a trailing
    ``-delta/2`` hologram gives ``alpha|-delta/2> + beta|delta/2>``.
    """
    if not _is_power_of_two(delta):
        raise ValueError("converter shift must be a power of two")
    if symmetric and delta < 2:
        raise ValueError("the symmetric encoding needs delta >= 2")
    if 1 - _dual_rail_weight(state, q0, q1) > tol:
        raise InputNotDualRail(f"no single ell=0 photon on ({q0!r}, {q1!r})")
    state = _do(Hologram(q1, delta), state, tally)
    state = sorting_interferometer(state, q0, q1, delta, tally)
    if symmetric:
        state = _do(Hologram(q0, -delta // 2), state, tally)
    return state


def converter_inverse(state: PureState, q0, q1, delta: int, symmetric: bool = True, tally=None) -> PureState:
    if symmetric:
        state = _do(Hologram(q0, delta // 2), state, tally)
    state = sorting_interferometer(state, q0, q1, delta, tally, inverse=True)
    return _do(Hologram(q1, -delta), state, tally)


def _validate_merger(state: PureState, up, down, j: int) -> None:
    low = 2**j
    for basis, _ in state.items():
        downs = [(m, c) for m, c in basis if m.path == down]
        if sum(c for _, c in downs) != 1 or abs(downs[0][0].ell) != low:
            raise OrderViolation(f"merger j={j}: lower port must carry one photon with ell=+-{low}")
        for m, c in basis:
            if m.path == up:
                a = abs(m.ell)
                if not (_is_power_of_two(a) and a > low):
                    raise OrderViolation(
                        f"merger j={j}: photon with ell={m.ell} on the line; "
                        "a lower-index qubit may not be merged before a higher one"
                    )


def merger(state: PureState, up, down, j: int, tally=None, validate: bool = True, checks=None) -> PureState:
    """Merge the +-2^j OAM qubit on ``down`` into the line ``up``."""
    if validate:
        _validate_merger(state, up, down, j)
    state = sorting_interferometer(state, up, down, 2**j, tally)
    _check(state, down, checks, f"merger j={j} lower output")
    return state


def _qubit_pairs(specs) -> list[tuple[complex, complex]]:
    out = []
    for spec in specs:
        if isinstance(spec, QubitSpec):
            out.append((spec.alpha, spec.beta))
        else:
            a, b = spec
            out.append((complex(a), complex(b)))
    return out


def prepare_qubits(specs, plan: ChannelPlan) -> PureState:
    """Product of path dual-rail qubits, ``specs[i]`` placed on channel ``i`` of ``plan``."""
    pairs = _qubit_pairs(specs)
    if len(pairs) != plan.n:
        raise ValueError(f"expected {plan.n} qubit specs, got {len(pairs)}")
    return tensor_all(make_qubit(QubitSpec(a, b, *plan.pair(i))) for i, (a, b) in enumerate(pairs))


def basis_qubits(value: int, plan: ChannelPlan) -> PureState:
    if not 0 <= value < 2**plan.n:
        raise ValueError(f"{value} does not fit in {plan.n} qubits")
    return prepare_qubits([(0, 1) if (value >> i) & 1 else (1, 0) for i in range(plan.n)], plan)


def register_state(pairs: Sequence[tuple], amplitudes) -> PureState:
    """State of several dual-rail registers from amplitudes indexed by integer.

    Bit ``k`` of the index is the logical value of ``pairs[k]``.
    """
    items = amplitudes.items() if hasattr(amplitudes, "items") else enumerate(amplitudes)
    terms = {}
    for index, amp in items:
        if amp == 0:
            continue
        modes = [(pair[(index >> k) & 1], 0) for k, pair in enumerate(pairs)]
        terms[BasisState.from_modes(modes)] = amp
    return PureState(terms, len(pairs))


def register_amplitudes(state: PureState, pairs: Sequence[tuple]) -> dict[int, complex]:
    """Inverse of :func:`register_state`; every photon must sit in one of the registers."""
    lookup = {}
    for k, (p0, p1) in enumerate(pairs):
        lookup[p0] = (k, 0)
        lookup[p1] = (k, 1)
    out: dict[int, complex] = {}
    for basis, amp in state.items():
        index = 0
        seen = set()
        for m, c in basis:
            if m.path not in lookup or m.ell != 0 or c != 1:
                raise InputNotDualRail(f"mode {m} is not a register qubit")
            k, bit = lookup[m.path]
            if k in seen:
                raise InputNotDualRail(f"register {k} holds two photons")
            seen.add(k)
            index |= bit << k
        if len(seen) != len(pairs):
            raise InputNotDualRail("a register is empty")
        out[index] = out.get(index, 0j) + amp
    return out


def register_vector(state: PureState, pairs: Sequence[tuple]) -> np.ndarray:
    vec = np.zeros(2 ** len(pairs), dtype=complex)
    for index, amp in register_amplitudes(state, pairs).items():
        vec[index] = amp
    return vec


def qubit_amplitudes(state: PureState, pair: tuple) -> tuple[complex, complex]:
    """(alpha, beta) of one dual-rail qubit that is not entangled with the rest."""
    others = {m.path for b in state for m, _ in b} - set(pair)
    single = discard_paths(state, others)
    amps = register_amplitudes(single, [pair])
    return amps.get(0, 0j), amps.get(1, 0j)


def _default_order(n, descending):
    return list(range(n - 1, -1, -1)) if descending else list(range(n))


def _resolve_order(order, n, descending, validate, what):
    expected = _default_order(n, descending)
    if order is None:
        return expected
    order = list(order)
    if validate and order != expected:
        direction = "most to least" if descending else "least to most"
        raise OrderViolation(f"{what} must process channels from {direction} significant: {order}")
    return order


def combiner_pipeline(
    qubits,
    n: int,
    *,
    order: Sequence[int] | None = None,
    validate: bool = True,
    line="line",
    plan: ChannelPlan | None = None,
    tally: GateTally | None = None,
    checks: list | None = None,
) -> PureState:
    """Put n dual-rail qubits on one path as n photons in the +-2^i OAM bands.

    ``order`` lists the channels in merge order; the first one becomes the
    line and the default is descending channel index.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    plan = plan or ChannelPlan.default(n)
    order = _resolve_order(order, n, True, validate, "the combiner")
    state = qubits if isinstance(qubits, PureState) else prepare_qubits(qubits, plan)
    for i in order:
        q0, q1 = plan.pair(i)
        state = converter(state, q0, q1, 2 ** (i + 1), True, tally)
        _check(state, q1, checks, f"converter {i} lower output")
    first = plan.pair(order[0])[0]
    for i in order[1:]:
        state = merger(state, first, plan.pair(i)[0], i, tally, validate, checks)
    return rename_path(state, first, line)


def combiner_split(state: PureState, n: int, *, line="line", plan: ChannelPlan | None = None, tally=None, checks=None) -> PureState:
    """The combiner run backwards: recover the n path dual-rail qubits."""
    plan = plan or ChannelPlan.default(n)
    top = plan.pair(n - 1)[0]
    state = rename_path(state, line, top)
    for j in range(n - 1):
        state = sorting_interferometer(state, top, plan.pair(j)[0], 2**j, tally, inverse=True)
    for i in range(n):
        q0, q1 = plan.pair(i)
        state = converter_inverse(state, q0, q1, 2 ** (i + 1), True, tally)
    return state


def check_multiplexed(state: PureState, path, j: int, n: int) -> bool:
    """Carrier photons on ``path`` have ell a multiple of 2^j inside [0, 2^n)."""
    step, top = 2**j, 2**n
    for basis in state:
        for m, _ in basis:
            if m.path == path and (m.ell % step or not 0 <= m.ell < top):
                return False
    return True


def _carrier_ok(state, plan, j, n):
    return check_multiplexed(state, plan.u, j, n) and not any(b.on_path(plan.d) for b in state)


def mux_block(state: PureState, plan: ChannelPlan, i: int, tally=None, checks=None, validate: bool = True) -> PureState:
    """Add qubit ``i`` to the carrier as +2^i and leave the qubit photon in logical 0."""
    if validate and not _carrier_ok(state, plan, i + 1, plan.n):
        raise OrderViolation(f"mux block {i}: carrier winding numbers are not multiples of {2 ** (i + 1)}")
    q0, q1 = plan.pair(i)
    u, d = plan.u, plan.d
    state = _do(DualRailCnot(q1, u, d), state, tally)
    state = _do(Hologram(d, 2**i), state, tally)
    # the disentangling CNOT must see the carrier on d, i.e. before recombination
    state = _do(DualRailCnot(d, q0, q1), state, tally)
    state = sorting_interferometer(state, u, d, 2**i, tally)
    _check(state, q1, checks, f"mux {i} qubit port")
    _check(state, d, checks, f"mux {i} carrier lower output")
    if tally is not None:
        tally.record("mux_block")
    return state


def mux_pipeline(
    qubits,
    n: int,
    recycle_first: bool = False,
    *,
    order: Sequence[int] | None = None,
    plan: ChannelPlan | None = None,
    validate: bool = True,
    keep_spent: bool = False,
    checks: list | None = None,
) -> MuxResult:
    """Transfer n dual-rail qubits into the winding number of one carrier photon.

    ``qubits`` is a list of ``(alpha, beta)``/QubitSpec per channel or a
    PureState over the plan's qubit paths (entangled inputs and spectator
    photons on other paths are allowed).  Returns the state with the carrier
    on ``plan.u``; the spent qubit photons are dropped unless ``keep_spent``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    plan = plan or ChannelPlan.default(n)
    order = _resolve_order(order, n, True, validate, "the multiplexer")
    tally = GateTally()
    state = qubits if isinstance(qubits, PureState) else prepare_qubits(qubits, plan)
    spent = []
    blocks = list(order)
    if recycle_first:
        c = blocks.pop(0)
        q0, q1 = plan.pair(c)
        state = converter(state, q0, q1, 2**c, False, tally)
        _check(state, q1, checks, f"converter {c} lower output")
        state = rename_path(state, q0, plan.u)
    else:
        state = tensor(state, PureState.basis([(plan.u, 0)]))
    for i in blocks:
        state = mux_block(state, plan, i, tally, checks, validate)
        spent.extend(plan.pair(i))
    if spent and not keep_spent:
        state = discard_paths(state, spent)
    return MuxResult(state, tally)


def demux_block(
    state: PureState, plan: ChannelPlan, i: int, fresh: bool = True, tally=None, checks=None, validate: bool = True
) -> PureState:
    """Extract bit ``i`` of the carrier into a new photon on channel ``i``.

    With ``fresh`` the ancilla photon ``|ell=0>`` on ``q_i0`` is created here.
    """
    if validate and not _carrier_ok(state, plan, i, plan.n):
        raise OrderViolation(
            f"demux block {i}: carrier winding numbers are not multiples of {2**i}; "
            "extraction must start from the least significant channel"
        )
    q0, q1 = plan.pair(i)
    u, d = plan.u, plan.d
    if fresh:
        if any(b.on_path(q0) or b.on_path(q1) for b in state):
            raise ValueError(f"qubit paths of channel {i} are not empty")
        state = tensor(state, PureState.basis([(q0, 0)]))
    state = sorting_interferometer(state, u, d, 2**i, tally)
    state = _do(DualRailCnot(d, q0, q1), state, tally)
    state = _do(Hologram(d, -(2**i)), state, tally)
    state = _do(DualRailCnot(q1, u, d), state, tally)
    _check(state, d, checks, f"demux {i} carrier lower output")
    if tally is not None:
        tally.record("demux_block")
    return state


def _carrier_zero_probability(state: PureState, path) -> float:
    good = 0.0
    for basis, amp in state.items():
        on = [(m, c) for m, c in basis if m.path == path]
        if len(on) == 1 and on[0][1] == 1 and on[0][0].ell == 0:
            good += abs(amp) ** 2
    return good / state.norm() ** 2


def demux_pipeline(
    state: PureState,
    n: int,
    recycle_last: bool = False,
    *,
    order: Sequence[int] | None = None,
    plan: ChannelPlan | None = None,
    validate: bool = True,
    keep_carrier: bool = False,
    checks: list | None = None,
) -> DemuxResult:
    """Recover n dual-rail qubits from the carrier on ``plan.u``, least significant first.

    Without recycling the spent carrier must end in ``|ell=0>``; it is
    checked and dropped (kept with ``keep_carrier``).  A carrier that fails
    the check raises :class:`CarrierCheckFailed` unless kept.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    plan = plan or ChannelPlan.default(n)
    order = _resolve_order(order, n, False, validate, "the demultiplexer")
    if validate and not _carrier_ok(state, plan, 0, n):
        raise OrderViolation(f"carrier winding numbers must lie in [0, {2**n})")
    tally = GateTally()
    blocks = list(order)
    last = blocks.pop() if recycle_last else None
    for i in blocks:
        state = demux_block(state, plan, i, True, tally, checks, validate)
    if last is not None:
        q0, q1 = plan.pair(last)
        if validate and not check_multiplexed(state, plan.u, last, last + 1):
            raise OrderViolation(f"carrier must hold only ell in {{0, {2**last}}} before the final conversion")
        state = rename_path(state, plan.u, q0)
        state = converter_inverse(state, q0, q1, 2**last, False, tally)
        return DemuxResult(state, tally)
    p_zero = _carrier_zero_probability(state, plan.u)
    if checks is not None:
        checks.append(VacuumCheck(plan.u, 1 - p_zero, VACUUM_TOL, "spent carrier ell != 0"))
    if keep_carrier:
        return DemuxResult(state, tally)
    if 1 - p_zero > NORM_TOL:
        raise CarrierCheckFailed(f"spent carrier left ell=0 with probability {1 - p_zero:.3g}")
    return DemuxResult(discard_paths(state, [plan.u]), tally)


def _single_photon_ells(state: PureState, path) -> set:
    ells = set()
    for basis in state:
        if basis.n_photons != 1 or basis[0][0].path != path:
            raise ValueError(f"sorter input must be one photon on {path!r}")
        ells.add(basis[0][0].ell)
    return ells


def _check_sorter_input(state, path, M, stages):
    for ell in _single_photon_ells(state, path):
        if not 0 <= ell <= M:
            raise EllOutOfDeclaredRange(f"ell={ell} outside the declared range [0, {M}]")
        if ell >= 2**stages:
            raise EllOutOfDeclaredRange(f"ell={ell} needs more than {stages} sorter stages")


def sorter_coherent(state: PureState, M: int, *, plan: ChannelPlan | None = None, checks=None) -> SorterResult:
    """Write the winding number of a single photon (0 <= ell <= M) into qubits.

    Uses one demultiplexing block per bit; superpositions of ell become
    superpositions of the qubit register.
    """
    stages = sorter_stage_count(M)
    plan = plan or ChannelPlan.default(stages)
    _check_sorter_input(state, plan.u, M, stages)
    if stages == 0:
        return SorterResult(PureState.vacuum(), state, GateTally())
    result = demux_pipeline(state, stages, plan=plan, keep_carrier=True, checks=checks)
    qubit_paths = [p for pair in plan.qubit_paths for p in pair]
    carrier = discard_paths(result.qubits, qubit_paths)
    qubits = discard_paths(result.qubits, [plan.u])
    return SorterResult(qubits, carrier, result.tally)


def sorter_qnd(state: PureState, M: int, rng_seed=None, *, u="u", d="d") -> QndSortResult:
    """Projective OAM sorter with non-demolition detection and classical switching.

    Each stage separates the parity of ell / 2^i, reads the lower port,
    and, on a detection, subtracts 2^i and switches the photon back to ``u``.
    """
    stages = sorter_stage_count(M)
    tally = GateTally()
    if state.n_photons == 0:
        return QndSortResult([0] * stages, state, tally, 0, True)
    _check_sorter_input(state, u, M, stages)
    rng = _rng(rng_seed)
    bits = []
    for i in range(stages):
        state = sorting_interferometer(state, u, d, 2**i, tally)
        bit, state = qnd_measure_path(state, d, rng)
        tally.record("qnd")
        if bit:
            state = _do(Hologram(d, -(2**i)), state, tally)
            state = swap_paths(state, u, d)
            tally.record("switch")
        tally.record("qnd_stage")
        bits.append(bit)
    value = sum(b << i for i, b in enumerate(bits))
    return QndSortResult(bits, state, tally, value, False)


def adder_block(state: PureState, m_pair: tuple, u, d, j: int, tally=None, checks=None) -> PureState:
    """Add 2^j to the carrier when qubit j of the second operand is logical 1."""
    state = _do(DualRailCnot(m_pair[1], u, d), state, tally)
    state = _do(Hologram(d, 2**j), state, tally)
    state = _do(DualRailCnot(m_pair[1], u, d), state, tally)
    _check(state, d, checks, f"adder {j} lower path")
    if tally is not None:
        tally.record("adder_block")
    return state


def multiply_block(state: PureState, m_pair: tuple, u, d, j: int, tally=None, checks=None) -> PureState:
    """Scale the carrier ell by 2^j when qubit j of the second operand is logical 1."""
    state = _do(DualRailCnot(m_pair[1], u, d), state, tally)
    state = _do(OamScale(d, 2**j), state, tally)
    state = _do(DualRailCnot(m_pair[1], u, d), state, tally)
    _check(state, d, checks, f"multiplier {j} lower path")
    if tally is not None:
        tally.record("multiply_block")
    return state


def _operand(value, plan: ChannelPlan) -> PureState:
    if isinstance(value, PureState):
        return value
    if isinstance(value, (int, np.integer)):
        return basis_qubits(int(value), plan)
    return prepare_qubits(value, plan)


def operand_plans(n: int, out_width: int) -> tuple[ChannelPlan, ChannelPlan, ChannelPlan]:
    """Plans for the first operand, the kept second operand and the result register."""
    return ChannelPlan.default(n, "n"), ChannelPlan.default(n, "m"), ChannelPlan.default(out_width, "s")


def multiplier_width(n: int) -> int:
    # largest literal outcome is (2^n - 1) * 2^(0+1+...+(n-1))
    return n + n * (n - 1) // 2


def _arithmetic(N, M, n, recycle, block, out_width, checks):
    if n < 1:
        raise ValueError("n must be >= 1")
    plan_n, plan_m, plan_s = operand_plans(n, out_width)
    state = tensor(_operand(N, plan_n), _operand(M, plan_m))
    tally = GateTally()
    state, t = mux_pipeline(state, n, recycle, plan=plan_n, checks=checks)
    tally.update(t)
    for j in range(n):
        state = block(state, plan_m.pair(j), plan_s.u, plan_s.d, j, tally, checks)
    state, t = demux_pipeline(state, out_width, recycle, plan=plan_s, checks=checks)
    tally.update(t)
    return ArithmeticResult(state, tally)


def adder_pipeline(N, M, n: int, recycle: bool = False, *, checks: list | None = None) -> ArithmeticResult:
    """|N>|M> -> |M>|N+M> with the sum recovered into n+1 qubits.

    Operands are integers, lists of per-qubit specs, or PureStates on the
    operand registers of :func:`operand_plans`.  The returned state covers
    the ``m`` (kept operand) and ``s`` (sum) registers.
    """
    return _arithmetic(N, M, n, recycle, adder_block, n + 1, checks)


def multiply_pipeline(N, M, n: int, recycle: bool = False, *, checks: list | None = None) -> ArithmeticResult:
    """Chain of conditional x2^j blocks, one per qubit of M.

    The literal composition yields N * 2^(sum of set-bit positions of M),
    which equals N*M only when M has a single set bit.
    """
    return _arithmetic(N, M, n, recycle, multiply_block, multiplier_width(n), checks)
