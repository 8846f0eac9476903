"""JSON circuit descriptions, the circuit runner and oracle-backed verification."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from . import blocks, oracle
from .elements import (
    ArmPhase,
    AssertVacuum,
    Beamsplitter,
    DovePrism,
    DualRailCnot,
    GateTally,
    Hologram,
    OamFlip,
    OamScale,
    PiAngle,
    QndMeasure,
    VacuumCheck,
    assert_vacuum,
    qnd_measure_path,
)
from .errors import (
    NoOracleForCircuit,
    OamSimError,
    SchemaError,
    UndeclaredPath,
    UnknownElement,
    VersionMismatch,
)
from .fock import BasisState, PureState, QubitSpec, check_path, make_qubit, make_single_photon, tensor_all

SCHEMA_VERSION = "oamsim/1"
MAX_CHANNELS = 12
VERIFY_TOL = 1e-9

PIPELINES = ("combiner", "mux", "demux", "sorter_coherent", "sorter_qnd", "adder", "multiplier")


@dataclass(frozen=True)
class Photon:
    path: Any
    ell: int = 0


@dataclass(frozen=True)
class Pipeline:
    name: str
    params: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.name, json.dumps(self.params, sort_keys=True, default=str)))


@dataclass(frozen=True)
class CircuitSpec:
    version: str = SCHEMA_VERSION
    paths: tuple = ()
    photons: tuple = ()
    elements: tuple = ()
    pipeline: Optional[Pipeline] = None
    seed: Optional[int] = None


@dataclass
class RunReport:
    state: PureState
    checks: list = field(default_factory=list)
    qnd_bits: list = field(default_factory=list)
    tally: GateTally = field(default_factory=GateTally)
    seed: Optional[int] = None
    pipeline: Optional[str] = None
    results: dict = field(default_factory=dict)
    duration_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "version": SCHEMA_VERSION,
            "pipeline": self.pipeline,
            "seed": self.seed,
            "state": state_to_json(self.state),
            "vacuum_checks": [c.as_dict() for c in self.checks],
            "qnd_bits": list(self.qnd_bits),
            "tally": self.tally.as_dict(),
            "results": self.results,
            "passed": self.passed,
        }
        if include_timing:
            out["duration_s"] = self.duration_s
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------- encoding


def state_to_json(state: PureState) -> dict:
    return {
        "n_photons": state.n_photons,
        "norm": format(state.norm(), ".17g"),
        "terms": [{"basis": b, "re": re_, "im": im} for b, re_, im in state.to_text()],
    }


def state_from_json(data: dict) -> PureState:
    rows = [(t["basis"], t["re"], t["im"]) for t in data["terms"]]
    return PureState.from_text(rows, data.get("n_photons"))


def _decode_complex(value, where):
    if isinstance(value, bool):
        raise SchemaError("expected a number or [re, im]", where)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise SchemaError("expected a number or [re, im]", where)


def _encode_complex(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _decode_angle(value, where):
    if isinstance(value, dict):
        if set(value) == {"pi_over"} and isinstance(value["pi_over"], int) and value["pi_over"] != 0:
            return PiAngle(Fraction(1, value["pi_over"]))
        if set(value) == {"pi_frac"} and len(value["pi_frac"]) == 2:
            p, q = value["pi_frac"]
            if isinstance(p, int) and isinstance(q, int) and q != 0:
                return PiAngle(Fraction(p, q))
        raise SchemaError('angle must be {"pi_over": K}, {"pi_frac": [p, q]} or radians', where)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise SchemaError("angle must be a number or a pi-rational object", where)


def _encode_angle(alpha):
    if isinstance(alpha, PiAngle):
        t = alpha.turns
        if abs(t.numerator) == 1:
            return {"pi_over": t.numerator * t.denominator}
        return {"pi_frac": [t.numerator, t.denominator]}
    return float(alpha)


_ELEMENT_FIELDS = {
    "hologram": (Hologram, {"path": "path", "delta_ell": "int"}),
    "dove": (DovePrism, {"path": "path", "alpha": "angle"}),
    "flip": (OamFlip, {"path": "path"}),
    "bs": (Beamsplitter, {"path_up": "path", "path_down": "path"}),
    "arm_phase": (ArmPhase, {"path": "path", "alpha": "angle"}),
    "cnot": (DualRailCnot, {"control_path": "path", "target_path_a": "path", "target_path_b": "path"}),
    "scale": (OamScale, {"path": "path", "factor": "int"}),
    "assert_vacuum": (AssertVacuum, {"path": "path", "tol": "float?"}),
    "qnd": (QndMeasure, {"path": "path"}),
}


def element_from_json(data, declared, where="element"):
    if not isinstance(data, dict) or "kind" not in data:
        raise SchemaError("element must be an object with a 'kind'", where)
    kind = data["kind"]
    if kind not in _ELEMENT_FIELDS:
        raise UnknownElement(f"unknown element kind {kind!r}", where)
    cls, fields = _ELEMENT_FIELDS[kind]
    extra = set(data) - set(fields) - {"kind", "label"}
    if extra:
        raise SchemaError(f"unexpected fields {sorted(extra)} for {kind}", where)
    kwargs = {}
    for name, typ in fields.items():
        loc = f"{where}.{name}"
        if name not in data:
            if typ.endswith("?"):
                continue
            raise SchemaError("missing field", loc)
        value = data[name]
        if typ == "path":
            value = _decode_path(value, declared, loc)
        elif typ == "int":
            if not isinstance(value, int) or isinstance(value, bool):
                raise SchemaError("expected an integer", loc)
        elif typ == "angle":
            value = _decode_angle(value, loc)
        elif typ == "float?":
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise SchemaError("expected a number", loc)
            value = float(value)
        kwargs[name] = value
    if "label" in data:
        kwargs["label"] = str(data["label"])
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise SchemaError(str(exc), where) from exc


def element_to_json(element) -> dict:
    _, fields = _ELEMENT_FIELDS[element.kind]
    out = {"kind": element.kind}
    for name, typ in fields.items():
        value = getattr(element, name)
        out[name] = _encode_angle(value) if typ == "angle" else value
    if element.label is not None:
        out["label"] = element.label
    return out


def _decode_path(value, declared, where):
    try:
        value = check_path(value)
    except SchemaError as exc:
        raise SchemaError(str(exc), where) from None
    if value not in declared:
        raise UndeclaredPath(value, where)
    return value


def _decode_qubits(value, n, where):
    if not isinstance(value, list) or len(value) != n:
        raise SchemaError(f"expected a list of {n} [alpha, beta] pairs", where)
    out = []
    for k, pair in enumerate(value):
        loc = f"{where}[{k}]"
        if isinstance(pair, dict):
            pair = [pair.get("alpha"), pair.get("beta")]
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError("expected [alpha, beta]", loc)
        a, b = (_decode_complex(v, loc) for v in pair)
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-9:
            raise SchemaError("qubit amplitudes are not normalized", loc)
        out.append((a, b))
    return out


def _decode_carrier(value, where):
    if not isinstance(value, list) or not value:
        raise SchemaError("carrier must be a non-empty list of [ell, amplitude]", where)
    out = []
    for k, item in enumerate(value):
        loc = f"{where}[{k}]"
        if not isinstance(item, list) or len(item) != 2 or not isinstance(item[0], int):
            raise SchemaError("expected [ell, amplitude]", loc)
        out.append((item[0], _decode_complex(item[1], loc)))
    return out


def _int_param(params, key, where, lo=None, hi=None, default=None):
    value = params.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError("expected an integer", f"{where}.{key}")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise SchemaError(f"must lie in [{lo}, {hi}]", f"{where}.{key}")
    return value


def _pipeline_from_json(data, where="pipeline") -> Pipeline:
    if not isinstance(data, dict) or data.get("name") not in PIPELINES:
        raise SchemaError(f"pipeline name must be one of {', '.join(PIPELINES)}", where)
    name = data["name"]
    allowed = {
        "combiner": {"n", "qubits"},
        "mux": {"n", "qubits", "recycle_first"},
        "demux": {"n", "carrier", "recycle_last"},
        "sorter_coherent": {"M", "carrier"},
        "sorter_qnd": {"M", "carrier"},
        "adder": {"n", "N", "M", "recycle"},
        "multiplier": {"n", "N", "M", "recycle"},
    }[name]
    extra = set(data) - allowed - {"name"}
    if extra:
        raise SchemaError(f"unexpected parameters {sorted(extra)} for {name}", where)
    params: dict = {}
    if "n" in allowed:
        params["n"] = _int_param(data, "n", where, 1, MAX_CHANNELS)
    if "qubits" in allowed:
        params["qubits"] = _decode_qubits(data.get("qubits"), params["n"], f"{where}.qubits")
    if "carrier" in allowed:
        params["carrier"] = _decode_carrier(data.get("carrier"), f"{where}.carrier")
    if "M" in allowed and name.startswith("sorter"):
        params["M"] = _int_param(data, "M", where, 1, 2**MAX_CHANNELS)
    if name in ("adder", "multiplier"):
        n = params["n"]
        for key in ("N", "M"):
            value = data.get(key)
            if isinstance(value, int) and not isinstance(value, bool):
                params[key] = _int_param(data, key, where, 0, 2**n - 1)
            else:
                params[key] = _decode_qubits(value, n, f"{where}.{key}")
    for flag in ("recycle_first", "recycle_last", "recycle"):
        if flag in allowed:
            value = data.get(flag, False)
            if not isinstance(value, bool):
                raise SchemaError("expected true or false", f"{where}.{flag}")
            params[flag] = value
    return Pipeline(name, params)


def _pipeline_to_json(p: Pipeline) -> dict:
    out: dict = {"name": p.name}
    for key, value in p.params.items():
        if key == "qubits" or (key in ("N", "M") and isinstance(value, list)):
            out[key] = [[_encode_complex(a), _encode_complex(b)] for a, b in value]
        elif key == "carrier":
            out[key] = [[ell, _encode_complex(a)] for ell, a in value]
        else:
            out[key] = value
    return out


def circuit_from_dict(data) -> CircuitSpec:
    if not isinstance(data, dict):
        raise SchemaError("circuit must be a JSON object")
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise VersionMismatch(f"unsupported version {version!r}; expected {SCHEMA_VERSION!r}", "version")
    extra = set(data) - {"version", "paths", "photons", "elements", "pipeline", "seed"}
    if extra:
        raise SchemaError(f"unexpected top-level fields {sorted(extra)}")
    paths_raw = data.get("paths", [])
    if not isinstance(paths_raw, list):
        raise SchemaError("expected a list", "paths")
    paths = []
    for k, p in enumerate(paths_raw):
        try:
            paths.append(check_path(p))
        except SchemaError as exc:
            raise SchemaError(str(exc), f"paths[{k}]") from None
    if len(set(paths)) != len(paths):
        raise SchemaError("duplicate path declaration", "paths")
    declared = set(paths)

    photons = []
    for k, item in enumerate(data.get("photons", [])):
        loc = f"photons[{k}]"
        if not isinstance(item, dict):
            raise SchemaError("expected an object", loc)
        if "qubit" in item:
            q = item["qubit"]
            if not isinstance(q, dict):
                raise SchemaError("expected an object", f"{loc}.qubit")
            spec = QubitSpec(
                _decode_complex(q.get("alpha"), f"{loc}.qubit.alpha"),
                _decode_complex(q.get("beta"), f"{loc}.qubit.beta"),
                _decode_path(q.get("path_zero"), declared, f"{loc}.qubit.path_zero"),
                _decode_path(q.get("path_one"), declared, f"{loc}.qubit.path_one"),
            )
            try:
                spec.check()
            except (ValueError, OamSimError) as exc:
                raise SchemaError(str(exc), f"{loc}.qubit") from None
            photons.append(spec)
        else:
            ell = item.get("ell", 0)
            if not isinstance(ell, int) or isinstance(ell, bool):
                raise SchemaError("expected an integer", f"{loc}.ell")
            photons.append(Photon(_decode_path(item.get("path"), declared, f"{loc}.path"), ell))

    elements = tuple(element_from_json(e, declared, f"elements[{k}]") for k, e in enumerate(data.get("elements", [])))
    pipeline = _pipeline_from_json(data["pipeline"]) if data.get("pipeline") is not None else None
    if pipeline is not None and (elements or photons):
        raise SchemaError("a circuit holds either a pipeline or photons/elements, not both", "pipeline")
    seed = data.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
        raise SchemaError("seed must be a non-negative integer", "seed")
    return CircuitSpec(version, tuple(paths), tuple(photons), elements, pipeline, seed)


def parse_circuit(text: str) -> CircuitSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return circuit_from_dict(data)


def circuit_to_dict(spec: CircuitSpec) -> dict:
    out: dict = {"version": spec.version, "paths": list(spec.paths)}
    photons = []
    for p in spec.photons:
        if isinstance(p, QubitSpec):
            photons.append(
                {
                    "qubit": {
                        "alpha": _encode_complex(p.alpha),
                        "beta": _encode_complex(p.beta),
                        "path_zero": p.path_zero,
                        "path_one": p.path_one,
                    }
                }
            )
        else:
            photons.append({"path": p.path, "ell": p.ell})
    out["photons"] = photons
    out["elements"] = [element_to_json(e) for e in spec.elements]
    if spec.pipeline is not None:
        out["pipeline"] = _pipeline_to_json(spec.pipeline)
    if spec.seed is not None:
        out["seed"] = spec.seed
    return out


def serialize_circuit(spec: CircuitSpec) -> str:
    return json.dumps(circuit_to_dict(spec), indent=2)


# ---------------------------------------------------------------- running


def _carrier_state(carrier, path="u") -> PureState:
    terms = {}
    for ell, amp in carrier:
        b = BasisState.from_modes([(path, ell)])
        terms[b] = terms.get(b, 0j) + amp
    state = PureState(terms, 1)
    if not state.is_normalized():
        raise SchemaError("carrier amplitudes are not normalized", "pipeline.carrier")
    return state


def _initial_state(spec: CircuitSpec) -> PureState:
    parts = []
    for p in spec.photons:
        parts.append(make_qubit(p) if isinstance(p, QubitSpec) else make_single_photon(p.path, p.ell))
    return tensor_all(parts)


def _apply_elements(spec: CircuitSpec, report: RunReport, rng) -> PureState:
    state = _initial_state(spec)
    for k, element in enumerate(spec.elements):
        try:
            if element.kind == "assert_vacuum":
                tol = element.tol
                report.checks.append(assert_vacuum(state, element.path, tol, element.label or f"element {k}"))
            elif element.kind == "qnd":
                bit, state = qnd_measure_path(state, element.path, rng)
                report.qnd_bits.append(bit)
            else:
                state = element.apply(state)
            report.tally.record(element.kind)
        except OamSimError as exc:
            exc.element_index = k
            if hasattr(exc, "add_note"):
                exc.add_note(f"while applying element {k} ({element.kind})")
            raise
    return state


def _register_distribution(state: PureState, pairs, offset: int, width: int) -> dict:
    """Marginal distribution of the register formed by ``pairs[offset:offset+width]``."""
    probs: dict[int, float] = {}
    for index, amp in blocks.register_amplitudes(state, pairs).items():
        value = (index >> offset) & ((1 << width) - 1)
        probs[value] = probs.get(value, 0.0) + abs(amp) ** 2
    return dict(sorted(probs.items()))


def _arith_pairs(n, width):
    _, plan_m, plan_s = blocks.operand_plans(n, width)
    return list(plan_m.qubit_paths) + list(plan_s.qubit_paths)


def _run_pipeline(p: Pipeline, report: RunReport, rng) -> PureState:
    prm = p.params
    checks = report.checks
    if p.name == "combiner":
        tally = report.tally
        return blocks.combiner_pipeline(prm["qubits"], prm["n"], tally=tally, checks=checks)
    if p.name == "mux":
        state, tally = blocks.mux_pipeline(prm["qubits"], prm["n"], prm["recycle_first"], checks=checks)
        report.tally.update(tally)
        return state
    if p.name == "demux":
        state, tally = blocks.demux_pipeline(
            _carrier_state(prm["carrier"]), prm["n"], prm["recycle_last"], checks=checks
        )
        report.tally.update(tally)
        return state
    if p.name == "sorter_coherent":
        res = blocks.sorter_coherent(_carrier_state(prm["carrier"]), prm["M"], checks=checks)
        report.tally.update(res.tally)
        report.results["carrier"] = state_to_json(res.carrier)
        report.results["stages"] = oracle.sorter_stage_count(prm["M"])
        return res.qubits
    if p.name == "sorter_qnd":
        res = blocks.sorter_qnd(_carrier_state(prm["carrier"]), prm["M"], rng)
        report.tally.update(res.tally)
        report.qnd_bits.extend(res.bits)
        report.results.update({"value": res.value, "degenerate": res.degenerate, "stages": len(res.bits)})
        return res.carrier
    if p.name in ("adder", "multiplier"):
        run = blocks.adder_pipeline if p.name == "adder" else blocks.multiply_pipeline
        n = prm["n"]
        width = n + 1 if p.name == "adder" else blocks.multiplier_width(n)
        state, tally = run(prm["N"], prm["M"], n, prm["recycle"], checks=checks)
        report.tally.update(tally)
        dist = _register_distribution(state, _arith_pairs(n, width), n, width)
        report.results["outcomes"] = {str(k): v for k, v in dist.items()}
        return state
    raise NoOracleForCircuit(p.name)


def run_circuit(spec: CircuitSpec, seed: int | None = None) -> RunReport:
    """Run a parsed circuit; ``seed`` overrides the seed stored in the circuit."""
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    report = RunReport(PureState.vacuum(), seed=seed, pipeline=spec.pipeline.name if spec.pipeline else None)
    if spec.pipeline is not None:
        report.state = _run_pipeline(spec.pipeline, report, rng)
    else:
        report.state = _apply_elements(spec, report, rng)
    report.duration_s = time.perf_counter() - start
    return report


# ---------------------------------------------------------------- verification


def expected_cnots(p: Pipeline) -> Optional[int]:
    prm = p.params
    if p.name == "mux":
        return oracle.mux_cnot_count(prm["n"], prm["recycle_first"])
    if p.name == "demux":
        return oracle.mux_cnot_count(prm["n"], prm["recycle_last"])
    if p.name == "sorter_coherent":
        return 2 * oracle.sorter_stage_count(prm["M"])
    if p.name == "adder":
        return oracle.adder_cnot_count(prm["n"], prm["recycle"])
    if p.name == "multiplier":
        n = prm["n"]
        return 2 * n + 2 * n + 2 * blocks.multiplier_width(n) - (4 if prm["recycle"] else 0)
    if p.name in ("combiner", "sorter_qnd"):
        return 0
    return None


def _operand_vector(value, n) -> np.ndarray:
    if isinstance(value, int):
        vec = np.zeros(2**n, dtype=complex)
        vec[value] = 1
        return vec
    return oracle.oracle_mux_amplitudes(value, n)


def _max_dev(got: dict, want: dict) -> float:
    keys = set(got) | set(want)
    return max((abs(got.get(k, 0) - want.get(k, 0)) for k in keys), default=0.0)


def _verify_arithmetic(p: Pipeline, N, M, checks) -> dict:
    n, recycle = p.params["n"], p.params["recycle"]
    add = p.name == "adder"
    width = n + 1 if add else blocks.multiplier_width(n)
    run = blocks.adder_pipeline if add else blocks.multiply_pipeline
    state, tally = run(N, M, n, recycle, checks=checks)
    vn, vm = _operand_vector(N, n), _operand_vector(M, n)
    literal, claimed = {}, {}
    for a in np.flatnonzero(vn):
        for b in np.flatnonzero(vm):
            amp = vn[a] * vm[b]
            op = "add" if add else "scale_shift_composition"
            r = oracle.oracle_arithmetic(int(a), int(b), op)
            literal[int(b) + (r << n)] = literal.get(int(b) + (r << n), 0) + amp
            r2 = oracle.oracle_arithmetic(int(a), int(b), "add" if add else "multiply")
            claimed[int(b) + (r2 << n)] = claimed.get(int(b) + (r2 << n), 0) + amp
    got = blocks.register_amplitudes(state, _arith_pairs(n, width))
    return {"deviation": _max_dev(got, literal), "claim_deviation": _max_dev(got, claimed), "tally": tally}


def verify(spec: CircuitSpec, exhaustive: bool = False) -> dict:
    """Run a pipeline circuit and compare it with the closed-form oracles.

    The report's ``status`` is ``"pass"``, ``"fail"`` or, for the
    multiplier with multi-bit M, ``"documented_divergence"``: the circuit
    matches the literal composition of x2^j blocks, which is not N*M.
    """
    p = spec.pipeline
    if p is None:
        raise NoOracleForCircuit("verification needs a named pipeline")
    prm = p.params
    checks: list[VacuumCheck] = []
    out: dict = {"pipeline": p.name, "tolerance": VERIFY_TOL}
    deviation = 0.0
    divergent = False
    tally = GateTally()

    if p.name == "combiner":
        state = blocks.combiner_pipeline(prm["qubits"], prm["n"], tally=tally, checks=checks)
        want = oracle.oracle_combiner_state(prm["qubits"], prm["n"])
        deviation = _max_dev(dict(state.items()), dict(want.items()))
    elif p.name == "mux":
        state, tally = blocks.mux_pipeline(prm["qubits"], prm["n"], prm["recycle_first"], checks=checks)
        want = oracle.oracle_mux_amplitudes(prm["qubits"], prm["n"])
        got = {b[0][0].ell: a for b, a in state.items()}
        deviation = _max_dev(got, dict(enumerate(want)))
    elif p.name in ("demux", "sorter_coherent"):
        carrier = _carrier_state(prm["carrier"])
        if p.name == "demux":
            n = prm["n"]
            qubits, tally = blocks.demux_pipeline(carrier, n, prm["recycle_last"], checks=checks)
        else:
            n = oracle.sorter_stage_count(prm["M"])
            qubits, _, tally = blocks.sorter_coherent(carrier, prm["M"], checks=checks)
            out["stages"] = {"got": tally["demux_block"], "expected": n}
            deviation = max(deviation, float(tally["demux_block"] != n))
        got = blocks.register_amplitudes(qubits, blocks.ChannelPlan.default(n).qubit_paths) if n else {0: 1}
        want = {ell: amp for ell, amp in prm["carrier"]}
        deviation = max(deviation, _max_dev(got, want))
    elif p.name == "sorter_qnd":
        carrier = _carrier_state(prm["carrier"])
        res = blocks.sorter_qnd(carrier, prm["M"], spec.seed)
        tally = res.tally
        stages = oracle.sorter_stage_count(prm["M"])
        support = {ell for ell, amp in prm["carrier"] if abs(amp) > 0}
        out.update({"value": res.value, "bits": res.bits, "stages": {"got": len(res.bits), "expected": stages}})
        deviation = float(res.value not in support or len(res.bits) != stages)
    elif p.name in ("adder", "multiplier"):
        n = prm["n"]
        if exhaustive:
            cases = [(a, b) for a in range(2**n) for b in range(2**n)]
        else:
            cases = [(prm["N"], prm["M"])]
        passed = diverged = 0
        for N, M in cases:
            r = _verify_arithmetic(p, N, M, checks)
            tally = r["tally"]
            deviation = max(deviation, r["deviation"])
            if r["deviation"] <= VERIFY_TOL:
                passed += 1
                if r["claim_deviation"] > VERIFY_TOL:
                    diverged += 1
        out["cases"] = {"total": len(cases), "matched_oracle": passed, "diverge_from_product": diverged}
        divergent = diverged > 0
    else:  # pragma: no cover
        raise NoOracleForCircuit(p.name)

    want_cnots = expected_cnots(p)
    tally_ok = want_cnots is None or tally.cnot_count == want_cnots
    vacuum_ok = all(c.passed for c in checks)
    ok = deviation <= VERIFY_TOL and tally_ok and vacuum_ok
    out.update(
        {
            "max_deviation": deviation,
            "tally": tally.as_dict(),
            "cnot_count": {"got": tally.cnot_count, "expected": want_cnots},
            "vacuum_checks_passed": vacuum_ok,
        }
    )
    if not ok:
        out["status"] = "fail"
    elif divergent:
        out["status"] = "documented_divergence"
        out["note"] = (
            "composing conditional x2^j blocks over the set bits of M gives "
            "N * 2^(sum of set-bit positions); this equals N*M only for single-bit M"
        )
    else:
        out["status"] = "pass"
    return out


def tally_report(spec: CircuitSpec) -> dict:
    report = run_circuit(spec)
    out = {"pipeline": report.pipeline, "tally": report.tally.as_dict(), "cnot_count": report.tally.cnot_count}
    if spec.pipeline is not None:
        out["expected_cnot_count"] = expected_cnots(spec.pipeline)
        if spec.pipeline.name.startswith("sorter"):
            out["expected_stages"] = oracle.sorter_stage_count(spec.pipeline.params["M"])
    return out

