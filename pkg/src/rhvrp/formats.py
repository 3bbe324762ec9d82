"""Instance, result and fractional-solution file formats.

Legacy benchmark layouts are import-only.  The canonical instance layout is
line-oriented text that round-trips exactly::

    rhvrp-instance 1
    name <text>
    variant <variant>
    rounding <none|one_decimal|integer>
    nodes <n>
    <id> <x> <y> <demand>          # n+1 lines, id 0 is the depot
    types <m>
    <capacity> <fixed> <multiplier> <count>
    depots                         # optional, m lines "<x> <y>"
    allowed                        # optional, n lines "<id> <k> <k> ..."
    end
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .instance import Instance, InstanceError, Route, Solution, Variant, VehicleType

FORMATS = ("golden_taillard", "cordeau", "canonical")
RESULT_VERSION = 1


class ParseError(ValueError):
    """Malformed input; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        where = f"{path}:" if path else ""
        where += f"{line}: " if line is not None else (" " if path else "")
        super().__init__(f"{where}{message}")
        self.line = line


class _Lines:
    """Non-blank, comment-stripped lines with their original numbers."""

    def __init__(self, text: str, path=None):
        self.path = path
        self.items = []
        for no, raw in enumerate(text.splitlines(), 1):
            body = raw.split("#", 1)[0].strip()
            if body:
                self.items.append((no, body.split()))
        self.pos = 0

    def next(self, what: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 0
            raise ParseError(f"unexpected end of file, expected {what}", last + 1, self.path)
        item = self.items[self.pos]
        self.pos += 1
        return item

    def done(self) -> bool:
        return self.pos >= len(self.items)

    def error(self, msg, no):
        return ParseError(msg, no, self.path)


def _num(tok: str, no: int, lines: _Lines, kind=float):
    try:
        val = kind(tok)
    except ValueError:
        raise lines.error(f"expected a number, got {tok!r}", no) from None
    if kind is float and not math.isfinite(val):
        raise lines.error(f"non-finite value {tok!r}", no)
    return val


def _fields(lines: _Lines, what: str, count: int) -> tuple[int, list[str]]:
    no, toks = lines.next(what)
    if len(toks) != count:
        raise lines.error(f"{what}: expected {count} fields, got {len(toks)}", no)
    return no, toks


def _wrap(build, lines: _Lines):
    try:
        return build()
    except InstanceError as exc:
        raise ParseError(f"inconsistent instance: {exc}", None, lines.path) from None


# -- Golden / Taillard ------------------------------------------------------


def parse_golden_taillard(text: str, variant=Variant.HVRPFD, name: str = "", path=None) -> Instance:
    """``n``; ``n+1`` lines ``id x y demand``; ``m``; ``m`` lines ``Q f multiplier count``.

    Node ids must be 0..n in order.  A count of ``inf`` or ``-`` means n.
    Variable-cost multipliers end up inside the routing costs.
    """
    lines = _Lines(text, path)
    no, toks = _fields(lines, "customer count", 1)
    n = _num(toks[0], no, lines, int)
    if n < 1:
        raise lines.error("customer count must be positive", no)
    coords, demand = np.zeros((n + 1, 2)), np.zeros(n + 1)
    for i in range(n + 1):
        no, toks = _fields(lines, f"node {i}", 4)
        if _num(toks[0], no, lines, int) != i:
            raise lines.error(f"expected node id {i}, got {toks[0]}", no)
        coords[i] = [_num(toks[1], no, lines), _num(toks[2], no, lines)]
        demand[i] = _num(toks[3], no, lines)
    no, toks = _fields(lines, "vehicle type count", 1)
    m = _num(toks[0], no, lines, int)
    if m < 1:
        raise lines.error("vehicle type count must be positive", no)
    types = []
    for _ in range(m):
        no, toks = _fields(lines, "vehicle type", 4)
        count = n if toks[3] in ("inf", "-") else _num(toks[3], no, lines, int)
        try:
            types.append(VehicleType(_num(toks[0], no, lines), _num(toks[1], no, lines),
                                     min(count, n), _num(toks[2], no, lines)))
        except InstanceError as exc:
            raise lines.error(str(exc), no) from None
    if not lines.done():
        raise lines.error("trailing data after vehicle types", lines.items[lines.pos][0])
    return _wrap(lambda: Instance(coords, demand, types, variant, name), lines)


# -- Cordeau ------------------------------------------------------------------


def _decode_combos(combos: list[int], t: int, no: int, lines: _Lines) -> list[int]:
    ks = set()
    for c in combos:
        if c <= 0 or c & (c - 1) or c.bit_length() > t:
            raise lines.error(f"visit combination {c} is not a single-bit mask over {t} entries", no)
        ks.add(c.bit_length() - 1)
    return sorted(ks)


def parse_cordeau(text: str, name: str = "", path=None) -> Instance:
    """Cordeau MDVRP (type 2) and SDVRP (type 3) layouts.

    Header ``type m n t``; ``t`` lines ``D Q``; ``n`` customer lines
    ``i x y d q f a c_1 .. c_a`` where each visit combination ``c`` is a
    one-bit mask selecting a depot (MDVRP) or a vehicle type (SDVRP); then the
    depot lines ``i x y ...`` (``t`` of them for MDVRP, one for SDVRP).
    ``m`` is the number of vehicles per depot or type; durations ``D`` are
    read and ignored.
    """
    lines = _Lines(text, path)
    no, toks = _fields(lines, "header 'type m n t'", 4)
    kind, m_veh, n, t = (_num(x, no, lines, int) for x in toks)
    if kind not in (2, 3):
        raise lines.error(f"problem type {kind} is not MDVRP (2) or SDVRP (3)", no)
    if n < 1 or t < 1 or m_veh < 1:
        raise lines.error("counts in the header must be positive", no)
    caps = []
    for _ in range(t):
        no, toks = _fields(lines, "'D Q' line", 2)
        caps.append(_num(toks[1], no, lines))
    coords, demand = np.zeros((n + 1, 2)), np.zeros(n + 1)
    allowed = np.zeros((n + 1, t), dtype=bool)
    for i in range(1, n + 1):
        no, toks = lines.next(f"customer {i}")
        if len(toks) < 7:
            raise lines.error(f"customer line needs at least 7 fields, got {len(toks)}", no)
        if _num(toks[0], no, lines, int) != i:
            raise lines.error(f"expected customer id {i}, got {toks[0]}", no)
        a = _num(toks[6], no, lines, int)
        if len(toks) != 7 + a:
            raise lines.error(f"customer line announces {a} combinations but has {len(toks) - 7}", no)
        coords[i] = [_num(toks[1], no, lines), _num(toks[2], no, lines)]
        demand[i] = _num(toks[4], no, lines)
        combos = [_num(x, no, lines, int) for x in toks[7:]]
        allowed[i, _decode_combos(combos, t, no, lines)] = True
    depots = []
    for _ in range(t if kind == 2 else 1):
        no, toks = lines.next("depot line")
        if len(toks) < 3:
            raise lines.error("depot line needs 'id x y'", no)
        depots.append([_num(toks[1], no, lines), _num(toks[2], no, lines)])
    if not lines.done():
        raise lines.error("trailing data after depot lines", lines.items[lines.pos][0])
    count = min(m_veh, n)
    try:
        types = [VehicleType(q, 0.0, count) for q in caps]
    except InstanceError as exc:
        raise ParseError(str(exc), None, path) from None
    if kind == 2:
        coords[0] = depots[0]
        return _wrap(lambda: Instance(coords, demand, types, Variant.MDVRP, name, depots=np.array(depots)), lines)
    coords[0] = depots[0]
    return _wrap(lambda: Instance(coords, demand, types, Variant.SDVRP, name, allowed=allowed), lines)


# -- canonical ----------------------------------------------------------------


def write_canonical(instance: Instance) -> str:
    out = ["rhvrp-instance 1", f"name {instance.name or '-'}", f"variant {instance.variant.value}",
           f"rounding {instance.rounding}", f"nodes {instance.n}"]
    for i in range(instance.n + 1):
        x, y = instance.coords[i]
        out.append(f"{i} {float(x)!r} {float(y)!r} {float(instance.demand[i])!r}")
    out.append(f"types {instance.m}")
    for vt in instance.vehicle_types:
        out.append(f"{float(vt.capacity)!r} {float(vt.fixed_cost)!r} {float(vt.cost_multiplier)!r} {vt.count}")
    if instance.depots is not None:
        out.append("depots")
        out += [f"{float(x)!r} {float(y)!r}" for x, y in instance.depots]
    if instance.allowed is not None:
        out.append("allowed")
        for i in range(1, instance.n + 1):
            out.append(" ".join([str(i)] + [str(k) for k in np.flatnonzero(instance.allowed[i])]))
    out.append("end")
    return "\n".join(out) + "\n"


def _keyed(lines: _Lines, key: str) -> tuple[int, list[str]]:
    no, toks = lines.next(key)
    if toks[0] != key:
        raise lines.error(f"expected '{key}', got {toks[0]!r}", no)
    return no, toks[1:]


def parse_canonical(text: str, path=None) -> Instance:
    lines = _Lines(text, path)
    no, toks = lines.next("header")
    if toks != ["rhvrp-instance", "1"]:
        raise lines.error("not a version-1 canonical instance", no)
    _, rest = _keyed(lines, "name")
    name = " ".join(rest)
    name = "" if name == "-" else name
    no, rest = _keyed(lines, "variant")
    try:
        variant = Variant(rest[0])
    except (ValueError, IndexError):
        raise lines.error(f"unknown variant {' '.join(rest)!r}", no) from None
    _, rest = _keyed(lines, "rounding")
    rounding = rest[0] if rest else ""
    no, rest = _keyed(lines, "nodes")
    if len(rest) != 1:
        raise lines.error("nodes needs a count", no)
    n = _num(rest[0], no, lines, int)
    coords, demand = np.zeros((n + 1, 2)), np.zeros(n + 1)
    for i in range(n + 1):
        no, toks = _fields(lines, f"node {i}", 4)
        if _num(toks[0], no, lines, int) != i:
            raise lines.error(f"expected node id {i}", no)
        coords[i] = [_num(toks[1], no, lines), _num(toks[2], no, lines)]
        demand[i] = _num(toks[3], no, lines)
    no, rest = _keyed(lines, "types")
    m = _num(rest[0], no, lines, int) if len(rest) == 1 else 0
    if m < 1:
        raise lines.error("types needs a positive count", no)
    types = []
    for _ in range(m):
        no, toks = _fields(lines, "vehicle type", 4)
        try:
            types.append(VehicleType(_num(toks[0], no, lines), _num(toks[1], no, lines),
                                     _num(toks[3], no, lines, int), _num(toks[2], no, lines)))
        except InstanceError as exc:
            raise lines.error(str(exc), no) from None
    depots = allowed = None
    while True:
        no, toks = lines.next("'depots', 'allowed' or 'end'")
        if toks == ["end"]:
            break
        if toks == ["depots"] and depots is None:
            depots = np.zeros((m, 2))
            for k in range(m):
                no, t2 = _fields(lines, "depot", 2)
                depots[k] = [_num(t2[0], no, lines), _num(t2[1], no, lines)]
        elif toks == ["allowed"] and allowed is None:
            allowed = np.zeros((n + 1, m), dtype=bool)
            for i in range(1, n + 1):
                no, t2 = lines.next(f"allowed types of customer {i}")
                if _num(t2[0], no, lines, int) != i:
                    raise lines.error(f"expected customer id {i}", no)
                for tok in t2[1:]:
                    k = _num(tok, no, lines, int)
                    if not 0 <= k < m:
                        raise lines.error(f"vehicle type {k} out of range", no)
                    allowed[i, k] = True
        else:
            raise lines.error(f"unexpected section {' '.join(toks)!r}", no)
    if not lines.done():
        raise lines.error("trailing data after 'end'", lines.items[lines.pos][0])
    return _wrap(lambda: Instance(coords, demand, types, variant, name, allowed, depots, rounding), lines)


def parse_instance(path, fmt: str = "canonical", variant=None) -> Instance:
    """Read an instance file.  ``variant`` overrides the golden_taillard default."""
    path = Path(path)
    text = path.read_text()
    if fmt == "golden_taillard":
        return parse_golden_taillard(text, variant or Variant.HVRPFD, path.stem, path)
    if fmt == "cordeau":
        return parse_cordeau(text, path.stem, path)
    if fmt == "canonical":
        return parse_canonical(text, path)
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def bundled(name: str) -> Path:
    """Path of a benchmark file shipped with the package."""
    return Path(__file__).with_name("data") / f"{name}.txt"


# -- results --------------------------------------------------------------------


@dataclass
class RouteRecord:
    customers: list[int]
    vehicle_type: int
    load: float
    slack: float


@dataclass
class RunResult:
    cost: float
    penalized_cost: float
    feasible: bool
    routes: list[RouteRecord]
    seed: int
    wall_time: float
    tabu_calls: int
    trace: list[list[float]] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def solution(self, instance: Instance, uset=None) -> Solution:
        return Solution.build([Route(r.customers, r.vehicle_type) for r in self.routes], instance, uset)

    def body(self) -> dict:
        """Fields that repeat exactly across identical runs (no timings)."""
        d = asdict(self)
        d.pop("wall_time")
        d["trace"] = [row[1:] for row in d["trace"]]
        return d


def emit_result(result: RunResult, path) -> None:
    payload = {"format": "rhvrp-result", "version": RESULT_VERSION, "result": asdict(result)}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_result(path) -> RunResult:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc.msg}", exc.lineno, path) from None
    if not isinstance(payload, dict) or payload.get("format") != "rhvrp-result":
        raise ParseError("not an rhvrp result file", None, path)
    if payload.get("version") != RESULT_VERSION:
        raise ParseError(f"unsupported result version {payload.get('version')!r}", None, path)
    try:
        d = dict(payload["result"])
        d["routes"] = [RouteRecord(**r) for r in d["routes"]]
        return RunResult(**d)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed result record: {exc}", None, path) from None


# -- fractional solutions ---------------------------------------------------------


def parse_fractional(text: str, path=None):
    """Header ``n m``; then ``y i k value`` and ``x i j k value`` lines."""
    from .cuts import FractionalSolution

    lines = _Lines(text, path)
    no, toks = _fields(lines, "header 'n m'", 2)
    n, m = _num(toks[0], no, lines, int), _num(toks[1], no, lines, int)
    x, y = {}, {}
    while not lines.done():
        no, toks = lines.next("entry")
        if toks[0] == "y" and len(toks) == 4:
            i, k = _num(toks[1], no, lines, int), _num(toks[2], no, lines, int)
            y[(i, k)] = _num(toks[3], no, lines)
        elif toks[0] == "x" and len(toks) == 5:
            i, j, k = (_num(v, no, lines, int) for v in toks[1:4])
            x[(i, j, k)] = _num(toks[4], no, lines)
        else:
            raise lines.error(f"expected 'y i k v' or 'x i j k v', got {' '.join(toks)!r}", no)
    try:
        return FractionalSolution(n, m, x, y)
    except ValueError as exc:
        raise ParseError(str(exc), None, path) from None


def write_fractional(fs) -> str:
    out = [f"{fs.n} {fs.m}"]
    out += [f"y {i} {k} {v!r}" for (i, k), v in sorted(fs.y.items())]
    out += [f"x {i} {j} {k} {v!r}" for (i, j, k), v in sorted(fs.x.items())]
    return "\n".join(out) + "\n"


def format_cuts(cuts) -> str:
    return "".join(f"{c.k} {len(c.S)} {' '.join(map(str, c.S))} {c.lhs!r} {c.rhs!r}\n" for c in cuts)
