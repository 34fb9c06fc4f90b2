"""Lowered program form shared by the compiler and the engine.

The text encoding (``.lir``) is line oriented: a ``LAYERS-IR <version>``
header, then one record per line, ``#`` starting a comment line.  Each
record is a record type followed by ``key=value`` fields.  Values are
typed by their spelling:

    "text"        string (identifiers and file names)
    12            integer
    0.5  1e-05    float, written with ``repr`` so it reads back exactly
    true false    booleans
    -             absent value
    [1,2,"a"]     list

See docs/ir-format.md for the record layouts.
"""

import re
from dataclasses import dataclass, field

from .diagnostics import IRFormatError
from .sema import REAL_PARAMS, INT_PARAMS

VERSION = 1
HEADER = "LAYERS-IR"
HYPER_KEYS = frozenset(REAL_PARAMS + INT_PARAMS) - {"balance"}
OPCODES = ("TRAIN", "JTRAIN", "TEST", "SAVE", "LOAD", "TESTOUT", "PRINTK", "SET",
           "ZSCORE", "CENTER", "YUV", "DIV", "BALANCE")


@dataclass
class IRConstants:
    batch: int
    threads: int
    log: str
    log_explicit: bool


@dataclass
class IRData:
    name: str
    file: str
    format: str
    n: int
    d: int
    k: int
    t: int


@dataclass
class IRLayer:
    index: int
    net: str
    name: str
    kind: str
    parents: list
    shape: tuple
    params: dict
    hyper: dict

    @property
    def qualname(self):
        return f"{self.net}.{self.name}"

    @property
    def reshape(self):
        return self.kind == "F" and bool(self.params.get("reshape"))

    @property
    def has_weights(self):
        return self.kind in ("FO", "C") or (self.kind == "F" and not self.reshape)


@dataclass
class IRNetwork:
    name: str
    tr: str
    va: str | None
    ts: str | None
    layers: list
    order: list
    outputs: list


@dataclass
class IRAction:
    op: str
    args: dict


@dataclass
class IRProgram:
    constants: IRConstants
    data: list = field(default_factory=list)
    layers: list = field(default_factory=list)
    networks: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    version: int = VERSION

    def network(self, name):
        for n in self.networks:
            if n.name == name:
                return n
        raise KeyError(name)

    def dataset(self, name):
        for d in self.data:
            if d.name == name:
                return d
        raise KeyError(name)


def lower(analysis):
    """Lower a semantic :class:`~layerslang.sema.Analysis` to an IRProgram."""
    c = analysis.constants
    prog = IRProgram(IRConstants(c.batch, c.threads, c.log, c.log_explicit))
    for d in analysis.data:
        i = d.info
        prog.data.append(IRData(d.name, d.path, d.fmt, i.n, i.d, i.k, i.t))
    for l in analysis.layers:
        prog.layers.append(IRLayer(l.index, l.net, l.name, l.kind, list(l.parents),
                                   tuple(l.out_shape), dict(l.params), dict(l.hyper.items())))
    for g in analysis.networks:
        prog.networks.append(IRNetwork(g.name, g.tr, g.va, g.ts,
                                       [l.index for l in g.layers], list(g.topo_order),
                                       list(g.outputs)))
    for step in analysis.plan:
        args = {k: (list(v) if isinstance(v, list) else v) for k, v in step.args.items()}
        prog.actions.append(IRAction(step.op, args))
    return prog


# -- text encoding -------------------------------------------------------------

def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        if '"' in value or any(ch.isspace() or not ch.isprintable() for ch in value):
            raise ValueError(f"cannot encode string {value!r}")
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot encode {value!r}")


_INT = re.compile(r"-?\d+\Z")
_FLOAT = re.compile(r"-?(\d+\.\d*|\d*\.\d+|\d+)(e[-+]?\d+)?\Z|-?inf\Z|nan\Z")


def _parse(text, lineno):
    if text == "-":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1]
        return [_parse(t, lineno) for t in inner.split(",")] if inner else []
    if _INT.match(text):
        return int(text)
    if _FLOAT.match(text):
        return float(text)
    raise IRFormatError(f"bad value {text!r}", lineno)


def _record(kind, fields):
    return " ".join([kind] + [f"{k}={_fmt(v)}" for k, v in fields])


def serialize(prog):
    out = [f"{HEADER} {prog.version}", "# constants"]
    c = prog.constants
    out.append(_record("const", [("batch", c.batch), ("threads", c.threads),
                                 ("log", c.log), ("log_explicit", c.log_explicit)]))
    out.append("# data")
    for d in prog.data:
        out.append(_record("data", [("name", d.name), ("file", d.file), ("format", d.format),
                                    ("n", d.n), ("d", d.d), ("k", d.k), ("t", d.t)]))
    out.append("# layers")
    for l in prog.layers:
        out.append(_record("layer", [("index", l.index), ("net", l.net), ("name", l.name),
                                     ("kind", l.kind), ("parents", l.parents),
                                     ("shape", list(l.shape))]
                           + list(l.params.items()) + list(l.hyper.items())))
    out.append("# networks")
    for n in prog.networks:
        out.append(_record("net", [("name", n.name), ("tr", n.tr), ("va", n.va), ("ts", n.ts),
                                   ("layers", n.layers), ("order", n.order),
                                   ("outputs", n.outputs)]))
    out.append("# actions")
    for a in prog.actions:
        out.append(_record(f"action {a.op}", list(a.args.items())))
    return "\n".join(out) + "\n"


def _take(fields, lineno, *names):
    try:
        return [fields.pop(n) for n in names]
    except KeyError as exc:
        raise IRFormatError(f"missing field {exc.args[0]!r}", lineno) from None


def deserialize(text):
    """Parse ``.lir`` text; raises IRFormatError naming the offending line."""
    prog = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words = line.split()
        if prog is None:
            if len(words) != 2 or words[0] != HEADER:
                raise IRFormatError(f"expected '{HEADER} <version>' header", lineno)
            if words[1] != str(VERSION):
                raise IRFormatError(f"unsupported IR version {words[1]} "
                                    f"(this reader handles {VERSION})", lineno)
            prog = IRProgram(None)
            continue
        kind, rest = words[0], words[1:]
        op = None
        if kind == "action":
            if not rest or rest[0] not in OPCODES:
                raise IRFormatError("unknown or missing opcode", lineno)
            op, rest = rest[0], rest[1:]
        fields = {}
        for w in rest:
            key, eq, val = w.partition("=")
            if not eq or not key:
                raise IRFormatError(f"malformed field {w!r}", lineno)
            fields[key] = _parse(val, lineno)
        try:
            if kind == "const":
                prog.constants = IRConstants(*_take(fields, lineno, "batch", "threads", "log",
                                                    "log_explicit"))
            elif kind == "data":
                prog.data.append(IRData(*_take(fields, lineno, "name", "file", "format",
                                               "n", "d", "k", "t")))
            elif kind == "layer":
                index, net, name, lkind, parents, shape = _take(
                    fields, lineno, "index", "net", "name", "kind", "parents", "shape")
                hyper = {k: fields.pop(k) for k in list(fields) if k in HYPER_KEYS}
                prog.layers.append(IRLayer(index, net, name, lkind, parents, tuple(shape),
                                           fields, hyper))
                fields = {}
            elif kind == "net":
                prog.networks.append(IRNetwork(*_take(fields, lineno, "name", "tr", "va", "ts",
                                                      "layers", "order", "outputs")))
            elif kind == "action":
                prog.actions.append(IRAction(op, fields))
                fields = {}
            else:
                raise IRFormatError(f"unknown record type {kind!r}", lineno)
        except TypeError:
            raise IRFormatError(f"malformed {kind} record", lineno) from None
        if fields:
            raise IRFormatError(f"unexpected field(s) {', '.join(fields)}", lineno)
    if prog is None:
        raise IRFormatError("empty IR text")
    if prog.constants is None:
        raise IRFormatError("missing const record")
    return prog
