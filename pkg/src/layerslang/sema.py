"""Semantic analysis: name resolution, defaults, topology and shapes.

Unlike the lexer and parser, analysis keeps going after an error and
reports every problem it finds.  Error codes:

    E001  undefined data set (or missing test binding)
    E002  undefined or ambiguous network/layer reference
    E003  duplicate name
    E004  missing mandatory parameter
    E005  duplicate or conflicting parameter
    E006  topology violation
    E007  shape mismatch
    E008  invalid value (fraction where an integer is needed, out of range)
    E009  parameter or command not applicable to its target
    E010  autoencoder combined with classification
    E011  data file cannot be read
    W001  ``local`` accepted with no runtime effect
"""

import heapq
import os
from dataclasses import dataclass, field, fields

from . import ast, dataio
from .diagnostics import DataError, Diagnostic, SemanticError, Span

INPUT_KINDS = ("FI", "CI")
MAP_KINDS = ("CI", "C", "MP", "CA")

REAL_PARAMS = ast.REAL_PARAMS
INT_PARAMS = ast.INT_PARAMS

# layer kinds each script parameter may be written to; "R" is the reshape F
APPLICABLE = {
    "mu": {"F", "FO", "C"},
    "mmu": {"F", "FO", "C"},
    "l2": {"F", "FO", "C"},
    "l1": {"F", "FO", "C"},
    "maxn": {"F", "FO", "C"},
    "drop": {"F", "C"},
    "noiser": {"FI", "CI", "F", "C"},
    "noisesd": {"FI", "CI", "F", "C"},
    "noiseb": {"FI", "CI"},
    "brightness": {"CI"},
    "contrast": {"CI"},
    "lambda": {"FO"},
    "bn": {"F", "C"},
    "act": {"F", "C"},
    "shift": {"CI"},
    "flip": {"CI"},
    "balance": set(),
}

# allowed values for integer-class parameters; None means any non-negative
INT_DOMAINS = {"bn": {0, 1}, "act": {0, 1, 2, 3}, "shift": {0, 1},
               "flip": {0, 1}, "balance": {0, 1}}
# half-open [lo, hi) or closed [lo, hi] bounds for real-class parameters
REAL_BOUNDS = {"drop": (0.0, 1.0, False), "mmu": (0.0, 1.0, False),
               "noiseb": (0.0, 1.0, True), "noiser": (0.0, 1.0, True)}


@dataclass
class Constants:
    batch: int = 100
    threads: int = 4
    log: str = "netparser.log"
    log_explicit: bool = False


@dataclass
class DataRef:
    name: str
    path: str
    fmt: str
    info: dataio.DataInfo | None
    span: Span = field(default=None, compare=False, repr=False)


@dataclass
class HyperParams:
    mu: float = 0.01
    mmu: float = 0.9
    l2: float = 0.0
    l1: float = 0.0
    maxn: float = 0.0
    drop: float = 0.0
    noiser: float = 0.0
    noisesd: float = 0.0
    noiseb: float = 0.0
    brightness: float = 0.0
    contrast: float = 0.0
    lambda_: float = 1.0
    bn: int = 0
    act: int = 1
    shift: int = 0
    flip: int = 0

    @staticmethod
    def attr(param):
        return "lambda_" if param == "lambda" else param

    def get(self, param):
        return getattr(self, self.attr(param))

    def set(self, param, value):
        if param in INT_PARAMS:
            value = int(value)
        else:
            value = float(value)
        setattr(self, self.attr(param), value)

    def items(self):
        for f in fields(self):
            yield ("lambda" if f.name == "lambda_" else f.name), getattr(self, f.name)


def default_hyper(kind):
    return HyperParams(act=1 if kind in ("F", "C") else 0)


@dataclass
class ResolvedLayer:
    index: int
    net: str
    name: str
    kind: str
    params: dict
    hyper: HyperParams
    parents: list = field(default_factory=list)
    out_shape: tuple | None = None
    span: Span = field(default=None, compare=False, repr=False)

    @property
    def qualname(self):
        return f"{self.net}.{self.name}"

    @property
    def reshape(self):
        return self.kind == "F" and self.params.get("reshape", False)

    @property
    def amend_kind(self):
        return "R" if self.reshape else self.kind

    @property
    def has_weights(self):
        return self.kind in ("FO", "C") or (self.kind == "F" and not self.reshape)

    @property
    def is_map(self):
        return self.kind in MAP_KINDS


@dataclass
class NetworkGraph:
    name: str
    tr: str
    va: str | None
    ts: str | None
    layers: list                    # own ResolvedLayer objects
    edges: list                     # (parent, child) global indices in the closure
    topo_order: list                # global indices: own layers plus shared ancestors
    outputs: list                   # global indices of own FO layers
    span: Span = field(default=None, compare=False, repr=False)


@dataclass
class Step:
    """One resolved script action; ``op`` is the IR opcode."""
    op: str
    args: dict
    span: Span = field(default=None, compare=False, repr=False)


@dataclass
class Analysis:
    constants: Constants
    data: list
    layers: list
    networks: list
    plan: list
    warnings: list = field(default_factory=list, compare=False)

    def network(self, name):
        return next(n for n in self.networks if n.name == name)

    def dataref(self, name):
        return next(d for d in self.data if d.name == name)


# -- shape arithmetic ----------------------------------------------------------

def conv_out(n, pad, k, stride):
    return (n + 2 * pad - k) // stride + 1


def layer_shape(layer, parent_shapes, info):
    """Output shape of ``layer`` given its parents' shapes and its data info.

    Returns ``(shape, problem)``; ``problem`` is a message when the
    combination is invalid.
    """
    p = layer.params
    kind = layer.kind
    if kind == "FI":
        return (info.d,), None
    if kind == "CI":
        if p["nz"] * p["nr"] * p["nc"] != info.d:
            return None, (f"input map {p['nz']}x{p['nr']}x{p['nc']} does not match "
                          f"data dimension {info.d}")
        return (p["nz"], p["cr"], p["cc"]), None
    if kind in ("C", "MP", "CA") or layer.reshape:
        for s in parent_shapes:
            if len(s) != 3:
                return None, f"{kind} layer '{layer.name}' needs a convolutional parent"
    elif kind in ("F", "FO"):
        for s in parent_shapes:
            if len(s) != 1:
                return None, (f"layer '{layer.name}' has a convolutional parent; "
                              "insert a reshape layer (F with [])")
    if kind == "C":
        z, r, c = parent_shapes[0]
        if p["kr"] > r + 2 * p["rpad"] or p["kc"] > c + 2 * p["cpad"]:
            return None, (f"kernel {p['kr']}x{p['kc']} larger than padded input "
                          f"{r + 2 * p['rpad']}x{c + 2 * p['cpad']}")
        return (p["nk"], conv_out(r, p["rpad"], p["kr"], p["stride"]),
                conv_out(c, p["cpad"], p["kc"], p["stride"])), None
    if kind == "MP":
        z, r, c = parent_shapes[0]
        if r < p["sizer"] or c < p["sizec"]:
            return None, f"pooling window {p['sizer']}x{p['sizec']} larger than input {r}x{c}"
        return (z, r // p["sizer"], c // p["sizec"]), None
    if kind == "CA":
        rc = {s[1:] for s in parent_shapes}
        if len(rc) > 1:
            sizes = ", ".join(f"{s[1]}x{s[2]}" for s in parent_shapes)
            return None, f"cat layer '{layer.name}' joins maps of unequal size ({sizes})"
        z = sum(s[0] for s in parent_shapes)
        return (z,) + parent_shapes[0][1:], None
    if layer.reshape:
        z, r, c = parent_shapes[0]
        return (z * r * c,), None
    if kind == "F":
        return (p["numnodes"],), None
    if kind == "FO":
        if p["autoencoder"]:
            return (info.d,), None
        if p["criterion"] == "classification":
            if info.k < 1:
                return None, "classification output needs labeled training data"
            return (info.k,), None
        if info.k > 0 or info.t < 1:
            return None, "regression output needs real-valued targets in the training data"
        return (info.t,), None
    raise ValueError(kind)


def topo_sort(indices, parents_of, layers):
    """Kahn's algorithm; inputs first, outputs last, otherwise declaration order.

    Returns ``None`` when the subgraph has a cycle.
    """
    members = set(indices)
    indeg = {i: sum(1 for p in parents_of(i) if p in members) for i in members}
    children = {i: [] for i in members}
    for i in members:
        for p in parents_of(i):
            if p in members:
                children[p].append(i)

    def key(i):
        k = layers[i].kind
        return (k not in INPUT_KINDS, k == "FO", i)

    ready = [key(i) for i in members if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)[2]
        order.append(i)
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, key(c))
    return order if len(order) == len(members) else None


def ancestors_closure(own, parents_of):
    seen = set(own)
    stack = list(own)
    while stack:
        for p in parents_of(stack.pop()):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


# -- the analyzer --------------------------------------------------------------

class Analyzer:
    def __init__(self, exp, data_info=None, base_dir=None):
        self.exp = exp
        self.base_dir = base_dir
        self.data_info = data_info or dataio.probe
        self.errors = []
        self.warnings = []

    def error(self, code, message, span):
        self.errors.append(Diagnostic(code, message, span))

    def warn(self, code, message, span):
        self.warnings.append(Diagnostic(code, message, span, severity="warning"))

    def as_int(self, value, what, span, minimum=0):
        if value != value.to_integral_value():
            self.error("E008", f"{what} must be an integer, got {value}", span)
            return None
        v = int(value)
        if v < minimum:
            self.error("E008", f"{what} must be at least {minimum}, got {v}", span)
            return None
        return v

    # -- constants and data ----------------------------------------------------

    def check_constants(self):
        consts = Constants()
        if self.exp.constants is None:
            return consts
        seen = set()
        for e in self.exp.constants.entries:
            if e.name in seen:
                self.error("E005", f"constant '{e.name}' given twice", e.span)
                continue
            seen.add(e.name)
            if e.name == "log":
                consts.log = e.value
                consts.log_explicit = True
            else:
                v = self.as_int(e.value, e.name, e.span, minimum=1)
                if v is not None:
                    setattr(consts, e.name, v)
        return consts

    def resolve_path(self, path):
        if self.base_dir is None or os.path.isabs(path):
            return path
        return os.path.join(self.base_dir, path)

    def check_data(self):
        data = {}
        for block in self.exp.blocks(ast.DataBlock):
            for d in block.entries:
                if d.name in data:
                    self.error("E003", f"data '{d.name}' defined twice", d.span)
                    continue
                path = fmt = None
                for p in d.params:
                    if p.name == "filename":
                        if path is not None:
                            self.error("E005", f"data '{d.name}' has two file names", p.span)
                        path = p.value
                    else:
                        if fmt is not None:
                            self.error("E005", f"data '{d.name}' has two formats", p.span)
                        fmt = p.name
                fmt = fmt or "ascii"
                info = None
                if path is None:
                    self.error("E004", f"data '{d.name}' needs a filename", d.span)
                else:
                    try:
                        info = self.data_info(self.resolve_path(path), fmt)
                    except DataError as exc:
                        self.error("E011", f"data '{d.name}': {exc}", d.span)
                data[d.name] = DataRef(d.name, path, fmt, info, d.span)
        return data

    # -- layers ------------------------------------------------------------------

    def resolve_layer(self, net, decl, index):
        kind = decl.kind
        raw = {}
        for p in decl.params or []:
            if p.name in raw or (kind == "FO" and p.name in ("classification", "regression")
                                 and {"classification", "regression"} & raw.keys()):
                self.error("E005", f"parameter '{p.name}' repeated or conflicting in "
                           f"layer '{decl.name}'", p.span)
                continue
            raw[p.name] = p

        def need(*names):
            out = {}
            for n in names:
                if n not in raw:
                    self.error("E004", f"{kind} layer '{decl.name}' needs parameter '{n}'",
                               decl.span)
                    out[n] = None
                else:
                    out[n] = self.as_int(raw[n].value, n, raw[n].span, minimum=1)
            return out

        def opt(name, default, minimum=0):
            if name not in raw:
                return default
            return self.as_int(raw[name].value, name, raw[name].span, minimum)

        params = {}
        if kind == "CI":
            params = need("nz", "nr", "nc")
            params["cr"] = opt("cr", params["nr"], 1)
            params["cc"] = opt("cc", params["nc"], 1)
            for crop, full in (("cr", "nr"), ("cc", "nc")):
                if None not in (params[crop], params[full]) and params[crop] > params[full]:
                    self.error("E007", f"crop {crop}={params[crop]} exceeds {full}="
                               f"{params[full]} in layer '{decl.name}'", raw[crop].span)
        elif kind == "F":
            # the grammar admits a single F parameter, so ``[local]`` never
            # comes with numnodes: it is read as a flattening layer
            if "numnodes" in raw:
                params = {"numnodes": self.as_int(raw["numnodes"].value, "numnodes",
                                                  raw["numnodes"].span, minimum=1),
                          "local": False, "reshape": False}
            else:
                params = {"numnodes": 0, "local": "local" in raw, "reshape": True}
            if "local" in raw:
                self.warn("W001", f"'local' on layer '{decl.name}' is accepted but "
                          "has no runtime effect", raw["local"].span)
        elif kind == "FO":
            crit = [n for n in ("classification", "regression") if n in raw]
            auto = "autoencoder" in raw
            if not crit:
                self.error("E004", f"output layer '{decl.name}' needs a criterion "
                           "(classification or regression)", decl.span)
                crit = [None]
            elif crit[0] == "classification" and auto:
                self.error("E010", f"autoencoder requires the regression criterion in "
                           f"layer '{decl.name}'", raw["autoencoder"].span)
            params = {"criterion": crit[0], "autoencoder": auto}
        elif kind == "C":
            params = need("nk", "kr", "kc")
            params["rpad"] = opt("rpad", 0)
            params["cpad"] = opt("cpad", 0)
            params["stride"] = opt("stride", 1, 1)
        elif kind == "MP":
            params = need("sizer", "sizec")
        return ResolvedLayer(index, net, decl.name, kind, params, default_hyper(kind),
                             span=decl.span)

    # -- main entry ----------------------------------------------------------

    def run(self):
        consts = self.check_constants()
        data = self.check_data()

        nets = {}
        for nd in self.exp.blocks(ast.NetworkDef):
            if nd.name in nets:
                self.error("E003", f"network '{nd.name}' defined twice", nd.span)
                continue
            if nd.name in data:
                self.error("E003", f"'{nd.name}' names both a data set and a network",
                           nd.span)
            nets[nd.name] = nd

        layers = []
        by_net = {name: {} for name in nets}
        bindings = {}
        for name, nd in nets.items():
            roles = {}
            for b in nd.netdata:
                if b.role in roles:
                    self.error("E005", f"network '{name}' binds '{b.role}' twice", b.span)
                    continue
                if b.data not in data:
                    self.error("E001", f"undefined data '{b.data}'", b.span)
                roles[b.role] = b.data
            bindings[name] = roles
            for st in nd.statements:
                if isinstance(st, ast.LayerDecl):
                    if st.name in by_net[name]:
                        self.error("E003", f"layer '{st.name}' defined twice in network "
                                   f"'{name}'", st.span)
                        continue
                    layer = self.resolve_layer(name, st, len(layers))
                    layers.append(layer)
                    by_net[name][st.name] = layer

        edges = self.resolve_edges(nets, by_net)
        acyclic = self.check_topology(nets, by_net, layers, edges)
        net_graphs = []
        if acyclic:
            self.infer_all_shapes(layers, by_net, bindings, data)
        for name, nd in nets.items():
            own = list(by_net[name].values())
            closure = ancestors_closure([l.index for l in own], lambda i: layers[i].parents)
            order = topo_sort(closure, lambda i: layers[i].parents, layers) if acyclic else []
            closure_edges = [(p, l) for l in sorted(closure) for p in layers[l].parents]
            roles = bindings[name]
            net_graphs.append(NetworkGraph(
                name, roles.get("tr"), roles.get("va"), roles.get("ts"), own,
                closure_edges, order or [],
                [l.index for l in own if l.kind == "FO"], nd.span))
            if acyclic:
                self.check_bindings(net_graphs[-1], layers, data)

        plan = self.check_scripts(data, nets, by_net, net_graphs, layers)
        if self.errors:
            raise SemanticError(self.errors)
        return Analysis(consts, list(data.values()), layers, net_graphs, plan,
                        sorted(self.warnings, key=Diagnostic.sort_key))

    # -- edges and topology ----------------------------------------------------

    def lookup_layer(self, ref, current, by_net):
        if ref.net is not None:
            if ref.net not in by_net:
                self.error("E002", f"undefined network '{ref.net}'", ref.span)
                return None
            layer = by_net[ref.net].get(ref.layer)
            if layer is None:
                self.error("E002", f"network '{ref.net}' has no layer '{ref.layer}'",
                           ref.span)
            return layer
        if ref.layer in by_net.get(current, {}):
            return by_net[current][ref.layer]
        found = [ls[ref.layer] for ls in by_net.values() if ref.layer in ls]
        if not found:
            self.error("E002", f"undefined layer '{ref.layer}'", ref.span)
            return None
        if len(found) > 1:
            owners = ", ".join(l.net for l in found)
            self.error("E002", f"layer name '{ref.layer}' is ambiguous (networks "
                       f"{owners}); qualify it as net.layer", ref.span)
            return None
        return found[0]

    def resolve_edges(self, nets, by_net):
        edges = []
        seen = set()
        for name, nd in nets.items():
            for st in nd.statements:
                if not isinstance(st, ast.EdgeDecl):
                    continue
                src = self.lookup_layer(st.src, name, by_net)
                dst = self.lookup_layer(st.dst, name, by_net)
                if src is None or dst is None:
                    continue
                if (src.index, dst.index) in seen:
                    self.error("E006", f"edge {src.qualname} -> {dst.qualname} declared twice",
                               st.span)
                    continue
                seen.add((src.index, dst.index))
                dst.parents.append(src.index)
                edges.append((src.index, dst.index, st.span))
        return edges

    def check_topology(self, nets, by_net, layers, edges):
        children = {l.index: [] for l in layers}
        edge_span = {}
        for s, d, span in edges:
            children[s].append(d)
            edge_span.setdefault(d, span)
        for l in layers:
            n = len(l.parents)
            where = edge_span.get(l.index, l.span)
            if l.kind in INPUT_KINDS and n:
                self.error("E006", f"input layer '{l.name}' cannot have a parent", where)
            elif (l.kind in ("C", "MP") or l.reshape) and n > 1:
                self.error("E006", f"layer '{l.name}' can only have one parent, has {n}",
                           where)
            elif l.kind == "CA" and n < 2:
                self.error("E006", f"cat layer '{l.name}' needs at least two parents, "
                           f"has {n}", l.span)
            elif l.kind not in INPUT_KINDS and n == 0:
                self.error("E006", f"layer '{l.name}' has no parent (dangling layer)", l.span)
            if l.kind == "FO" and children[l.index]:
                self.error("E006", f"output layer '{l.name}' cannot have children", l.span)
            elif l.kind != "FO" and not children[l.index]:
                self.error("E006", f"layer '{l.name}' does not lead to an output layer "
                           "(dangling layer)", l.span)
        for name, nd in nets.items():
            kinds = {l.kind for l in by_net[name].values()}
            if "FO" not in kinds:
                self.error("E006", f"network '{name}' has no output layer", nd.span)
            if not kinds & set(INPUT_KINDS):
                self.error("E006", f"network '{name}' has no input layer", nd.span)
        if topo_sort([l.index for l in layers], lambda i: layers[i].parents, layers) is None:
            cyc = self._cycle_member(layers)
            self.error("E006", f"cycle through layer '{cyc.qualname}'", cyc.span)
            return False
        return True

    @staticmethod
    def _cycle_member(layers):
        state = {}
        for start in layers:
            if start.index in state:
                continue
            stack = [(start.index, iter(start.parents))]
            state[start.index] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    return layers[nxt]
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(layers[nxt].parents)))
        return None

    # -- shapes ------------------------------------------------------------------

    def infer_all_shapes(self, layers, by_net, bindings, data):
        order = topo_sort([l.index for l in layers], lambda i: layers[i].parents, layers)
        for i in order:
            l = layers[i]
            tr = bindings.get(l.net, {}).get("tr")
            info = data[tr].info if tr in data else None
            if None in l.params.values() and l.kind != "FO":
                continue
            if l.kind == "FO" and l.params["criterion"] is None:
                continue
            if l.kind in ("FI", "CI", "FO") and info is None:
                continue
            parent_shapes = [layers[p].out_shape for p in l.parents]
            if any(s is None for s in parent_shapes):
                continue
            shape, problem = layer_shape(l, parent_shapes, info)
            if problem:
                self.error("E007", problem, l.span)
            l.out_shape = shape

    def check_bindings(self, graph, layers, data):
        tr = data.get(graph.tr)
        if tr is None or tr.info is None:
            return
        own = {l.index for l in graph.layers}
        for i in graph.topo_order:
            l = layers[i]
            if i in own or l.kind not in INPUT_KINDS or l.out_shape is None:
                continue
            if l.kind == "FI" and l.out_shape != (tr.info.d,) or \
                    l.kind == "CI" and l.params["nz"] * l.params["nr"] * l.params["nc"] != tr.info.d:
                self.error("E007", f"shared input layer '{l.qualname}' does not match the "
                           f"dimension {tr.info.d} of '{graph.tr}'", graph.span)
        for role in ("va", "ts"):
            name = getattr(graph, role)
            if name in data:
                self.check_compatible(graph, data[name], tr, graph.span)

    def check_compatible(self, graph, ref, tr, span):
        if ref.info is None or tr.info is None:
            return
        a, b = ref.info, tr.info
        if a.d != b.d or a.k != b.k or (a.k == 0 and a.t != b.t):
            self.error("E007", f"data '{ref.name}' ({a.d} features, {a.k} classes, "
                       f"{a.t} targets) is not compatible with training data "
                       f"'{tr.name}' of network '{graph.name}'", span)

    # -- scripts -------------------------------------------------------------------

    def check_scripts(self, data, nets, by_net, graphs, layers):
        plan = []
        graph_of = {g.name: g for g in graphs}

        def need_net(name, span):
            if name in nets:
                return True
            if name in data:
                self.error("E009", f"'{name}' is a data set, not a network", span)
            else:
                self.error("E002", f"undefined network '{name}'", span)
            return False

        def need_data(name, span):
            if name in data:
                return True
            if name in nets:
                self.error("E009", f"'{name}' is a network, not a data set", span)
            else:
                self.error("E001", f"undefined data '{name}'", span)
            return False

        def test_data(net, name, span):
            if name is None:
                name = graph_of[net].ts
                if name is None:
                    self.error("E001", f"network '{net}' has no test data bound", span)
                    return None
            elif need_data(name, span):
                tr = data.get(graph_of[net].tr)
                if tr is not None:
                    self.check_compatible(graph_of[net], data[name], tr, span)
            else:
                return None
            return name

        for block in self.exp.blocks(ast.ScriptBlock):
            for a in block.actions:
                sp = a.span
                if isinstance(a, ast.Amendment):
                    step = self.check_amendment(a, data, nets, by_net)
                    if step:
                        plan.append(step)
                elif isinstance(a, ast.PrintKernels):
                    if need_net(a.net, sp):
                        layer = by_net[a.net].get(a.layer)
                        if layer is None:
                            self.error("E002", f"network '{a.net}' has no layer '{a.layer}'", sp)
                        elif not layer.has_weights:
                            self.error("E009", f"layer '{a.layer}' has no kernels to print", sp)
                        else:
                            plan.append(Step("PRINTK", {"net": a.net, "layer": layer.index,
                                                        "file": a.file}, sp))
                elif isinstance(a, ast.JointTrain):
                    epochs = self.as_int(a.epochs, "epochs", sp)
                    batches = self.as_int(a.batches, "batches", sp)
                    ok = all([need_net(n, sp) for n in a.nets])
                    if len(set(a.nets)) != len(a.nets):
                        self.error("E005", "a network is listed twice in train(...)", sp)
                        ok = False
                    if ok and None not in (epochs, batches):
                        plan.append(Step("JTRAIN", {"nets": list(a.nets), "epochs": epochs,
                                                    "batches": batches}, sp))
                elif isinstance(a, ast.Train):
                    epochs = self.as_int(a.epochs, "epochs", sp)
                    if need_net(a.net, sp) and epochs is not None:
                        plan.append(Step("TRAIN", {"net": a.net, "epochs": epochs}, sp))
                elif isinstance(a, ast.Test):
                    if need_net(a.net, sp):
                        name = test_data(a.net, a.data, sp)
                        if name:
                            plan.append(Step("TEST", {"net": a.net, "data": name}, sp))
                elif isinstance(a, (ast.Load, ast.Save)):
                    if need_net(a.net, sp):
                        op = "LOAD" if isinstance(a, ast.Load) else "SAVE"
                        plan.append(Step(op, {"net": a.net, "file": a.file}, sp))
                elif isinstance(a, ast.TestOut):
                    if need_net(a.net, sp):
                        name = test_data(a.net, None, sp)
                        if name:
                            plan.append(Step("TESTOUT", {"net": a.net, "data": name,
                                                         "file": a.file}, sp))
                elif isinstance(a, (ast.Zscore, ast.Center)):
                    op = "ZSCORE" if isinstance(a, ast.Zscore) else "CENTER"
                    ok = need_data(a.data, sp)
                    if a.ref is not None:
                        ok = need_data(a.ref, sp) and ok
                        if ok and data[a.ref].info and data[a.data].info and \
                                data[a.ref].info.d != data[a.data].info.d:
                            self.error("E007", f"'{a.ref}' and '{a.data}' differ in dimension",
                                       sp)
                    if ok:
                        plan.append(Step(op, {"data": a.data, "ref": a.ref}, sp))
                elif isinstance(a, ast.Yuv):
                    if need_data(a.data, sp):
                        info = data[a.data].info
                        if info is not None and info.d % 3:
                            self.error("E007", f"yuv needs 3-channel data; '{a.data}' has "
                                       f"dimension {info.d}", sp)
                        plan.append(Step("YUV", {"data": a.data}, sp))
                elif isinstance(a, ast.Div):
                    if a.value == 0:
                        self.error("E008", "division by zero", sp)
                    elif need_data(a.data, sp):
                        plan.append(Step("DIV", {"data": a.data, "value": float(a.value)}, sp))
        return plan

    def check_amendment(self, a, data, nets, by_net):
        param, sp = a.param, a.span
        if param in INT_PARAMS:
            value = self.as_int(a.value, param, sp)
            if value is not None and value not in INT_DOMAINS[param]:
                allowed = ", ".join(map(str, sorted(INT_DOMAINS[param])))
                self.error("E008", f"{param} must be one of {allowed}, got {value}", sp)
                value = None
        else:
            value = float(a.value)
            if param in REAL_BOUNDS:
                lo, hi, closed = REAL_BOUNDS[param]
                if not (lo <= value <= hi if closed else lo <= value < hi):
                    br = "]" if closed else ")"
                    self.error("E008", f"{param} must lie in [{lo:g}, {hi:g}{br}, got {value:g}",
                               sp)
                    value = None

        if a.layer is None and a.net in data:
            if param != "balance":
                self.error("E009", f"'{param}' cannot be set on data '{a.net}' "
                           "(only balance)", sp)
            elif value is not None:
                return Step("BALANCE", {"data": a.net, "value": value}, sp)
            return None
        if a.net not in nets:
            self.error("E002", f"undefined network or data '{a.net}'", sp)
            return None
        if param == "balance":
            self.error("E009", "balance applies to data sets only", sp)
            return None
        if a.layer is not None:
            layer = by_net[a.net].get(a.layer)
            if layer is None:
                self.error("E002", f"network '{a.net}' has no layer '{a.layer}'", sp)
                return None
            if layer.amend_kind not in APPLICABLE[param]:
                self.error("E009", f"'{param}' does not apply to {layer.kind} layer "
                           f"'{layer.name}'", sp)
                return None
            targets = [layer.index]
        else:
            targets = [l.index for l in by_net[a.net].values()
                       if l.amend_kind in APPLICABLE[param]]
            if not targets:
                self.error("E009", f"no layer of network '{a.net}' accepts '{param}'", sp)
                return None
        if value is None:
            return None
        return Step("SET", {"param": param, "value": value, "layers": targets}, sp)


def analyze(exp, data_info=None, base_dir=None):
    """Check ``exp`` and return an :class:`Analysis`.

    ``data_info(path, fmt)`` supplies dataset dimensions (defaults to reading
    the file); relative paths are joined to ``base_dir`` first.  Raises
    SemanticError carrying every diagnostic found.
    """
    return Analyzer(exp, data_info, base_dir).run()


def infer_shapes(graph, layers, tr_info):
    """Recompute output shapes for the layers of one network in topo order."""
    shapes = {}
    for i in graph.topo_order:
        l = layers[i]
        shape, problem = layer_shape(l, [shapes[p] for p in l.parents], tr_info)
        if problem:
            raise SemanticError([Diagnostic("E007", problem, l.span)])
        shapes[i] = shape
    return shapes


def apply_amendment(step, layers, data=None):
    """Apply a SET or BALANCE step to resolved layers (or data flags)."""
    if step.op == "BALANCE":
        if data is not None:
            data[step.args["data"]].balance = bool(step.args["value"])
        return
    for i in step.args["layers"]:
        layers[i].hyper.set(step.args["param"], step.args["value"])
