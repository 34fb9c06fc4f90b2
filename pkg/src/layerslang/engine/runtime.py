"""Interpreter for IR programs."""

import os
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import dataio
from ..diagnostics import DataError, EngineError
from . import model_io
from .layers import build_layer
from .network import Graph

DEFAULT_SEED = 42
_STREAM_TAGS = {"init": 1, "noise": 2, "shuffle": 3}


def rng_for(seed, tag, name):
    """Independent generator keyed by seed, purpose and object name."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, _STREAM_TAGS[tag], key]))


def resolve_log_path(constants, flag=None, env=None):
    """Log file precedence: command-line flag, explicit constant, LAYERS_LOG, default.

    Paths from the flag or the environment are made absolute (they are
    relative to the working directory); the others stay relative to the
    program's directory.
    """
    if flag:
        return os.path.abspath(flag)
    if constants.log_explicit:
        return constants.log
    env = os.environ.get("LAYERS_LOG") if env is None else env
    return os.path.abspath(env) if env else constants.log


def balanced_indices(ds, rng):
    """Oversample minority classes (with replacement) up to the majority count."""
    if ds.labels is None:
        return np.arange(ds.n)
    counts = np.bincount(ds.labels, minlength=ds.k)
    top = counts.max()
    parts = [np.arange(ds.n)]
    for c in range(ds.k):
        if 0 < counts[c] < top:
            members = np.flatnonzero(ds.labels == c)
            parts.append(rng.choice(members, top - counts[c], replace=True))
    return np.concatenate(parts)


class BatchStream:
    def __init__(self, ds, rng):
        self.ds = ds
        self.rng = rng
        self.perm = None
        self.pos = 0

    @property
    def exhausted(self):
        return self.perm is None or self.pos >= len(self.perm)

    def new_pass(self):
        idx = balanced_indices(self.ds, self.rng) if self.ds.balance else np.arange(self.ds.n)
        self.perm = self.rng.permutation(idx)
        self.pos = 0

    def take(self, size):
        out = self.perm[self.pos:self.pos + size]
        self.pos += size
        return out


def _fmt(v):
    return f"{v:.9g}"


class Engine:
    """Owns all mutable state of one program run."""

    def __init__(self, prog, base_dir=".", seed=DEFAULT_SEED, threads=None,
                 log_path=None, stdout=None, datasets=None):
        self.prog = prog
        self.base_dir = Path(base_dir)
        self.seed = seed
        self.threads = max(1, threads or prog.constants.threads)
        self.batch = prog.constants.batch
        self.log_path = self.path(log_path or prog.constants.log)
        self.out = stdout or sys.stdout
        self._log_file = None
        self._pool = None

        self.datasets = datasets if datasets is not None else self._load_data()
        self.layers = {}
        for spec in prog.layers:
            in_shapes = [tuple(prog.layers[p].shape) for p in spec.parents]
            layer = build_layer(spec, in_shapes)
            layer.init_params(rng_for(seed, "init", layer.name))
            self.layers[spec.index] = layer
        self.noise_rngs = {i: rng_for(seed, "noise", l.name) for i, l in self.layers.items()}
        self.graphs = {n.name: Graph(n, self.layers) for n in prog.networks}
        self.streams = {}

    # -- plumbing ----------------------------------------------------------------

    def path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def _load_data(self):
        out = {}
        for d in self.prog.data:
            try:
                ds = dataio.load(self.path(d.file), d.format)
            except DataError as exc:
                raise EngineError(str(exc)) from None
            got = ds.info
            if (got.d, got.k, got.t) != (d.d, d.k, d.t):
                raise EngineError(f"data '{d.name}' changed since compilation: expected "
                                  f"d={d.d} k={d.k} t={d.t}, found d={got.d} k={got.k} t={got.t}")
            out[d.name] = ds
        return out

    def log(self, line):
        if self._log_file is None:
            self._log_file = open(self.log_path, "a")
        self._log_file.write(line + "\n")

    def close(self):
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def pool(self):
        if self._pool is None and self.threads > 1:
            self._pool = ThreadPoolExecutor(self.threads)
        return self._pool

    def stream(self, net):
        if net not in self.streams:
            ds = self.datasets[self.graphs[net].spec.tr]
            self.streams[net] = BatchStream(ds, rng_for(self.seed, "shuffle", net))
        return self.streams[net]

    # -- execution ---------------------------------------------------------------

    def run(self):
        try:
            self.log(f"# layers run seed {self.seed} threads {self.threads} batch {self.batch}")
            for action in self.prog.actions:
                self.execute(action)
        finally:
            self.close()

    def execute(self, action):
        a = action.args
        op = action.op
        if op == "SET":
            for i in a["layers"]:
                self.layers[i].hyper[a["param"]] = a["value"]
        elif op == "BALANCE":
            self.datasets[a["data"]].balance = bool(a["value"])
        elif op == "ZSCORE":
            ref = self.datasets[a["ref"]] if a["ref"] else None
            dataio.zscore(self.datasets[a["data"]], ref)
        elif op == "CENTER":
            ref = self.datasets[a["ref"]] if a["ref"] else None
            dataio.center(self.datasets[a["data"]], ref)
        elif op == "YUV":
            self._data_op(dataio.yuv, self.datasets[a["data"]])
        elif op == "DIV":
            self._data_op(dataio.div, self.datasets[a["data"]], a["value"])
        elif op == "TRAIN":
            self.train(a["net"], a["epochs"])
        elif op == "JTRAIN":
            self.joint_train(a["nets"], a["epochs"], a["batches"])
        elif op == "TEST":
            self.test(a["net"], a["data"])
        elif op == "TESTOUT":
            self.testout(a["net"], a["file"], a["data"])
        elif op == "SAVE":
            self.save(a["net"], a["file"])
        elif op == "LOAD":
            self.load(a["net"], a["file"])
        elif op == "PRINTK":
            self.printkernels(a["layer"], a["file"])
        else:
            raise EngineError(f"unknown opcode {op}")

    @staticmethod
    def _data_op(fn, *args):
        try:
            fn(*args)
        except DataError as exc:
            raise EngineError(str(exc)) from None

    # -- training ------------------------------------------------------------------

    def _step(self, graph, ds, idx):
        noise = graph.sample_noise(self.noise_rngs, len(idx))
        x = ds.x[idx]
        labels = None if ds.labels is None else ds.labels[idx]
        targets = None if ds.targets is None else ds.targets[idx]
        return graph.step(x, labels, targets, noise, self.threads, self.pool)

    def log_epoch(self, epoch, graph):
        for split in ("tr", "va", "ts"):
            name = getattr(graph.spec, split)
            if name is None:
                continue
            cost, err = graph.evaluate(self.datasets[name])
            self.log(f"epoch {epoch} net {graph.name} split {split} "
                     f"cost {_fmt(cost)} err {_fmt(err)}")

    def train(self, net, epochs):
        graph = self.graphs[net]
        ds = self.datasets[graph.spec.tr]
        stream = self.stream(net)
        self.log(f"train net {net} epochs {epochs}")
        for epoch in range(1, epochs + 1):
            stream.new_pass()
            while not stream.exhausted:
                self._step(graph, ds, stream.take(self.batch))
            self.log_epoch(epoch, graph)

    def joint_train(self, nets, epochs, batches):
        """``epochs`` rounds; each round gives every network ``batches`` mini-batches."""
        self.log(f"jtrain nets {','.join(nets)} epochs {epochs} batches {batches}")
        for rnd in range(1, epochs + 1):
            for net in nets:
                graph = self.graphs[net]
                ds = self.datasets[graph.spec.tr]
                stream = self.stream(net)
                for _ in range(batches):
                    if stream.exhausted:
                        stream.new_pass()
                    self._step(graph, ds, stream.take(self.batch))
            for net in nets:
                self.log_epoch(rnd, self.graphs[net])

    # -- evaluation and artifacts --------------------------------------------------

    def test(self, net, data):
        cost, err = self.graphs[net].evaluate(self.datasets[data])
        line = f"test net {net} data {data} cost {_fmt(cost)} err {_fmt(err)}"
        self.log(line)
        print(line, file=self.out)
        return cost, err

    def outputs(self, net, data):
        graph = self.graphs[net]
        ds = self.datasets[data]
        rows = []
        for lo in range(0, ds.n, 256):
            _, outs = graph.outputs_of(ds.x[lo:lo + 256])
            rows.append(np.concatenate(outs, axis=1))
        return np.concatenate(rows, axis=0)

    def testout(self, net, file, data=None):
        data = data or self.graphs[net].spec.ts
        if data is None:
            raise EngineError(f"network '{net}' has no test data")
        out = self.outputs(net, data)
        lines = [" ".join(_fmt(v) for v in row) for row in out]
        self.path(file).write_text("\n".join(lines) + "\n")

    def model_state(self, net):
        return [(l.name, l.state()) for l in self.graphs[net].members]

    def save(self, net, file):
        self.path(file).write_bytes(model_io.dump(self.model_state(net)))

    def load(self, net, file):
        try:
            entries = model_io.parse(self.path(file).read_bytes())
        except OSError as exc:
            raise EngineError(f"cannot read model {file}: {exc.strerror}") from None
        stored = dict(entries)
        members = self.graphs[net].members
        expected = {l.name for l in members}
        if set(stored) != expected:
            missing = sorted(expected - set(stored))
            extra = sorted(set(stored) - expected)
            raise EngineError(f"model {file} does not match network '{net}' "
                              f"(missing {missing}, unexpected {extra})")
        for layer in members:
            tensors = dict(stored[layer.name])
            current = dict(layer.state())
            if tensors.keys() != current.keys() or any(
                    tensors[k].shape != current[k].shape for k in current):
                raise EngineError(f"model {file}: tensors of layer {layer.name} do not match")
            layer.set_state({k: v.copy() for k, v in tensors.items()})

    def printkernels(self, index, file):
        rows = self.layers[index].weight_rows()
        lines = [" ".join(_fmt(v) for v in row) for row in rows]
        self.path(file).write_text("\n".join(lines) + "\n")


def run_program(prog, base_dir=".", **kw):
    with Engine(prog, base_dir, **kw) as engine:
        engine.run()
    return engine
