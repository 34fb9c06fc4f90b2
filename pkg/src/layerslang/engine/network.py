"""Forward/backward evaluation of one network and the SGD update."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..diagnostics import EngineError
from . import ops


class Graph:
    def __init__(self, spec, layers):
        """``spec`` is an IRNetwork, ``layers`` maps global index to Layer."""
        self.name = spec.name
        self.spec = spec
        self.order = list(spec.order)
        self.layers = layers
        self.outputs = list(spec.outputs)
        self.inputs = [i for i in self.order if layers[i].kind in ("FI", "CI")]

    @property
    def members(self):
        return [self.layers[i] for i in self.order]

    def trainable(self):
        return [l for l in self.members if l.params]

    def output_spec(self, i):
        p = self.layers[i].spec.params
        return p["criterion"], bool(p["autoencoder"])

    # -- passes --------------------------------------------------------------

    def forward(self, x, train=False, noise=None):
        acts, caches = {}, {}
        for i in self.order:
            layer = self.layers[i]
            if i in self.inputs:
                ins = [x]
            else:
                ins = [acts[p] for p in layer.spec.parents]
            acts[i], caches[i] = layer.forward(ins, train, noise.get(i) if noise else None)
        return acts, caches

    def costs(self, acts, x, labels, targets, n_total=None):
        """Per-output (cost, gradient) pairs, lambda-scaled."""
        out = {}
        for i in self.outputs:
            crit, auto = self.output_spec(i)
            scale = self.layers[i].hyper["lambda"]
            y = acts[i]
            if crit == "classification":
                out[i] = ops.cross_entropy(y, labels, scale, n_total)
            else:
                out[i] = ops.squared_error(y, x if auto else targets, scale, n_total)
        return out

    def backward(self, caches, douts):
        grads = {}
        pending = dict(douts)
        for i in reversed(self.order):
            if i not in pending:
                continue
            layer = self.layers[i]
            dins, g = layer.backward(pending.pop(i), caches[i])
            if g:
                grads[i] = g
            for p, d in zip(layer.spec.parents, dins):
                pending[p] = pending[p] + d if p in pending else d
        return grads

    def loss_and_grads(self, x, labels, targets, n_total=None, noise=None):
        acts, caches = self.forward(x, train=True, noise=noise)
        costs = self.costs(acts, x, labels, targets, n_total)
        cost = sum(c for c, _ in costs.values())
        grads = self.backward(caches, {i: g for i, (_, g) in costs.items()})
        return cost, grads

    def outputs_of(self, x):
        """Evaluation-mode outputs: softmax probabilities or linear values."""
        acts, _ = self.forward(x, train=False)
        res = []
        for i in self.outputs:
            crit, _ = self.output_spec(i)
            res.append(ops.softmax(acts[i]) if crit == "classification" else acts[i])
        return acts, res

    def evaluate(self, ds, chunk=256):
        """Mean cost and error over a whole dataset in evaluation mode.

        The error is the misclassification rate of the first classification
        output, or the mean squared error of the first output otherwise.
        """
        n = ds.n
        total = 0.0
        wrong = 0
        sq = 0.0
        cls = next((i for i in self.outputs
                    if self.output_spec(i)[0] == "classification"), None)
        first = self.outputs[0]
        for lo in range(0, n, chunk):
            sl = slice(lo, lo + chunk)
            x = ds.x[sl]
            labels = None if ds.labels is None else ds.labels[sl]
            targets = None if ds.targets is None else ds.targets[sl]
            acts, _ = self.forward(x, train=False)
            costs = self.costs(acts, x, labels, targets, n_total=n)
            total += sum(c for c, _ in costs.values())
            if cls is not None:
                wrong += int((acts[cls].argmax(axis=1) != labels).sum())
            else:
                t = x if self.output_spec(first)[1] else targets
                sq += float(((acts[first] - t) ** 2).sum())
        err = wrong / n if cls is not None else sq / n
        return total, err

    # -- training step ---------------------------------------------------------

    def sample_noise(self, rngs, n):
        noise = {}
        for i in self.order:
            s = self.layers[i].sample_noise(rngs[i], n)
            if s:
                noise[i] = s
        return noise

    def step(self, x, labels, targets, noise, threads=1, pool=None):
        """Compute batch gradients (sharded over ``threads``) and update."""
        n = x.shape[0]
        shards = 1 if any(l.bn_active for l in self.members) else min(threads, n)
        if shards <= 1:
            cost, grads = self.loss_and_grads(x, labels, targets, None, noise)
        else:
            parts = np.array_split(np.arange(n), shards)

            def work(idx):
                sl = slice(idx[0], idx[-1] + 1)
                nz = {i: {k: v[sl] for k, v in d.items()} for i, d in noise.items()}
                return self.loss_and_grads(
                    x[sl], None if labels is None else labels[sl],
                    None if targets is None else targets[sl], n, nz)

            if pool is None:
                with ThreadPoolExecutor(shards) as ex:
                    results = list(ex.map(work, parts))
            else:
                results = list(pool.map(work, parts))
            cost = 0.0
            grads = {}
            for c, g in results:
                cost += c
                for i, gl in g.items():
                    acc = grads.setdefault(i, {})
                    for k, v in gl.items():
                        acc[k] = acc[k] + v if k in acc else v
        self.update(grads)
        return cost

    def update(self, grads):
        for i, g in grads.items():
            update_layer(self.layers[i], g)


def update_layer(layer, grads):
    """Momentum SGD with weight decay, l1 and max-norm on the weights."""
    h = layer.hyper
    mu, mmu, l2, l1 = h["mu"], h["mmu"], h["l2"], h["l1"]
    for name, g in grads.items():
        w = layer.params[name]
        if name in layer.weight_names:
            if l2:
                g = g + l2 * w
            if l1:
                g = g + l1 * np.sign(w)
        delta = mmu * layer.momentum[name] - mu * g
        layer.momentum[name] = delta
        layer.params[name] = w + delta
    maxn = h.get("maxn", 0.0)
    if maxn > 0:
        apply_maxnorm(layer, maxn)
    for name, w in layer.params.items():
        if not np.all(np.isfinite(w)):
            raise EngineError(f"non-finite values in parameter {name} of layer {layer.name}")


def apply_maxnorm(layer, maxn):
    rows = layer.weight_rows()
    norms = np.sqrt((rows * rows).sum(axis=1))
    scale = np.where(norms > maxn, maxn / np.maximum(norms, 1e-300), 1.0)
    if layer.spec.kind == "C":
        layer.params["K"] = layer.params["K"] * scale[:, None, None, None]
    else:
        for w in layer.weight_names:
            layer.params[w] = layer.params[w] * scale[None, :]
