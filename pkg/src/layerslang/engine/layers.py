"""Runtime layers.

A layer owns its parameters, momentum buffers and batch-norm statistics.
``forward`` returns the output together with a cache, and ``backward``
consumes that cache, so one layer can serve several batch shards at once.
Random draws for a training batch are made up front by ``sample_noise`` for
the whole batch; shards receive slices of them.
"""

import numpy as np

from . import ops


class Layer:
    kind = None
    weight_names = ()

    def __init__(self, spec, in_shapes):
        self.spec = spec
        self.index = spec.index
        self.name = spec.qualname
        self.in_shapes = in_shapes
        self.out_shape = tuple(spec.shape)
        self.hyper = dict(spec.hyper)
        self.params = {}
        self.momentum = {}
        self.buffers = {}

    def init_params(self, rng):
        pass

    def _finish_init(self):
        self.momentum = {k: np.zeros_like(v) for k, v in self.params.items()}

    def state(self):
        """Named tensors making up the persistent state, in a fixed order."""
        out = list(self.params.items())
        out += [("m." + k, v) for k, v in self.momentum.items()]
        out += list(self.buffers.items())
        return out

    def set_state(self, tensors):
        for k, v in tensors.items():
            if k.startswith("m."):
                self.momentum[k[2:]] = v
            elif k in self.params:
                self.params[k] = v
            else:
                self.buffers[k] = v

    def sample_noise(self, rng, n):
        return None

    def forward(self, inputs, train, noise=None):
        raise NotImplementedError

    def backward(self, dout, cache):
        raise NotImplementedError

    @property
    def bn_active(self):
        return False


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _post_activation_noise(hyper, rng, shape, noise):
    if hyper.get("noiser", 0) > 0:
        noise["rmask"] = rng.random(shape) < hyper["noiser"]
        noise["rval"] = rng.uniform(-1.0, 1.0, shape)
    if hyper.get("noisesd", 0) > 0:
        noise["gauss"] = rng.normal(0.0, hyper["noisesd"], shape)


def _apply_noise(a, noise):
    if "rmask" in noise:
        a = a + noise["rmask"] * noise["rval"]
    if "gauss" in noise:
        a = a + noise["gauss"]
    return a


def _apply_input_noise(x, noise):
    if "bmask" in noise:
        x = np.where(noise["bmask"], noise["bval"], x)
    return _apply_noise(x, noise)


class InputFC(Layer):
    kind = "FI"

    def sample_noise(self, rng, n):
        noise = {}
        shape = (n,) + self.out_shape
        if self.hyper["noiseb"] > 0:
            noise["bmask"] = rng.random(shape) < self.hyper["noiseb"]
            noise["bval"] = (rng.random(shape) < 0.5).astype(np.float64)
        _post_activation_noise(self.hyper, rng, shape, noise)
        return noise or None

    def forward(self, inputs, train, noise=None):
        x = inputs[0]
        if train and noise:
            x = _apply_input_noise(x, noise)
        return x, None

    def backward(self, dout, cache):
        return [], {}


class InputConv(Layer):
    """Maps a flat data row onto an (nz, nr, nc) image, cropped to (cr, cc).

    Training with shift=1 takes a random crop per sample, otherwise the
    centered crop; flip=1 mirrors each sample left-right with probability
    one half.  Contrast and brightness jitter are per sample.
    """
    kind = "CI"

    def __init__(self, spec, in_shapes):
        super().__init__(spec, in_shapes)
        p = spec.params
        self.full = (p["nz"], p["nr"], p["nc"])
        self.crop = (p["cr"], p["cc"])

    def sample_noise(self, rng, n):
        h = self.hyper
        noise = {}
        nz, nr, nc = self.full
        cr, cc = self.crop
        if h["shift"] and (cr < nr or cc < nc):
            noise["dr"] = rng.integers(0, nr - cr + 1, n)
            noise["dc"] = rng.integers(0, nc - cc + 1, n)
        if h["flip"]:
            noise["flip"] = rng.random(n) < 0.5
        if h["contrast"] > 0:
            noise["contrast"] = rng.uniform(-h["contrast"], h["contrast"], n)
        if h["brightness"] > 0:
            noise["brightness"] = rng.uniform(-h["brightness"], h["brightness"], n)
        shape = (n,) + self.out_shape
        if h["noiseb"] > 0:
            noise["bmask"] = rng.random(shape) < h["noiseb"]
            noise["bval"] = (rng.random(shape) < 0.5).astype(np.float64)
        _post_activation_noise(h, rng, shape, noise)
        return noise or None

    def forward(self, inputs, train, noise=None):
        x = inputs[0]
        n = x.shape[0]
        nz, nr, nc = self.full
        cr, cc = self.crop
        maps = x.reshape(n, nz, nr, nc)
        noise = noise if train and noise else {}
        if "dr" in noise:
            rows = noise["dr"][:, None] + np.arange(cr)[None, :]
            cols = noise["dc"][:, None] + np.arange(cc)[None, :]
            idx = np.arange(n)[:, None, None, None]
            maps = maps[idx, np.arange(nz)[None, :, None, None],
                        rows[:, None, :, None], cols[:, None, None, :]]
        elif (cr, cc) != (nr, nc):
            r0, c0 = (nr - cr) // 2, (nc - cc) // 2
            maps = maps[:, :, r0:r0 + cr, c0:c0 + cc]
        if "flip" in noise:
            maps = np.where(noise["flip"][:, None, None, None], maps[..., ::-1], maps)
        if "contrast" in noise:
            mean = maps.mean(axis=(1, 2, 3), keepdims=True)
            maps = mean + (maps - mean) * (1.0 + noise["contrast"][:, None, None, None])
        if "brightness" in noise:
            span = maps.max(axis=(1, 2, 3)) - maps.min(axis=(1, 2, 3))
            maps = maps + (noise["brightness"] * span)[:, None, None, None]
        maps = _apply_input_noise(np.ascontiguousarray(maps), noise)
        return maps, None

    def backward(self, dout, cache):
        return [], {}


class _Trainable(Layer):
    """Shared pieces of F, FO and C: optional batch norm, activation,
    dropout and post-activation noise."""

    bn_axes = (0,)
    hidden = True

    @property
    def bn_active(self):
        return self.hidden and self.hyper.get("bn", 0) == 1

    def _act_code(self):
        return self.hyper["act"] if self.hidden else ops.LINEAR

    def sample_noise(self, rng, n):
        if not self.hidden:
            return None
        noise = {}
        shape = (n,) + self.out_shape
        if self.hyper["drop"] > 0:
            noise["keep"] = rng.random(shape) >= self.hyper["drop"]
        _post_activation_noise(self.hyper, rng, shape, noise)
        return noise or None

    def _finish(self, z, train, noise):
        cache = {}
        if self.bn_active:
            g, b = self.params["gamma"], self.params["beta"]
            if train:
                z, cache["bn"], mean, var = ops.batchnorm_forward(z, g, b, self.bn_axes)
                m = ops.BN_MOMENTUM
                self.buffers["running_mean"] = m * self.buffers["running_mean"] + (1 - m) * mean
                self.buffers["running_var"] = m * self.buffers["running_var"] + (1 - m) * var
            else:
                z = ops.batchnorm_eval(z, g, b, self.buffers["running_mean"],
                                       self.buffers["running_var"], self.bn_axes)
        act = self._act_code()
        a = ops.activate(z, act)
        cache["z"], cache["a"], cache["act"] = z, a, act
        if train and noise:
            if "keep" in noise:
                scale = 1.0 / (1.0 - self.hyper["drop"])
                cache["dmask"] = noise["keep"] * scale
                a = a * cache["dmask"]
            a = _apply_noise(a, noise)
        return a, cache

    def _unfinish(self, dout, cache, grads):
        if "dmask" in cache:
            dout = dout * cache["dmask"]
        dz = dout * ops.activation_grad(cache["z"], cache["a"], cache["act"])
        if "bn" in cache:
            dz, grads["gamma"], grads["beta"] = ops.batchnorm_backward(
                dz, self.params["gamma"], cache["bn"])
        else:
            grads["gamma"] = np.zeros_like(self.params["gamma"])
            grads["beta"] = np.zeros_like(self.params["beta"])
        return dz


class Dense(_Trainable):
    """F and FO layers: one weight matrix per parent, summed."""
    kind = "F"

    def __init__(self, spec, in_shapes):
        super().__init__(spec, in_shapes)
        self.hidden = spec.kind == "F"
        self.kind = spec.kind
        self.weight_names = tuple(f"W{i}" for i in range(len(in_shapes)))

    def init_params(self, rng):
        d_out = self.out_shape[0]
        fan_in = sum(s[0] for s in self.in_shapes)
        for name, s in zip(self.weight_names, self.in_shapes):
            self.params[name] = _glorot(rng, (s[0], d_out), fan_in, d_out)
        self.params["b"] = np.zeros(d_out)
        self.params["gamma"] = np.ones(d_out)
        self.params["beta"] = np.zeros(d_out)
        self.buffers = {"running_mean": np.zeros(d_out), "running_var": np.ones(d_out)}
        self._finish_init()

    def weight_rows(self):
        """Incoming weights of every unit, one row per unit."""
        return np.concatenate([self.params[w] for w in self.weight_names], axis=0).T

    def forward(self, inputs, train, noise=None):
        z = sum(x @ self.params[w] for x, w in zip(inputs, self.weight_names))
        if not self.bn_active:
            z = z + self.params["b"]
        a, cache = self._finish(z, train, noise)
        cache["inputs"] = inputs
        return a, cache

    def backward(self, dout, cache):
        grads = {}
        bn = "bn" in cache
        dz = self._unfinish(dout, cache, grads)
        grads["b"] = np.zeros_like(self.params["b"]) if bn else dz.sum(axis=0)
        dins = []
        for x, w in zip(cache["inputs"], self.weight_names):
            grads[w] = x.T @ dz
            dins.append(dz @ self.params[w].T)
        return dins, grads


class Conv(_Trainable):
    kind = "C"
    bn_axes = (0, 2, 3)
    weight_names = ("K",)

    def __init__(self, spec, in_shapes):
        super().__init__(spec, in_shapes)
        p = spec.params
        self.geom = (p["rpad"], p["cpad"], p["stride"])

    def init_params(self, rng):
        p = self.spec.params
        z = self.in_shapes[0][0]
        nk, kr, kc = p["nk"], p["kr"], p["kc"]
        self.params["K"] = _glorot(rng, (nk, z, kr, kc), z * kr * kc, nk * kr * kc)
        self.params["b"] = np.zeros(nk)
        self.params["gamma"] = np.ones(nk)
        self.params["beta"] = np.zeros(nk)
        self.buffers = {"running_mean": np.zeros(nk), "running_var": np.ones(nk)}
        self._finish_init()

    def weight_rows(self):
        K = self.params["K"]
        return K.reshape(K.shape[0], -1)

    def forward(self, inputs, train, noise=None):
        x = inputs[0]
        z = ops.conv2d(x, self.params["K"], *self.geom)
        if not self.bn_active:
            z = z + self.params["b"][None, :, None, None]
        a, cache = self._finish(z, train, noise)
        cache["x"] = x
        return a, cache

    def backward(self, dout, cache):
        grads = {}
        bn = "bn" in cache
        dz = self._unfinish(dout, cache, grads)
        grads["b"] = np.zeros_like(self.params["b"]) if bn else dz.sum(axis=(0, 2, 3))
        dx, grads["K"] = ops.conv2d_backward(dz, cache["x"], self.params["K"], *self.geom)
        return [dx], grads


class MaxPool(Layer):
    kind = "MP"

    def forward(self, inputs, train, noise=None):
        x = inputs[0]
        p = self.spec.params
        y, idx = ops.forward_maxpool(x, p["sizer"], p["sizec"])
        return y, (idx, x.shape)

    def backward(self, dout, cache):
        idx, shape = cache
        return [ops.maxpool_backward(dout, idx, shape)], {}


class Cat(Layer):
    kind = "CA"

    def forward(self, inputs, train, noise=None):
        return ops.forward_cat(inputs), [x.shape[1] for x in inputs]

    def backward(self, dout, cache):
        return ops.cat_backward(dout, cache), {}


class Reshape(Layer):
    kind = "F"

    def forward(self, inputs, train, noise=None):
        x = inputs[0]
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache):
        return [dout.reshape(cache)], {}


def build_layer(spec, in_shapes):
    if spec.kind == "FI":
        return InputFC(spec, in_shapes)
    if spec.kind == "CI":
        return InputConv(spec, in_shapes)
    if spec.kind == "F" and spec.reshape:
        return Reshape(spec, in_shapes)
    if spec.kind in ("F", "FO"):
        return Dense(spec, in_shapes)
    if spec.kind == "C":
        return Conv(spec, in_shapes)
    if spec.kind == "MP":
        return MaxPool(spec, in_shapes)
    if spec.kind == "CA":
        return Cat(spec, in_shapes)
    raise ValueError(f"unknown layer kind {spec.kind}")
