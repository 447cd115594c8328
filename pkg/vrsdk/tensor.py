# Copyright 2017 IBM Corp.
#
#    Licensed under the Apache License, Version 2.0 (the "License"); you may
#    not use this file except in compliance with the License. You may obtain
#    a copy of the License at
#
#         http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#    WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#    License for the specific language governing permissions and limitations
#    under the License.

"""Minimal reverse-mode tensor engine.

Every differentiable operation is a ``Function`` subclass with an explicit
``forward`` over numpy arrays and an explicit ``backward`` returning one
gradient per input. ``Tensor.backward`` replays the recorded forward tape
(the creator graph, topologically ordered) in reverse.

Arrays are float64 internally; persistence narrows to float32.
"""

import contextlib
import itertools
import math
import threading

import numpy as np

from vrsdk import constants as const
from vrsdk import exception


DTYPE = np.float64

_grad_mode = threading.local()


def grad_enabled():
    return getattr(_grad_mode, 'enabled', True)


@contextlib.contextmanager
def no_grad():
    """Run forwards without recording the tape for this thread."""
    previous = grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


def _as_array(data):
    return np.array(data, dtype=DTYPE, copy=True)


class Tensor(object):

    def __init__(self, data, requires_grad=False, creator=None):
        self.data = data if (isinstance(data, np.ndarray) and
                             data.dtype == DTYPE) else _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.creator = creator
        self.grad = None

    def __repr__(self):
        return 'Tensor(shape=%s, requires_grad=%s)' % (self.shape,
                                                       self.requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def _tape(self):
        """Topologically ordered list of tensors this one depends on."""
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.inputs:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return order

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every leaf requiring grad."""
        if not self.requires_grad:
            raise exception.VRInvalidInput(
                msg='backward() on a tensor that does not require grad')
        if grad is None:
            grad = np.ones_like(self.data)
        grads = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in reversed(self._tape()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.creator is None:
                if not np.all(np.isfinite(g)):
                    raise exception.NonFiniteError(op='backward')
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            in_grads = node.creator.backward(g)
            for parent, pg in zip(node.creator.inputs, in_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # operator sugar
    def __add__(self, other):
        return Add.apply(self, ensure_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Sub.apply(self, ensure_tensor(other))

    def __rsub__(self, other):
        return Sub.apply(ensure_tensor(other), self)

    def __mul__(self, other):
        return Mul.apply(self, ensure_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Mul.apply(self, Tensor(-1.0))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return Mul.apply(self, Pow.apply(other, exponent=-1.0))
        return Mul.apply(self, Tensor(1.0 / other))

    __div__ = __truediv__

    def __matmul__(self, other):
        return MatMul.apply(self, other)

    def __getitem__(self, key):
        return Slice.apply(self, key=key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Transpose.apply(self, axes=axes or None)

    def sum(self, axis=None, keepdims=False):
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        n = self.size if axis is None else int(np.prod(
            [self.shape[a] for a in np.atleast_1d(axis)]))
        return Sum.apply(self, axis=axis, keepdims=keepdims) * (1.0 / n)


def ensure_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


class Parameter(object):
    """A named, trainable tensor with its SGD momentum buffer."""

    def __init__(self, name, data, trainable=True):
        self.name = name
        self.tensor = Tensor(data, requires_grad=trainable)
        self.trainable = trainable
        self.momentum_buffer = np.zeros_like(self.tensor.data)

    def __repr__(self):
        return 'Parameter(%s, shape=%s)' % (self.name, self.shape)

    @property
    def shape(self):
        return self.tensor.shape

    @property
    def data(self):
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    def assign(self, values):
        values = np.asarray(values, dtype=DTYPE)
        if values.shape != self.tensor.shape:
            raise exception.DimensionError(
                op='assign', msg='%s expects %s, got %s' % (
                    self.name, self.tensor.shape, values.shape))
        self.tensor.data = values.copy()


class Function(object):
    """Base class of differentiable operations."""

    def __init__(self, *inputs):
        self.inputs = inputs

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError()

    def backward(self, grad):
        raise NotImplementedError()

    @classmethod
    def apply(cls, *inputs, **kwargs):
        func = cls(*inputs)
        out = func.forward(*(t.data for t in inputs), **kwargs)
        if not np.all(np.isfinite(out)):
            raise exception.NonFiniteError(op=cls.__name__)
        requires_grad = grad_enabled() and any(
            t.requires_grad for t in inputs)
        return Tensor(out, requires_grad=requires_grad,
                      creator=func if requires_grad else None)


def unbroadcast(grad, shape):
    """Sum out broadcast dimensions so that grad matches shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), \
            unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), \
            unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return unbroadcast(grad * self.b, self.a.shape), \
            unbroadcast(grad * self.a, self.b.shape)


class Pow(Function):
    def forward(self, a, exponent):
        self.a, self.exponent = a, exponent
        return a ** exponent

    def backward(self, grad):
        return (grad * self.exponent * self.a ** (self.exponent - 1.0),)


class MatMul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        ga = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        gb = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return unbroadcast(ga, self.a.shape), unbroadcast(gb, self.b.shape)


class Sum(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape = a.shape
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(np.sum(a, axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            axes = [a % len(self.shape) for a in np.atleast_1d(self.axis)]
            grad = np.expand_dims(grad, tuple(sorted(axes)))
        return (np.broadcast_to(grad, self.shape).copy(),)


class Reshape(Function):
    def forward(self, a, shape):
        self.shape = a.shape
        return a.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, a, axes=None):
        self.axes = axes if axes is not None else tuple(
            reversed(range(a.ndim)))
        return np.transpose(a, self.axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


class Slice(Function):
    def forward(self, a, key):
        self.shape = a.shape
        self.key = key
        return np.array(a[key], dtype=DTYPE)

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=DTYPE)
        key = self.key if isinstance(self.key, tuple) else (self.key,)
        if any(isinstance(k, (list, np.ndarray)) for k in key):
            np.add.at(out, self.key, grad)
        else:
            out[self.key] = grad
        return (out,)


class Concat(Function):
    def forward(self, *arrays, **kwargs):
        self.axis = kwargs.get('axis', -1)
        self.sizes = [a.shape[self.axis] for a in arrays]
        return np.concatenate(arrays, axis=self.axis)

    def backward(self, grad):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


class Stack(Function):
    def forward(self, *arrays, **kwargs):
        self.axis = kwargs.get('axis', 0)
        return np.stack(arrays, axis=self.axis)

    def backward(self, grad):
        n = grad.shape[self.axis]
        return tuple(np.take(grad, i, axis=self.axis) for i in range(n))


def concat(tensors, axis=-1):
    return Concat.apply(*tensors, axis=axis)


def stack(tensors, axis=0):
    return Stack.apply(*tensors, axis=axis)


def unstack(tensor, axis=0):
    index = [slice(None)] * tensor.ndim
    parts = []
    for i in range(tensor.shape[axis]):
        index[axis] = i
        parts.append(tensor[tuple(index)])
    return parts


class LeakyReLU(Function):
    def forward(self, a, slope):
        self.positive = a > 0
        self.slope = slope
        return np.where(self.positive, a, slope * a)

    def backward(self, grad):
        # subgradient at exactly zero is the negative-side slope
        return (np.where(self.positive, grad, self.slope * grad),)


class Sigmoid(Function):
    def forward(self, a):
        self.out = 0.5 * (1.0 + np.tanh(0.5 * a))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Tanh(Function):
    def forward(self, a):
        self.out = np.tanh(a)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out ** 2),)


class Softmax(Function):
    def forward(self, a, axis=-1):
        self.axis = axis
        shifted = a - np.max(a, axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.out = e / np.sum(e, axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        dot = np.sum(grad * self.out, axis=self.axis, keepdims=True)
        return (self.out * (grad - dot),)


def activation(x, kind, slope=const.LEAKY_SLOPE):
    """Elementwise leaky_relu, sigmoid or tanh."""
    if kind == 'leaky_relu':
        if not 0.0 <= slope < 1.0:
            raise exception.VRInvalidInput(
                msg='leaky_relu slope must be in [0, 1), got %s' % slope)
        return LeakyReLU.apply(x, slope=slope)
    if kind == 'sigmoid':
        return Sigmoid.apply(x)
    if kind == 'tanh':
        return Tanh.apply(x)
    raise exception.VRInvalidInput(msg='unknown activation %s' % kind)


def softmax(x, axis=-1):
    return Softmax.apply(x, axis=axis)


def _same_pads(extent, kernel, stride):
    out = int(math.ceil(float(extent) / stride))
    total = max((out - 1) * stride + kernel - extent, 0)
    return (total // 2, total - total // 2), out


class Conv(Function):
    """N-d convolution of (N, *spatial, Cin) with (*kernel, Cin, Cout)."""

    def forward(self, x, k, stride=1, padding='same'):
        rank = k.ndim - 2
        spatial = x.shape[1:-1]
        self.kernel_shape = k.shape[:rank]
        pads, out_sizes = [], []
        for extent, ks in zip(spatial, self.kernel_shape):
            if padding == 'same':
                pad, out = _same_pads(extent, ks, stride)
            else:
                pad, out = (0, 0), (extent - ks) // stride + 1
            pads.append(pad)
            out_sizes.append(out)
        self.pads = pads
        self.stride = stride
        self.out_sizes = out_sizes
        self.x_shape = x.shape
        self.xp = np.pad(x, [(0, 0)] + pads + [(0, 0)])
        self.k = k
        out = np.zeros((x.shape[0],) + tuple(out_sizes) + (k.shape[-1],),
                       dtype=DTYPE)
        for offset in itertools.product(*[range(s)
                                          for s in self.kernel_shape]):
            out += np.matmul(self.xp[self._window(offset)], k[offset])
        return out

    def _window(self, offset):
        return (slice(None),) + tuple(
            slice(o, o + self.stride * (n - 1) + 1, self.stride)
            for o, n in zip(offset, self.out_sizes))

    def backward(self, grad):
        gxp = np.zeros_like(self.xp)
        gk = np.zeros_like(self.k)
        flat_grad = grad.reshape(-1, grad.shape[-1])
        for offset in itertools.product(*[range(s)
                                          for s in self.kernel_shape]):
            window = self._window(offset)
            patch = self.xp[window]
            gk[offset] = np.matmul(patch.reshape(-1, patch.shape[-1]).T,
                                   flat_grad)
            gxp[window] += np.matmul(grad, self.k[offset].T)
        inner = (slice(None),) + tuple(
            slice(lo, lo + n) for (lo, _), n in zip(self.pads,
                                                  self.x_shape[1:-1]))
        return gxp[inner], gk


def conv(x, kernel, stride=1, padding='same'):
    """Convolve x (N, *spatial, Cin) with kernel (*window, Cin, Cout)."""
    rank = kernel.ndim - 2
    if rank not in (2, 3):
        raise exception.DimensionError(
            op='conv', msg='kernel spatial rank must be 2 or 3, got %d'
            % rank)
    if x.ndim != rank + 2:
        raise exception.DimensionError(
            op='conv', msg='input of shape %s does not have spatial rank %d'
            % (x.shape, rank))
    if x.shape[-1] != kernel.shape[-2]:
        raise exception.DimensionError(
            op='conv', msg='input has %d channels, kernel expects %d'
            % (x.shape[-1], kernel.shape[-2]))
    if padding not in ('same', 'valid'):
        raise exception.VRInvalidInput(msg='padding must be same or valid')
    if stride < 1:
        raise exception.VRInvalidInput(msg='stride must be >= 1')
    if padding == 'valid' and any(
            e < k for e, k in zip(x.shape[1:-1], kernel.shape[:rank])):
        raise exception.DimensionError(
            op='conv', msg='input %s smaller than kernel %s'
            % (x.shape[1:-1], kernel.shape[:rank]))
    return Conv.apply(x, kernel, stride=stride, padding=padding)


def _window_shape(shape, window):
    """Split each spatial axis of (N, *spatial, C) into (blocks, window)."""
    split = [shape[0]]
    for extent in shape[1:-1]:
        split.extend([extent // window, window])
    split.append(shape[-1])
    axes = tuple(2 + 2 * i for i in range(len(shape) - 2))
    return tuple(split), axes


def _window_view(a, window):
    split, axes = _window_shape(a.shape, window)
    return a.reshape(split), axes


class Pool(Function):
    def forward(self, x, kind='max', window=2):
        self.x_shape = x.shape
        self.kind = kind
        self.window = window
        view, axes = _window_view(x, window)
        self.axes = axes
        if kind == 'max':
            out = view.max(axis=axes, keepdims=True)
            mask = (view == out).astype(DTYPE)
            self.mask = mask / mask.sum(axis=axes, keepdims=True)
            return out.reshape(self._out_shape())
        return view.mean(axis=axes).reshape(self._out_shape())

    def _out_shape(self):
        return (self.x_shape[0],) + tuple(
            e // self.window for e in self.x_shape[1:-1]) + \
            (self.x_shape[-1],)

    def backward(self, grad):
        split, _ = _window_shape(self.x_shape, self.window)
        expanded = np.expand_dims(grad, self.axes)
        if self.kind == 'max':
            g = self.mask * expanded
        else:
            g = np.broadcast_to(expanded, split) / float(
                self.window ** len(self.axes))
        return (np.asarray(g).reshape(self.x_shape),)


def pool(x, kind='max', window=2):
    """Pool every spatial axis of x (N, *spatial, C) by window."""
    if kind not in ('max', 'avg'):
        raise exception.VRInvalidInput(msg='pool kind must be max or avg')
    if window < 1:
        raise exception.VRInvalidInput(msg='pool window must be >= 1')
    for extent in x.shape[1:-1]:
        if extent % window:
            raise exception.DimensionError(
                op='pool', msg='spatial extent %d not divisible by %d'
                % (extent, window))
    return Pool.apply(x, kind=kind, window=window)


class Upsample(Function):
    def forward(self, x, factor=2):
        self.factor = factor
        self.x_shape = x.shape
        out = x
        for axis in range(1, x.ndim - 1):
            out = np.repeat(out, factor, axis=axis)
        return out

    def backward(self, grad):
        view, axes = _window_view(grad, self.factor)
        return (view.sum(axis=axes),)


def upsample(x, factor=2):
    """Nearest-neighbour upsampling of every spatial axis."""
    if factor < 1:
        raise exception.VRInvalidInput(msg='upsample factor must be >= 1')
    return Upsample.apply(x, factor=factor)


def dense(x, weights, bias):
    """Affine map of x flattened per leading row: x @ W + b."""
    flat = x.reshape(x.shape[0], -1) if x.ndim > 2 else x
    if flat.shape[-1] != weights.shape[0]:
        raise exception.DimensionError(
            op='dense', msg='input length %d, weights expect %d'
            % (flat.shape[-1], weights.shape[0]))
    return MatMul.apply(flat, weights) + bias


class SeqNorm(Function):
    """Per-channel normalization over every axis except the last."""

    def forward(self, x, gamma, beta, mean=None, var=None,
                eps=const.NORM_EPSILON):
        self.axes = tuple(range(x.ndim - 1))
        self.batch_stats = mean is None
        if self.batch_stats:
            mean = x.mean(axis=self.axes)
            var = x.var(axis=self.axes)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mean) * self.inv_std
        self.gamma = gamma
        self.count = x.size // x.shape[-1]
        return self.xhat * gamma + beta

    def backward(self, grad):
        ggamma = np.sum(grad * self.xhat, axis=self.axes)
        gbeta = np.sum(grad, axis=self.axes)
        gxhat = grad * self.gamma
        if self.batch_stats:
            n = float(self.count)
            gx = self.inv_std / n * (
                n * gxhat - np.sum(gxhat, axis=self.axes) -
                self.xhat * np.sum(gxhat * self.xhat, axis=self.axes))
        else:
            gx = gxhat * self.inv_std
        return gx, ggamma, gbeta


def seq_norm(batch, gamma, beta, channel_stats='batch', running_mean=None,
             running_var=None, momentum=const.NORM_MOMENTUM,
             eps=const.NORM_EPSILON):
    """Normalize a batch of sequences per channel over all timesteps.

    ``batch`` is a (B, T, *spatial, C) tensor or a list of (T, *spatial, C)
    tensors; a list in gives a list out. With ``channel_stats='batch'`` the
    statistics are taken jointly over every timestep of every sequence and
    the running arrays (when given) are updated in place; ``'running'``
    uses the running arrays instead.
    """
    as_list = isinstance(batch, (list, tuple))
    if as_list:
        if not batch:
            raise exception.EmptyBatchError(op='seq_norm')
        shapes = set(t.shape for t in batch)
        if len(shapes) != 1:
            raise exception.DimensionError(
                op='seq_norm', msg='sequences differ in shape: %s'
                % sorted(shapes))
        x = stack(list(batch), axis=0)
    else:
        x = batch
    if x.shape[-1] != gamma.shape[-1]:
        raise exception.DimensionError(
            op='seq_norm', msg='%d channels, scale has %d'
            % (x.shape[-1], gamma.shape[-1]))
    if channel_stats == 'batch':
        if running_mean is not None:
            axes = tuple(range(x.ndim - 1))
            running_mean *= (1.0 - momentum)
            running_mean += momentum * x.data.mean(axis=axes)
            running_var *= (1.0 - momentum)
            running_var += momentum * x.data.var(axis=axes)
        out = SeqNorm.apply(x, gamma, beta, eps=eps)
    elif channel_stats == 'running':
        out = SeqNorm.apply(x, gamma, beta, mean=running_mean,
                            var=running_var, eps=eps)
    else:
        raise exception.VRInvalidInput(
            msg='channel_stats must be running or batch')
    return unstack(out, axis=0) if as_list else out


def sgd_step(params, lr, momentum=0.9, weight_decay=0.0):
    """Classical momentum SGD with the L2 term folded into the gradient.

    buf <- m * buf + grad + wd * param;  param <- param - lr * buf.
    Gradients are cleared afterwards.
    """
    for param in params:
        if not param.trainable:
            continue
        if param.tensor.grad is None:
            raise exception.MissingGradientError(name=param.name)
    for param in params:
        if not param.trainable:
            continue
        buf = param.momentum_buffer
        buf *= momentum
        buf += param.tensor.grad + weight_decay * param.tensor.data
        param.tensor.data = param.tensor.data - lr * buf
        param.tensor.grad = None


def xavier_uniform(shape, rng, fan_in=None, fan_out=None):
    if fan_in is None or fan_out is None:
        receptive = int(np.prod(shape[:-2])) if len(shape) > 2 else 1
        fan_in = receptive * shape[-2] if len(shape) > 1 else shape[0]
        fan_out = receptive * shape[-1]
    limit = math.sqrt(6.0 / float(fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
