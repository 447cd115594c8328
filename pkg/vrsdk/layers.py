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

"""Parameterized layers built on the tensor engine."""

import collections
import math

import numpy as np

from vrsdk import constants as const
from vrsdk import exception
from vrsdk import tensor as vt


class Layer(object):
    """Owns named parameters and child layers.

    Parameter names are the dotted path from the root layer, so they are
    unique within a model.
    """

    def __init__(self):
        self._params = collections.OrderedDict()
        self._children = collections.OrderedDict()
        self.training = True

    def add_param(self, key, data, trainable=True):
        param = vt.Parameter(key, data, trainable=trainable)
        self._params[key] = param
        return param

    def add_child(self, key, layer):
        self._children[key] = layer
        return layer

    def named_parameters(self, prefix=''):
        for key, param in self._params.items():
            yield prefix + key, param
        for key, child in self._children.items():
            for item in child.named_parameters(prefix + key + '.'):
                yield item

    def assign_names(self):
        for name, param in self.named_parameters():
            param.name = name

    def parameters(self, trainable_only=False):
        return [param for _, param in self.named_parameters()
                if param.trainable or not trainable_only]

    def count_parameters(self, trainable_only=True):
        return sum(int(np.prod(p.shape))
                   for p in self.parameters(trainable_only))

    def train(self, mode=True):
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)


def per_frame(fn, seq):
    """Apply fn to every frame of a (B, T, *spatial, C) sequence."""
    b, t = seq.shape[0], seq.shape[1]
    frames = seq.reshape((b * t,) + seq.shape[2:])
    out = fn(frames)
    return out.reshape((b, t) + out.shape[1:])


class Conv(Layer):
    def __init__(self, in_ch, out_ch, kernel, rng, bias=True):
        super(Conv, self).__init__()
        kernel = tuple(kernel)
        self.weight = self.add_param(
            'weight', vt.xavier_uniform(kernel + (in_ch, out_ch), rng))
        self.bias = self.add_param('bias', np.zeros(out_ch)) if bias \
            else None

    def __call__(self, x):
        out = vt.conv(x, self.weight.tensor)
        if self.bias is not None:
            out = out + self.bias.tensor
        return out


class Dense(Layer):
    def __init__(self, in_features, out_features, rng):
        super(Dense, self).__init__()
        self.weight = self.add_param(
            'weight', vt.xavier_uniform((in_features, out_features), rng))
        self.bias = self.add_param('bias', np.zeros(out_features))

    def __call__(self, x):
        return vt.dense(x, self.weight.tensor, self.bias.tensor)


class SeqNorm(Layer):
    """Sequence-wise normalization with learnable scale and shift."""

    def __init__(self, channels):
        super(SeqNorm, self).__init__()
        self.gamma = self.add_param('gamma', np.ones(channels))
        self.beta = self.add_param('beta', np.zeros(channels))
        self.running_mean = self.add_param('running_mean',
                                           np.zeros(channels),
                                           trainable=False)
        self.running_var = self.add_param('running_var', np.ones(channels),
                                          trainable=False)

    def __call__(self, seq):
        return vt.seq_norm(seq, self.gamma.tensor, self.beta.tensor,
                           channel_stats='batch' if self.training
                           else 'running',
                           running_mean=self.running_mean.tensor.data,
                           running_var=self.running_var.tensor.data)


class LayerNorm(Layer):
    def __init__(self, features):
        super(LayerNorm, self).__init__()
        self.gamma = self.add_param('gamma', np.ones(features))
        self.beta = self.add_param('beta', np.zeros(features))

    def __call__(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv = vt.Pow.apply(var + const.NORM_EPSILON, exponent=-0.5)
        return centered * inv * self.gamma.tensor + self.beta.tensor


ConvLSTMState = collections.namedtuple('ConvLSTMState', ['hidden', 'cell'])


class ConvLSTMCell(Layer):
    """LSTM whose input-to-state and state-to-state maps are convolutions.

    Gate channel order in the stacked kernels is input, forget, output,
    candidate.
    """

    def __init__(self, in_ch, hidden, kernel, rng):
        super(ConvLSTMCell, self).__init__()
        self.in_ch = in_ch
        self.hidden = hidden
        kernel = tuple(kernel)
        self.wx = self.add_param(
            'wx', vt.xavier_uniform(kernel + (in_ch, 4 * hidden), rng))
        self.wh = self.add_param(
            'wh', vt.xavier_uniform(kernel + (hidden, 4 * hidden), rng))
        self.b = self.add_param('b', np.zeros(4 * hidden))

    def zero_state(self, batch, spatial):
        shape = (batch,) + tuple(spatial) + (self.hidden,)
        return ConvLSTMState(vt.Tensor(np.zeros(shape)),
                             vt.Tensor(np.zeros(shape)))

    def step(self, x, state):
        return convlstm_step(x, state, self.wx.tensor, self.wh.tensor,
                             self.b.tensor)

    def run(self, seq, reverse=False):
        """Unroll over the time axis of (B, T, *spatial, C).

        Outputs stay aligned with input time positions in both directions.
        """
        b, t = seq.shape[0], seq.shape[1]
        state = self.zero_state(b, seq.shape[2:-1])
        outputs = [None] * t
        steps = range(t - 1, -1, -1) if reverse else range(t)
        for i in steps:
            out, state = self.step(seq[:, i], state)
            outputs[i] = out
        return vt.stack(outputs, axis=1)


def convlstm_step(x, state, wx, wh, b):
    """One ConvLSTM transition; returns (hidden, new state)."""
    if x.shape[:-1] != state.hidden.shape[:-1]:
        raise exception.DimensionError(
            op='convlstm_step', msg='input %s does not match state %s'
            % (x.shape, state.hidden.shape))
    if state.hidden.shape != state.cell.shape:
        raise exception.DimensionError(
            op='convlstm_step', msg='hidden %s and cell %s differ'
            % (state.hidden.shape, state.cell.shape))
    hidden = state.hidden.shape[-1]
    gates = vt.conv(x, wx) + vt.conv(state.hidden, wh) + b
    i = vt.activation(gates[..., 0:hidden], 'sigmoid')
    f = vt.activation(gates[..., hidden:2 * hidden], 'sigmoid')
    o = vt.activation(gates[..., 2 * hidden:3 * hidden], 'sigmoid')
    g = vt.activation(gates[..., 3 * hidden:], 'tanh')
    cell = f * state.cell + i * g
    h = o * vt.activation(cell, 'tanh')
    return h, ConvLSTMState(h, cell)


class MultiHeadAttention(Layer):
    def __init__(self, features, heads, rng):
        super(MultiHeadAttention, self).__init__()
        if heads < 1 or features < heads:
            raise exception.VRInvalidInput(
                msg='%d heads cannot split %d features' % (heads, features))
        self.heads = heads
        self.head_dim = features // heads
        inner = self.heads * self.head_dim
        self.wq = self.add_param('wq', vt.xavier_uniform((features, inner),
                                                         rng))
        self.wk = self.add_param('wk', vt.xavier_uniform((features, inner),
                                                         rng))
        self.wv = self.add_param('wv', vt.xavier_uniform((features, inner),
                                                         rng))
        self.wo = self.add_param('wo', vt.xavier_uniform((inner, features),
                                                         rng))
        self.last_weights = None

    def _split(self, x):
        b, t = x.shape[0], x.shape[1]
        return x.reshape(b, t, self.heads, self.head_dim).transpose(
            0, 2, 1, 3)

    def __call__(self, x):
        b, t = x.shape[0], x.shape[1]
        q = self._split(x @ self.wq.tensor)
        k = self._split(x @ self.wk.tensor)
        v = self._split(x @ self.wv.tensor)
        scores = (q @ k.transpose(0, 1, 3, 2)) * (
            1.0 / math.sqrt(self.head_dim))
        weights = vt.softmax(scores, axis=-1)
        self.last_weights = weights.data
        ctx = (weights @ v).transpose(0, 2, 1, 3).reshape(
            b, t, self.heads * self.head_dim)
        return ctx @ self.wo.tensor


class TransformerLayer(Layer):
    def __init__(self, features, heads, intermediate, slope, rng):
        super(TransformerLayer, self).__init__()
        self.slope = slope
        self.attention = self.add_child(
            'attention', MultiHeadAttention(features, heads, rng))
        self.norm1 = self.add_child('norm1', LayerNorm(features))
        self.ff_in = self.add_child('ff_in',
                                    Dense(features, intermediate, rng))
        self.ff_out = self.add_child('ff_out',
                                     Dense(intermediate, features, rng))
        self.norm2 = self.add_child('norm2', LayerNorm(features))

    def _feed_forward(self, x):
        b, t = x.shape[0], x.shape[1]
        flat = x.reshape(b * t, x.shape[2])
        hidden = vt.activation(self.ff_in(flat), 'leaky_relu', self.slope)
        return self.ff_out(hidden).reshape(b, t, x.shape[2])

    def __call__(self, x):
        x = self.norm1(x + self.attention(x))
        return self.norm2(x + self._feed_forward(x))


def sinusoidal_positions(length, features):
    position = np.arange(length)[:, None]
    rates = np.exp(-math.log(10000.0) * (np.arange(features) // 2 * 2) /
                   float(features))
    table = position * rates[None, :]
    table[:, 0::2] = np.sin(table[:, 0::2])
    table[:, 1::2] = np.cos(table[:, 1::2])
    return table
