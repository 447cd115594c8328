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

"""Encoder and decoder blocks.

Every block consumes and produces sequences shaped (B, T, *spatial, C),
spatial rank 2 (H, W) or 3 (D, H, W).
"""

import numpy as np

from vrsdk import exception
from vrsdk import layers
from vrsdk import tensor as vt


def _leaky(x, slope):
    return vt.activation(x, 'leaky_relu', slope)


def _upsample_seq(seq, factor=2):
    return layers.per_frame(lambda f: vt.upsample(f, factor), seq)


def _record(trace, name, seq):
    if trace is not None:
        trace.append((name, tuple(seq.shape[2:])))


class BlockR(layers.Layer):
    """ConvLSTM whose output is concatenated onto its input, then LeakyReLU.

    Output channels are in_ch + hidden.
    """

    def __init__(self, in_ch, hidden, kernel, slope, rng):
        super(BlockR, self).__init__()
        self.slope = slope
        self.out_ch = in_ch + hidden
        self.cell = self.add_child('cell', layers.ConvLSTMCell(
            in_ch, hidden, kernel, rng))

    def __call__(self, seq):
        if seq.shape[-1] != self.cell.in_ch:
            raise exception.DimensionError(
                op='block_r', msg='%d input channels, block expects %d'
                % (seq.shape[-1], self.cell.in_ch))
        hidden = self.cell.run(seq)
        return _leaky(vt.concat([seq, hidden], axis=-1), self.slope)


class LRBPBlock(layers.Layer):
    """Bidirectional ConvLSTM, block R, 1x1 projection, pool(2), norm.

    With spatial rank 3 this is the volumetric L3RBP block.
    """

    def __init__(self, in_ch, bi_hidden, res_hidden, out_ch, rank, kernel,
                 slope, rng):
        super(LRBPBlock, self).__init__()
        window = (kernel,) * rank
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.forward_cell = self.add_child('forward', layers.ConvLSTMCell(
            in_ch, bi_hidden, window, rng))
        self.backward_cell = self.add_child('backward', layers.ConvLSTMCell(
            in_ch, bi_hidden, window, rng))
        self.residual = self.add_child('residual', BlockR(
            2 * bi_hidden, res_hidden, window, slope, rng))
        self.projection = self.add_child('projection', layers.Conv(
            self.residual.out_ch, out_ch, (1,) * rank, rng))
        self.norm = self.add_child('norm', layers.SeqNorm(out_ch))

    def bidirectional(self, seq):
        forward = self.forward_cell.run(seq)
        backward = self.backward_cell.run(seq, reverse=True)
        return vt.concat([forward, backward], axis=-1)

    def __call__(self, seq, trace=None):
        for extent in seq.shape[2:-1]:
            if extent % 2:
                raise exception.DimensionError(
                    op='block_lrbp', msg='odd spatial extent %d' % extent)
        merged = self.residual(self.bidirectional(seq))
        _record(trace, 'residual', merged)
        projected = layers.per_frame(self.projection, merged)
        pooled = layers.per_frame(lambda f: vt.pool(f, 'max', 2), projected)
        _record(trace, 'pooled', pooled)
        return self.norm(pooled)


class URBBlock(layers.Layer):
    """Upsample(2), block R, norm. With spatial rank 3 this is R3BP."""

    def __init__(self, in_ch, hidden, rank, kernel, slope, rng):
        super(URBBlock, self).__init__()
        self.residual = self.add_child('residual', BlockR(
            in_ch, hidden, (kernel,) * rank, slope, rng))
        self.out_ch = self.residual.out_ch
        self.norm = self.add_child('norm', layers.SeqNorm(self.out_ch))

    def __call__(self, seq, trace=None):
        out = self.norm(self.residual(_upsample_seq(seq)))
        _record(trace, 'urb', out)
        return out


class QuasiBlock(layers.Layer):
    """Upsample(2), quasi-4D convolution with residual concat, norm.

    Rank 2 (UQB): one k x k x k convolution over (time, height, width).
    Rank 3 (U4DB): k x k x k over (depth, height, width) per frame chained
    with a k-tap convolution over time. Both end in a 1x1 channel mixer.
    """

    def __init__(self, in_ch, hidden, rank, kernel, slope, rng):
        super(QuasiBlock, self).__init__()
        self.rank = rank
        self.slope = slope
        self.out_ch = in_ch + hidden
        self.spacetime = self.add_child('spacetime', layers.Conv(
            in_ch, hidden, (kernel,) * 3, rng))
        if rank == 3:
            self.temporal = self.add_child('temporal', layers.Conv(
                hidden, hidden, (kernel, 1), rng))
        self.mixer = self.add_child('mixer', layers.Conv(
            hidden, hidden, (1,) * 3, rng))
        self.norm = self.add_child('norm', layers.SeqNorm(self.out_ch))

    def quasi4d(self, seq):
        if self.rank == 2:
            # (B, T, H, W, C) is a rank-3 volume with T as its first axis
            return self.mixer(self.spacetime(seq))
        b, t = seq.shape[0], seq.shape[1]
        spatial = seq.shape[2:-1]
        out = layers.per_frame(self.spacetime, seq)
        hidden = out.shape[-1]
        out = self.temporal(out.reshape(b, t, int(np.prod(spatial)), hidden))
        out = out.reshape((b * t,) + tuple(spatial) + (hidden,))
        return self.mixer(out).reshape((b, t) + tuple(spatial) + (hidden,))

    def __call__(self, seq, trace=None):
        up = _upsample_seq(seq)
        merged = vt.concat([up, self.quasi4d(up)], axis=-1)
        out = self.norm(_leaky(merged, self.slope))
        _record(trace, 'quasi', out)
        return out


class LatentTransformer(layers.Layer):
    """Self-attention stack over the per-timestep latent vectors."""

    def __init__(self, latent_features, hidden, heads, intermediate, depth,
                 slope, rng):
        super(LatentTransformer, self).__init__()
        self.hidden = hidden
        self.project_in = self.add_child('project_in', layers.Dense(
            latent_features, hidden, rng))
        self.stack = []
        for i in range(depth):
            self.stack.append(self.add_child(
                'layer%d' % i, layers.TransformerLayer(
                    hidden, heads, intermediate, slope, rng)))
        self.project_out = self.add_child('project_out', layers.Dense(
            hidden, latent_features, rng))

    def __call__(self, seq):
        b, t = seq.shape[0], seq.shape[1]
        flat = seq.reshape(b * t, -1)
        x = self.project_in(flat).reshape(b, t, self.hidden)
        x = x + vt.Tensor(layers.sinusoidal_positions(t, self.hidden)[None])
        for layer in self.stack:
            x = layer(x)
        out = self.project_out(x.reshape(b * t, self.hidden))
        return out.reshape(seq.shape)


class UTBStage(layers.Layer):
    """Upsample(2), convolution with residual concat, norm."""

    def __init__(self, in_ch, hidden, rank, kernel, slope, rng):
        super(UTBStage, self).__init__()
        self.slope = slope
        self.out_ch = in_ch + hidden
        self.conv = self.add_child('conv', layers.Conv(
            in_ch, hidden, (kernel,) * rank, rng))
        self.norm = self.add_child('norm', layers.SeqNorm(self.out_ch))

    def __call__(self, seq, trace=None):
        up = _upsample_seq(seq)
        merged = vt.concat([up, layers.per_frame(self.conv, up)], axis=-1)
        out = self.norm(_leaky(merged, self.slope))
        _record(trace, 'utb', out)
        return out


def block_utb(seq, transformer, stages, trace=None):
    """Attention over latent timesteps, then the upsampling conv stack."""
    out = transformer(seq)
    _record(trace, 'attention', out)
    for stage in stages:
        out = stage(out, trace)
    return out
