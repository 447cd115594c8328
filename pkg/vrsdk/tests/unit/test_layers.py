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

import math

import numpy as np

from vrsdk import exception
from vrsdk import layers
from vrsdk import tensor as vt
from vrsdk.tests.unit import base


class _Pair(layers.Layer):
    def __init__(self, rng):
        super(_Pair, self).__init__()
        self.left = self.add_child('left', layers.Dense(2, 3, rng))
        self.norm = self.add_child('norm', layers.SeqNorm(3))


class LayerRegistryTestCase(base.SDKTestCase):

    def test_dotted_names_from_root(self):
        root = _Pair(self.rng)
        root.assign_names()
        names = [p.name for p in root.parameters()]
        self.assertEqual(['left.weight', 'left.bias', 'norm.gamma',
                          'norm.beta', 'norm.running_mean',
                          'norm.running_var'], names)
        # asking a child must not rename
        root.left.parameters()
        self.assertEqual('left.weight', root.left.weight.name)

    def test_trainable_only(self):
        root = _Pair(self.rng)
        self.assertEqual(4, len(root.parameters(trainable_only=True)))
        self.assertEqual(2 * 3 + 3 + 3 + 3, root.count_parameters())

    def test_mode_propagates(self):
        root = _Pair(self.rng)
        root.eval()
        self.assertFalse(root.norm.training)
        root.train()
        self.assertTrue(root.norm.training)


class SeqNormLayerTestCase(base.SDKTestCase):

    def test_eval_uses_running_stats(self):
        norm = layers.SeqNorm(2)
        x = vt.Tensor(self.rng.normal(size=(2, 3, 2)))
        norm(x)
        self.assertFalse(np.allclose(norm.running_mean.data, 0.0))
        norm.eval()
        before = norm.running_mean.data.copy()
        single = norm(x[0:1]).data
        batched = norm(x).data
        np.testing.assert_allclose(single, batched[0:1])
        np.testing.assert_allclose(before, norm.running_mean.data)


class ConvLSTMTestCase(base.SDKTestCase):

    def test_gate_arithmetic(self):
        hidden = 1
        wx = vt.Tensor(np.zeros((1, 1, 1, 4 * hidden)))
        wh = vt.Tensor(np.zeros((1, 1, hidden, 4 * hidden)))
        b = np.zeros(4 * hidden)
        b[3] = 50.0
        state = layers.ConvLSTMState(vt.Tensor(np.zeros((1, 2, 2, 1))),
                                     vt.Tensor(np.zeros((1, 2, 2, 1))))
        h, new = layers.convlstm_step(vt.Tensor(np.ones((1, 2, 2, 1))),
                                      state, wx, wh, vt.Tensor(b))
        # i = f = o = 0.5, g = 1
        np.testing.assert_allclose(new.cell.data, 0.5)
        np.testing.assert_allclose(h.data, 0.5 * math.tanh(0.5))

    def test_state_shape_mismatch(self):
        cell = layers.ConvLSTMCell(1, 2, (3, 3), self.rng)
        state = cell.zero_state(1, (4, 4))
        self.assertRaises(exception.DimensionError, cell.step,
                          vt.Tensor(np.zeros((1, 3, 3, 1))), state)

    def test_run_keeps_time_alignment(self):
        cell = layers.ConvLSTMCell(2, 3, (3, 3), self.rng)
        seq = self.rng.normal(size=(1, 3, 4, 4, 2))
        fwd = cell.run(vt.Tensor(seq)).data
        bwd = cell.run(vt.Tensor(seq), reverse=True).data
        self.assertEqual((1, 3, 4, 4, 3), fwd.shape)
        # reverse over the reversed sequence mirrors the forward pass
        mirrored = cell.run(vt.Tensor(seq[:, ::-1].copy()), reverse=True)
        np.testing.assert_allclose(mirrored.data[:, ::-1], fwd)
        self.assertFalse(np.allclose(fwd, bwd))

    def test_gradient_through_time(self):
        cell = layers.ConvLSTMCell(1, 1, (3, 3), self.rng)
        seq = self.rng.normal(size=(1, 2, 3, 3, 1))
        wx = cell.wx.data

        def loss():
            return float(cell.run(vt.Tensor(seq)).data.sum())

        cell.run(vt.Tensor(seq)).sum().backward()
        self.assertGradClose(cell.wx.grad, base.numeric_grad(loss, wx))


class AttentionTestCase(base.SDKTestCase):

    def test_weights_are_distributions(self):
        mha = layers.MultiHeadAttention(4, 2, self.rng)
        out = mha(vt.Tensor(self.rng.normal(size=(2, 3, 4))))
        self.assertEqual((2, 3, 4), out.shape)
        self.assertEqual((2, 2, 3, 3), mha.last_weights.shape)
        np.testing.assert_allclose(mha.last_weights.sum(axis=-1), 1.0)

    def test_too_many_heads(self):
        self.assertRaises(exception.VRInvalidInput,
                          layers.MultiHeadAttention, 2, 3, self.rng)

    def test_transformer_layer_normalizes(self):
        layer = layers.TransformerLayer(4, 1, 8, 0.2, self.rng)
        out = layer(vt.Tensor(self.rng.normal(size=(1, 3, 4)))).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-8)

    def test_sinusoidal_positions(self):
        table = layers.sinusoidal_positions(3, 4)
        self.assertEqual((3, 4), table.shape)
        self.assertEqual([0.0, 1.0, 0.0, 1.0], table[0].tolist())
        self.assertAlmostEqual(math.sin(1.0), table[1, 0])


class PerFrameTestCase(base.SDKTestCase):

    def test_applies_to_each_frame(self):
        conv = layers.Conv(2, 3, (3, 3), self.rng)
        seq = self.rng.normal(size=(2, 3, 4, 4, 2))
        out = layers.per_frame(conv, vt.Tensor(seq))
        self.assertEqual((2, 3, 4, 4, 3), out.shape)
        np.testing.assert_allclose(
            out.data[1, 2], conv(vt.Tensor(seq[1, 2][None])).data[0])
