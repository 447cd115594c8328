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

import numpy as np

from vrsdk import exception
from vrsdk import tensor as vt
from vrsdk.tests.unit import base


class ConvTestCase(base.SDKTestCase):

    def test_identity_kernel(self):
        x = self.rng.normal(size=(2, 5, 5, 3))
        kernel = np.eye(3).reshape(1, 1, 3, 3)
        out = vt.conv(vt.Tensor(x), vt.Tensor(kernel))
        np.testing.assert_allclose(out.data, x)

    def test_ones_kernel_sums_neighborhood(self):
        x = np.arange(16, dtype=float).reshape(1, 4, 4, 1)
        out = vt.conv(vt.Tensor(x), vt.Tensor(np.ones((3, 3, 1, 1))))
        self.assertEqual((1, 4, 4, 1), out.shape)
        self.assertEqual(x[0, 0:3, 0:3, 0].sum(), out.data[0, 1, 1, 0])
        # corner sees only the 2x2 in-bounds neighborhood
        self.assertEqual(x[0, 0:2, 0:2, 0].sum(), out.data[0, 0, 0, 0])

    def test_valid_padding_and_stride_shapes(self):
        x = vt.Tensor(np.zeros((1, 6, 6, 2)))
        k = vt.Tensor(np.zeros((3, 3, 2, 4)))
        self.assertEqual((1, 4, 4, 4), vt.conv(x, k, padding='valid').shape)
        self.assertEqual((1, 3, 3, 4), vt.conv(x, k, stride=2).shape)

    def test_volumetric_shape(self):
        x = vt.Tensor(np.zeros((1, 4, 4, 4, 2)))
        k = vt.Tensor(np.zeros((3, 3, 3, 2, 1)))
        self.assertEqual((1, 4, 4, 4, 1), vt.conv(x, k).shape)

    def test_channel_mismatch(self):
        x = vt.Tensor(np.zeros((1, 4, 4, 2)))
        k = vt.Tensor(np.zeros((3, 3, 3, 1)))
        self.assertRaises(exception.DimensionError, vt.conv, x, k)

    def test_rank_mismatch(self):
        x = vt.Tensor(np.zeros((1, 4, 4, 4, 2)))
        k = vt.Tensor(np.zeros((3, 3, 2, 1)))
        self.assertRaises(exception.DimensionError, vt.conv, x, k)

    def test_gradients_match_finite_differences(self):
        for seed in range(3):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=(1, 4, 4, 2))
            k = rng.normal(size=(3, 3, 2, 2))
            w = rng.normal(size=(1, 2, 2, 2))

            def loss():
                out = vt.conv(vt.Tensor(x), vt.Tensor(k), stride=2)
                return float((out.data * w).sum())

            xt = vt.Tensor(x, requires_grad=True)
            kt = vt.Tensor(k, requires_grad=True)
            (vt.conv(xt, kt, stride=2) * vt.Tensor(w)).sum().backward()
            self.assertGradClose(kt.grad, base.numeric_grad(loss, k))
            self.assertGradClose(xt.grad, base.numeric_grad(loss, x))


class ActivationTestCase(base.SDKTestCase):

    def test_leaky_relu_values(self):
        out = vt.activation(vt.Tensor([0.0, -2.0, 3.0]), 'leaky_relu', 0.2)
        np.testing.assert_allclose([0.0, -0.4, 3.0], out.data)

    def test_leaky_relu_rejects_bad_slope(self):
        self.assertRaises(exception.VRInvalidInput, vt.activation,
                          vt.Tensor([1.0]), 'leaky_relu', 1.5)

    def test_unknown_kind(self):
        self.assertRaises(exception.VRInvalidInput, vt.activation,
                          vt.Tensor([1.0]), 'relu6')

    def test_sigmoid_and_tanh_gradients(self):
        x = self.rng.normal(size=(3, 4))
        for kind in ('sigmoid', 'tanh'):
            xt = vt.Tensor(x, requires_grad=True)
            vt.activation(xt, kind).sum().backward()
            numeric = base.numeric_grad(
                lambda: float(vt.activation(vt.Tensor(x), kind).data.sum()),
                x)
            self.assertGradClose(xt.grad, numeric)

    def test_softmax_rows_sum_to_one(self):
        out = vt.softmax(vt.Tensor(self.rng.normal(size=(2, 5))))
        np.testing.assert_allclose(out.data.sum(axis=-1), [1.0, 1.0])


class PoolUpsampleTestCase(base.SDKTestCase):

    def test_max_pool_value(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        out = vt.pool(vt.Tensor(x), 'max', 2)
        self.assertEqual([[[[4.0]]]], out.data.tolist())

    def test_window_one_is_identity(self):
        x = self.rng.normal(size=(2, 4, 4, 3))
        np.testing.assert_allclose(vt.pool(vt.Tensor(x), 'max', 1).data, x)
        np.testing.assert_allclose(vt.pool(vt.Tensor(x), 'avg', 1).data, x)

    def test_indivisible_extent(self):
        self.assertRaises(exception.DimensionError, vt.pool,
                          vt.Tensor(np.zeros((1, 5, 4, 1))), 'max', 2)

    def test_max_gradient_routes_to_argmax(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
        xt = vt.Tensor(x, requires_grad=True)
        vt.pool(xt, 'max', 2).sum().backward()
        self.assertEqual([0.0, 0.0, 0.0, 1.0], xt.grad.ravel().tolist())

    def test_avg_gradient_spreads(self):
        xt = vt.Tensor(self.rng.normal(size=(1, 4, 4, 2)),
                       requires_grad=True)
        vt.pool(xt, 'avg', 2).sum().backward()
        np.testing.assert_allclose(xt.grad, 0.25)

    def test_upsample_value(self):
        x = np.array([[1.0, 2.0]]).reshape(1, 1, 2, 1)
        out = vt.upsample(vt.Tensor(x), 2)
        self.assertEqual([[1, 1, 2, 2], [1, 1, 2, 2]],
                         out.data[0, :, :, 0].tolist())

    def test_upsample_then_avg_pool_is_identity(self):
        x = self.rng.normal(size=(2, 3, 3, 2))
        out = vt.pool(vt.upsample(vt.Tensor(x), 2), 'avg', 2)
        np.testing.assert_allclose(out.data, x)

    def test_upsample_factor_below_one(self):
        self.assertRaises(exception.VRInvalidInput, vt.upsample,
                          vt.Tensor(np.zeros((1, 2, 2, 1))), 0)


class DenseTestCase(base.SDKTestCase):

    def test_identity_weights(self):
        x = self.rng.normal(size=(3, 4))
        out = vt.dense(vt.Tensor(x), vt.Tensor(np.eye(4)),
                       vt.Tensor(np.zeros(4)))
        np.testing.assert_allclose(out.data, x)

    def test_flattens_input(self):
        x = vt.Tensor(np.ones((2, 2, 2, 4)))
        out = vt.dense(x, vt.Tensor(np.ones((16, 3))),
                       vt.Tensor(np.zeros(3)))
        self.assertEqual((2, 3), out.shape)
        np.testing.assert_allclose(out.data, 16.0)

    def test_shape_mismatch(self):
        self.assertRaises(exception.DimensionError, vt.dense,
                          vt.Tensor(np.ones((2, 5))),
                          vt.Tensor(np.ones((4, 3))),
                          vt.Tensor(np.zeros(3)))

    def test_gradient(self):
        x = self.rng.normal(size=(2, 3))
        w = self.rng.normal(size=(3, 2))
        b = self.rng.normal(size=2)
        wt = vt.Tensor(w, requires_grad=True)
        bt = vt.Tensor(b, requires_grad=True)
        vt.dense(vt.Tensor(x), wt, bt).sum().backward()

        def loss():
            return float((x.dot(w) + b).sum())

        self.assertGradClose(wt.grad, base.numeric_grad(loss, w))
        self.assertGradClose(bt.grad, base.numeric_grad(loss, b))


class SeqNormTestCase(base.SDKTestCase):

    def _norm(self, batch, channels):
        return vt.seq_norm(batch, vt.Tensor(np.ones(channels)),
                           vt.Tensor(np.zeros(channels)))

    def test_two_values_normalize_to_unit(self):
        batch = [vt.Tensor(np.array([1.0]).reshape(1, 1)),
                 vt.Tensor(np.array([3.0]).reshape(1, 1))]
        out = self._norm(batch, 1)
        self.assertEqual(2, len(out))
        self.assertAlmostEqual(-1.0, out[0].data.item(), places=4)
        self.assertAlmostEqual(1.0, out[1].data.item(), places=4)

    def test_constant_channel_becomes_zero(self):
        out = self._norm(vt.Tensor(np.full((2, 3, 4, 4, 2), 5.0)), 2)
        np.testing.assert_allclose(out.data, 0.0)

    def test_random_batch_zero_mean(self):
        x = self.rng.normal(3.0, 2.0, size=(4, 3, 4, 4, 2))
        out = self._norm(vt.Tensor(x), 2).data
        self.assertTrue(np.all(np.abs(out.mean(axis=(0, 1, 2, 3))) < 1e-6))
        np.testing.assert_allclose(out.var(axis=(0, 1, 2, 3)), 1.0,
                                   atol=1e-3)

    def test_empty_and_ragged_batches(self):
        self.assertRaises(exception.EmptyBatchError, self._norm, [], 1)
        self.assertRaises(exception.DimensionError, self._norm,
                          [vt.Tensor(np.zeros((1, 1))),
                           vt.Tensor(np.zeros((2, 1)))], 1)

    def test_running_stats_updated_and_used(self):
        mean, var = np.zeros(1), np.ones(1)
        x = vt.Tensor(np.full((2, 2, 1), 4.0))
        vt.seq_norm(x, vt.Tensor(np.ones(1)), vt.Tensor(np.zeros(1)),
                    'batch', mean, var, momentum=0.5)
        self.assertEqual([2.0], mean.tolist())
        self.assertEqual([0.5], var.tolist())
        out = vt.seq_norm(x, vt.Tensor(np.ones(1)), vt.Tensor(np.zeros(1)),
                          'running', mean, var)
        np.testing.assert_allclose(out.data, 2.0 / np.sqrt(0.5 + 1e-5))

    def test_gradient(self):
        x = self.rng.normal(size=(2, 3, 2))
        g = self.rng.normal(size=2)
        w = self.rng.normal(size=(2, 3, 2))
        xt = vt.Tensor(x, requires_grad=True)
        gt = vt.Tensor(g, requires_grad=True)
        (vt.seq_norm(xt, gt, vt.Tensor(np.zeros(2))) *
         vt.Tensor(w)).sum().backward()

        def loss():
            return float((vt.seq_norm(vt.Tensor(x), vt.Tensor(g),
                                      vt.Tensor(np.zeros(2))).data *
                          w).sum())

        self.assertGradClose(xt.grad, base.numeric_grad(loss, x))
        self.assertGradClose(gt.grad, base.numeric_grad(loss, g))


class SGDTestCase(base.SDKTestCase):

    def _param(self, value, grad):
        param = vt.Parameter('p', np.array([value]))
        param.tensor.grad = np.array([grad])
        return param

    def test_zero_lr_keeps_params(self):
        param = self._param(1.0, 1.0)
        vt.sgd_step([param], 0.0)
        self.assertEqual([1.0], param.data.tolist())
        self.assertIsNone(param.grad)

    def test_single_step(self):
        param = self._param(1.0, 1.0)
        vt.sgd_step([param], 0.1, momentum=0.0, weight_decay=0.0)
        self.assertAlmostEqual(0.9, param.data[0])

    def test_two_momentum_steps(self):
        param = self._param(1.0, 1.0)
        vt.sgd_step([param], 0.1, momentum=0.9, weight_decay=0.01)
        # buf1 = 1 + 0.01 * 1; p1 = 1 - 0.1 * buf1
        buf1 = 1.01
        p1 = 1.0 - 0.1 * buf1
        param.tensor.grad = np.array([1.0])
        vt.sgd_step([param], 0.1, momentum=0.9, weight_decay=0.01)
        buf2 = 0.9 * buf1 + 1.0 + 0.01 * p1
        self.assertAlmostEqual(p1 - 0.1 * buf2, param.data[0])

    def test_missing_gradient_names_param(self):
        param = vt.Parameter('encoder.dense.weight', np.zeros(2))
        try:
            vt.sgd_step([param], 0.1)
        except exception.MissingGradientError as err:
            self.assertIn('encoder.dense.weight', str(err))
        else:
            self.fail('MissingGradientError not raised')

    def test_frozen_params_skipped(self):
        param = vt.Parameter('running_mean', np.zeros(2), trainable=False)
        vt.sgd_step([param], 0.1)
        self.assertEqual([0.0, 0.0], param.data.tolist())


class TensorTestCase(base.SDKTestCase):

    def test_backward_accumulates_through_reuse(self):
        x = vt.Tensor(np.array([2.0, 3.0]), requires_grad=True)
        (x * x + x).sum().backward()
        self.assertEqual([5.0, 7.0], x.grad.tolist())

    def test_broadcast_gradient(self):
        b = vt.Tensor(np.array([1.0, 2.0]), requires_grad=True)
        (vt.Tensor(np.ones((3, 2))) + b).sum().backward()
        self.assertEqual([3.0, 3.0], b.grad.tolist())

    def test_concat_and_slice_gradients(self):
        a = vt.Tensor(np.ones(2), requires_grad=True)
        c = vt.Tensor(np.ones(3), requires_grad=True)
        out = vt.concat([a, c], axis=0)[1:4]
        out.sum().backward()
        self.assertEqual([0.0, 1.0], a.grad.tolist())
        self.assertEqual([1.0, 1.0, 0.0], c.grad.tolist())

    def test_backward_requires_grad(self):
        self.assertRaises(exception.VRInvalidInput,
                          vt.Tensor(np.ones(2)).backward)

    def test_no_grad_records_nothing(self):
        x = vt.Tensor(np.array([2.0, 3.0]), requires_grad=True)
        with vt.no_grad():
            self.assertFalse(vt.grad_enabled())
            y = vt.conv(x.reshape(1, 1, 2, 1), vt.Tensor(np.ones((1, 1, 1,
                                                                  1))))
        self.assertTrue(vt.grad_enabled())
        self.assertFalse(y.requires_grad)
        self.assertIsNone(y.creator)
        self.assertEqual([2.0, 3.0], y.data.ravel().tolist())
        self.assertRaises(exception.VRInvalidInput, y.sum().backward)

    def test_no_grad_restored_after_error(self):
        def failing():
            with vt.no_grad():
                raise exception.EmptyBatchError(op='seq_norm')
        self.assertRaises(exception.EmptyBatchError, failing)
        self.assertTrue(vt.grad_enabled())

    def test_non_finite_forward(self):
        self.assertRaises(exception.NonFiniteError,
                          lambda: vt.Tensor(np.array([0.0])) /
                          vt.Tensor(np.array([0.0])))

    def test_parameter_assign_checks_shape(self):
        param = vt.Parameter('w', np.zeros((2, 2)))
        self.assertTrue(np.all(param.momentum_buffer == 0))
        self.assertRaises(exception.DimensionError, param.assign,
                          np.zeros(3))

    def test_xavier_limits(self):
        w = vt.xavier_uniform((3, 3, 4, 8), np.random.default_rng(1))
        limit = np.sqrt(6.0 / (9 * 4 + 9 * 8))
        self.assertTrue(np.all(np.abs(w) <= limit))
