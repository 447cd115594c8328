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

import os

import numpy as np

from vrsdk import exception
from vrsdk import store
from vrsdk import synth
from vrsdk.tests.unit import base


def _spec(classes=(('square', 'left'),), **kwargs):
    fields = dict(videos_per_class=2, frames=6, size=8, noise_std=0.0)
    fields.update(kwargs)
    return synth.SynthSpec(list(classes), **fields)


class SynthSpecTestCase(base.SDKTestCase):

    def test_parse_classes(self):
        self.assertEqual([synth.ClassSpec('square', 'left'),
                          synth.ClassSpec('circle', 'bounce')],
                         synth.parse_classes(['square:left',
                                              ' circle : bounce']))

    def test_default_shape_size(self):
        self.assertEqual(3, _spec().shape_size)
        self.assertEqual(8, _spec(size=32).shape_size)

    def test_invalid(self):
        bad = [dict(classes=[]),
               dict(classes=[('square', 'left'), ('square', 'left')]),
               dict(classes=[('star', 'left')]),
               dict(classes=[('square', 'spin')]),
               dict(size=4),
               dict(shape_size=9),
               dict(channels=2),
               dict(frames=0),
               dict(noise_std=-0.1)]
        for kwargs in bad:
            classes = kwargs.pop('classes', (('square', 'left'),))
            self.assertRaises(exception.VRInvalidInput, _spec, classes,
                              **kwargs)


class RenderTestCase(base.SDKTestCase):

    def test_frame_channels(self):
        spec = _spec()
        frame = synth.render_frame('square', spec, 0, 0)
        self.assertEqual((8, 8, 3), frame.shape)
        np.testing.assert_array_equal([0.9, 0.9, 0.9], frame[0, 0])
        np.testing.assert_array_equal([0.0, 0.0, 0.0], frame[7, 7])

    def test_depth_ramp(self):
        spec = _spec(channels=4)
        frame = synth.render_frame('square', spec, 2, 2)
        self.assertEqual((8, 8, 4), frame.shape)
        self.assertEqual([0.5, 0.75, 1.0], list(frame[2:5, 3, 3]))
        self.assertEqual(0.0, frame[0, 0, 3])

    def test_left_shifts_by_velocity(self):
        for velocity in (1, 2):
            spec = _spec(velocity=velocity)
            video = synth.render_video(synth.ClassSpec('square', 'left'),
                                       spec, 3, 1)
            for t in range(spec.frames - 1):
                np.testing.assert_array_equal(
                    np.roll(video[t], -velocity, axis=1), video[t + 1])

    def test_reversed_left_is_right(self):
        spec = _spec()
        phase = 5
        left = synth.render_video(synth.ClassSpec('circle', 'left'), spec,
                                  phase, 2)
        right_phase = (phase - spec.velocity * (spec.frames - 1)) % spec.size
        right = synth.render_video(synth.ClassSpec('circle', 'right'), spec,
                                   right_phase, 2)
        np.testing.assert_array_equal(left[::-1], right)

    def test_bounce_stays_inside(self):
        spec = _spec(frames=20)
        video = synth.render_video(synth.ClassSpec('square', 'bounce'),
                                   spec, 0, 0)
        self.assertEqual((20, 8, 8, 3), video.shape)
        # the full square is drawn in every frame
        self.assertTrue(np.all((video[..., 0] > 0).sum(axis=(1, 2)) == 9))

    def test_rotate_moves(self):
        spec = _spec()
        video = synth.render_video(synth.ClassSpec('triangle', 'rotate'),
                                   spec, 0, 0)
        self.assertFalse(np.array_equal(video[0], video[2]))


class GenerateTestCase(base.SDKTestCase):

    def test_deterministic(self):
        spec = _spec([('square', 'left'), ('circle', 'bounce')],
                     noise_std=0.05, seed=3)
        first = synth.generate(spec)
        second = synth.generate(spec)
        self.assertEqual([v.video_id for v in first],
                         [v.video_id for v in second])
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.frames, b.frames)

    def test_seed_changes_output(self):
        first = synth.generate(_spec(noise_std=0.05, seed=0))
        second = synth.generate(_spec(noise_std=0.05, seed=1))
        self.assertFalse(np.array_equal(first[0].frames, second[0].frames))

    def test_labels_and_ids(self):
        videos = synth.generate(_spec([('square', 'left'),
                                       ('triangle', 'rotate')]))
        self.assertEqual(['square-left-000', 'square-left-001',
                          'triangle-rotate-000', 'triangle-rotate-001'],
                         [v.video_id for v in videos])
        self.assertEqual(['square-left'] * 2 + ['triangle-rotate'] * 2,
                         [v.class_label for v in videos])
        self.assertEqual((6, 8, 8, 3), videos[0].frames.shape)

    def test_shapes_share_one_colour(self):
        spec = _spec(size=16)
        pixels = [synth.render_frame(shape, spec, 4, 4)[6, 5]
                  for shape in ('square', 'circle', 'triangle')]
        self.assertTrue(np.all(pixels[0] > 0))
        for pixel in pixels:
            np.testing.assert_array_equal(pixels[0], pixel)

    def test_mirrored_classes_share_mean_frame_statistics(self):
        spec = synth.SynthSpec(
            synth.parse_classes(['square:left', 'square:right']),
            videos_per_class=1, frames=16, size=16, noise_std=0.0, seed=0)
        left = synth.render_video(spec.classes[0], spec, 0, 3)
        right = synth.render_video(spec.classes[1], spec, 0, 3)
        np.testing.assert_allclose(left.mean(axis=0), right.mean(axis=0))

    def test_classes_separable_by_motion_statistics(self):
        spec = synth.SynthSpec(
            synth.parse_classes(['square:left', 'square:right',
                                 'circle:bounce']),
            videos_per_class=5, frames=8, size=16, noise_std=0.1, seed=0)
        videos = synth.generate(spec)

        def motion(frames):
            # agreement of each frame with its predecessor moved one pixel
            now, before = frames[1:], frames[:-1]
            return [(now * np.roll(before, shift, axis=axis)).sum(
                axis=(1, 2, 3)).mean()
                for axis, shift in ((2, -1), (2, 1), (1, -1), (1, 1))]

        features = np.array([motion(v.frames) for v in videos])
        labels = [v.class_label for v in videos]
        names = sorted(set(labels))
        centroids = np.stack([
            features[[i for i, lab in enumerate(labels) if lab == name]]
            .mean(axis=0) for name in names])
        dists = ((features[:, None] - centroids[None]) ** 2).sum(axis=-1)
        predicted = [names[i] for i in dists.argmin(axis=1)]
        accuracy = np.mean([p == t for p, t in zip(predicted, labels)])
        self.assertGreater(accuracy, 0.9)

    def test_write_dataset(self):
        directory = self.make_tempdir()
        videos = synth.generate(_spec(channels=4))
        entries = synth.write_dataset(videos, directory)
        self.assertEqual(entries, store.read_manifest(
            os.path.join(directory, 'manifest.jsonl')))
        self.assertEqual({'video_id': 'square-left-000',
                          'class': 'square-left', 'frame_count': 6,
                          'source': 'square-left-000'}, entries[0])
        frames = store.read_frames(os.path.join(directory,
                                                'square-left-000'))
        self.assertEqual((6, 8, 8, 4), frames.shape)
        np.testing.assert_allclose(videos[0].frames, frames,
                                   atol=0.5 / 255 + 1e-9)
