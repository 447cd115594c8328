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
import struct

import mock
import numpy as np

from vrsdk import constants as const
from vrsdk import dtw
from vrsdk import exception
from vrsdk import model as vmodel
from vrsdk import store
import vrsdk.utils as vrutils
from vrsdk.tests.unit import base


def _record(video_id, vectors, class_label=None):
    return store.VideoRecord(video_id, class_label,
                             dtw.EmbeddingSequence(vectors, video_id))


class SplitClipsTestCase(base.SDKTestCase):

    def setUp(self):
        super(SplitClipsTestCase, self).setUp()
        self.frames = np.arange(10, dtype=np.float64).reshape(10, 1, 1, 1)

    def _starts(self, clips):
        return [int(c[0, 0, 0, 0]) for c in clips]

    def test_disjoint(self):
        clips = store.split_clips(self.frames, 5, 5)
        self.assertEqual([0, 5], self._starts(clips))
        np.testing.assert_array_equal(self.frames[5:], clips[1])

    def test_overlapping(self):
        clips = store.split_clips(self.frames, 4, 2)
        self.assertEqual([0, 2, 4, 6], self._starts(clips))
        self.assertTrue(all(c.shape == (4, 1, 1, 1) for c in clips))

    def test_single_clip(self):
        clips = store.split_clips(self.frames, 10, 3)
        self.assertEqual(1, len(clips))
        np.testing.assert_array_equal(self.frames, clips[0])

    def test_remainder_dropped(self):
        clips = store.split_clips(self.frames, 3, 3)
        self.assertEqual(3, len(clips))
        np.testing.assert_array_equal(self.frames[:9],
                                      np.concatenate(clips))

    def test_too_short(self):
        self.assertRaises(exception.DimensionError, store.split_clips,
                          self.frames[:2], 3, 1)

    def test_bad_stride(self):
        self.assertRaises(exception.VRInvalidInput, store.split_clips,
                          self.frames, 2, 0)


class PreprocessTestCase(base.SDKTestCase):

    def test_resample_halves(self):
        self.assertEqual([0, 2, 4, 6, 8],
                         store.resample_indices(10, 60, 30))

    def test_resample_same_rate(self):
        self.assertEqual(list(range(7)), store.resample_indices(7, 30, 30))

    def test_resample_bad_rate(self):
        self.assertRaises(exception.VRInvalidInput,
                          store.resample_indices, 7, 0, 30)

    def test_resize_and_crop(self):
        frames = self.rng.uniform(size=(2, 8, 16, 3))
        self.assertEqual((2, 4, 4, 3),
                         store.resize_and_crop(frames, 4).shape)

    def test_crop_only(self):
        frames = self.rng.uniform(size=(2, 4, 8, 3))
        np.testing.assert_array_equal(frames[:, :, 2:6],
                                      store.resize_and_crop(frames, 4))

    def test_too_narrow(self):
        frames = self.rng.uniform(size=(1, 8, 4, 3))
        self.assertRaises(exception.DimensionError,
                          store.resize_and_crop, frames, 4)

    def test_identity(self):
        frames = self.rng.uniform(size=(5, 6, 6, 3))
        stats = (np.zeros(3), np.ones(3))
        np.testing.assert_array_equal(
            frames, store.preprocess(frames, 30, 30, 6, stats))

    def test_frame_rate_and_shape(self):
        frames = self.rng.uniform(size=(12, 6, 6, 3))
        out = store.preprocess(frames, 60, 30, 6)
        self.assertEqual((6, 6, 6, 3), out.shape)

    def test_bad_rank(self):
        self.assertRaises(exception.DimensionError, store.preprocess,
                          np.zeros((4, 6, 6)))

    def test_standardize_dataset(self):
        videos = [self.rng.normal(3.0, 2.0, size=(4, 5, 5, 3)),
                  self.rng.normal(-1.0, 0.5, size=(6, 5, 5, 3))]
        out, stats = store.standardize_dataset(videos)
        flat = np.concatenate([v.reshape(-1, 3) for v in out])
        self.assertTrue(np.all(np.abs(flat.mean(axis=0)) < 1e-6))
        self.assertTrue(np.all(np.abs(flat.std(axis=0) - 1.0) < 1e-3))
        self.assertEqual((3,), stats[0].shape)

    def test_constant_channel(self):
        mean, std = store.channel_stats([np.ones((2, 2, 2, 1))])
        self.assertEqual([1.0], list(mean))
        self.assertEqual([1.0], list(std))

    def test_stats_of_nothing(self):
        self.assertRaises(exception.EmptyBatchError, store.channel_stats, [])


class EmbedVideoTestCase(base.SDKTestCase):

    def setUp(self):
        super(EmbedVideoTestCase, self).setUp()
        self.model = vmodel.build_model(base.tiny_config('m1'))
        self.frames = self.rng.normal(size=(5, 8, 8, 3))

    def test_length_is_clip_count(self):
        seq = store.embed_video(self.frames, self.model, 2, 2, 'v')
        self.assertEqual(2, len(seq))
        self.assertEqual(4, seq.dim)
        self.assertEqual('v', seq.video_id)

    def test_matches_single_encode(self):
        seq = store.embed_video(self.frames, self.model, 2, 1)
        for i, clip in enumerate(store.split_clips(self.frames, 2, 1)):
            np.testing.assert_allclose(vmodel.encode(clip, self.model),
                                       seq.vectors[i], atol=1e-10)

    def test_deterministic(self):
        first = store.embed_video(self.frames, self.model, 2, 2)
        second = store.embed_video(self.frames, self.model, 2, 2)
        np.testing.assert_array_equal(first.vectors, second.vectors)

    def test_clip_len_mismatch(self):
        self.assertRaises(exception.ConfigMismatchError, store.embed_video,
                          self.frames, self.model, 3, 3)


class VideoIndexTestCase(base.SDKTestCase):

    def setUp(self):
        super(VideoIndexTestCase, self).setUp()
        self.index = store.VideoIndex([
            _record('a', self.rng.normal(size=(3, 4)), 'left'),
            _record('b', self.rng.normal(size=(1, 4)), 'left'),
            _record('c', self.rng.normal(size=(2, 4)))])

    def test_basics(self):
        self.assertEqual(3, len(self.index))
        self.assertEqual(4, self.index.dim)
        self.assertEqual(['a', 'b', 'c'],
                         [r.video_id for r in self.index])
        self.assertEqual('b', self.index.get('b').video_id)

    def test_class_counts(self):
        self.assertEqual({'left': 2}, self.index.class_counts())

    def test_get_missing(self):
        self.assertRaises(exception.NotFound, self.index.get, 'z')

    def test_duplicate(self):
        self.assertRaises(exception.DuplicateRecordError, store.VideoIndex,
                          [_record('a', np.zeros((1, 4))),
                           _record('a', np.ones((1, 4)))])

    def test_dimension_mismatch(self):
        self.assertRaises(exception.IndexDimensionMismatch, store.VideoIndex,
                          [_record('a', np.zeros((1, 4))),
                           _record('b', np.zeros((1, 3)))])

    def test_empty_needs_dim(self):
        self.assertRaises(exception.VRInvalidInput, store.VideoIndex, [])
        self.assertEqual(0, len(store.VideoIndex([], dim=4)))


class IndexFileTestCase(base.SDKTestCase):

    def setUp(self):
        super(IndexFileTestCase, self).setUp()
        self.index = store.VideoIndex([
            _record('a', self.rng.normal(size=(3, 4)), 'left'),
            _record(u'vidéo', self.rng.normal(size=(2, 4)))])
        self.payload = store.index_to_bytes(self.index)

    def test_header(self):
        self.assertEqual(b'VSEQ1', self.payload[:5])
        self.assertEqual((1, 4, 2),
                         struct.unpack('<IIQ', self.payload[5:21]))

    def test_rewrite_is_byte_identical(self):
        restored = store.index_from_bytes(self.payload)
        self.assertEqual(self.payload, store.index_to_bytes(restored))

    def test_records_restored(self):
        restored = store.index_from_bytes(self.payload)
        first, second = restored.records
        self.assertEqual('left', first.class_label)
        self.assertIsNone(second.class_label)
        self.assertEqual(u'vidéo', second.video_id)
        np.testing.assert_array_equal(
            self.index.records[0].embeddings.vectors.astype(np.float32),
            first.embeddings.vectors)

    def test_empty_index(self):
        payload = store.index_to_bytes(store.VideoIndex([], dim=4))
        self.assertEqual(21, len(payload))
        self.assertEqual(const.INDEX_HEADER_SIZE, len(payload))
        restored = store.index_from_bytes(payload)
        self.assertEqual(0, len(restored))
        self.assertEqual(4, restored.dim)

    def test_bad_magic(self):
        self.assertRaises(exception.CorruptMagicError,
                          store.index_from_bytes,
                          b'XSEQ1' + self.payload[5:])

    def test_bad_version(self):
        payload = self.payload[:5] + struct.pack('<I', 2) + self.payload[9:]
        self.assertRaises(exception.UnsupportedVersionError,
                          store.index_from_bytes, payload)

    def test_truncated(self):
        for cut in (3, 12, 30, len(self.payload) - 1):
            self.assertRaises(exception.TruncatedFileError,
                              store.index_from_bytes, self.payload[:cut])

    def test_trailing_bytes(self):
        self.assertRaises(exception.PersistenceError,
                          store.index_from_bytes, self.payload + b'\x00')

    def test_record_without_clips(self):
        payload = (b'VSEQ1' + struct.pack('<IIQ', 1, 4, 1) +
                   vrutils.pack_text(u'a') + vrutils.pack_text(u'left') +
                   struct.pack('<I', 0))
        try:
            store.index_from_bytes(payload)
        except exception.SDKBaseException as err:
            self.assertEqual('persistence', err.kind)
        else:
            self.fail('zero-clip record accepted')

    def test_write_read(self):
        path = os.path.join(self.make_tempdir(), 'index.vseq')
        store.index_write(self.index, path)
        with open(path, 'rb') as f:
            self.assertEqual(self.payload, f.read())
        self.assertEqual(2, len(store.index_read(path)))

    def test_read_missing(self):
        self.assertRaises(exception.NotFound, store.index_read,
                          os.path.join(self.make_tempdir(), 'nope.vseq'))


class ManifestTestCase(base.SDKTestCase):

    def setUp(self):
        super(ManifestTestCase, self).setUp()
        self.path = os.path.join(self.make_tempdir(), 'manifest.jsonl')

    def test_write_read(self):
        entries = [store.manifest_entry('a', 'left', 12, 'a'),
                   store.manifest_entry('b', None, 3, '/tmp/b.npy')]
        store.write_manifest(entries, self.path)
        self.assertEqual(entries, store.read_manifest(self.path))

    def test_invalid_entry_not_written(self):
        entry = store.manifest_entry('../a', None, 1, 'a')
        self.assertRaises(exception.ValidationError, store.write_manifest,
                          [entry], self.path)
        self.assertFalse(os.path.exists(self.path))

    def test_bad_json(self):
        with open(self.path, 'w') as f:
            f.write('{"video_id": "a"\n')
        self.assertRaises(exception.ValidationError, store.read_manifest,
                          self.path)

    def test_missing_field(self):
        with open(self.path, 'w') as f:
            f.write('{"video_id": "a", "class": null}\n')
        self.assertRaises(exception.ValidationError, store.read_manifest,
                          self.path)


class FrameIOTestCase(base.SDKTestCase):

    def test_png_roundtrip(self):
        for channels in (3, 4):
            directory = os.path.join(self.make_tempdir(), 'video')
            frames = self.rng.uniform(size=(3, 5, 6, channels))
            store.write_frames(frames, directory)
            self.assertEqual(['frame_00000.png', 'frame_00001.png',
                              'frame_00002.png'],
                             sorted(os.listdir(directory)))
            restored = store.read_frames(directory)
            self.assertEqual(frames.shape, restored.shape)
            self.assertTrue(np.all(np.abs(frames - restored) <= 0.5 / 255 +
                                   1e-9))

    def test_npy(self):
        path = os.path.join(self.make_tempdir(), 'clip.npy')
        frames = self.rng.normal(size=(2, 3, 3, 1))
        np.save(path, frames)
        np.testing.assert_array_equal(frames, store.read_frames(path))

    def test_bad_channels(self):
        self.assertRaises(exception.DimensionError, store.write_frames,
                          np.zeros((1, 2, 2, 2)), self.make_tempdir())

    def test_no_frames(self):
        self.assertRaises(exception.NotFound, store.read_frames,
                          self.make_tempdir())


class StoreOpsTestCase(base.SDKTestCase):

    def setUp(self):
        super(StoreOpsTestCase, self).setUp()
        self.ops = store.StoreOps()
        self.data_dir = self.make_tempdir()
        entries = []
        for video_id, label, count in (('a', 'left', 4), ('b', None, 1)):
            store.write_frames(self.rng.uniform(size=(count, 8, 8, 3)),
                               os.path.join(self.data_dir, video_id))
            entries.append(store.manifest_entry(video_id, label, count,
                                                video_id))
        store.write_manifest(entries,
                             os.path.join(self.data_dir, 'manifest.jsonl'))

    def test_load_dataset(self):
        entries, videos = self.ops.load_dataset(self.data_dir)
        self.assertEqual(['a', 'b'], [e['video_id'] for e in entries])
        self.assertEqual([(4, 8, 8, 3), (1, 8, 8, 3)],
                         [v.shape for v in videos])
        flat = np.concatenate([v.reshape(-1, 3) for v in videos])
        self.assertTrue(np.all(np.abs(flat.mean(axis=0)) < 1e-6))

    def test_load_dataset_resizes(self):
        entries, videos = self.ops.load_dataset(self.data_dir,
                                                target_size=4)
        self.assertEqual((4, 4, 4, 3), videos[0].shape)

    def test_build_index_skips_short_videos(self):
        entries, videos = self.ops.load_dataset(self.data_dir)
        model = vmodel.build_model(base.tiny_config('m1'))
        with mock.patch.object(store.LOG, 'warning') as warning:
            index = self.ops.build_index(entries, videos, model, 2, 2)
        self.assertEqual(['a'], [r.video_id for r in index])
        self.assertEqual('left', index.get('a').class_label)
        self.assertEqual(2, len(index.get('a').embeddings))
        self.assertEqual(1, warning.call_count)

    def test_collect_clips(self):
        videos = [('left', np.zeros((5, 2, 2, 1))),
                  (None, np.ones((2, 2, 2, 1))),
                  ('right', np.ones((1, 2, 2, 1)))]
        clips, labels = store.collect_clips(videos, 2, 2)
        self.assertEqual((3, 2, 2, 2, 1), clips.shape)
        self.assertEqual(['left', 'left', None], labels)

    def test_collect_nothing(self):
        self.assertRaises(exception.EmptyBatchError, store.collect_clips,
                          [('left', np.zeros((1, 2, 2, 1)))], 2, 1)
