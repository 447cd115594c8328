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

"""Clip splitting, preprocessing, video IO and the embedding index.

Index file layout, little-endian::

    b'VSEQ1' | u32 version | u32 dim | u64 record_count
    per record: u32 id_len | id | u32 class_len | class (0 = unlabeled)
                u32 clip_count | clip_count x dim float32
"""

import collections
import glob
import json
import math
import os
import struct

import numpy as np
from PIL import Image

from vrsdk import constants as const
from vrsdk import dtw
from vrsdk import exception
from vrsdk import log
from vrsdk import model as vmodel
from vrsdk import utils
from vrsdk import validation
from vrsdk.validation import schemas


LOG = log.LOG

_STOREOPS = None

FRAME_PATTERN = 'frame_%05d.png'


def get_storeops():
    global _STOREOPS
    if _STOREOPS is None:
        _STOREOPS = StoreOps()
    return _STOREOPS


def split_clips(frames, clip_len, stride):
    """Cut (M, *spatial, C) frames into clips of clip_len frames.

    Clip starts advance by stride; a trailing partial clip is dropped.
    """
    if clip_len < 1 or stride < 1:
        raise exception.VRInvalidInput(msg='clip_len and stride must be >= 1')
    frames = np.asarray(frames)
    count = frames.shape[0]
    if count < clip_len:
        raise exception.DimensionError(
            op='split_clips', msg='%d frames, clip needs %d'
            % (count, clip_len))
    starts = range(0, count - clip_len + 1, stride)
    return [frames[s:s + clip_len] for s in starts]


def resample_indices(count, source_fps, target_fps):
    """Nearest source frame for every output frame."""
    if source_fps <= 0 or target_fps <= 0:
        raise exception.VRInvalidInput(msg='frame rates must be positive')
    n_out = int(math.floor(count * float(target_fps) / source_fps))
    ratio = float(source_fps) / target_fps
    return [min(int(math.floor(i * ratio + 0.5)), count - 1)
            for i in range(n_out)]


def _resize_frame(frame, height, width):
    channels = [Image.fromarray(np.ascontiguousarray(
        frame[..., c], dtype=np.float32)).resize(
            (width, height), Image.BILINEAR)
        for c in range(frame.shape[-1])]
    return np.stack([np.asarray(ch, dtype=np.float64) for ch in channels],
                    axis=-1)


def resize_and_crop(frames, target_size):
    """Scale to target_size height keeping aspect, then center-crop square."""
    height, width = frames.shape[1], frames.shape[2]
    new_width = int(round(width * float(target_size) / height))
    if new_width < target_size:
        raise exception.DimensionError(
            op='preprocess', msg='%dx%d frames resize to width %d, '
            'narrower than the %d crop' % (height, width, new_width,
                                           target_size))
    if (height, width) != (target_size, new_width):
        frames = np.stack([_resize_frame(f, target_size, new_width)
                           for f in frames])
    left = (new_width - target_size) // 2
    return frames[:, :, left:left + target_size]


def channel_stats(videos):
    """Per-channel (mean, std) over every frame of every video."""
    total = None
    count = 0
    for video in videos:
        flat = np.asarray(video, dtype=np.float64).reshape(
            -1, np.shape(video)[-1])
        sums = np.stack([flat.sum(axis=0), (flat * flat).sum(axis=0)])
        total = sums if total is None else total + sums
        count += flat.shape[0]
    if not count:
        raise exception.EmptyBatchError(op='channel_stats')
    mean = total[0] / count
    std = np.sqrt(np.maximum(total[1] / count - mean * mean, 0.0))
    std[std == 0] = 1.0
    return mean, std


def standardize(frames, stats):
    mean, std = stats
    return (np.asarray(frames, dtype=np.float64) - mean) / std


def standardize_dataset(videos):
    """Standardize every video with the stats of the whole dataset."""
    videos = list(videos)
    stats = channel_stats(videos)
    return [standardize(v, stats) for v in videos], stats


def preprocess(raw_frames, source_fps=30, target_fps=30, target_size=16,
               stats=None):
    """Resample to target_fps, resize, center-crop and standardize.

    ``stats`` are dataset-wide (mean, std) per channel; without them the
    video is standardized with its own statistics.
    """
    raw = np.asarray(raw_frames, dtype=np.float64)
    if raw.ndim != 4:
        raise exception.DimensionError(
            op='preprocess', msg='expected (M, H, W, C) frames, got %s'
            % (raw.shape,))
    idx = resample_indices(raw.shape[0], source_fps, target_fps)
    if not idx:
        raise exception.DimensionError(
            op='preprocess', msg='no frames left after resampling')
    frames = resize_and_crop(raw[idx], target_size)
    return standardize(frames, stats or channel_stats([frames]))


def embed_video(frames, model, clip_len, stride, video_id=''):
    """Split into clips and encode each one, keeping clip order."""
    if clip_len != model.config.clip_len:
        raise exception.ConfigMismatchError(
            msg='clip_len %d, model expects %d'
            % (clip_len, model.config.clip_len))
    clips = np.stack(split_clips(frames, clip_len, stride))
    return dtw.EmbeddingSequence(vmodel.encode_many(clips, model), video_id)


class VideoRecord(collections.namedtuple(
        'VideoRecord', ['video_id', 'class_label', 'embeddings'])):
    __slots__ = ()


class VideoIndex(object):
    """Immutable set of records sharing one embedding dimension."""

    def __init__(self, records, dim=None):
        records = list(records)
        if dim is None:
            if not records:
                raise exception.VRInvalidInput(
                    msg='an empty index needs an explicit dimension')
            dim = records[0].embeddings.dim
        seen = set()
        for record in records:
            if record.video_id in seen:
                raise exception.DuplicateRecordError(
                    video_id=record.video_id)
            seen.add(record.video_id)
            if record.embeddings.dim != dim:
                raise exception.IndexDimensionMismatch(
                    video_id=record.video_id, dim=record.embeddings.dim,
                    expected=dim)
        self.dim = dim
        self._records = tuple(records)
        self._by_id = dict((r.video_id, r) for r in records)

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    @property
    def records(self):
        return list(self._records)

    def get(self, video_id):
        try:
            return self._by_id[video_id]
        except KeyError:
            raise exception.NotFound(msg='video %s is not indexed'
                                     % video_id)

    def class_counts(self):
        counts = collections.Counter(r.class_label for r in self._records
                                     if r.class_label is not None)
        return dict(counts)


def index_to_bytes(index):
    chunks = [const.INDEX_MAGIC,
              struct.pack('<IIQ', const.INDEX_VERSION, index.dim,
                          len(index))]
    for record in index:
        chunks.append(utils.pack_text(record.video_id))
        chunks.append(utils.pack_text(record.class_label or ''))
        vectors = np.ascontiguousarray(record.embeddings.vectors,
                                       dtype='<f4')
        chunks.append(struct.pack('<I', vectors.shape[0]))
        chunks.append(vectors.tobytes())
    return b''.join(chunks)


def index_from_bytes(payload, path='<memory>'):
    reader = utils.BinaryReader(payload, path)
    records = []
    with utils.expect_valid_binary(path):
        magic = reader.take(len(const.INDEX_MAGIC))
        if magic != const.INDEX_MAGIC:
            raise exception.CorruptMagicError(path=path, magic=magic,
                                              expected=const.INDEX_MAGIC)
        version = reader.u32()
        if version != const.INDEX_VERSION:
            raise exception.UnsupportedVersionError(path=path,
                                                    version=version)
        dim = reader.u32()
        count = reader.u64()
        for _ in range(count):
            video_id = reader.text()
            class_label = reader.text() or None
            clips = reader.u32()
            if clips == 0:
                raise exception.PersistenceError(
                    path=path, msg='record %s has no clips' % video_id)
            vectors = np.frombuffer(reader.take(4 * clips * dim),
                                    dtype='<f4').reshape(clips, dim)
            records.append(VideoRecord(
                video_id, class_label,
                dtw.EmbeddingSequence(vectors.astype(np.float64),
                                      video_id)))
        if reader.remaining():
            raise exception.PersistenceError(
                path=path, msg='%d trailing bytes' % reader.remaining())
    return VideoIndex(records, dim)


def index_write(index, path):
    utils.atomic_write(path, index_to_bytes(index))
    LOG.info('Wrote %d records to index %s', len(index), path)


def index_read(path):
    with utils.expect_readable(path):
        with open(path, 'rb') as f:
            payload = f.read()
    return index_from_bytes(payload, path)


def manifest_entry(video_id, class_label, frame_count, source):
    return {'video_id': video_id, 'class': class_label,
            'frame_count': int(frame_count), 'source': source}


def write_manifest(entries, path):
    lines = []
    for entry in entries:
        validation.validate(schemas.manifest_entry, entry, 'manifest entry')
        lines.append(json.dumps(entry, sort_keys=True))
    payload = ('\n'.join(lines) + '\n') if lines else ''
    utils.atomic_write(path, payload.encode('utf-8'))


def read_manifest(path):
    entries = []
    with utils.expect_readable(path):
        with open(path) as f:
            lines = f.readlines()
    for number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except ValueError as err:
            raise exception.ValidationError(
                detail='%s line %d: %s' % (path, number, err))
        validation.validate(schemas.manifest_entry, entry,
                            '%s line %d' % (path, number))
        entries.append(entry)
    return entries


def write_frames(frames, directory):
    """Write (M, H, W, C) frames in [0, 1] as PNGs; C is 3 (RGB) or 4."""
    frames = np.asarray(frames)
    modes = {3: 'RGB', 4: 'RGBA'}
    if frames.ndim != 4 or frames.shape[-1] not in modes:
        raise exception.DimensionError(
            op='write_frames', msg='cannot store frames of shape %s'
            % (frames.shape,))
    if not os.path.isdir(directory):
        os.makedirs(directory)
    pixels = np.clip(np.round(frames * 255.0), 0, 255).astype(np.uint8)
    for i, frame in enumerate(pixels):
        Image.fromarray(frame).save(
            os.path.join(directory, FRAME_PATTERN % i))


def read_frames(source):
    """Load a video from a PNG sequence directory or a .npy array."""
    if source.endswith('.npy'):
        with utils.expect_readable(source):
            return np.load(source).astype(np.float64)
    names = sorted(glob.glob(os.path.join(source, '*.png')))
    if not names:
        raise exception.NotFound(msg='no frames under %s' % source)
    frames = []
    for name in names:
        with Image.open(name) as img:
            frames.append(np.asarray(img, dtype=np.float64) / 255.0)
    return np.stack(frames)


class StoreOps(object):
    """Dataset loading and index building on top of the functions above."""

    def __init__(self):
        self._pathutils = utils.PathUtils()

    def load_dataset(self, data_dir, source_fps=30, target_fps=30,
                     target_size=None):
        """Read every manifest video and standardize with dataset stats.

        Returns (entries, frames list) in manifest order.
        """
        entries = read_manifest(self._pathutils.manifest(data_dir))
        raw = []
        for entry in entries:
            source = entry['source']
            if not os.path.isabs(source):
                source = os.path.join(data_dir, source)
            frames = read_frames(source)
            idx = resample_indices(frames.shape[0], source_fps, target_fps)
            frames = frames[idx]
            if target_size is not None:
                frames = resize_and_crop(frames, target_size)
            raw.append(frames)
        videos, stats = standardize_dataset(raw) if raw else ([], None)
        LOG.info('Loaded %d videos from %s', len(videos), data_dir)
        return entries, videos

    def build_index(self, entries, videos, model, clip_len, stride):
        records = []
        for entry, frames in zip(entries, videos):
            if frames.shape[0] < clip_len:
                LOG.warning('Video %s has %d frames, shorter than a clip; '
                            'not indexed', entry['video_id'],
                            frames.shape[0])
                continue
            records.append(VideoRecord(
                entry['video_id'], entry['class'],
                embed_video(frames, model, clip_len, stride,
                            entry['video_id'])))
        return VideoIndex(records, model.config.embedding_dim)


def collect_clips(videos, clip_len, stride):
    """Stack the clips of (class_label, frames) pairs with their labels."""
    clips, labels = [], []
    for label, frames in videos:
        if len(frames) < clip_len:
            continue
        for clip in split_clips(frames, clip_len, stride):
            clips.append(clip)
            labels.append(label)
    if not clips:
        raise exception.EmptyBatchError(op='collect_clips')
    return np.stack(clips), labels
