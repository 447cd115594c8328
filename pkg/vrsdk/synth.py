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

"""Deterministic moving-shape videos with class labels.

A class is a (shape, motion) pair. ``left`` and ``right`` translate the
shape horizontally with wraparound, ``bounce`` moves it up and down
between the frame edges and ``rotate`` carries it around the frame
center. With four channels the last one is a depth ramp over the object.
"""

import collections
import math
import os

import numpy as np
from PIL import Image
from PIL import ImageDraw

from vrsdk import constants as const
from vrsdk import exception
from vrsdk import log
from vrsdk import store


LOG = log.LOG


ClassSpec = collections.namedtuple('ClassSpec', ['shape', 'motion'])

SynthVideo = collections.namedtuple('SynthVideo',
                                    ['video_id', 'class_label', 'frames'])


def class_label(cls):
    return '%s-%s' % (cls.shape, cls.motion)


def parse_classes(items):
    """['square:left', ...] -> [ClassSpec('square', 'left'), ...]"""
    classes = []
    for item in items:
        shape, _, motion = item.partition(':')
        classes.append(ClassSpec(shape.strip(), motion.strip()))
    return classes


class SynthSpec(object):

    def __init__(self, classes, videos_per_class=20, frames=32, size=16,
                 channels=3, noise_std=0.05, seed=0, velocity=1,
                 shape_size=None):
        self.classes = [c if isinstance(c, ClassSpec) else ClassSpec(*c)
                        for c in classes]
        self.videos_per_class = videos_per_class
        self.frames = frames
        self.size = size
        self.channels = channels
        self.noise_std = noise_std
        self.seed = seed
        self.velocity = velocity
        self.shape_size = shape_size or max(3, size // 4)
        self.validate()

    @classmethod
    def from_conf(cls, conf, seed):
        return cls(parse_classes(conf.data.classes),
                   videos_per_class=conf.data.videos_per_class,
                   frames=conf.data.frames,
                   size=conf.model.frame_size,
                   channels=conf.model.input_channels,
                   noise_std=conf.data.noise_std, seed=seed)

    def validate(self):
        if not self.classes:
            raise exception.VRInvalidInput(msg='no synthetic classes')
        if len(set(self.classes)) != len(self.classes):
            raise exception.VRInvalidInput(
                msg='synthetic classes must be distinct (shape, motion) '
                'pairs')
        for c in self.classes:
            if c.shape not in const.SYNTH_SHAPES:
                raise exception.VRInvalidInput(msg='unknown shape %s'
                                               % c.shape)
            if c.motion not in const.SYNTH_MOTIONS:
                raise exception.VRInvalidInput(msg='unknown motion %s'
                                               % c.motion)
        if self.size < 8:
            raise exception.VRInvalidInput(msg='frame size must be >= 8')
        if self.shape_size > self.size:
            raise exception.VRInvalidInput(
                msg='shape of %d pixels does not fit a %d frame'
                % (self.shape_size, self.size))
        if self.channels not in (3, 4):
            raise exception.VRInvalidInput(msg='channels must be 3 or 4')
        if self.frames < 1 or self.videos_per_class < 1:
            raise exception.VRInvalidInput(
                msg='frames and videos_per_class must be >= 1')
        if self.noise_std < 0:
            raise exception.VRInvalidInput(msg='noise_std must be >= 0')


def _mask(shape, size, extent, top, left):
    img = Image.new('L', (size, size), 0)
    draw = ImageDraw.Draw(img)
    box = [left, top, left + extent - 1, top + extent - 1]
    if shape == 'square':
        draw.rectangle(box, fill=255)
    elif shape == 'circle':
        draw.ellipse(box, fill=255)
    else:
        draw.polygon([(left + (extent - 1) / 2.0, top),
                      (left, top + extent - 1),
                      (left + extent - 1, top + extent - 1)], fill=255)
    return np.asarray(img, dtype=np.float64) / 255.0


def render_frame(shape, spec, top, left):
    """One clean frame with the shape's box at (top, left)."""
    mask = _mask(shape, spec.size, spec.shape_size, top, left)
    color = np.asarray(const.SHAPE_COLOR)
    frame = mask[..., None] * color
    if spec.channels == 4:
        rows = np.arange(spec.size, dtype=np.float64)[:, None]
        ramp = 0.5 + 0.5 * (rows - top) / max(spec.shape_size - 1, 1)
        frame = np.concatenate([frame, (mask * ramp)[..., None]], axis=-1)
    return frame


def render_video(cls, spec, phase, row):
    """Noise-free frames for one video.

    ``phase`` is the starting offset along the motion and ``row`` the
    vertical position used by the horizontal motions.
    """
    m, size, extent = spec.frames, spec.size, spec.shape_size
    v = spec.velocity
    if cls.motion in ('left', 'right'):
        base = render_frame(cls.shape, spec, row, 0)
        sign = -1 if cls.motion == 'left' else 1
        return np.stack([np.roll(base, (phase + sign * v * t) % size, axis=1)
                         for t in range(m)])
    frames = []
    travel = size - extent
    for t in range(m):
        if cls.motion == 'bounce':
            pos = (phase + v * t) % (2 * travel) if travel else 0
            top = pos if pos <= travel else 2 * travel - pos
            frames.append(render_frame(cls.shape, spec, top, travel // 2))
        else:
            angle = 2.0 * math.pi * ((phase + v * t) % size) / size
            radius = travel / 2.0
            top = int(round(radius + radius * math.sin(angle)))
            left = int(round(radius + radius * math.cos(angle)))
            frames.append(render_frame(cls.shape, spec, top, left))
    return np.stack(frames)


def generate(spec):
    """All videos of a SynthSpec, class by class; same seed, same output."""
    videos = []
    for c_idx, cls in enumerate(spec.classes):
        label = class_label(cls)
        for v_idx in range(spec.videos_per_class):
            rng = np.random.default_rng([spec.seed, c_idx, v_idx])
            phase = int(rng.integers(spec.size))
            row = int(rng.integers(spec.size - spec.shape_size + 1))
            frames = render_video(cls, spec, phase, row)
            if spec.noise_std:
                frames = frames + rng.normal(0.0, spec.noise_std,
                                             frames.shape)
            videos.append(SynthVideo('%s-%03d' % (label, v_idx), label,
                                     frames))
    LOG.info('Generated %d synthetic videos in %d classes', len(videos),
             len(spec.classes))
    return videos


def write_dataset(videos, directory):
    """PNG sequence per video plus the JSON-lines manifest."""
    entries = []
    for video in videos:
        store.write_frames(video.frames, os.path.join(directory,
                                                      video.video_id))
        entries.append(store.manifest_entry(
            video.video_id, video.class_label, len(video.frames),
            video.video_id))
    store.write_manifest(entries, os.path.join(directory,
                                               const.MANIFEST_NAME))
    return entries
