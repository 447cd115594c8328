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


import contextlib
import copy
import json

import numpy as np

from vrsdk import blocks
from vrsdk import constants as const
from vrsdk import exception
from vrsdk import layers
from vrsdk import log
from vrsdk import tensor as vt


LOG = log.LOG

_FIELDS = ('variant', 'spatial_rank', 'input_channels', 'frame_size',
           'frame_depth', 'clip_len', 'encoder_hidden', 'residual_hidden',
           'projection_channels', 'decoder_hidden', 'latent_channels',
           'embedding_dim', 'kernel_size', 'leaky_slope', 'transformer',
           'init_seed')


class ModelConfig(object):
    """Declarative description of one model variant.

    The encoder is always three LRBP (L3RBP for spatial rank 3) blocks;
    the decoder block type follows the variant.
    """

    def __init__(self, variant='m1', spatial_rank=2, input_channels=None,
                 frame_size=16, frame_depth=8, clip_len=4,
                 encoder_hidden=(4, 4, 4), residual_hidden=(4, 4, 4),
                 projection_channels=(4, 4, 4), decoder_hidden=(4, 4, 4),
                 latent_channels=4, embedding_dim=32, kernel_size=3,
                 leaky_slope=const.LEAKY_SLOPE, transformer=None,
                 init_seed=0):
        self.variant = variant.lower()
        self.spatial_rank = int(spatial_rank)
        if input_channels is None:
            input_channels = 4 if self.variant.endswith('-3d') else 3
        self.input_channels = int(input_channels)
        self.frame_size = int(frame_size)
        self.frame_depth = int(frame_depth)
        self.clip_len = int(clip_len)
        self.encoder_hidden = [int(v) for v in encoder_hidden]
        self.residual_hidden = [int(v) for v in residual_hidden]
        self.projection_channels = [int(v) for v in projection_channels]
        self.decoder_hidden = [int(v) for v in decoder_hidden]
        self.latent_channels = int(latent_channels)
        self.embedding_dim = int(embedding_dim)
        self.kernel_size = int(kernel_size)
        self.leaky_slope = float(leaky_slope)
        self.transformer = dict(transformer or {
            'layers': 1, 'heads': 2, 'hidden': 16, 'intermediate': 32})
        self.init_seed = int(init_seed)
        self.validate()

    @classmethod
    def full_scale(cls, variant='m3'):
        return cls(variant=variant, frame_size=256, frame_depth=64,
                   clip_len=3, encoder_hidden=(32, 32, 32),
                   residual_hidden=(32, 32, 32),
                   projection_channels=(16, 16, 16),
                   decoder_hidden=(32, 32, 32), latent_channels=16,
                   embedding_dim=4000,
                   transformer={'layers': 5, 'heads': 3, 'hidden': 512,
                                'intermediate': 2048})

    @classmethod
    def from_conf(cls, model_conf):
        return cls(variant=model_conf.variant,
                   spatial_rank=model_conf.spatial_rank,
                   input_channels=model_conf.input_channels,
                   frame_size=model_conf.frame_size,
                   frame_depth=model_conf.frame_depth,
                   clip_len=model_conf.clip_len,
                   encoder_hidden=model_conf.encoder_hidden,
                   residual_hidden=model_conf.residual_hidden,
                   projection_channels=model_conf.projection_channels,
                   decoder_hidden=model_conf.decoder_hidden,
                   latent_channels=model_conf.latent_channels,
                   embedding_dim=model_conf.embedding_dim,
                   kernel_size=model_conf.kernel_size,
                   leaky_slope=model_conf.leaky_slope,
                   transformer={
                       'layers': model_conf.transformer_layers,
                       'heads': model_conf.transformer_heads,
                       'hidden': model_conf.transformer_hidden,
                       'intermediate': model_conf.transformer_intermediate},
                   init_seed=model_conf.init_seed)

    @classmethod
    def from_dict(cls, values):
        unknown = set(values) - set(_FIELDS)
        if unknown:
            raise exception.VRInvalidInput(
                msg='unknown model config fields %s' % sorted(unknown))
        return cls(**values)

    def to_dict(self):
        return dict((name, copy.deepcopy(getattr(self, name)))
                    for name in _FIELDS)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, ModelConfig) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def validate(self):
        if self.variant not in const.MODEL_VARIANTS:
            raise exception.VRInvalidInput(
                msg='unknown model variant %s' % self.variant)
        if self.spatial_rank not in (2, 3):
            raise exception.VRInvalidInput(msg='spatial_rank must be 2 or 3')
        if self.spatial_rank == 3 and not self.variant.endswith('-3d'):
            raise exception.VRInvalidInput(
                msg='volumetric input needs a 3D variant, got %s'
                % self.variant)
        extents = [self.frame_size]
        if self.spatial_rank == 3:
            extents.append(self.frame_depth)
        for extent in extents:
            if extent < 8 or extent % 8:
                raise exception.VRInvalidInput(
                    msg='spatial extent %d must be a positive multiple of 8'
                    % extent)
        for name in ('encoder_hidden', 'residual_hidden',
                     'projection_channels', 'decoder_hidden'):
            values = getattr(self, name)
            if len(values) != 3 or min(values) < 1:
                raise exception.VRInvalidInput(
                    msg='%s needs three positive entries' % name)
        for name in ('input_channels', 'clip_len', 'latent_channels',
                     'embedding_dim'):
            if getattr(self, name) < 1:
                raise exception.VRInvalidInput(msg='%s must be >= 1' % name)
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise exception.VRInvalidInput(msg='kernel_size must be odd')
        if not 0.0 < self.leaky_slope < 1.0:
            raise exception.VRInvalidInput(msg='leaky_slope must be in (0,1)')

    @property
    def encoder_kind(self):
        return const.VARIANT_BLOCKS[self.variant][0]

    @property
    def decoder_kind(self):
        return const.VARIANT_BLOCKS[self.variant][1]

    @property
    def spatial(self):
        if self.spatial_rank == 3:
            return (self.frame_depth, self.frame_size, self.frame_size)
        return (self.frame_size, self.frame_size)

    @property
    def clip_shape(self):
        return (self.clip_len,) + self.spatial + (self.input_channels,)

    @property
    def latent_spatial(self):
        return tuple(e // 8 for e in self.spatial)

    @property
    def latent_features(self):
        return int(np.prod(self.latent_spatial)) * self.latent_channels


def shape_trace(config):
    """Per-stage spatial shapes (without T) computed from config alone."""
    trace = []
    spatial = config.spatial
    channels = config.input_channels
    for i in range(3):
        merged = 2 * config.encoder_hidden[i] + config.residual_hidden[i]
        trace.append(('residual', spatial + (merged,)))
        spatial = tuple(e // 2 for e in spatial)
        channels = config.projection_channels[i]
        trace.append(('pooled', spatial + (channels,)))
    trace.append(('embedding', (config.embedding_dim,)))
    spatial = config.latent_spatial
    channels = config.latent_channels
    trace.append(('latent', spatial + (channels,)))
    name = {'urb': 'urb', 'r3bp': 'urb', 'uqb': 'quasi', 'u4db': 'quasi',
            'utb': 'utb'}[config.decoder_kind]
    if name == 'utb':
        trace.append(('attention', spatial + (channels,)))
    for hidden in config.decoder_hidden:
        spatial = tuple(e * 2 for e in spatial)
        channels += hidden
        trace.append((name, spatial + (channels,)))
    trace.append(('output', spatial + (config.input_channels,)))
    return trace


class Encoder(layers.Layer):
    """Three LRBP blocks, temporal mean, dense to the embedding."""

    def __init__(self, config, rng):
        super(Encoder, self).__init__()
        self.config = config
        self.blocks = []
        in_ch = config.input_channels
        for i in range(3):
            block = blocks.LRBPBlock(
                in_ch, config.encoder_hidden[i], config.residual_hidden[i],
                config.projection_channels[i], config.spatial_rank,
                config.kernel_size, config.leaky_slope, rng)
            self.blocks.append(self.add_child('block%d' % i, block))
            in_ch = block.out_ch
        features = int(np.prod(config.latent_spatial)) * in_ch
        self.dense = self.add_child('dense', layers.Dense(
            features, config.embedding_dim, rng))

    def __call__(self, clips, trace=None):
        x = clips
        for block in self.blocks:
            x = block(x, trace)
        pooled = x.mean(axis=1)
        out = self.dense(pooled)
        if trace is not None:
            trace.append(('embedding', tuple(out.shape[1:])))
        return out


class Decoder(layers.Layer):
    """Dense to the latent grid, repeat over time, three decoder blocks.

    The final layer is a linear convolution back to the input channels.
    """

    def __init__(self, config, rng):
        super(Decoder, self).__init__()
        self.config = config
        rank = config.spatial_rank
        k = config.kernel_size
        slope = config.leaky_slope
        self.dense = self.add_child('dense', layers.Dense(
            config.embedding_dim, config.latent_features, rng))
        self.transformer = None
        kind = config.decoder_kind
        if kind == 'utb':
            tcfg = config.transformer
            self.transformer = self.add_child(
                'transformer', blocks.LatentTransformer(
                    config.latent_features, tcfg['hidden'], tcfg['heads'],
                    tcfg['intermediate'], tcfg['layers'], slope, rng))
        self.blocks = []
        in_ch = config.latent_channels
        for i, hidden in enumerate(config.decoder_hidden):
            if kind in ('urb', 'r3bp'):
                block = blocks.URBBlock(in_ch, hidden, rank, k, slope, rng)
            elif kind in ('uqb', 'u4db'):
                block = blocks.QuasiBlock(in_ch, hidden, rank, k, slope, rng)
            else:
                block = blocks.UTBStage(in_ch, hidden, rank, k, slope, rng)
            self.blocks.append(self.add_child('block%d' % i, block))
            in_ch = block.out_ch
        self.head = self.add_child('head', layers.Conv(
            in_ch, config.input_channels, (k,) * rank, rng))

    def __call__(self, embeddings, trace=None):
        cfg = self.config
        if embeddings.shape[-1] != cfg.embedding_dim:
            raise exception.ConfigMismatchError(
                msg='embedding length %d, model expects %d'
                % (embeddings.shape[-1], cfg.embedding_dim))
        b = embeddings.shape[0]
        latent = self.dense(embeddings).reshape(
            (b, 1) + cfg.latent_spatial + (cfg.latent_channels,))
        ones = np.ones((1, cfg.clip_len) + (1,) * (cfg.spatial_rank + 1))
        x = latent * vt.Tensor(ones)
        if trace is not None:
            trace.append(('latent', tuple(x.shape[2:])))
        if self.transformer is not None:
            x = blocks.block_utb(x, self.transformer, self.blocks, trace)
        else:
            for block in self.blocks:
                x = block(x, trace)
        out = layers.per_frame(self.head, x)
        if trace is not None:
            trace.append(('output', tuple(out.shape[2:])))
        return out


class VideoAutoEncoder(layers.Layer):
    """Encoder and decoder joined only through the embedding vector."""

    def __init__(self, config):
        super(VideoAutoEncoder, self).__init__()
        self.config = config
        rng = np.random.default_rng(config.init_seed)
        self.encoder = self.add_child('encoder', Encoder(config, rng))
        self.decoder = self.add_child('decoder', Decoder(config, rng))
        self.assign_names()

    def check_clips(self, clips):
        expected = self.config.clip_shape
        if tuple(clips.shape[1:]) != expected:
            raise exception.ConfigMismatchError(
                msg='clip shape %s, model expects %s'
                % (tuple(clips.shape[1:]), expected))

    def encode_batch(self, clips, trace=None):
        clips = vt.ensure_tensor(clips)
        self.check_clips(clips)
        return self.encoder(clips, trace)

    def decode_batch(self, embeddings, trace=None):
        return self.decoder(vt.ensure_tensor(embeddings), trace)

    def reconstruct(self, clips):
        return self.decode_batch(self.encode_batch(clips))

    @contextlib.contextmanager
    def inference(self):
        """Run with running normalization statistics and no tape.

        The previous mode is restored on exit.
        """
        previous = self.training
        self.eval()
        try:
            with vt.no_grad():
                yield self
        finally:
            self.train(previous)

    def state(self):
        return dict((p.name, p.data.copy()) for p in self.parameters())

    def load_state(self, state):
        for param in self.parameters():
            param.assign(state[param.name])


def build_model(config):
    model = VideoAutoEncoder(config)
    LOG.debug('Built %s model with %d trainable parameters'
              % (config.variant, model.count_parameters()))
    return model


def encode(clip, model):
    """Embed one clip (T, *spatial, C); returns a 1-D float array."""
    clip = np.asarray(clip, dtype=vt.DTYPE)
    with model.inference():
        return model.encode_batch(clip[None]).data[0].copy()


def encode_many(clips, model, batch_size=32):
    """Embed a stack of clips in batches; rows equal single encode calls."""
    clips = np.asarray(clips, dtype=vt.DTYPE)
    out = []
    with model.inference():
        for start in range(0, len(clips), batch_size):
            out.append(model.encode_batch(
                clips[start:start + batch_size]).data.copy())
    if not out:
        return np.zeros((0, model.config.embedding_dim))
    return np.concatenate(out, axis=0)


def decode(embedding, model):
    """Reconstruct one clip from one embedding vector."""
    embedding = np.asarray(embedding, dtype=vt.DTYPE)
    with model.inference():
        return model.decode_batch(embedding[None]).data[0].copy()
