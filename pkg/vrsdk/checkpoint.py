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

"""Model checkpoints.

Layout, little-endian throughout::

    b'VCKPT1' | u32 version | u32 config_len | config JSON (utf-8)
    u32 param_count
    per param: u32 name_len | name | u32 rank | rank x u32 dims | float32 data

Parameters are written in model order, running normalization statistics
included.
"""

import json
import struct

import numpy as np

from vrsdk import constants as const
from vrsdk import exception
from vrsdk import log
from vrsdk import model as vmodel
from vrsdk import utils


LOG = log.LOG


def to_bytes(model):
    params = model.parameters()
    chunks = [const.CHECKPOINT_MAGIC,
              struct.pack('<I', const.CHECKPOINT_VERSION)]
    chunks.append(utils.pack_text(model.config.to_json()))
    chunks.append(struct.pack('<I', len(params)))
    for param in params:
        data = np.ascontiguousarray(param.data, dtype='<f4')
        chunks.append(utils.pack_text(param.name))
        chunks.append(struct.pack('<I', data.ndim))
        chunks.append(struct.pack('<%dI' % data.ndim, *data.shape))
        chunks.append(data.tobytes())
    return b''.join(chunks)


def from_bytes(payload, path='<memory>'):
    """Rebuild a model; every stored tensor must match the config's."""
    reader = utils.BinaryReader(payload, path)
    with utils.expect_valid_binary(path):
        magic = reader.take(len(const.CHECKPOINT_MAGIC))
        if magic != const.CHECKPOINT_MAGIC:
            raise exception.CorruptMagicError(
                path=path, magic=magic, expected=const.CHECKPOINT_MAGIC)
        version = reader.u32()
        if version != const.CHECKPOINT_VERSION:
            raise exception.UnsupportedVersionError(path=path,
                                                    version=version)
        config = vmodel.ModelConfig.from_dict(json.loads(reader.text()))
        model = vmodel.VideoAutoEncoder(config)
        expected = dict((p.name, p) for p in model.parameters())
        count = reader.u32()
        if count != len(expected):
            raise exception.PersistenceError(
                path=path, msg='%d tensors stored, model has %d'
                % (count, len(expected)))
        for _ in range(count):
            name = reader.text()
            rank = reader.u32()
            shape = reader.unpack('<%dI' % rank) if rank else ()
            size = int(np.prod(shape)) if rank else 1
            data = np.frombuffer(reader.take(4 * size), dtype='<f4')
            param = expected.pop(name, None)
            if param is None:
                raise exception.PersistenceError(
                    path=path, msg='unexpected tensor %s' % name)
            if tuple(shape) != param.shape:
                raise exception.DimensionError(
                    op='checkpoint', msg='%s stored as %s, model expects %s'
                    % (name, tuple(shape), param.shape))
            param.assign(data.reshape(shape).astype(np.float64))
        if reader.remaining():
            raise exception.PersistenceError(
                path=path, msg='%d trailing bytes' % reader.remaining())
    return model


def save(model, path):
    utils.atomic_write(path, to_bytes(model))
    LOG.info('Saved %s checkpoint to %s', model.config.variant, path)


def load(path):
    with utils.expect_readable(path):
        with open(path, 'rb') as f:
            payload = f.read()
    model = from_bytes(payload, path)
    LOG.debug('Loaded %s checkpoint from %s', model.config.variant, path)
    return model
