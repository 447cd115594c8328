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
import os
import shutil
import struct
import tempfile

from vrsdk import constants as const
from vrsdk import exception
from vrsdk import log


LOG = log.LOG


@contextlib.contextmanager
def expect_valid_binary(path):
    """Catch decoding failures while parsing a binary file."""
    try:
        yield
    except exception.PersistenceError:
        raise
    except struct.error as err:
        LOG.error('Parse %s encounter error: %s', path, err)
        raise exception.TruncatedFileError(path=path, msg=err)
    except (UnicodeDecodeError, ValueError, TypeError, KeyError) as err:
        LOG.error('Parse %s encounter error: %s', path, err)
        raise exception.PersistenceError(path=path, msg=err)


@contextlib.contextmanager
def expect_readable(path):
    """Turn a missing or unreadable file into NotFound."""
    try:
        yield
    except (IOError, OSError) as err:
        raise exception.NotFound(msg='%s: %s' % (path, err))


class BinaryReader(object):
    """Sequential little-endian reader over an in-memory buffer."""

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.offset = 0

    def remaining(self):
        return len(self.data) - self.offset

    def take(self, size):
        if size > self.remaining():
            raise exception.TruncatedFileError(
                path=self.path, msg='need %d bytes at offset %d, %d left'
                % (size, self.offset, self.remaining()))
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def u32(self):
        return self.unpack('<I')[0]

    def u64(self):
        return self.unpack('<Q')[0]

    def text(self):
        return self.take(self.u32()).decode('utf-8')


def pack_text(value):
    raw = value.encode('utf-8')
    return struct.pack('<I', len(raw)) + raw


def atomic_write(path, payload):
    """Write bytes to path through a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        os.makedirs(directory)
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
        os.rename(tmp, path)
    except Exception:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


@contextlib.contextmanager
def atomic_run_dir(path):
    """Yield a scratch directory that becomes ``path`` only on success.

    An existing ``path`` is replaced. On failure nothing is left behind.
    """
    path = os.path.abspath(path)
    parent = os.path.dirname(path)
    if not os.path.isdir(parent):
        os.makedirs(parent)
    scratch = tempfile.mkdtemp(prefix='.run-', dir=parent)
    try:
        yield scratch
    except BaseException:
        LOG.debug('Removing partial run directory %s', scratch)
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    if os.path.exists(path):
        shutil.rmtree(path)
    os.rename(scratch, path)


class PathUtils(object):
    """Run directory layout."""

    def checkpoint(self, run_dir):
        return os.path.join(run_dir, const.CHECKPOINT_NAME)

    def index(self, run_dir):
        return os.path.join(run_dir, const.INDEX_NAME)

    def manifest(self, run_dir):
        return os.path.join(run_dir, const.MANIFEST_NAME)

    def report(self, run_dir):
        return os.path.join(run_dir, const.REPORT_NAME)

    def effective_config(self, run_dir):
        return os.path.join(run_dir, const.EFFECTIVE_CONFIG_NAME)
