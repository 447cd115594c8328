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

from vrsdk import exception
import vrsdk.utils as vrutils
from vrsdk.tests.unit import base


class VRUtilsTestCases(base.SDKTestCase):

    def setUp(self):
        super(VRUtilsTestCases, self).setUp()
        self.tmp = self.make_tempdir()

    def test_binary_reader(self):
        payload = (struct.pack('<IQ', 7, 2 ** 40) +
                   vrutils.pack_text(u'caf\xe9'))
        reader = vrutils.BinaryReader(payload, 'mem')
        self.assertEqual(7, reader.u32())
        self.assertEqual(2 ** 40, reader.u64())
        self.assertEqual(u'caf\xe9', reader.text())
        self.assertEqual(0, reader.remaining())
        self.assertRaises(exception.TruncatedFileError, reader.take, 1)

    def test_expect_valid_binary(self):
        def parse(payload):
            with vrutils.expect_valid_binary('mem'):
                return struct.unpack('<I', payload)
        self.assertRaises(exception.TruncatedFileError, parse, b'\x00')

        def decode(payload):
            with vrutils.expect_valid_binary('mem'):
                return payload.decode('utf-8')
        self.assertRaises(exception.PersistenceError, decode, b'\xff')

    def test_expect_readable(self):
        def read():
            with vrutils.expect_readable('gone'):
                open(os.path.join(self.tmp, 'gone'))
        self.assertRaises(exception.NotFound, read)

    def test_atomic_write(self):
        path = os.path.join(self.tmp, 'sub', 'file.bin')
        vrutils.atomic_write(path, b'one')
        vrutils.atomic_write(path, b'two')
        with open(path, 'rb') as f:
            self.assertEqual(b'two', f.read())
        self.assertEqual(['file.bin'],
                         os.listdir(os.path.join(self.tmp, 'sub')))

    def test_atomic_run_dir_success(self):
        path = os.path.join(self.tmp, 'run')
        os.makedirs(path)
        open(os.path.join(path, 'stale'), 'w').close()
        with vrutils.atomic_run_dir(path) as scratch:
            self.assertNotEqual(path, scratch)
            open(os.path.join(scratch, 'fresh'), 'w').close()
        self.assertEqual(['fresh'], os.listdir(path))
        self.assertEqual(['run'], os.listdir(self.tmp))

    def test_atomic_run_dir_failure(self):
        path = os.path.join(self.tmp, 'run')

        def failing():
            with vrutils.atomic_run_dir(path) as scratch:
                open(os.path.join(scratch, 'partial'), 'w').close()
                raise exception.NonFiniteError(op='triplet_loss')

        self.assertRaises(exception.NonFiniteError, failing)
        self.assertEqual([], os.listdir(self.tmp))

    def test_path_layout(self):
        paths = vrutils.PathUtils()
        self.assertEqual('/r/model.vckpt', paths.checkpoint('/r'))
        self.assertEqual('/r/index.vseq', paths.index('/r'))
        self.assertEqual('/r/manifest.jsonl', paths.manifest('/r'))
        self.assertEqual('/r/report.jsonl', paths.report('/r'))
        self.assertEqual('/r/effective.conf', paths.effective_config('/r'))
