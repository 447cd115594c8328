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


CHECKPOINT_MAGIC = b'VCKPT1'
CHECKPOINT_VERSION = 1
INDEX_MAGIC = b'VSEQ1'
INDEX_VERSION = 1
# magic + u32 version + u32 dim + u64 record count
INDEX_HEADER_SIZE = len(INDEX_MAGIC) + 4 + 4 + 8

LEAKY_SLOPE = 0.2
NORM_EPSILON = 1e-5
NORM_MOMENTUM = 0.1

MODEL_VARIANTS = ('m1', 'm2', 'm3', 'm1-3d', 'm2-3d', 'm3-3d')

# variant -> (encoder block, decoder block)
VARIANT_BLOCKS = {
    'm1': ('lrbp', 'urb'),
    'm2': ('lrbp', 'uqb'),
    'm3': ('lrbp', 'utb'),
    'm1-3d': ('l3rbp', 'r3bp'),
    'm2-3d': ('l3rbp', 'u4db'),
    'm3-3d': ('l3rbp', 'utb'),
    }

DTW_MODE_FORWARD = 'forward'
DTW_MODES = ('both-reversed', 'one-reversed')
DTW_SCOPES = ('full', 'subsequence')
DIRECTION_FORWARD = 'forward'
DIRECTION_REVERSED = 'reversed'

PROTOCOL_BY_CLASS = 'by-class'
PROTOCOL_BY_CLIP = 'by-clip'
PROTOCOLS = (PROTOCOL_BY_CLASS, PROTOCOL_BY_CLIP)

SYNTH_SHAPES = ('square', 'circle', 'triangle')
SYNTH_MOTIONS = ('left', 'right', 'bounce', 'rotate')
# one colour for every shape
SHAPE_COLOR = (0.9, 0.9, 0.9)

ABLATION_VARIANTS = ('untrained', 'ae_only', 'triplet_only', 'ae_triplet',
                     'triplet_challenging', 'full')
# variant -> (pretrain, triplet, challenging)
ABLATION_STAGES = {
    'untrained': (False, False, False),
    'ae_only': (True, False, False),
    'triplet_only': (False, True, False),
    'ae_triplet': (True, True, False),
    'triplet_challenging': (False, True, True),
    'full': (True, True, True),
    }
# ablation column -> (dtw mode, dtw scope)
ABLATION_DTW = (
    ('dtw', DTW_MODE_FORWARD, 'subsequence'),
    ('bidtw', 'one-reversed', 'subsequence'),
    )

MANIFEST_NAME = 'manifest.jsonl'
EFFECTIVE_CONFIG_NAME = 'effective.conf'
CHECKPOINT_NAME = 'model.vckpt'
INDEX_NAME = 'index.vseq'
REPORT_NAME = 'report.jsonl'
HISTORY_NAME = 'history.jsonl'
ABLATION_NAME = 'ablation.jsonl'
