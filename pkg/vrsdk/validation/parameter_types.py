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

from vrsdk import constants as const


name = {
    'type': 'string', 'minLength': 1, 'maxLength': 255,
    # path separators would escape the dataset directory
    'pattern': '^[^/\\\\]+$',
}

optional_name = {
    'oneOf': [name, {'type': 'null'}],
}

boolean = {
    'type': 'boolean',
}

positive_integer = {
    'type': 'integer', 'minimum': 1,
}

non_negative_integer = {
    'type': 'integer', 'minimum': 0,
}

non_negative_number = {
    'type': 'number', 'minimum': 0,
}

positive_number = {
    'type': 'number', 'minimum': 0, 'exclusiveMinimum': True,
}

fraction = {
    'type': 'number', 'minimum': 0, 'maximum': 1,
}

positive_integer_list = {
    'type': 'array', 'items': positive_integer, 'minItems': 1,
}

string_list = {
    'type': 'array', 'items': {'type': 'string'},
}

variant = {
    'type': 'string', 'enum': list(const.MODEL_VARIANTS),
}

dtw_mode = {
    'type': 'string',
    'enum': list(const.DTW_MODES) + [const.DTW_MODE_FORWARD],
}

dtw_scope = {
    'type': 'string', 'enum': list(const.DTW_SCOPES),
}

protocol = {
    'type': 'string', 'enum': list(const.PROTOCOLS),
}

ablation_variants = {
    'type': 'array', 'minItems': 1,
    'items': {'type': 'string', 'enum': list(const.ABLATION_VARIANTS)},
}

synth_class = {
    'type': 'string',
    'pattern': '^(%s):(%s)$' % ('|'.join(const.SYNTH_SHAPES),
                                '|'.join(const.SYNTH_MOTIONS)),
}
