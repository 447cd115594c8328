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

from vrsdk.validation import parameter_types


manifest_entry = {
    'type': 'object',
    'properties': {
        'video_id': parameter_types.name,
        'class': parameter_types.optional_name,
        'frame_count': parameter_types.non_negative_integer,
        'source': {'type': 'string'},
    },
    'required': ['video_id', 'class', 'frame_count', 'source'],
    'additionalProperties': False,
}


report_query = {
    'type': 'object',
    'properties': {
        'query': {'type': 'integer', 'minimum': 0},
        'truth_video_id': parameter_types.name,
        'truth_class': parameter_types.optional_name,
        'ap': parameter_types.fraction,
        'relevant': parameter_types.non_negative_integer,
        'ranks': {'type': 'array', 'items': parameter_types.positive_integer},
        'top': {'type': 'array', 'items': {'type': 'string'}},
    },
    'required': ['query', 'truth_video_id', 'ap', 'relevant', 'ranks'],
    'additionalProperties': False,
}


report_summary = {
    'type': 'object',
    'properties': {
        'protocol': parameter_types.protocol,
        'map': parameter_types.fraction,
        'num_queries': parameter_types.non_negative_integer,
        'dtw_mode': parameter_types.dtw_mode,
        'dtw_scope': parameter_types.dtw_scope,
    },
    'required': ['protocol', 'map', 'num_queries', 'dtw_mode', 'dtw_scope'],
    'additionalProperties': False,
}


ablation_row = {
    'type': 'object',
    'properties': {
        'variant': parameter_types.ablation_variants['items'],
        'dtw': {'type': 'string', 'enum': ['dtw', 'bidtw']},
        'map_by_class': parameter_types.fraction,
        'map_by_clip': parameter_types.fraction,
    },
    'required': ['variant', 'dtw', 'map_by_class', 'map_by_clip'],
    'additionalProperties': False,
}


crop_spec = {
    'type': 'object',
    'properties': {
        'full': parameter_types.boolean,
        'min_runs': parameter_types.positive_integer,
        'max_runs': parameter_types.positive_integer,
        'run_len': parameter_types.positive_integer,
        'max_gap': parameter_types.non_negative_integer,
        'reverse_clips': parameter_types.boolean,
        'reverse_frames': parameter_types.boolean,
    },
    'additionalProperties': False,
}


# the run config after type conversion
run_config = {
    'type': 'object',
    'properties': {
        'model': {
            'type': 'object',
            'properties': {
                'variant': parameter_types.variant,
                'spatial_rank': {'type': 'integer', 'enum': [2, 3]},
                'input_channels': parameter_types.positive_integer,
                'frame_size': parameter_types.positive_integer,
                'frame_depth': parameter_types.positive_integer,
                'clip_len': parameter_types.positive_integer,
                'encoder_hidden': parameter_types.positive_integer_list,
                'residual_hidden': parameter_types.positive_integer_list,
                'projection_channels':
                    parameter_types.positive_integer_list,
                'decoder_hidden': parameter_types.positive_integer_list,
                'latent_channels': parameter_types.positive_integer,
                'embedding_dim': parameter_types.positive_integer,
                'kernel_size': parameter_types.positive_integer,
                'leaky_slope': parameter_types.fraction,
                'transformer_layers': parameter_types.positive_integer,
                'transformer_heads': parameter_types.positive_integer,
                'transformer_hidden': parameter_types.positive_integer,
                'transformer_intermediate':
                    parameter_types.positive_integer,
            },
        },
        'train': {
            'type': 'object',
            'properties': {
                'lr': parameter_types.positive_number,
                'lr_decay': parameter_types.positive_number,
                'lr_decay_epochs': parameter_types.positive_integer,
                'momentum': parameter_types.fraction,
                'weight_decay': parameter_types.non_negative_number,
                'margin': parameter_types.non_negative_number,
                'pretrain_epochs': parameter_types.non_negative_integer,
                'triplet_epochs': parameter_types.non_negative_integer,
                'finetune_epochs': parameter_types.non_negative_integer,
                'early_stop_patience':
                    parameter_types.non_negative_integer,
                'batch_size': parameter_types.positive_integer,
                'triplets_per_anchor': parameter_types.positive_integer,
                'mining_fraction': parameter_types.fraction,
                'remix_ratio': parameter_types.fraction,
                'validation_fraction': parameter_types.fraction,
                'pretrain': parameter_types.boolean,
                'triplet': parameter_types.boolean,
                'challenging': parameter_types.boolean,
            },
        },
        'dtw': {
            'type': 'object',
            'properties': {
                'mode': parameter_types.dtw_mode,
                'scope': parameter_types.dtw_scope,
                'workers': parameter_types.positive_integer,
            },
        },
        'eval': {
            'type': 'object',
            'properties': {
                'protocol': parameter_types.protocol,
                'num_queries': parameter_types.positive_integer,
                'min_runs': parameter_types.positive_integer,
                'max_runs': parameter_types.positive_integer,
                'run_len': parameter_types.positive_integer,
                'max_gap': parameter_types.non_negative_integer,
                'reverse_clips': parameter_types.boolean,
                'reverse_frames': parameter_types.boolean,
                'top_k': parameter_types.positive_integer,
                'variants': parameter_types.ablation_variants,
            },
        },
        'data': {
            'type': 'object',
            'properties': {
                'classes': {'type': 'array', 'minItems': 1,
                            'items': parameter_types.synth_class},
                'videos_per_class': parameter_types.positive_integer,
                'frames': parameter_types.positive_integer,
                'noise_std': parameter_types.non_negative_number,
                'stride': parameter_types.positive_integer,
                'target_fps': parameter_types.positive_number,
                'source_fps': parameter_types.positive_number,
            },
        },
    },
}
