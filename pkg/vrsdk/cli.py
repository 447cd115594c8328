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

'''
vrsdk -- video retrieval pipeline

Generate synthetic data, train, build indexes, query and evaluate.
'''

import json
import os
import sys

from argparse import ArgumentParser
from argparse import ArgumentTypeError
from argparse import RawDescriptionHelpFormatter

from vrsdk import api
from vrsdk import config
from vrsdk import constants as const
from vrsdk import evaluation
from vrsdk import exception
from vrsdk import log
from vrsdk import store
from vrsdk import training
from vrsdk import utils
from vrsdk import validation
from vrsdk.validation import schemas


LOG = log.LOG

SEEDED_COMMANDS = ('synth', 'pretrain', 'train', 'eval', 'ablate')

# flag dest -> (section, key)
_FLAG_OPTIONS = {
    'seed': ('train', 'seed'),
    'model_variant': ('model', 'variant'),
    'dtw_mode': ('dtw', 'mode'),
    'dtw_scope': ('dtw', 'scope'),
    'protocol': ('eval', 'protocol'),
    'clip_len': ('model', 'clip_len'),
    'stride': ('data', 'stride'),
    'top_k': ('eval', 'top_k'),
    }


class CLIError(exception.SDKBaseException):
    msg_fmt = '%(msg)s'
    kind = 'usage'


def _dashed(choices):
    def convert(value):
        value = value.replace('_', '-')
        if value not in choices:
            raise ArgumentTypeError('invalid choice %r (choose from %s)'
                                    % (value, ', '.join(choices)))
        return value
    return convert


def _common_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', dest='config',
                        help='run configuration file')
    common.add_argument('--set', dest='overrides', action='append',
                        default=[], metavar='SECTION.KEY=VALUE',
                        help='override one configuration value')
    common.add_argument('--seed', dest='seed', type=int)
    common.add_argument('--model-variant', dest='model_variant',
                        choices=const.MODEL_VARIANTS)
    common.add_argument('--dtw-mode', dest='dtw_mode',
                        type=_dashed(const.DTW_MODES + (const.DTW_MODE_FORWARD,)))
    common.add_argument('--dtw-scope', dest='dtw_scope',
                        type=_dashed(const.DTW_SCOPES))
    common.add_argument('--protocol', dest='protocol',
                        type=_dashed(const.PROTOCOLS))
    common.add_argument('--clip-len', dest='clip_len', type=int)
    common.add_argument('--stride', dest='stride', type=int)
    common.add_argument('--top-k', dest='top_k', type=int)
    return common


def build_parser():
    common = _common_parser()
    parser = ArgumentParser(prog='vrsdk', description=__doc__,
                            formatter_class=RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest='command')

    cmd = sub.add_parser('synth', parents=[common],
                         help='render the synthetic dataset')
    cmd.add_argument('--output', required=True)

    for name, text in (('pretrain', 'autoencoder pretraining only'),
                       ('train', 'full training schedule')):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument('--data', required=True)
        cmd.add_argument('--output', required=True)
        cmd.add_argument('--init', help='start from this checkpoint')

    cmd = sub.add_parser('embed', parents=[common],
                         help='embed one video into a single-record index')
    cmd.add_argument('--model', required=True)
    cmd.add_argument('--video', required=True)
    cmd.add_argument('--video-id', dest='video_id')
    cmd.add_argument('--output', required=True)

    cmd = sub.add_parser('index', parents=[common],
                         help='embed a dataset into an index')
    cmd.add_argument('--model', required=True)
    cmd.add_argument('--data', required=True)
    cmd.add_argument('--output', required=True)

    cmd = sub.add_parser('query', parents=[common],
                         help='rank indexed videos against one video')
    cmd.add_argument('--model', required=True)
    cmd.add_argument('--index', required=True)
    cmd.add_argument('--video', help='PNG directory or .npy frames')
    cmd.add_argument('--data', help='dataset holding --video-id')
    cmd.add_argument('--video-id', dest='video_id')

    cmd = sub.add_parser('eval', parents=[common],
                         help='mAP of cropped queries against an index')
    cmd.add_argument('--model', required=True)
    cmd.add_argument('--index', required=True)
    cmd.add_argument('--data', required=True)
    cmd.add_argument('--output', required=True)

    cmd = sub.add_parser('ablate', parents=[common],
                         help='train and score every ablation variant')
    cmd.add_argument('--data', required=True)
    cmd.add_argument('--output', required=True)
    return parser


def load_conf(args):
    overrides = config.parse_overrides(args.overrides)
    for dest, (section, key) in _FLAG_OPTIONS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = str(value)
    conf = config.load_run_config(args.config, overrides)
    validation.validate(schemas.run_config, conf, 'run config')
    return conf


def _check_args(args):
    if args.command in SEEDED_COMMANDS and args.seed is None:
        raise CLIError(msg='--seed is required for %s' % args.command)
    if args.command == 'query':
        if not args.video and not (args.data and args.video_id):
            raise CLIError(msg='query needs --video or --data with '
                           '--video-id')
    for name in ('data', 'model', 'index', 'video', 'init', 'config'):
        path = getattr(args, name, None)
        if path and not os.path.exists(path):
            raise exception.NotFound(msg='%s %s does not exist'
                                     % (name, path))


def _write_lines(path, items):
    payload = ''.join(json.dumps(i, sort_keys=True) + '\n' for i in items)
    utils.atomic_write(path, payload.encode('utf-8'))


class Commands(object):

    def __init__(self, args, conf):
        self.args = args
        self.conf = conf
        self.sdk = api.SDKAPI(conf)
        self.paths = utils.PathUtils()

    def run(self):
        handler = getattr(self, 'do_' + self.args.command)
        if self.args.command == 'query':
            return handler(None)
        with utils.atomic_run_dir(self.args.output) as run_dir:
            config.dump_run_config(self.conf,
                                   self.paths.effective_config(run_dir))
            return handler(run_dir)

    def do_synth(self, run_dir):
        entries = self.sdk.synth_generate(run_dir, self.args.seed)
        print('generated %d videos in %s' % (len(entries), self.args.output))

    def _train(self, run_dir, **stages):
        entries, videos = self.sdk.dataset_load(self.args.data)
        if self.args.init:
            model = self.sdk.model_load(self.args.init)
        else:
            model = self.sdk.model_create()
        cfg = training.TrainConfig.from_conf(self.conf.train).copy(**stages)
        result = self.sdk.model_train(model, entries, videos, cfg)
        self.sdk.model_save(result.model, self.paths.checkpoint(run_dir))
        _write_lines(os.path.join(run_dir, const.HISTORY_NAME),
                     result.history)
        print('trained %s model saved to %s' % (
            model.config.variant, self.paths.checkpoint(self.args.output)))

    def do_pretrain(self, run_dir):
        self._train(run_dir, pretrain=True, triplet=False, challenging=False)

    def do_train(self, run_dir):
        self._train(run_dir)

    def do_embed(self, run_dir):
        model = self.sdk.model_load(self.args.model)
        data = self.conf.data
        frames = store.preprocess(store.read_frames(self.args.video),
                                  data.source_fps, data.target_fps,
                                  model.config.frame_size)
        video_id = self.args.video_id or os.path.basename(
            os.path.normpath(self.args.video))
        seq = self.sdk.video_embed(model, frames, video_id=video_id)
        index = store.VideoIndex([store.VideoRecord(video_id, None, seq)])
        self.sdk.index_save(index, self.paths.index(run_dir))
        print('embedded %s into %d clips' % (video_id, len(seq)))

    def do_index(self, run_dir):
        model = self.sdk.model_load(self.args.model)
        entries, videos = self.sdk.dataset_load(self.args.data)
        index = self.sdk.index_build(model, entries, videos)
        self.sdk.index_save(index, self.paths.index(run_dir))
        store.write_manifest(entries, self.paths.manifest(run_dir))
        print('indexed %d videos' % len(index))

    def do_query(self, run_dir):
        model = self.sdk.model_load(self.args.model)
        index = self.sdk.index_load(self.args.index)
        if self.args.video:
            data = self.conf.data
            frames = store.preprocess(store.read_frames(self.args.video),
                                      data.source_fps, data.target_fps,
                                      model.config.frame_size)
        else:
            entries, videos = self.sdk.dataset_load(self.args.data)
            by_id = dict((e['video_id'], v) for e, v in zip(entries, videos))
            if self.args.video_id not in by_id:
                raise exception.NotFound(msg='video %s not in %s' % (
                    self.args.video_id, self.args.data))
            frames = by_id[self.args.video_id]
        query = self.sdk.video_embed(model, frames)
        for rank, (video_id, cost) in enumerate(
                self.sdk.index_query(index, query), 1):
            print(json.dumps({'rank': rank, 'video_id': video_id,
                              'cost': cost}, sort_keys=True))

    def do_eval(self, run_dir):
        model = self.sdk.model_load(self.args.model)
        index = self.sdk.index_load(self.args.index)
        entries, videos = self.sdk.dataset_load(self.args.data)
        report = self.sdk.evaluate(model, index, entries, videos,
                                   self.args.seed)
        evaluation.write_report(report, self.paths.report(run_dir))
        print(json.dumps(report.summary, sort_keys=True))

    def do_ablate(self, run_dir):
        entries, videos = self.sdk.dataset_load(self.args.data)
        rows = self.sdk.ablate(entries, videos, self.args.seed)
        evaluation.write_ablation(rows,
                                  os.path.join(run_dir, const.ABLATION_NAME))
        print(evaluation.format_table(rows))


def _error_kind(err):
    return getattr(err, 'kind', 'internal')


def main(argv=None):
    '''Command line options.'''
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2
    try:
        _check_args(args)
        conf = load_conf(args)
        Commands(args, conf).run()
        return 0
    except KeyboardInterrupt:
        return 130
    except (exception.SDKBaseException, config.RequiredOptMissingError,
            config.UnknownOptionError, config.InvalidOptValueError) as err:
        LOG.error('%s failed: %s', args.command, err)
        sys.stderr.write(json.dumps({'error': _error_kind(err),
                                     'command': args.command,
                                     'message': str(err)},
                                    sort_keys=True) + '\n')
        return 1


if __name__ == '__main__':
    sys.exit(main())
