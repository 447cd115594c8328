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

import six
from six.moves import configparser


class Opt(object):
    def __init__(self, opt_name, description='', section='default',
                 opt_type='str', default=None, required=False):
        self.name = opt_name
        self.description = description
        self.section = section
        self.opt_type = opt_type
        self.default = default
        self.required = required


vr_opts = [
    # logging options
    Opt('log_file',
        'file the sdk logger writes to',
        section='logging',
        default='/tmp/vrsdk.log'),
    Opt('log_level',
        'logging level, INFO or logging.INFO style',
        section='logging',
        default='logging.INFO'),
    Opt('log_to_console',
        'also log to stderr',
        section='logging',
        default=False,
        opt_type='bool'),
    # model options
    Opt('variant',
        'one of m1, m2, m3, m1-3d, m2-3d, m3-3d',
        section='model',
        default='m1'),
    Opt('spatial_rank',
        '2 for frames (depth as channel), 3 for volumetric clips',
        section='model',
        default=2,
        opt_type='int'),
    Opt('input_channels',
        '3 for RGB, 4 for RGB-D',
        section='model',
        default=3,
        opt_type='int'),
    Opt('frame_size',
        'square frame extent, divisible by 8',
        section='model',
        default=16,
        opt_type='int'),
    Opt('frame_depth',
        'volumetric depth extent when spatial_rank is 3',
        section='model',
        default=8,
        opt_type='int'),
    Opt('clip_len',
        'frames per clip (k)',
        section='model',
        default=4,
        opt_type='int'),
    Opt('encoder_hidden',
        'bidirectional ConvLSTM hidden channels per direction, per block',
        section='model',
        default=[4, 4, 4],
        opt_type='intlist'),
    Opt('residual_hidden',
        'residual ConvLSTM hidden channels, per encoder block',
        section='model',
        default=[4, 4, 4],
        opt_type='intlist'),
    Opt('projection_channels',
        'channels after the 1x1 projection, per encoder block',
        section='model',
        default=[4, 4, 4],
        opt_type='intlist'),
    Opt('decoder_hidden',
        'hidden channels of each decoder block',
        section='model',
        default=[4, 4, 4],
        opt_type='intlist'),
    Opt('latent_channels',
        'channels of the decoder latent grid',
        section='model',
        default=4,
        opt_type='int'),
    Opt('embedding_dim',
        'length of a clip embedding',
        section='model',
        default=32,
        opt_type='int'),
    Opt('kernel_size',
        'ConvLSTM and decoder convolution kernel extent',
        section='model',
        default=3,
        opt_type='int'),
    Opt('leaky_slope',
        'LeakyReLU negative slope',
        section='model',
        default=0.2,
        opt_type='float'),
    Opt('transformer_layers',
        'self-attention layers of the UTB stack',
        section='model',
        default=1,
        opt_type='int'),
    Opt('transformer_heads',
        'attention heads of the UTB stack',
        section='model',
        default=2,
        opt_type='int'),
    Opt('transformer_hidden',
        'hidden size of the UTB stack',
        section='model',
        default=16,
        opt_type='int'),
    Opt('transformer_intermediate',
        'feed-forward size of the UTB stack',
        section='model',
        default=32,
        opt_type='int'),
    Opt('init_seed',
        'seed of the Xavier initialization',
        section='model',
        default=0,
        opt_type='int'),
    # train options
    Opt('seed',
        'seed of sampling, shuffling and splits',
        section='train',
        default=None,
        opt_type='int'),
    Opt('lr',
        'initial learning rate',
        section='train',
        default=0.001,
        opt_type='float'),
    Opt('lr_decay',
        'multiplicative decay applied every lr_decay_epochs',
        section='train',
        default=0.1,
        opt_type='float'),
    Opt('lr_decay_epochs',
        section='train',
        default=10,
        opt_type='int'),
    Opt('momentum',
        section='train',
        default=0.9,
        opt_type='float'),
    Opt('weight_decay',
        'L2 penalty (lambda)',
        section='train',
        default=0.001,
        opt_type='float'),
    Opt('margin',
        'triplet hinge margin (tau)',
        section='train',
        default=0.5,
        opt_type='float'),
    Opt('pretrain_epochs',
        section='train',
        default=10,
        opt_type='int'),
    Opt('triplet_epochs',
        section='train',
        default=10,
        opt_type='int'),
    Opt('finetune_epochs',
        section='train',
        default=5,
        opt_type='int'),
    Opt('early_stop_patience',
        section='train',
        default=5,
        opt_type='int'),
    Opt('batch_size',
        '32 for 2D data, 8 for 3D data',
        section='train',
        default=32,
        opt_type='int'),
    Opt('triplets_per_anchor',
        section='train',
        default=1,
        opt_type='int'),
    Opt('mining_fraction',
        section='train',
        default=0.2,
        opt_type='float'),
    Opt('remix_ratio',
        section='train',
        default=0.5,
        opt_type='float'),
    Opt('validation_fraction',
        'share of samples held out for early stopping',
        section='train',
        default=0.2,
        opt_type='float'),
    Opt('pretrain',
        'run step 1 (autoencoder pretraining)',
        section='train',
        default=True,
        opt_type='bool'),
    Opt('triplet',
        'run step 2 (triplet training)',
        section='train',
        default=True,
        opt_type='bool'),
    Opt('challenging',
        'run steps 3 and 4 (mining and remixed fine tuning)',
        section='train',
        default=True,
        opt_type='bool'),
    # dtw options
    Opt('mode',
        'both-reversed or one-reversed',
        section='dtw',
        default='one-reversed'),
    Opt('scope',
        'full or subsequence',
        section='dtw',
        default='subsequence'),
    Opt('workers',
        'threads scoring candidates',
        section='dtw',
        default=1,
        opt_type='int'),
    # eval options
    Opt('protocol',
        'by-class or by-clip',
        section='eval',
        default='by-class'),
    Opt('num_queries',
        section='eval',
        default=30,
        opt_type='int'),
    Opt('min_runs',
        'consecutive frame runs per query, lower bound',
        section='eval',
        default=1,
        opt_type='int'),
    Opt('max_runs',
        section='eval',
        default=2,
        opt_type='int'),
    Opt('run_len',
        'frames per run',
        section='eval',
        default=8,
        opt_type='int'),
    Opt('max_gap',
        'largest gap between runs in frames',
        section='eval',
        default=4,
        opt_type='int'),
    Opt('reverse_clips',
        'reverse the clip order of every query',
        section='eval',
        default=False,
        opt_type='bool'),
    Opt('reverse_frames',
        'play every query backwards before embedding it',
        section='eval',
        default=False,
        opt_type='bool'),
    Opt('top_k',
        section='eval',
        default=10,
        opt_type='int'),
    Opt('variants',
        'training variants run by the ablate command',
        section='eval',
        default=['untrained', 'ae_only', 'ae_triplet', 'full'],
        opt_type='strlist'),
    # data options
    Opt('classes',
        'synthetic classes as shape:motion pairs',
        section='data',
        default=['square:left', 'square:right', 'circle:bounce'],
        opt_type='strlist'),
    Opt('videos_per_class',
        section='data',
        default=20,
        opt_type='int'),
    Opt('frames',
        'frames per synthetic video (M)',
        section='data',
        default=32,
        opt_type='int'),
    Opt('noise_std',
        section='data',
        default=0.05,
        opt_type='float'),
    Opt('stride',
        'clip stride; equal to clip_len for disjoint clips',
        section='data',
        default=4,
        opt_type='int'),
    Opt('target_fps',
        section='data',
        default=30,
        opt_type='int'),
    Opt('source_fps',
        section='data',
        default=30,
        opt_type='int'),
    ]


def _convert(opt_type, value):
    if value is None or (isinstance(value, six.string_types) and
                         value.strip() == '' and opt_type != 'str'):
        return None
    if opt_type == 'int':
        return int(value)
    if opt_type == 'float':
        return float(value)
    if opt_type == 'bool':
        if isinstance(value, bool):
            return value
        lowered = str(value).strip().lower()
        if lowered in ('1', 'true', 'yes', 'on'):
            return True
        if lowered in ('0', 'false', 'no', 'off'):
            return False
        raise ValueError("not a boolean: %r" % value)
    if opt_type in ('intlist', 'strlist'):
        if isinstance(value, six.string_types):
            value = [v.strip() for v in value.split(',') if v.strip()]
        if opt_type == 'intlist':
            return [int(v) for v in value]
        return [str(v) for v in value]
    return str(value)


class ConfigOpts(object):

    def __init__(self, opts=None):
        self.opts = opts if opts is not None else vr_opts
        self.dicts = {}

    def _get_config_dicts_default(self, opts):
        _dict = {}
        for opt in opts:
            sec = opt.section
            if _dict.get(sec) is None:
                _dict[sec] = {}
            _dict[sec][opt.name] = {'required': opt.required,
                                    'default': opt.default,
                                    'type': opt.opt_type}
        return _dict

    def register(self, opts=None, config_file=None, overrides=None,
                 strict=False):
        """Build the option tree.

        :param opts: list of Opt, the module registry by default
        :param config_file: explicit file, searched for when None
        :param overrides: dict of {section: {key: value}} applied last
        :param strict: reject sections/keys that are not registered
        """
        opts = opts if opts is not None else self.opts
        cf = configparser.ConfigParser()
        read_file = config_file or self.find_config_file(project="vrsdk")
        if read_file:
            cf.read(read_file)
        # return all sections in a list
        secs = cf.sections()
        config_dicts_override = self.config_ini_to_dicts(secs, cf)
        for sec, values in (overrides or {}).items():
            config_dicts_override.setdefault(sec, {}).update(values)

        config_dicts_default = self._get_config_dicts_default(opts)
        if strict:
            self._check_unknown(config_dicts_default, config_dicts_override)

        configs = self.merge(config_dicts_default, config_dicts_override)
        con = self._config_fill_option(configs)
        con = self.toDict(con)
        self._check_required(con)
        self._check_type(con)

        for k1, v1 in con.items():
            r_con = {}
            for k2, v2 in v1.items():
                r_con[k2] = v2.default
            con[k1] = r_con
        # the format of conf : train:{'lr':xxx,'momentum':xxx}
        # call method :CONF.group.option   e.g: CONF.train.lr
        con = self.toDict(con)
        return con

    def _check_unknown(self, defaults, override):
        for sec, values in override.items():
            if sec not in defaults:
                raise UnknownOptionError(sec, '*')
            for key in values:
                if key not in defaults[sec]:
                    raise UnknownOptionError(sec, key)

    def _check_required(self, conf):
        '''Check that all opts marked as required have values specified.
        raises: RequiredOptMissingError
        the format of conf:
        train:{
            'seed':{"default":xx,"type":int,"required":true}
            }
        '''
        for k1, v1 in conf.items():
            for k2, v2 in v1.items():
                if v2.required and (v2.default is None):
                    raise RequiredOptMissingError(k1, k2)

    def _check_type(self, conf):
        for k1, v1 in conf.items():
            for k2, v2 in v1.items():
                try:
                    v2.default = _convert(v2.type, v2.default)
                except (TypeError, ValueError) as err:
                    raise InvalidOptValueError(k1, k2, err)

    def _config_fill_option(self, conf):
        for k, v in conf.items():
            confs = {}
            for dk, dv in v.items():
                # the format of dk,dv:
                #     'lr':{"default":xx,"type":float,"required":false}
                #     'lr':xx,
                if isinstance(dv, dict):
                    dv.setdefault('type', None)
                    dv.setdefault('required', False)
                    dv.setdefault('default', None)
                    confs[dk] = dv
                else:
                    dv = {}
                    dv['type'] = None
                    dv['required'] = False
                    dv['default'] = v[dk]
                    confs[dk] = dv
            conf[k] = confs
        return conf

    def config_ini_to_dicts(self, secs, cf):
        dicts = {}
        for sec in secs:
            dicts[sec] = {}
            # get all options of the section in a list
            for opt in cf.options(sec):
                dicts[sec][opt] = cf.get(sec, opt)
        self.dicts = dicts
        return dicts

    def merge(self, defaults, override):
        '''
        param defaults:
        'train':{
            'lr':{"default":0.001,"type":'float',"required":false}
            }
        param override:
        'train':{
            'lr':'0.01',
            }
        returns r: is a dict and the format is same as
        the parameter 'default' or 'override'
        '''
        r = {}
        for k, v in defaults.items():
            if k in override:
                if isinstance(v, dict) and isinstance(override[k], dict):
                    r[k] = self.merge(v, override[k])
                elif isinstance(v, dict):
                    if override[k] is not None:
                        v = dict(v)
                        v['default'] = override[k]
                    r[k] = v
                else:
                    r[k] = override[k]
            else:
                r[k] = dict(v) if isinstance(v, dict) else v

        for k, v in override.items():
            if k not in defaults:
                r[k] = v
        return r

    def toDict(self, d):
        D = Dict()
        for k, v in d.items():
            D[k] = self.toDict(v) if isinstance(v, dict) else v
        return D

    def _fixpath(self, p):
        """Apply tilde expansion and absolutization to a path."""
        return os.path.abspath(os.path.expanduser(p))

    def _get_config_dirs(self):
        """Return a list of directories where config files may be located.

        following directories are returned::

          ./
          /etc/vrsdk/
          /etc/
          ~/
        """
        cfg_dirs = [
            self._fixpath(os.getcwd()),
            self._fixpath('/etc/vrsdk/'),
            self._fixpath('/etc/'),
            self._fixpath('~'),
        ]
        return [x for x in cfg_dirs if x]

    def _search_dirs(self, dirs, basename, extension=""):
        """Search a list of directories for a given filename.

        :param dirs: a list of directories
        :param basename: the filename
        :param extension: the file extension, for example '.conf'
        :returns: the path to a matching file, or None
        """
        for d in dirs:
            path = os.path.join(d, '%s%s' % (basename, extension))
            if os.path.exists(path):
                return path

    def find_config_file(self, project=None, extension='.conf'):
        """Return the config file.

        :param project: "vrsdk"
        :param extension: the type of the config file

        """
        if os.environ.get('VRSDK_CONFIG'):
            return os.environ['VRSDK_CONFIG']
        cfg_dirs = self._get_config_dirs()
        return self._search_dirs(cfg_dirs, project, extension)


class Dict(dict):
    '''
    Simple dict but support access as x.y style.
    '''
    def __init__(self, names=(), values=(), **kw):
        super(Dict, self).__init__(**kw)
        for k, v in zip(names, values):
            self[k] = v

    def __getattr__(self, key):
        try:
            return self[key]
        except KeyError:
            raise AttributeError(r"'CONF' object has no attribute '%s'" % key)

    def __setattr__(self, key, value):
        self[key] = value


class RequiredOptMissingError(Exception):
    """Raised if an option is required but no value is supplied by the user."""
    kind = 'required_option_missing'

    def __init__(self, grp_name, opt_name):
        super(RequiredOptMissingError, self).__init__(grp_name, opt_name)
        self.grp_name = grp_name
        self.opt_name = opt_name

    def __str__(self):
        return "value required for option %s - %s" % (self.grp_name,
                                                      self.opt_name)


class UnknownOptionError(Exception):
    """Raised if a config file or override names an unregistered option."""
    kind = 'unknown_option'

    def __init__(self, grp_name, opt_name):
        super(UnknownOptionError, self).__init__(grp_name, opt_name)
        self.grp_name = grp_name
        self.opt_name = opt_name

    def __str__(self):
        return "unknown option %s - %s" % (self.grp_name, self.opt_name)


class InvalidOptValueError(Exception):
    kind = 'invalid_option_value'

    def __init__(self, grp_name, opt_name, reason):
        super(InvalidOptValueError, self).__init__(grp_name, opt_name)
        self.grp_name = grp_name
        self.opt_name = opt_name
        self.reason = reason

    def __str__(self):
        return "invalid value for option %s - %s: %s" % (
            self.grp_name, self.opt_name, self.reason)


def parse_overrides(items):
    """Turn ['train.lr=0.01', ...] into {'train': {'lr': '0.01'}}."""
    overrides = {}
    for item in items or []:
        key, sep, value = item.partition('=')
        section, dot, name = key.strip().partition('.')
        if not sep or not dot or not name:
            raise InvalidOptValueError(section or '?', name or key,
                                       "expected section.key=value")
        overrides.setdefault(section, {})[name] = value.strip()
    return overrides


def load_run_config(path=None, overrides=None):
    """Load a run configuration; unknown keys are rejected."""
    return ConfigOpts(vr_opts).register(config_file=path,
                                        overrides=overrides, strict=True)


def dump_run_config(conf, path):
    """Write the effective config as a flat INI file."""
    cf = configparser.ConfigParser()
    for section in sorted(conf.keys()):
        cf.add_section(section)
        for key in sorted(conf[section].keys()):
            value = conf[section][key]
            if isinstance(value, (list, tuple)):
                value = ','.join(str(v) for v in value)
            cf.set(section, key, '' if value is None else str(value))
    with open(path, 'w') as f:
        cf.write(f)


CONF = ConfigOpts()
CONF = CONF.register(vr_opts)
