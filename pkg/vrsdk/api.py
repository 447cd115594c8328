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


import functools

from vrsdk import checkpoint
from vrsdk import config
from vrsdk import constants as const
from vrsdk import dtw
from vrsdk import evaluation
from vrsdk import exception
from vrsdk import log
from vrsdk import model as vmodel
from vrsdk import store
from vrsdk import synth
from vrsdk import training
from vrsdk import validation
from vrsdk.validation import schemas


CONF = config.CONF
LOG = log.LOG


def check_input_types(*types):
    """This is a function decorator to check all input parameters given to
    decorated function are in expected types.

    The checks can be skipped by specify skip_input_checks=True in decorated
    function.

    :param tuple types: expected types of input parameters to the decorated
                        function
    """
    def decorator(function):
        @functools.wraps(function)
        def wrap_func(*args, **kwargs):
            if args[0]._skip_input_check:
                # skip input check
                return function(*args, **kwargs)
            # drop class object self
            inputs = args[1:]
            if len(inputs) != len(types) or not all(
                    isinstance(i, t) for i, t in zip(inputs, types)):
                msg = ("Invalid input types: %(argtypes)s; "
                       "Expected types: %(types)s" %
                       {'argtypes': str(tuple(map(type, inputs))),
                        'types': str(types)})
                LOG.info(msg)
                raise exception.VRInvalidInput(msg=msg)
            return function(*args, **kwargs)
        return wrap_func
    return decorator


class SDKAPI(object):
    """Video retrieval pipeline interfaces."""

    def __init__(self, conf=None, **kwargs):
        self._conf = conf or CONF
        self._trainops = training.get_trainops()
        self._storeops = store.get_storeops()
        self._evalops = evaluation.get_evalops()
        self._skip_input_check = kwargs.get('skip_input_check')

    def synth_generate(self, output_dir, seed):
        """Render the configured synthetic classes to a dataset directory.

        :param str output_dir: directory receiving one PNG sequence per
                               video and the manifest
        :param int seed: generator seed

        :returns: list of manifest entries
        """
        spec = synth.SynthSpec.from_conf(self._conf, seed)
        return synth.write_dataset(synth.generate(spec), output_dir)

    def model_create(self, model_config=None):
        """Build a freshly initialized model.

        :param ModelConfig model_config: defaults to the [model] section
        """
        if model_config is None:
            model_config = vmodel.ModelConfig.from_conf(self._conf.model)
        return vmodel.build_model(model_config)

    @check_input_types(str)
    def model_load(self, path):
        return checkpoint.load(path)

    def model_save(self, model, path):
        checkpoint.save(model, path)

    @check_input_types(str)
    def dataset_load(self, data_dir):
        """Read a dataset directory.

        :returns: (manifest entries, standardized frame arrays)
        """
        data = self._conf.data
        return self._storeops.load_dataset(
            data_dir, data.source_fps, data.target_fps,
            self._conf.model.frame_size)

    def model_train(self, model, entries, videos, train_cfg=None,
                    stride=None):
        """Run the training schedule on a loaded dataset.

        Every clip feeds pretraining; clips of labeled videos feed the
        triplet steps.

        :returns: training.TrainResult
        """
        if train_cfg is None:
            train_cfg = training.TrainConfig.from_conf(self._conf.train)
        stride = stride or self._conf.data.stride
        clips, labels = store.collect_clips(
            [(e['class'], v) for e, v in zip(entries, videos)],
            model.config.clip_len, stride)
        labeled = [i for i, lab in enumerate(labels) if lab is not None]
        return self._trainops.train_schedule(
            clips, clips[labeled], [labels[i] for i in labeled], train_cfg,
            model)

    def video_embed(self, model, frames, stride=None, video_id=''):
        stride = stride or self._conf.data.stride
        return store.embed_video(frames, model, model.config.clip_len,
                                 stride, video_id)

    def index_build(self, model, entries, videos, stride=None):
        stride = stride or self._conf.data.stride
        return self._storeops.build_index(entries, videos, model,
                                          model.config.clip_len, stride)

    def index_save(self, index, path):
        store.index_write(index, path)

    @check_input_types(str)
    def index_load(self, path):
        return store.index_read(path)

    def index_query(self, index, query, top_k=None, mode=None, scope=None):
        """Rank indexed videos against an embedding sequence.

        :returns: list of (video_id, cost), best first
        """
        conf = self._conf.dtw
        return dtw.rank_candidates(
            query, index.records, top_k or self._conf.eval.top_k,
            mode or conf.mode, scope or conf.scope, conf.workers)

    @validation.schema(schemas.crop_spec, 'crop')
    def evaluate(self, model, index, entries, videos, seed, protocol=None,
                 crop=None, n_queries=None, stride=None, mode=None,
                 scope=None):
        """Score cropped training-video queries against an index.

        :param dict crop: CropSpec fields overriding the [eval] section
        :returns: evaluation.EvalReport
        """
        ev = self._conf.eval
        spec = evaluation.CropSpec.from_conf(ev, **(crop or {}))
        embed = self._evalops.embedder(model, model.config.clip_len,
                                       stride or self._conf.data.stride)
        queries = evaluation.generate_test_queries(
            [(e['video_id'], e['class'], v) for e, v in zip(entries, videos)],
            n_queries or ev.num_queries, spec, seed, embed,
            model.config.clip_len)
        return evaluation.evaluate(
            queries, index, protocol or ev.protocol,
            mode or self._conf.dtw.mode, scope or self._conf.dtw.scope,
            self._conf.dtw.workers, ev.top_k)

    @validation.schema(schemas.crop_spec, 'crop')
    def ablate(self, entries, videos, seed, variants=None, crop=None,
               n_queries=None, stride=None, model_config=None,
               train_cfg=None):
        """Train and score every ablation variant.

        :returns: list of rows {variant, dtw, map_by_class, map_by_clip}
        """
        ev = self._conf.eval
        if model_config is None:
            model_config = vmodel.ModelConfig.from_conf(self._conf.model)
        if train_cfg is None:
            train_cfg = training.TrainConfig.from_conf(self._conf.train)
        return self._evalops.ablate(
            [(e['video_id'], e['class'], v) for e, v in zip(entries, videos)],
            model_config, train_cfg,
            evaluation.CropSpec.from_conf(ev, **(crop or {})),
            n_queries or ev.num_queries, seed,
            stride or self._conf.data.stride,
            variants or ev.variants or const.ABLATION_VARIANTS,
            const.ABLATION_DTW, self._conf.dtw.workers)
