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
import sys
import time

from vrsdk import api
from vrsdk import config
from vrsdk import log


CONF = config.CONF
LOG = log.LOG
SDK = api.SDKAPI()


def generate_data(data_dir, seed):
    """Render the synthetic dataset.

    Input parameters:
    :data_dir:        directory receiving the PNG sequences and manifest
    :seed:            generator seed
    """
    entries = SDK.synth_generate(data_dir, seed)
    LOG.info("Generated %d videos under %s", len(entries), data_dir)
    return entries


def train_model(data_dir, model_path):
    """Run the configured training schedule on a dataset.

    Input parameters:
    :data_dir:        dataset directory with a manifest
    :model_path:      checkpoint file to write
    """
    entries, videos = SDK.dataset_load(data_dir)
    train_start = time.time()
    result = SDK.model_train(SDK.model_create(), entries, videos)
    LOG.info("Training finished in %s seconds, %d challenging triplets",
             time.time() - train_start, len(result.hard))
    SDK.model_save(result.model, model_path)
    return result


def build_index(data_dir, model_path):
    """Embed every dataset video with a trained model.

    Input parameters:
    :data_dir:        dataset directory with a manifest
    :model_path:      checkpoint written by train_model
    """
    model = SDK.model_load(model_path)
    entries, videos = SDK.dataset_load(data_dir)
    return model, SDK.index_build(model, entries, videos)


def find_duplicates(model, index, frames, top_k=5):
    """Rank indexed videos against one standardized video.

    Input parameters:
    :model:           model returned by build_index
    :index:           index returned by build_index
    :frames:          (M, H, W, C) frames

    Output parameters:
    :ranking:         list of (video_id, cost), best first
    """
    return SDK.index_query(index, SDK.video_embed(model, frames),
                           top_k=top_k)


def main(work_dir, seed=0):
    data_dir = os.path.join(work_dir, 'data')
    model_path = os.path.join(work_dir, 'model.vckpt')
    generate_data(data_dir, seed)
    train_model(data_dir, model_path)
    model, index = build_index(data_dir, model_path)
    entries, videos = SDK.dataset_load(data_dir)
    for entry, frames in list(zip(entries, videos))[:3]:
        print(entry['video_id'], find_duplicates(model, index, frames))


if __name__ == '__main__':
    main(sys.argv[1] if len(sys.argv) > 1 else '/tmp/vrsdk-sample')
