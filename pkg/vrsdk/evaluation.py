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

"""Average precision, the two relevance protocols and cropped queries."""

import collections
import json

import numpy as np

from vrsdk import constants as const
from vrsdk import dtw
from vrsdk import exception
from vrsdk import log
from vrsdk import model as vmodel
from vrsdk import store
from vrsdk import training
from vrsdk import utils
from vrsdk import validation
from vrsdk.validation import schemas


LOG = log.LOG

_EVALOPS = None


def get_evalops():
    global _EVALOPS
    if _EVALOPS is None:
        _EVALOPS = EvalOps()
    return _EVALOPS


QueryCase = collections.namedtuple(
    'QueryCase', ['query', 'truth_video_id', 'truth_class',
                  'frame_indices'])

Crop = collections.namedtuple('Crop', ['video', 'frame_indices'])

EvalReport = collections.namedtuple('EvalReport', ['summary', 'queries'])


class CropSpec(collections.namedtuple('CropSpec', [
        'full', 'min_runs', 'max_runs', 'run_len', 'max_gap',
        'reverse_clips', 'reverse_frames'])):
    """How test queries are cut from a source video.

    A query is 1 to N runs of run_len consecutive frames; consecutive runs
    are separated by gaps of 1..max_gap frames (no gap when max_gap is 0).
    ``full`` takes the whole video instead.
    """
    __slots__ = ()

    def __new__(cls, full=False, min_runs=1, max_runs=2, run_len=8,
                max_gap=4, reverse_clips=False, reverse_frames=False):
        if min_runs < 1 or max_runs < min_runs:
            raise exception.VRInvalidInput(
                msg='need 1 <= min_runs <= max_runs')
        if run_len < 1 or max_gap < 0:
            raise exception.VRInvalidInput(
                msg='run_len must be >= 1 and max_gap >= 0')
        return super(CropSpec, cls).__new__(
            cls, full, min_runs, max_runs, run_len, max_gap, reverse_clips,
            reverse_frames)

    @classmethod
    def from_conf(cls, eval_conf, **changes):
        values = {'min_runs': eval_conf.min_runs,
                  'max_runs': eval_conf.max_runs,
                  'run_len': eval_conf.run_len,
                  'max_gap': eval_conf.max_gap,
                  'reverse_clips': eval_conf.reverse_clips,
                  'reverse_frames': eval_conf.reverse_frames}
        values.update(changes)
        return cls(**values)

    @property
    def min_gap(self):
        return 1 if self.max_gap else 0

    def min_length(self, runs=None):
        runs = self.min_runs if runs is None else runs
        return runs * self.run_len + (runs - 1) * self.min_gap


def average_precision(ranks, n):
    """(1/n) * sum_i i / r_i over the 1-based ranks of retrieved relevants."""
    if n < 1:
        raise exception.EmptyRelevantSetError(query='?')
    ranks = list(ranks)
    if len(ranks) > n:
        raise exception.RankOrderError(
            msg='%d ranks for %d relevant items' % (len(ranks), n))
    previous = 0
    for r in ranks:
        if int(r) != r or r <= previous:
            raise exception.RankOrderError(msg=ranks)
        previous = r
    return sum((i + 1) / float(r) for i, r in enumerate(ranks)) / n


def _sample_indices(length, spec, rng):
    if spec.full:
        return list(range(length))
    fitting = [r for r in range(spec.min_runs, spec.max_runs + 1)
               if spec.min_length(r) <= length]
    runs = fitting[int(rng.integers(len(fitting)))]
    slack = length - runs * spec.run_len
    gaps = [int(g) for g in rng.integers(spec.min_gap, spec.max_gap + 1,
                                         size=runs - 1)]
    while sum(gaps) > slack:
        gaps[int(np.argmax(gaps))] -= 1
    total = runs * spec.run_len + sum(gaps)
    pos = int(rng.integers(0, length - total + 1))
    indices = []
    for k in range(runs):
        indices.extend(range(pos, pos + spec.run_len))
        pos += spec.run_len + (gaps[k] if k < len(gaps) else 0)
    return indices


def sample_crops(lengths, n_queries, spec, seed, min_frames=1):
    """Pick n_queries (video position, frame indices) crops.

    Videos too short for the crop are skipped with a warning.
    """
    need = min_frames if spec.full else max(min_frames, spec.min_length())
    eligible = []
    for pos, length in enumerate(lengths):
        if length < need:
            LOG.warning('Video %d has %d frames, query crops need %d; '
                        'skipped', pos, length, need)
            continue
        eligible.append(pos)
    if not eligible:
        return []
    rng = np.random.default_rng(seed)
    crops = []
    for _ in range(n_queries):
        pos = eligible[int(rng.integers(len(eligible)))]
        crops.append(Crop(pos, _sample_indices(lengths[pos], spec, rng)))
    return crops


def crop_query(frames, crop, spec, embedder):
    picked = np.asarray(frames)[crop.frame_indices]
    if spec.reverse_frames:
        picked = picked[::-1]
    query = embedder(picked)
    if spec.reverse_clips:
        query = query.reversed()
    return query


def generate_test_queries(videos, n_queries, crop_spec, seed, embedder,
                          min_frames=1):
    """Cut deterministic test queries out of source videos.

    ``videos`` holds (video_id, class_label, frames) triples and
    ``embedder`` maps frames to an EmbeddingSequence. Each QueryCase keeps
    its source as ground truth.
    """
    videos = list(videos)
    crops = sample_crops([len(v[2]) for v in videos], n_queries, crop_spec,
                         seed, min_frames)
    cases = []
    for crop in crops:
        video_id, class_label, frames = videos[crop.video]
        query = crop_query(frames, crop, crop_spec, embedder)
        query.video_id = video_id
        cases.append(QueryCase(query, video_id, class_label,
                               list(crop.frame_indices)))
    return cases


def _relevance(protocol, case, index):
    """(candidate records, relevance test, relevant count) for one query."""
    if protocol == const.PROTOCOL_BY_CLIP:
        if case.truth_video_id not in set(r.video_id for r in index):
            raise exception.EmptyRelevantSetError(query=case.truth_video_id)
        return (index.records, lambda r: r.video_id == case.truth_video_id,
                1)
    if protocol != const.PROTOCOL_BY_CLASS:
        raise exception.VRInvalidInput(msg='unknown protocol %s' % protocol)
    records = [r for r in index if r.class_label is not None]
    n = sum(1 for r in records if r.class_label == case.truth_class)
    if not n:
        raise exception.EmptyRelevantSetError(query=case.truth_video_id)
    return records, lambda r: r.class_label == case.truth_class, n


def evaluate(queries, index, protocol=const.PROTOCOL_BY_CLASS,
             mode='one-reversed', scope='subsequence', workers=1, top_k=10):
    """Rank every query against the index and average the per-query AP."""
    queries = list(queries)
    protocol = protocol.replace('_', '-')
    if not queries:
        raise exception.VRInvalidInput(msg='no queries to evaluate')
    if not len(index):
        raise exception.EmptyIndexError()
    if protocol == const.PROTOCOL_BY_CLASS:
        unlabeled = [r.video_id for r in index if r.class_label is None]
        if unlabeled:
            LOG.warning('%d unlabeled videos excluded from by-class '
                        'ranking', len(unlabeled))
    per_query = []
    for number, case in enumerate(queries):
        if protocol == const.PROTOCOL_BY_CLASS and case.truth_class is None:
            LOG.warning('Query %d comes from unlabeled video %s; excluded',
                        number, case.truth_video_id)
            continue
        records, relevant, n = _relevance(protocol, case, index)
        ranking = dtw.rank_candidates(case.query, records, None, mode, scope,
                                      workers)
        by_id = dict((r.video_id, r) for r in records)
        ranks = [pos + 1 for pos, (vid, _) in enumerate(ranking)
                 if relevant(by_id[vid])]
        per_query.append({
            'query': number,
            'truth_video_id': case.truth_video_id,
            'truth_class': case.truth_class,
            'ap': average_precision(ranks, n),
            'relevant': n,
            'ranks': ranks,
            'top': [vid for vid, _ in ranking[:top_k]],
            })
    if not per_query:
        raise exception.VRInvalidInput(msg='every query was excluded')
    summary = {
        'protocol': protocol,
        'map': float(np.mean([q['ap'] for q in per_query])),
        'num_queries': len(per_query),
        'dtw_mode': mode.replace('_', '-'),
        'dtw_scope': scope,
        }
    LOG.info('%s mAP %.4f over %d queries (%s, %s)', protocol,
             summary['map'], len(per_query), mode, scope)
    return EvalReport(summary, per_query)


def write_report(report, path):
    """One JSON line per query followed by the summary line."""
    lines = []
    for entry in report.queries:
        validation.validate(schemas.report_query, entry, 'report query')
        lines.append(json.dumps(entry, sort_keys=True))
    validation.validate(schemas.report_summary, report.summary,
                        'report summary')
    lines.append(json.dumps(report.summary, sort_keys=True))
    utils.atomic_write(path, ('\n'.join(lines) + '\n').encode('utf-8'))


def read_report(path):
    with utils.expect_readable(path):
        with open(path) as f:
            entries = [json.loads(line) for line in f if line.strip()]
    if not entries:
        raise exception.ValidationError(detail='%s is empty' % path)
    return EvalReport(entries[-1], entries[:-1])


def write_ablation(rows, path):
    for row in rows:
        validation.validate(schemas.ablation_row, row, 'ablation row')
    payload = ''.join(json.dumps(row, sort_keys=True) + '\n' for row in rows)
    utils.atomic_write(path, payload.encode('utf-8'))


def format_table(rows):
    header = '%-20s %-6s %12s %12s' % ('variant', 'dtw', 'map_by_class',
                                        'map_by_clip')
    lines = [header]
    for row in rows:
        lines.append('%-20s %-6s %12.4f %12.4f' % (
            row['variant'], row['dtw'], row['map_by_class'],
            row['map_by_clip']))
    return '\n'.join(lines)


class EvalOps(object):

    def embedder(self, model, clip_len, stride):
        def embed(frames):
            return store.embed_video(frames, model, clip_len, stride)
        return embed

    def evaluate_model(self, model, videos, crops, crop_spec, clip_len,
                       stride, protocols, dtw_configs, workers=1):
        """Index videos with model and score the given crops.

        Returns {(protocol, column): report}.
        """
        embed = self.embedder(model, clip_len, stride)
        index = store.VideoIndex(
            [store.VideoRecord(vid, label, embed(frames))
             for vid, label, frames in videos if len(frames) >= clip_len],
            model.config.embedding_dim)
        queries = []
        for crop in crops:
            vid, label, frames = videos[crop.video]
            query = crop_query(frames, crop, crop_spec, embed)
            queries.append(QueryCase(query, vid, label,
                                     list(crop.frame_indices)))
        reports = {}
        for column, mode, scope in dtw_configs:
            for protocol in protocols:
                reports[(protocol, column)] = evaluate(
                    queries, index, protocol, mode, scope, workers)
        return reports

    def ablate(self, videos, config, train_cfg, crop_spec, n_queries, seed,
               stride, variants=const.ABLATION_VARIANTS,
               dtw_configs=const.ABLATION_DTW, workers=1):
        """Train each variant from the same initial weights and score it.

        ``videos`` holds (video_id, class_label, frames). Rows come out in
        variant order, then DTW column order.
        """
        videos = list(videos)
        clip_len = config.clip_len
        crops = sample_crops([len(v[2]) for v in videos], n_queries,
                             crop_spec, seed, clip_len)
        if not crops:
            raise exception.VRInvalidInput(
                msg='no video is long enough for the query crops')
        clips, labels = store.collect_clips(
            [(label, frames) for _, label, frames in videos], clip_len,
            stride)
        labeled = [i for i, lab in enumerate(labels) if lab is not None]
        rows = []
        for variant in variants:
            if variant not in const.ABLATION_STAGES:
                raise exception.VRInvalidInput(
                    msg='unknown ablation variant %s' % variant)
            pretrain, triplet, challenging = const.ABLATION_STAGES[variant]
            model = vmodel.build_model(config)
            if pretrain or triplet or challenging:
                cfg = train_cfg.copy(pretrain=pretrain, triplet=triplet,
                                     challenging=challenging, seed=seed)
                training.TrainOps().train_schedule(
                    clips, clips[labeled], [labels[i] for i in labeled],
                    cfg, model)
            reports = self.evaluate_model(
                model, videos, crops, crop_spec, clip_len, stride,
                const.PROTOCOLS, dtw_configs, workers)
            for column, _, _ in dtw_configs:
                rows.append({
                    'variant': variant,
                    'dtw': column,
                    'map_by_class':
                        reports[(const.PROTOCOL_BY_CLASS, column)]
                        .summary['map'],
                    'map_by_clip':
                        reports[(const.PROTOCOL_BY_CLIP, column)]
                        .summary['map'],
                    })
            LOG.info('Ablation variant %s done', variant)
        return rows
