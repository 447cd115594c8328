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

"""Dynamic time warping over embedding sequences.

Local cost is the squared Euclidean distance between two embeddings and
steps are (1, 0), (0, 1) and (1, 1). No path-length normalization is
applied.
"""

import collections
from concurrent import futures

import numpy as np

from vrsdk import constants as const
from vrsdk import exception


AlignmentResult = collections.namedtuple(
    'AlignmentResult', ['cost', 'path', 'direction_used'])


class EmbeddingSequence(object):
    """Ordered per-clip embeddings of one video."""

    def __init__(self, vectors, video_id=''):
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise exception.VRInvalidInput(
                msg='embedding sequence %s must be a non-empty 2-D array, '
                'got shape %s' % (video_id, vectors.shape))
        self.vectors = vectors
        self.video_id = video_id

    def __len__(self):
        return self.vectors.shape[0]

    def __repr__(self):
        return 'EmbeddingSequence(%s, len=%d, dim=%d)' % (
            self.video_id, len(self), self.dim)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def reversed(self):
        return EmbeddingSequence(self.vectors[::-1], self.video_id)


def _vectors(seq):
    if isinstance(seq, EmbeddingSequence):
        return seq.vectors
    return EmbeddingSequence(seq).vectors


def cost_matrix(a, b):
    a, b = _vectors(a), _vectors(b)
    if a.shape[1] != b.shape[1]:
        raise exception.DimensionError(
            op='dtw', msg='embedding dimension %d vs %d'
            % (a.shape[1], b.shape[1]))
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum('ijk,ijk->ij', diff, diff)


def _accumulate(cost, open_begin):
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    if open_begin:
        acc[0, :] = 0.0
    else:
        acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(
                acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
    return acc


def _traceback(acc, end, open_begin):
    """Walk back from (n, end); ties go diagonal, then i, then j."""
    i, j = acc.shape[0] - 1, end
    path = [(i - 1, j - 1)]
    while not (i == 1 and (open_begin or j == 1)):
        step = int(np.argmin((acc[i - 1, j - 1], acc[i - 1, j],
                              acc[i, j - 1])))
        if step == 0:
            i, j = i - 1, j - 1
        elif step == 1:
            i -= 1
        else:
            j -= 1
        path.append((i - 1, j - 1))
    path.reverse()
    return path


def dtw(a, b, direction=const.DIRECTION_FORWARD):
    """Full alignment of a against b."""
    acc = _accumulate(cost_matrix(a, b), open_begin=False)
    end = acc.shape[1] - 1
    return AlignmentResult(float(acc[-1, end]),
                           _traceback(acc, end, False), direction)


def subsequence_dtw(query, candidate, direction=const.DIRECTION_FORWARD):
    """Align all of query to the best-matching stretch of candidate.

    Begin and end are free on the candidate axis; among equal-cost ends
    the earliest wins.
    """
    acc = _accumulate(cost_matrix(query, candidate), open_begin=True)
    end = int(np.argmin(acc[-1, 1:])) + 1
    return AlignmentResult(float(acc[-1, end]),
                           _traceback(acc, end, True), direction)


def _normalize_mode(mode):
    mode = mode.replace('_', '-')
    if mode not in const.DTW_MODES + (const.DTW_MODE_FORWARD,):
        raise exception.VRInvalidInput(msg='unknown dtw mode %s' % mode)
    return mode


def _normalize_scope(scope):
    if scope not in const.DTW_SCOPES:
        raise exception.VRInvalidInput(msg='unknown dtw scope %s' % scope)
    return scope


def bidtw_align(a, b, mode='one-reversed', scope='subsequence'):
    """Best alignment over the directions allowed by mode.

    both-reversed compares (a, b) with (rev a, rev b); one-reversed
    compares (a, b) with (rev a, b); forward only aligns (a, b). On equal
    cost the forward alignment is kept.
    """
    mode = _normalize_mode(mode)
    align = dtw if _normalize_scope(scope) == 'full' else subsequence_dtw
    a = a if isinstance(a, EmbeddingSequence) else EmbeddingSequence(a)
    b = b if isinstance(b, EmbeddingSequence) else EmbeddingSequence(b)
    best = align(a, b, const.DIRECTION_FORWARD)
    if mode == const.DTW_MODE_FORWARD:
        return best
    rev_b = b.reversed() if mode == 'both-reversed' else b
    other = align(a.reversed(), rev_b, const.DIRECTION_REVERSED)
    return other if other.cost < best.cost else best


def bidtw(a, b, mode='one-reversed', scope='subsequence'):
    return bidtw_align(a, b, mode, scope).cost


def rank_candidates(query, records, k=None, mode='one-reversed',
                    scope='subsequence', workers=1):
    """Rank records by ascending Bi-DTW cost to query, ties by video id.

    Returns at most k (video_id, cost) pairs; all of them when k is None.
    """
    if not records:
        raise exception.EmptyIndexError()
    mode = _normalize_mode(mode)
    scope = _normalize_scope(scope)
    for record in records:
        if record.embeddings.dim != query.dim:
            raise exception.DimensionError(
                op='rank_candidates', msg='query dim %d, %s has dim %d'
                % (query.dim, record.video_id, record.embeddings.dim))

    def score(record):
        return bidtw(query, record.embeddings, mode, scope)

    if workers and workers > 1:
        with futures.ThreadPoolExecutor(max_workers=workers) as pool:
            costs = list(pool.map(score, records))
    else:
        costs = [score(r) for r in records]
    ranked = sorted(zip((r.video_id for r in records), costs),
                    key=lambda item: (item[1], item[0]))
    return ranked if k is None else ranked[:k]
