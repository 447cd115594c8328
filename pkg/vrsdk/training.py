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

"""Losses, triplet sampling and the semi-supervised training schedule.

The schedule runs four steps in order, each one switchable:

1. autoencoder pretraining on every clip (reconstruction MSE),
2. triplet training of the encoder on labeled clips,
3. mining of the highest-loss triplets,
4. fine-tuning on batches mixing mined and regular triplets.
"""

import collections
import math

import numpy as np

from vrsdk import exception
from vrsdk import log
from vrsdk import model as vmodel
from vrsdk import tensor as vt


LOG = log.LOG

_TRAINOPS = None

HARD = 'hard'
REGULAR = 'regular'


def get_trainops():
    global _TRAINOPS
    if _TRAINOPS is None:
        _TRAINOPS = TrainOps()
    return _TRAINOPS


class Triplet(collections.namedtuple(
        'Triplet', ['anchor', 'positive', 'negative', 'classes'])):
    """Clip indices into the labeled set plus (anchor, negative) classes."""
    __slots__ = ()


Batch = collections.namedtuple('Batch', ['triplets', 'tags'])

TrainResult = collections.namedtuple('TrainResult', ['model', 'history',
                                                     'hard'])


class TrainConfig(object):

    _defaults = {
        'lr': 0.001, 'lr_decay': 0.1, 'lr_decay_epochs': 10,
        'momentum': 0.9, 'weight_decay': 0.001, 'margin': 0.5,
        'pretrain_epochs': 10, 'triplet_epochs': 10, 'finetune_epochs': 5,
        'early_stop_patience': 5, 'batch_size': 32, 'triplets_per_anchor': 1,
        'mining_fraction': 0.2, 'remix_ratio': 0.5,
        'validation_fraction': 0.2, 'pretrain': True, 'triplet': True,
        'challenging': True, 'seed': 0,
        }

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self._defaults)
        if unknown:
            raise exception.VRInvalidInput(
                msg='unknown training options %s' % sorted(unknown))
        for key, default in self._defaults.items():
            setattr(self, key, kwargs.get(key, default))
        self.validate()

    @classmethod
    def from_conf(cls, train_conf):
        return cls(**dict((k, train_conf[k]) for k in cls._defaults
                          if train_conf.get(k) is not None))

    def copy(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return TrainConfig(**values)

    def to_dict(self):
        return dict((k, getattr(self, k)) for k in self._defaults)

    def validate(self):
        if not 0.0 < self.mining_fraction <= 1.0:
            raise exception.VRInvalidInput(
                msg='mining_fraction must be in (0, 1]')
        if not 0.0 <= self.remix_ratio <= 1.0:
            raise exception.VRInvalidInput(
                msg='remix_ratio must be in [0, 1]')
        if not 0.0 <= self.validation_fraction < 1.0:
            raise exception.VRInvalidInput(
                msg='validation_fraction must be in [0, 1)')
        if self.margin < 0:
            raise exception.VRInvalidInput(msg='margin must be >= 0')
        for key in ('batch_size', 'triplets_per_anchor', 'lr_decay_epochs'):
            if getattr(self, key) < 1:
                raise exception.VRInvalidInput(msg='%s must be >= 1' % key)
        for key in ('pretrain_epochs', 'triplet_epochs', 'finetune_epochs',
                    'early_stop_patience'):
            if getattr(self, key) < 0:
                raise exception.VRInvalidInput(msg='%s must be >= 0' % key)


def learning_rate(epoch, cfg):
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_epochs)


def reconstruction_loss(clips, model):
    """Mean squared reconstruction error of a clip batch, as a Tensor."""
    clips = vt.ensure_tensor(clips)
    diff = model.reconstruct(clips) - clips
    return (diff * diff).mean()


def autoencoder_loss(clip, model):
    """Reconstruction MSE of one clip under inference statistics."""
    clip = np.asarray(clip, dtype=vt.DTYPE)
    with model.inference():
        return reconstruction_loss(clip[None], model).item()


def embedding_distance(a, b):
    a = np.asarray(a, dtype=vt.DTYPE)
    b = np.asarray(b, dtype=vt.DTYPE)
    if a.shape != b.shape:
        raise exception.DimensionError(
            op='embedding_distance', msg='%s vs %s' % (a.shape, b.shape))
    diff = a - b
    return float(np.dot(diff, diff))


def triplet_loss(anchor, positive, negative, margin):
    if margin < 0:
        raise exception.VRInvalidInput(msg='margin must be >= 0')
    return max(0.0, embedding_distance(anchor, positive) -
               embedding_distance(anchor, negative) + margin)


def _row_distance(a, b):
    diff = a - b
    return (diff * diff).sum(axis=-1)


def _gather(clips, triplets):
    anchors = clips[[t.anchor for t in triplets]]
    positives = clips[[t.positive for t in triplets]]
    negatives = clips[[t.negative for t in triplets]]
    return np.concatenate([anchors, positives, negatives], axis=0)


def triplet_batch_objective(triplets, model, clips, margin, lam=0.0):
    """Summed hinge loss of a triplet batch plus lam * ||theta||^2.

    The three branches share one encoder pass so gradients reach the
    encoder through anchor, positive and negative alike.
    """
    if not triplets:
        raise exception.EmptyBatchError(op='triplet_batch_objective')
    n = len(triplets)
    emb = model.encode_batch(_gather(np.asarray(clips), triplets))
    anchor, positive, negative = emb[0:n], emb[n:2 * n], emb[2 * n:3 * n]
    hinge = _row_distance(anchor, positive) - \
        _row_distance(anchor, negative) + margin
    total = vt.activation(hinge, 'leaky_relu', 0.0).sum()
    if lam:
        for param in model.encoder.parameters(trainable_only=True):
            total = total + (param.tensor * param.tensor).sum() * lam
    return total


def triplet_losses(triplets, model, clips, margin):
    """Per-triplet hinge loss under inference statistics."""
    if not triplets:
        return np.zeros(0)
    clips = np.asarray(clips)
    used = sorted(set(i for t in triplets
                      for i in (t.anchor, t.positive, t.negative)))
    emb = vmodel.encode_many(clips[used], model)
    row = dict((idx, k) for k, idx in enumerate(used))
    return np.array([triplet_loss(emb[row[t.anchor]], emb[row[t.positive]],
                                  emb[row[t.negative]], margin)
                     for t in triplets])


def sample_triplets(labels, per_anchor, seed):
    """Draw per_anchor triplets for every clip whose class has a partner.

    ``labels`` lists the class of each labeled clip. The result is a
    multiset: the same anchor appears per_anchor times.
    """
    if per_anchor < 1:
        raise exception.VRInvalidInput(msg='per_anchor must be >= 1')
    members = collections.OrderedDict()
    for idx, label in enumerate(labels):
        members.setdefault(label, []).append(idx)
    if len(members) < 2:
        raise exception.TrainingPreconditionError(
            msg='triplets need at least 2 classes, got %d' % len(members))
    for label, idxs in members.items():
        if len(idxs) < 2:
            LOG.warning('Class %s has a single clip, not used as anchor',
                        label)
    rng = np.random.default_rng(seed)
    triplets = []
    for anchor, label in enumerate(labels):
        same = [i for i in members[label] if i != anchor]
        if not same:
            continue
        others = [i for i, lab in enumerate(labels) if lab != label]
        for _ in range(per_anchor):
            positive = same[int(rng.integers(len(same)))]
            negative = others[int(rng.integers(len(others)))]
            triplets.append(Triplet(anchor, positive, negative,
                                    (label, labels[negative])))
    return triplets


def mine_challenging(triplets, model, clips, fraction=0.2, margin=0.5,
                     losses=None):
    """Split triplets into the ceil(fraction * N) highest-loss ones and rest.

    Ties keep input order; both halves come back in input order.
    """
    if not triplets:
        raise exception.EmptyBatchError(op='mine_challenging')
    if not 0.0 < fraction <= 1.0:
        raise exception.VRInvalidInput(msg='fraction must be in (0, 1]')
    if losses is None:
        losses = triplet_losses(triplets, model, clips, margin)
    count = int(math.ceil(fraction * len(triplets)))
    order = np.argsort(-np.asarray(losses), kind='stable')
    chosen = set(int(i) for i in order[:count])
    hard = [t for i, t in enumerate(triplets) if i in chosen]
    rest = [t for i, t in enumerate(triplets) if i not in chosen]
    return hard, rest


def remix_batches(hard, rest, batch_size, ratio, rng):
    """One epoch of fine-tuning batches, floor(ratio * B) hard per batch.

    Regular triplets are each visited once per epoch; the hard ones are
    resampled to fill their share of every batch.
    """
    if not hard and not rest:
        raise exception.EmptyBatchError(op='remix_batches')
    n_hard = int(math.floor(ratio * batch_size))
    if not hard:
        n_hard = 0
    elif not rest:
        n_hard = batch_size
    n_rest = batch_size - n_hard
    if n_rest:
        n_batches = int(math.ceil(len(rest) / float(n_rest)))
        order = rng.permutation(len(rest))
    else:
        n_batches = int(math.ceil(len(hard) / float(n_hard)))
    batches = []
    for b in range(n_batches):
        picked = []
        if n_hard:
            idx = rng.choice(len(hard), size=n_hard,
                             replace=n_hard > len(hard))
            picked.extend((hard[int(i)], HARD) for i in idx)
        for j in range(n_rest):
            picked.append((rest[int(order[(b * n_rest + j) % len(rest)])],
                           REGULAR))
        batches.append(Batch([p[0] for p in picked], [p[1] for p in picked]))
    return batches


class EarlyStopping(object):
    """Track the best monitored loss and the parameters that produced it."""

    def __init__(self, model, patience):
        self.model = model
        self.patience = patience
        self.best = None
        self.best_state = None
        self.waited = 0

    def update(self, loss):
        """Record an epoch; returns True when training should stop."""
        if self.best is None or loss < self.best:
            self.best = loss
            self.best_state = self.model.state()
            self.waited = 0
            return False
        self.waited += 1
        return self.patience > 0 and self.waited >= self.patience

    def restore(self):
        if self.best_state is not None:
            self.model.load_state(self.best_state)


def _split(count, fraction, rng):
    order = rng.permutation(count)
    n_val = int(math.floor(fraction * count))
    if count - n_val < 1:
        n_val = 0
    return sorted(order[n_val:].tolist()), sorted(order[:n_val].tolist())


class TrainOps(object):

    def __init__(self):
        self.history = []

    def _log_epoch(self, stage, epoch, lr, train_loss, val_loss):
        entry = {'stage': stage, 'epoch': epoch, 'lr': lr,
                 'train_loss': train_loss, 'val_loss': val_loss}
        self.history.append(entry)
        LOG.info('%s epoch %d lr %.6g train loss %.6f val loss %s',
                 stage, epoch, lr, train_loss,
                 'n/a' if val_loss is None else '%.6f' % val_loss)

    def _check(self, unlabeled, labeled, labels, cfg, model):
        if cfg.pretrain and len(unlabeled) == 0:
            raise exception.TrainingPreconditionError(
                msg='pretraining needs unlabeled clips')
        if cfg.triplet or cfg.challenging:
            if len(labeled) != len(labels):
                raise exception.TrainingPreconditionError(
                    msg='%d labeled clips but %d labels'
                    % (len(labeled), len(labels)))
            if len(set(labels)) < 2:
                raise exception.TrainingPreconditionError(
                    msg='labeled clips span %d classes, need 2'
                    % len(set(labels)))
            known = set(np.ascontiguousarray(c, dtype=vt.DTYPE).tobytes()
                        for c in unlabeled)
            for idx, clip in enumerate(labeled):
                raw = np.ascontiguousarray(clip, dtype=vt.DTYPE).tobytes()
                if raw not in known:
                    raise exception.TrainingPreconditionError(
                        msg='labeled clip %d is not among the unlabeled '
                        'clips' % idx)
        for clips in (unlabeled, labeled):
            if len(clips):
                model.check_clips(np.asarray(clips))

    def _step(self, loss, params, lr, cfg):
        loss.backward()
        vt.sgd_step(params, lr, momentum=cfg.momentum,
                    weight_decay=cfg.weight_decay)

    def _run_stage(self, stage, model, epochs, cfg, run_epoch, monitor):
        stopper = EarlyStopping(model, cfg.early_stop_patience)
        for epoch in range(epochs):
            lr = learning_rate(epoch, cfg)
            model.train()
            train_loss = run_epoch(epoch, lr)
            val_loss = monitor()
            self._log_epoch(stage, epoch, lr, train_loss, val_loss)
            if stopper.update(train_loss if val_loss is None else val_loss):
                LOG.info('%s stopped early after epoch %d', stage, epoch)
                break
        stopper.restore()

    def pretrain(self, model, clips, cfg, rng):
        """Step 1: autoencoder pretraining on every clip."""
        clips = np.asarray(clips, dtype=vt.DTYPE)
        train_idx, val_idx = _split(len(clips), cfg.validation_fraction, rng)
        params = model.parameters(trainable_only=True)

        def run_epoch(epoch, lr):
            order = rng.permutation(train_idx)
            losses = []
            for start in range(0, len(order), cfg.batch_size):
                batch = clips[order[start:start + cfg.batch_size]]
                loss = reconstruction_loss(batch, model)
                self._step(loss, params, lr, cfg)
                losses.append(loss.item())
            return float(np.mean(losses))

        def monitor():
            if not val_idx:
                return None
            with model.inference():
                return reconstruction_loss(clips[val_idx], model).item()

        self._run_stage('pretrain', model, cfg.pretrain_epochs, cfg,
                        run_epoch, monitor)

    def _triplet_epoch(self, model, clips, batches, lr, cfg):
        params = model.encoder.parameters(trainable_only=True)
        losses = []
        for batch in batches:
            loss = triplet_batch_objective(batch, model, clips, cfg.margin)
            self._step(loss, params, lr, cfg)
            losses.append(loss.item() / len(batch))
        return float(np.mean(losses))

    def _triplet_monitor(self, model, clips, val, cfg):
        if not val:
            return lambda: None
        return lambda: float(np.mean(triplet_losses(val, model, clips,
                                                    cfg.margin)))

    def triplet_train(self, model, clips, train, val, cfg, rng):
        """Step 2: encoder training on the labeled triplets."""

        def run_epoch(epoch, lr):
            order = rng.permutation(len(train))
            batches = [[train[i] for i in order[s:s + cfg.batch_size]]
                       for s in range(0, len(order), cfg.batch_size)]
            return self._triplet_epoch(model, clips, batches, lr, cfg)

        self._run_stage('triplet', model, cfg.triplet_epochs, cfg, run_epoch,
                        self._triplet_monitor(model, clips, val, cfg))

    def finetune(self, model, clips, hard, rest, val, cfg, rng):
        """Step 4: retraining on batches remixed from mined triplets."""

        def run_epoch(epoch, lr):
            batches = remix_batches(hard, rest, cfg.batch_size,
                                    cfg.remix_ratio, rng)
            return self._triplet_epoch(model, clips,
                                       [b.triplets for b in batches],
                                       lr, cfg)

        self._run_stage('finetune', model, cfg.finetune_epochs, cfg,
                        run_epoch,
                        self._triplet_monitor(model, clips, val, cfg))

    def train_schedule(self, unlabeled, labeled, labels, cfg, model):
        """Run the enabled steps in order and return the trained model.

        Every precondition is checked before any parameter changes.
        """
        self._check(unlabeled, labeled, labels, cfg, model)
        self.history = []
        rng = np.random.default_rng(cfg.seed)
        hard = []
        if cfg.pretrain:
            self.pretrain(model, unlabeled, cfg, rng)
        if cfg.triplet or cfg.challenging:
            labeled = np.asarray(labeled, dtype=vt.DTYPE)
            triplets = sample_triplets(labels, cfg.triplets_per_anchor,
                                       int(rng.integers(2 ** 31)))
            if not triplets:
                raise exception.TrainingPreconditionError(
                    msg='no class has two labeled clips')
            train_idx, val_idx = _split(len(triplets),
                                        cfg.validation_fraction, rng)
            train = [triplets[i] for i in train_idx]
            val = [triplets[i] for i in val_idx]
            if cfg.triplet:
                self.triplet_train(model, labeled, train, val, cfg, rng)
            if cfg.challenging:
                hard, rest = mine_challenging(train, model, labeled,
                                              cfg.mining_fraction,
                                              cfg.margin)
                LOG.info('Mined %d challenging triplets out of %d',
                         len(hard), len(train))
                self.finetune(model, labeled, hard, rest, val, cfg, rng)
        model.eval()
        return TrainResult(model, list(self.history), hard)
