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


import six

from vrsdk import log


LOG = log.LOG


class SDKBaseException(Exception):
    """
    Inherit from this class and define a 'msg_fmt' property.
    That msg_fmt will get printf'd with the keyword arguments
    provided to the constructor.

    'kind' is the stable identifier reported by the command line.
    """
    msg_fmt = "video retrieval SDK error: %(msg)s"
    kind = 'internal'

    def __init__(self, message=None, **kwargs):
        self.kw = kwargs

        if not message:
            try:
                message = self.msg_fmt % kwargs
            except Exception:
                LOG.exception('Exception in string format operation')
                for name, value in six.iteritems(kwargs):
                    LOG.error("%s: %s" % (name, value))

                message = self.msg_fmt

        self.message = message
        super(SDKBaseException, self).__init__(message)

    def format_message(self):
        return self.args[0]


class VRInvalidInput(SDKBaseException):
    msg_fmt = 'Input parameters is invalid: %(msg)s'
    kind = 'invalid_input'


class DimensionError(SDKBaseException):
    msg_fmt = 'Dimension mismatch in %(op)s: %(msg)s'
    kind = 'dimension_mismatch'


class NonFiniteError(SDKBaseException):
    msg_fmt = 'Non-finite values produced by %(op)s'
    kind = 'non_finite'


class MissingGradientError(SDKBaseException):
    msg_fmt = 'Parameter %(name)s has no gradient'
    kind = 'missing_gradient'


class ConfigMismatchError(SDKBaseException):
    msg_fmt = 'Input does not match model config: %(msg)s'
    kind = 'config_mismatch'


class TrainingPreconditionError(SDKBaseException):
    msg_fmt = 'Training precondition violated: %(msg)s'
    kind = 'training_precondition'


class EmptyBatchError(SDKBaseException):
    msg_fmt = 'Empty batch given to %(op)s'
    kind = 'empty_batch'


class PersistenceError(SDKBaseException):
    msg_fmt = 'File %(path)s is invalid: %(msg)s'
    kind = 'persistence'


class CorruptMagicError(PersistenceError):
    msg_fmt = 'File %(path)s has bad magic %(magic)r, expected %(expected)r'
    kind = 'corrupt_magic'


class UnsupportedVersionError(PersistenceError):
    msg_fmt = 'File %(path)s has unsupported version %(version)s'
    kind = 'unsupported_version'


class IndexDimensionMismatch(PersistenceError):
    msg_fmt = ('Record %(video_id)s has dimension %(dim)s, '
               'index dimension is %(expected)s')
    kind = 'dimension_mismatch'


class TruncatedFileError(PersistenceError):
    msg_fmt = 'File %(path)s is truncated: %(msg)s'
    kind = 'truncated'


class DuplicateRecordError(PersistenceError):
    msg_fmt = 'Video id %(video_id)s appears more than once'
    kind = 'duplicate_record'


class EmptyIndexError(SDKBaseException):
    msg_fmt = 'The index holds no candidate videos'
    kind = 'empty_index'


class EmptyRelevantSetError(SDKBaseException):
    msg_fmt = 'No relevant items for query %(query)s'
    kind = 'empty_relevant_set'


class RankOrderError(SDKBaseException):
    msg_fmt = 'Relevant ranks must be strictly increasing positive ints: %(msg)s'
    kind = 'rank_order'


class NotFound(SDKBaseException):
    msg_fmt = 'The resource can not be found: %(msg)s'
    kind = 'not_found'


class ValidationError(SDKBaseException):
    msg_fmt = 'Validation error: %(detail)s'
    kind = 'validation'
