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

import jsonschema
import six

from vrsdk import exception


def validate(schema, target, what='document'):
    _SchemaValidator(schema, what).validate(target)


def schema(target_schema, kwarg):
    """Validate keyword argument ``kwarg`` of the wrapped call."""

    def add_validator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            if kwargs.get(kwarg) is not None:
                validate(target_schema, kwargs[kwarg], kwarg)
            return func(*args, **kwargs)
        return wrapper

    return add_validator


class _SchemaValidator(object):
    """Draft 4 validator reporting failures as ValidationError.

    The message names the offending field path and value.
    """
    validator_org = jsonschema.Draft4Validator

    def __init__(self, schema, what='document'):
        self.what = what
        self.validator = self.validator_org(
            schema, format_checker=jsonschema.FormatChecker())

    def validate(self, *args, **kwargs):
        try:
            self.validator.validate(*args, **kwargs)
        except jsonschema.ValidationError as ex:
            if len(ex.path) > 0:
                detail = ("Invalid input for field/attribute %(path)s of "
                          "%(what)s. Value: %(value)s. %(message)s")
                detail = detail % {
                    'path': '.'.join(six.text_type(p) for p in ex.path),
                    'what': self.what, 'value': ex.instance,
                    'message': ex.message
                }
            else:
                detail = '%s: %s' % (self.what, ex.message)
            raise exception.ValidationError(detail=detail)
        except TypeError as ex:
            raise exception.ValidationError(detail=six.text_type(ex))
