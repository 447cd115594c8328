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


import logging

from vrsdk.config import CONF


class Logger():
    def __init__(self, logger, path="/tmp/vrsdk.log",
                 level=logging.INFO, console=False):
        # create a logger
        self.logger = logging.getLogger(logger)
        self.logger.setLevel(level)

        # set the formate of the handlers
        formatter = logging.Formatter(
            '[%(asctime)s] [%(levelname)s] %(message)s', '%Y-%m-%d %H:%M:%S')

        # create a handler for the file
        try:
            fh = logging.FileHandler(path)
        except (IOError, OSError):
            # unwritable log location, fall back to stderr
            fh = logging.StreamHandler()
        fh.setLevel(level)
        fh.setFormatter(formatter)
        self.logger.addHandler(fh)

        if console:
            ch = logging.StreamHandler()
            ch.setLevel(level)
            ch.setFormatter(formatter)
            self.logger.addHandler(ch)

    def getlog(self):
        return self.logger


def get_level(name):
    name = str(name).upper()
    if name.startswith('LOGGING.'):
        name = name[len('LOGGING.'):]
    if name == 'WARNING':
        name = 'WARN'
    return {'DEBUG': logging.DEBUG,
            'INFO': logging.INFO,
            'WARN': logging.WARN,
            'ERROR': logging.ERROR,
            'CRITICAL': logging.CRITICAL}.get(name, logging.INFO)


LOG = Logger(path=CONF.logging.log_file, logger='VRSDK',
             level=get_level(CONF.logging.log_level),
             console=CONF.logging.log_to_console).getlog()
