# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.

import os
import sys

# vrsdk is imported from the checkout
sys.path.insert(0, os.path.abspath('../../'))

extensions = [
    'sphinx.ext.autodoc',
]

source_suffix = '.rst'
master_doc = 'index'

project = u'video retrieval sdk'
copyright = u'2017 IBM'
release = '0.1'
version = '0.1'

add_module_names = False
show_authors = False
pygments_style = 'sphinx'
autodoc_member_order = 'bysource'

html_theme = 'default'
htmlhelp_basename = 'vrsdkdoc'

latex_documents = [
    ('index', 'vrsdk.tex', u'video retrieval sdk', u'IBM', 'manual'),
]
