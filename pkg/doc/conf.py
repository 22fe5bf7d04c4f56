# -*- coding: utf-8 -*-
#
# pyRespiClass documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

# The package lives one directory up.
sys.path.insert(0, os.path.abspath('..'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.napoleon',
]

# The modules import numpy, scipy and friends, which need not be installed
# to build the docs.
autodoc_mock_imports = ['scipy', 'soundfile', 'pandas', 'matplotlib', 'pytz',
                        'tqdm']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'pyRespiClass'
copyright = u'2026, the pyRespiClass developers'
author = u'the pyRespiClass developers'

version = '0.1'
release = '0.1.0'

language = 'en'
exclude_patterns = ['_build']
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'
html_static_path = ['_static']
htmlhelp_basename = 'pyRespiClassdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
  (master_doc, 'pyRespiClass.tex', u'pyRespiClass Documentation',
   author, 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'respiclass', u'pyRespiClass Documentation',
     [author], 1)
]
