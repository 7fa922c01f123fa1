# -*- coding: utf-8 -*-
#
# adasgate documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.

import sys, os

# The package is documented from the source tree, one level up.
sys.path.append(os.path.abspath('../'))

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.coverage']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'adasgate'
copyright = u'2026, adasgate developers'

# The short X.Y version.
version = '0.1'
# The full version, including alpha/beta/rc tags.
release = '0.1'

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# Members are listed in source order, matching the pipeline order of each module.
autodoc_member_order = 'bysource'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'default'
html_static_path = []
htmlhelp_basename = 'adasgatedoc'

# -- Options for LaTeX output --------------------------------------------------

latex_documents = [
  ('index', 'adasgate.tex', u'adasgate Documentation',
   u'adasgate developers', 'manual'),
]

# -- Options for manual page output --------------------------------------------

man_pages = [
    ('index', 'adasgate', u'adasgate Documentation',
     [u'adasgate developers'], 1)
]
