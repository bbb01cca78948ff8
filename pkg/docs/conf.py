#!/usr/bin/env python
#
# vbcdhmm documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

import vbcdhmm  # noqa

# -- General configuration ---------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.viewcode",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
]
autodoc_typehints = "both"
autodoc_member_order = "bysource"

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "scipy": ("https://docs.scipy.org/doc/scipy", None),
}

source_suffix = ".rst"

# The master toctree document.
master_doc = "index"

# General information about the project.
project = "vbcdhmm"
copyright = "2025, vbcdhmm developers"
author = "vbcdhmm developers"

version = vbcdhmm.__version__
release = vbcdhmm.__version__

exclude_patterns = ["_build"]

pygments_style = "sphinx"
html_theme = "sphinx_rtd_theme"
