# Configuration file for the Sphinx documentation builder.
#
# Only the settings differing from Sphinx defaults are listed here, see
# https://www.sphinx-doc.org/en/master/usage/configuration.html for the rest.

import sys
import os

# Make the package importable for autodoc without installing it
sys.path.insert(0, os.path.abspath(".."))

# -- General configuration ------------------------------------------------

extensions = [
    "myst_parser",
    "sphinx.ext.autodoc",
    "sphinxcontrib.apidoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.viewcode",
    "sphinx.ext.mathjax",
    "sphinx-prompt",
]

source_suffix = {
    ".rst": "restructuredtext",
    ".md": "markdown",
}

master_doc = "index"

project = "DMACPipe"
copyright = "2026, The DMACPipe Team"
author = "The DMACPipe Team"

# Version is taken from setup.py
version = "0.0"
with open(os.path.join(os.path.dirname(__file__), "..", "setup.py")) as f:
    for line in f:
        if line.startswith("__version__ = "):
            version = line.split("=")[1].strip().strip("'\"")
            break

release = version

exclude_patterns = ["_build"]

# Single backticks render as inline code, as in the docstrings
default_role = 'code'

pygments_style = "sphinx"

# -- HTML output ----------------------------------------------------------

on_rtd = os.environ.get("READTHEDOCS", None) == "True"

if not on_rtd:  # only import and set the theme if we're building docs locally
    import sphinx_rtd_theme  # noqa
    html_theme = "sphinx_rtd_theme"

html_show_sourcelink = False

htmlhelp_basename = "dmacpipedoc"

# -- API docs -------------------------------------------------------------

apidoc_module_dir = '../dmac'
apidoc_output_dir = 'api'
apidoc_excluded_paths = ['tests']
apidoc_separate_modules = True
apidoc_toc_file = None
apidoc_module_first = True

autodoc_member_order = 'bysource'
