# -*- coding: utf-8 -*-
"""
Package definition
"""

# todo: read this from the installed package metadata
__version__ = "0.1.0"
