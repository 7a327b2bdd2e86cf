# -*- coding: utf-8 -*-
"""
Package entrypoint
"""

from . import cli

if __name__ == "__main__":
    cli.main()
