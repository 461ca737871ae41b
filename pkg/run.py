#!/usr/bin/env python3

import sys

from verity import core

if __name__ == '__main__':
    sys.exit(core.run())
