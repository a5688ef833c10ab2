################################
# Miva Desk I2V Adapter Suite  #
# __main__.py                  #
# Copyright 2026               #
# The Miva Desk Authors        #
################################

# **********
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to
# deal in the Software without restriction, including without limitation the
# rights to use, copy, modify, merge, publish, distribute, sublicense, and/or
# sell copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING
# FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS
# IN THE SOFTWARE.
# **********

import os
import sys

VCUR = sys.version_info
VREQ = [3, 8, 0]

# (module, pip package) for every third-party import, checked before anything pulls them in.
REQUIRED = [
    ("torch", "torch"),
    ("numpy", "numpy"),
    ("einops", "einops"),
    ("tqdm", "tqdm"),
    ("pygame", "pygame"),
    ("jsonschema", "jsonschema"),
    ("ubjson", "py-ubjson"),
    ("jinja2", "jinja2"),
]

# We have to do this here before we start pulling in nonexistent imports.
if __name__ == "__main__":
    # Check Python version.
    if (VCUR[0], VCUR[1], VCUR[2]) < tuple(VREQ):
        print("Miva Desk\n[0] Starting up...")
        print(
            "[0] FATAL: __main__: Python >= {0}.{1}.{2} required, found Python {3}.{4}.{5}".format(
                VREQ[0], VREQ[1], VREQ[2], VCUR[0], VCUR[1], VCUR[2]
            )
        )
        print("Please make sure to run with a compatible version of Python3.")
        sys.exit(1)  # Fail.

    # pygame prints a banner on import unless told not to, and needs no display.
    os.environ["PYGAME_HIDE_SUPPORT_PROMPT"] = "true"
    os.environ.setdefault("SDL_VIDEODRIVER", "dummy")

    for module, package in REQUIRED:
        try:
            __import__(module)
        except ImportError:
            print("Miva Desk\n[0] Starting up...")
            print('[0] FATAL: __main__: {0} required, module "{1}" not found'.format(package, module))
            print('Please make sure that the "{0}" Python3 module is installed.'.format(package))
            print('On most systems, run "pip3 install {0}". If pip3 is missing, try pip instead.'.format(package))
            sys.exit(1)  # Fail.

    # Import main class.
    import miva

    # Run the command and exit with its return code.
    sys.exit(miva.dispatch(sys.argv[1:]))
