################################
# Miva Desk I2V Adapter Suite  #
# maskcache.py                 #
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

from typing import Any, Dict, KeysView, List

from check import CHECK, CheckFailure, ProtocolError
from logmanager import LOG


class MaskCache:
    """The attention biases of one sampling run, keyed by attention site.

    Each entry remembers the DDIM index at which it was computed. Entries are written at mask-generation steps and
    read at every other step. One cache belongs to one sampling run.

    Attributes:
        timestamps: Site to the DDIM index of its last computation.
        computations: DDIM indices at which masks were computed, in order.
    """

    def __init__(self):
        self.__cache = {}  # type: Dict[str, Any]
        self.timestamps = {}  # type: Dict[str, int]
        self.computations = []  # type: List[int]

    def __contains__(self, site: str) -> bool:
        return site in self.__cache

    def __iter__(self) -> KeysView:
        return self.__cache.keys()

    def __len__(self) -> int:
        return len(self.__cache)

    def upload(self, site: str, contents: Any, step: int) -> bool:
        """Store the biases computed for a site at DDIM index `step`.

        Returns:
            True if succeeded, False if failed.
        """
        # Input Check
        try:
            CHECK(site, str, _min=1)
            CHECK(step, int, _min=0)
        except CheckFailure as e:
            LOG.msg("ERROR", "MaskCache", "upload", "bad argument", e)
            return False

        self.__cache[site] = contents
        self.timestamps[site] = step
        LOG.info("MaskCache", "uploaded", site, step)
        return True

    def download(self, site: str, step: int) -> Any:
        """Biases for a site, reused at DDIM index `step`.

        Raises:
            ProtocolError: If nothing was computed for the site yet.
        """
        if site not in self.__cache:
            raise ProtocolError("mask cache: nothing cached for {0} at DDIM step {1}".format(site, step))
        LOG.info("MaskCache", "reused", site, self.timestamps[site], "at", step)
        return self.__cache[site]

    def record(self, step: int) -> None:
        """Count one mask computation at DDIM index `step`."""
        self.computations.append(step)

    def flush(self) -> None:
        self.__cache.clear()
        self.timestamps.clear()
        self.computations.clear()
