################################
# Miva Desk I2V Adapter Suite  #
# logmanager.py                #
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

import datetime
import sys
from typing import Any, List, Optional, TYPE_CHECKING

from check import HaltError

if TYPE_CHECKING:  # Avoid circular import.
    from configmanager import Config


class LogManager:
    """The Log Manager

    This class handles the filtering and formatting of log messages. There is one instance, LOG, shared by the
    managers and by the numerical modules, which need to warn without holding a reference to the base class.

    Message chains are printed joined by colon-spaces behind a counter prefix. The counter is advanced by whichever
    loop is running: the training iteration or the sampling step.

    Attributes:
        count: The current loop counter shown in the message prefix.
        verbose: Whether info messages are printed.
        halt: Whether errors and warnings raise HaltError.
        suppress: Chain prefixes of messages that are never printed.
        suppress_halt: Chain prefixes of messages that never halt.
    """

    def __init__(self):
        """LogManager class initializer."""
        self.count = 0
        self.verbose = False
        self.halt = False
        self.suppress = []  # type: List[List[str]]
        self.suppress_halt = []  # type: List[List[str]]

        self.__file = None  # Log file if set.

    def configure(self, config: "Config") -> bool:
        """Apply the log settings of a configuration.

        Args:
            config: The resolved configuration.

        Returns:
            True if succeeded, False if the log file could not be opened.
        """
        self.verbose = bool(config["log.verbose"])
        self.halt = bool(config["log.halt"])
        self.suppress = parse_rules(config["log.suppress"])
        self.suppress_halt = parse_rules(config["log.suppress_halt"])
        self._terminate()

        filename = config["log.file"]
        if filename:
            try:
                self.__file = open(filename, "a+")
            except OSError:
                self.__file = None
                self.msg("ERROR", "Log", "configure", "cannot open log file for writing", filename)
                return False
            self.__file.write("[" + str(datetime.datetime.now()) + "]\n")
            self.__file.write("[{0}] Starting up...\n".format(self.count))
        return True

    def msg(self, *chain: Any) -> bool:
        """Log a message.

        Args:
            chain: A list of printable values to be separated by colon-spaces and printed.

        Returns:
            True if message was printed, false otherwise.
        """
        chain = [c if type(c) == str else str(c) for c in chain]

        if self.__check_suppress(chain, self.suppress):
            return False

        self.__print(chain)
        # Die on non-info (error or warning) messages.
        if self.halt and chain and chain[0] in ("ERROR", "WARNING"):
            # Or not if we suppressed halting on this message.
            if not self.__check_suppress(chain, self.suppress_halt):
                raise HaltError(": ".join(chain))
        return True

    def info(self, *chain: Any) -> bool:
        """Log an info message if verbosity is enabled.

        Args:
            chain: A list of printable values to be separated by colon-spaces and printed.

        Returns:
            True if info was printed, false otherwise.
        """
        chain = [c if type(c) == str else str(c) for c in chain]

        if self.verbose and not self.__check_suppress(chain, self.suppress):
            self.__print(["INFO"] + chain)
            return True
        return False

    def __print(self, chain: List[str]) -> None:
        """Format and print the string.

        Args:
            chain: A list of strings to be separated by colon-spaces and printed.
        """
        line = "[{0}] ".format(self.count) + ": ".join(chain)
        print(line)
        if self.__file:
            self.__file.write(line + "\n")
        sys.stdout.flush()

    @staticmethod
    def __check_suppress(chain: List[str], rules: List[List[str]]) -> bool:
        """Checks whether or not the chain matches a suppression rule. Empty rule fields match anything."""
        if chain:
            for supp in rules:
                if supp and supp[0] == chain[0] and len(chain) >= len(supp):
                    if all(not s or s == chain[n] for n, s in enumerate(supp)):
                        return True
        return False

    def _terminate(self) -> Optional[bool]:
        """Close the log file if one is open."""
        if self.__file:
            self.__file.write("[{0}] Shutting down...\n\n".format(self.count))
            self.__file.close()
            self.__file = None
            return True
        return None


def parse_rules(text: str) -> List[List[str]]:
    """Parse suppression rules: comma-separated, each a colon-separated chain prefix.

    "WARNING::attention_mask_entry" gives [["WARNING", "", "attention_mask_entry"]].
    """
    return [[field.strip() for field in rule.split(":")] for rule in text.split(",") if rule.strip()]


# The shared instance.
LOG = LogManager()
