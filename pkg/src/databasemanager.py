################################
# Miva Desk I2V Adapter Suite  #
# databasemanager.py           #
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

import json
import os
import time
from typing import Any, Dict, List, Optional, TYPE_CHECKING

import ubjson

from check import CHECK, CheckFailure

if TYPE_CHECKING:  # Avoid circular import.
    from miva import Miva


class DatabaseManager:
    """The Database Manager

    Keeps the run ledger: one record per command run, stored by key in a Universal Binary JSON file. A record holds the
    command, its argv, the resolved config, the files written, wall seconds, and exit status.

    Attributes:
        miva: Base class instance.
        filename: Filename of the ledger, or "" when the ledger is off.
    """

    def __init__(self, miva: "Miva", filename: str):
        """DatabaseManager class initializer.

        Args:
            miva: Base class instance.
            filename: Ledger file; "" turns the ledger off.
        """
        self.miva = miva
        self.filename = filename

        # Has the ledger changed in memory?
        self.__changed = False
        self.__database = {}  # type: Dict[str, Any]

        if self.filename:
            loaded = self.__load()
            if loaded is None:
                self.miva.log.msg("ERROR", "Database", "__init__", "cannot open ledger, running without it", filename)
                self.filename = ""
            else:
                self.__database = loaded

    def __contains__(self, item: str) -> bool:
        return item in self.__database

    def __getitem__(self, item: str) -> Any:
        return self.get(item)

    def __setitem__(self, item: str, obj: Any) -> None:
        self.put(item, obj)

    def __delitem__(self, item: str) -> None:
        self.remove(item)

    def keys(self) -> List[str]:
        return sorted(self.__database)

    def get(self, key: str) -> Any:
        """Get a record by key.

        Returns:
            The record if succeeded, None if failed.
        """
        # Input Check
        try:
            CHECK(key, str)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Database", "get", "bad argument", e)
            return None

        if key in self.__database:
            return self.__database[key]
        self.miva.log.msg("ERROR", "Database", "get", "no such key", '"{0}"'.format(key))
        return None

    def put(self, key: str, obj: Any) -> Optional[bool]:
        """Create or update a record.

        Returns:
            True if succeeded, False if failed.
        """
        # Input Check
        try:
            CHECK(key, str, _min=1)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Database", "put", "bad argument", e)
            return None

        # Is it serializable?
        try:
            json.dumps(obj)
        except (TypeError, ValueError):
            self.miva.log.msg("ERROR", "Database", "put", "bad object type for key", '"{0}"'.format(key))
            return False

        self.__database[key] = obj
        self.__changed = True
        self.miva.log.info("Database", "put", '"{0}"'.format(key))
        return True

    def remove(self, key: str) -> Optional[bool]:
        """Remove a record.

        Returns:
            True if succeeded, False if failed.
        """
        # Input Check
        try:
            CHECK(key, str)
        except CheckFailure as e:
            self.miva.log.msg("ERROR", "Database", "remove", "bad argument", e)
            return None

        if key in self.__database:
            del self.__database[key]
            self.__changed = True
            self.miva.log.info("Database", "remove", '"{0}"'.format(key))
            return True
        self.miva.log.msg("ERROR", "Database", "remove", "no such key", '"{0}"'.format(key))
        return False

    def record(
        self,
        command: str,
        argv: List[str],
        config: Dict[str, Any],
        outputs: List[str],
        seconds: float,
        status: int,
        extra: Optional[Dict[str, Any]] = None,
    ) -> Optional[str]:
        """Append a run record under the next free "run-NNNN" key and write the ledger.

        Returns:
            The key if succeeded, None if the ledger is off or failed.
        """
        if not self.filename:
            return None
        key = "run-{0:04d}".format(len(self.__database))
        while key in self.__database:
            key = "run-{0:04d}".format(int(key[4:]) + 1)
        entry = {
            "command": command,
            "argv": list(argv),
            "config": dict(config),
            "outputs": list(outputs),
            "seconds": round(float(seconds), 6),
            "status": int(status),
            "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(time.time() - seconds)),
        }
        if extra:
            entry.update(extra)
        if not self.put(key, entry):
            return None
        self.flush()
        return key

    def flush(self) -> bool:
        """Write the ledger to disk now if it changed.

        Returns:
            True if succeeded or nothing to write, False if failed.
        """
        if not self.filename or not self.__changed:
            return True
        try:
            with open(self.filename, "wb") as dbfile:
                dbfile.write(ubjson.dumpb(self.__database))
        except OSError:
            self.miva.log.msg("ERROR", "Database", "flush", "cannot write ledger to disk", self.filename)
            return False
        self.__changed = False
        self.miva.log.info("Database", "flush", self.filename)
        return True

    def __load(self) -> Optional[Dict[str, Any]]:
        """Load the ledger from disk; a missing file is an empty ledger."""
        if not os.path.exists(self.filename):
            return {}
        try:
            with open(self.filename, "rb") as dbfile:
                contents = dbfile.read()
            return ubjson.loadb(contents) if contents else {}
        except (OSError, ubjson.DecoderException):
            return None

    def _terminate(self) -> None:
        """Cleanup before deletion."""
        self.flush()
