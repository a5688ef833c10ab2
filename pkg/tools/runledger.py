#!/bin/env python3
################################
# Miva Desk I2V Adapter Suite  #
# runledger.py                 #
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

import argparse
import json
import os
import sys
from typing import Any, Dict, List, Optional

import ubjson

VERSION = "Miva Desk Run Ledger Editor Alpha-0.1.0"
COPYRIGHT = "Copyright 2026 The Miva Desk Authors"


class RunLedger:
    """Run Ledger Editor

    Opens the Universal Binary JSON run ledger that Miva Desk appends one record to per command, so the runs can be
    listed, inspected, annotated and pruned by hand.

    Attributes:
        filename: Filename of the ledger.
        records: Key to record.
        fail: Whether the ledger could not be opened.
    """

    def __init__(self, filename: str, makenew: bool = False):
        """RunLedger class initializer.

        Args:
            filename: Ledger file to open.
            makenew: Whether a missing file is an empty ledger rather than a failure.
        """
        self.filename = filename
        self.fail = False
        self.records = self.__load(makenew)
        if self.records is None:
            self.fail = True
            self.records = {}

    def get(self, key: str) -> Optional[Any]:
        return self.records.get(key)

    def put(self, key: str, text: str) -> bool:
        """Create or update a key from JSON text. Text that is not JSON is stored as a string."""
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            obj = text
        self.records[key] = obj
        return True

    def remove(self, key: str) -> bool:
        if key in self.records:
            del self.records[key]
            return True
        return False

    def runs(self) -> List[str]:
        """Keys of run records, oldest first."""
        return sorted(key for key, value in self.records.items() if isinstance(value, dict) and "command" in value)

    def summary(self, key: str) -> str:
        record = self.records[key]
        return "{0}  {1:<14} status {2}  {3:8.2f}s  {4}".format(
            key,
            record.get("command", "?"),
            record.get("status", "?"),
            record.get("seconds", 0.0),
            record.get("started", ""),
        )

    def save(self) -> bool:
        try:
            with open(self.filename, "wb") as dbfile:
                dbfile.write(ubjson.dumpb(self.records))
        except OSError:
            return False
        return True

    def __load(self, makenew: bool) -> Optional[Dict[str, Any]]:
        if not os.path.exists(self.filename):
            return {} if makenew else None
        try:
            with open(self.filename, "rb") as dbfile:
                contents = dbfile.read()
            return ubjson.loadb(contents) if contents else {}
        except (OSError, ubjson.DecoderException):
            return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description=VERSION, formatter_class=lambda prog: argparse.HelpFormatter(prog, max_help_position=40)
    )
    parser.add_argument("filename", nargs="?", type=str, help="ledger file to open")

    group = parser.add_mutually_exclusive_group()
    group.add_argument("--list", action="store_true", dest="list", help="list runs, one line each")
    group.add_argument("--failed", action="store_true", dest="failed", help="list runs that exited nonzero")
    group.add_argument("--dump", action="store_true", dest="dump", help="dump every record")
    group.add_argument("--show", nargs=1, dest="show", type=str, metavar="<key>", help="print one record as JSON")
    group.add_argument(
        "--put", nargs=2, dest="put", type=str, metavar=("<key>", "<json|->"), help="put a record, '-' to read stdin"
    )
    group.add_argument("--remove", nargs=1, dest="remove", type=str, metavar="<key>", help="remove a record")

    parser.add_argument("--quiet", action="store_true", dest="quiet", help="do not print failure messages")
    parser.add_argument("--version", action="store_true", dest="version", help="print the version string")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print(VERSION)
        print(COPYRIGHT)
        return 0

    if not args.filename or not (args.list or args.failed or args.dump or args.show or args.put or args.remove):
        parser.print_usage()
        print("{0}: error: filename and option required".format(os.path.basename(__file__)))
        return 0

    # Only --put may start a new ledger.
    ledger = RunLedger(args.filename, bool(args.put))
    if ledger.fail:
        if not args.quiet:
            print("FAILURE :: OPEN :: {0}".format(args.filename))
        return 1

    if args.list or args.failed:
        for key in ledger.runs():
            if args.list or ledger.records[key].get("status") != 0:
                print(ledger.summary(key))

    elif args.dump:
        for key in sorted(ledger.records):
            print(key + " := " + json.dumps(ledger.records[key], sort_keys=True))

    elif args.show:
        record = ledger.get(args.show[0])
        if record is None:
            if not args.quiet:
                print("FAILURE :: SHOW :: {0}".format(args.show[0]))
            return 2
        print(json.dumps(record, indent=2, sort_keys=True))

    elif args.put:
        text = sys.stdin.read() if args.put[1] == "-" else args.put[1]
        ledger.put(args.put[0], text)
        if not ledger.save():
            if not args.quiet:
                print("FAILURE :: PUT :: {0}".format(args.put[0]))
            return 5

    elif args.remove:
        if not ledger.remove(args.remove[0]):
            if not args.quiet:
                print("FAILURE :: REMOVE :: {0}".format(args.remove[0]))
            return 4
        if not ledger.save():
            if not args.quiet:
                print("FAILURE :: REMOVE :: {0}".format(args.remove[0]))
            return 6

    return 0


# Running as a standalone program.
if __name__ == "__main__":
    sys.exit(main())
