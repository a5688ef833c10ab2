################################
# Miva Desk I2V Adapter Suite  #
# configmanager.py             #
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
import os
import sys
from typing import Any, Dict, ItemsView, Iterator, List, Mapping, Optional, TYPE_CHECKING

import jinja2
import jsonschema

from __schema__ import _SCHEMA
from check import ConfigError

if TYPE_CHECKING:  # Avoid circular import.
    from miva import Miva


VERSION = "Miva Desk Alpha-0.1.0"
COPYRIGHT = "Copyright 2026 The Miva Desk Authors"

COMMANDS = ["pretrain-base", "train-miva", "animate", "compose", "eval", "make-data", "selftest"]

# Documented defaults, straight from the schema.
DEFAULTS = {key: prop["default"] for key, prop in _SCHEMA["config"]["properties"].items()}


class Config(Mapping):
    """A resolved, immutable configuration.

    Keys are the flat dotted names documented in the config schema. A Config always holds every key.
    """

    def __init__(self, values: Dict[str, Any]):
        self.__values = dict(values)

    def __getitem__(self, item: str) -> Any:
        if item not in self.__values:
            raise ConfigError(item, "unknown key")
        return self.__values[item]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.__values))

    def __len__(self) -> int:
        return len(self.__values)

    def __repr__(self) -> str:
        return "Config({0})".format(self.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        """Return a plain dict, suitable for JSON metadata."""
        return {key: self.__values[key] for key in sorted(self.__values)}

    def lines(self) -> List[str]:
        """Render as key = value lines, the config file format."""
        return ["{0} = {1}".format(key, format_value(self.__values[key])) for key in sorted(self.__values)]


def format_value(value: Any) -> str:
    if type(value) == bool:
        return "true" if value else "false"
    return str(value)


def parse_value(key: str, text: str) -> Any:
    """Parse a textual value according to the schema type of its key.

    Raises:
        ConfigError: If the key is unknown or the value does not parse as the key's type.
    """
    properties = _SCHEMA["config"]["properties"]
    if key not in properties:
        raise ConfigError(key, "unknown key")
    kind = properties[key]["type"]
    text = text.strip()

    if kind == "integer":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(key, "expected an integer, got {0!r}".format(text)) from None
    if kind == "number":
        try:
            return float(text)
        except ValueError:
            raise ConfigError(key, "expected a number, got {0!r}".format(text)) from None
    if kind == "boolean":
        if text.lower() in ("true", "yes", "on", "1"):
            return True
        if text.lower() in ("false", "no", "off", "0"):
            return False
        raise ConfigError(key, "expected true or false, got {0!r}".format(text))
    # Strings may be quoted.
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def validate(values: Dict[str, Any]) -> None:
    """Validate a full or partial set of values against the config schema.

    Raises:
        ConfigError: Naming the first offending key.
    """
    try:
        jsonschema.validate(values, _SCHEMA["config"])
    except jsonschema.ValidationError as e:
        if e.validator == "additionalProperties":
            unknown = sorted(set(values) - set(_SCHEMA["config"]["properties"]))
            raise ConfigError(unknown[0] if unknown else "?", "unknown key") from None
        key = e.path[0] if e.path else "?"
        raise ConfigError(str(key), e.message) from None


def read_config_text(text: str, template_vars: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """Render a config file through Jinja2 and parse its key = value lines.

    Args:
        text: Raw file contents.
        template_vars: Variables available to the template.

    Returns:
        Dictionary of the keys the file sets.
    """
    try:
        template = jinja2.Environment(undefined=jinja2.StrictUndefined).from_string(text)
        rendered = template.render(template_vars or {})
    except jinja2.exceptions.TemplateError as e:
        raise ConfigError("template", "could not render: {0}".format(e)) from None

    values = {}
    for number, line in enumerate(rendered.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line {0}".format(number), "expected key = value, got {0!r}".format(line))
        key, value = line.split("=", 1)
        key = key.strip()
        values[key] = parse_value(key, value)
    return values


def parse_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
    template_vars: Optional[Dict[str, str]] = None,
    embedded: Optional[Dict[str, Any]] = None,
) -> Config:
    """Resolve a configuration.

    Precedence, lowest first: schema defaults, an embedded artifact config, the config file, MIVA_SEED, overrides.

    Args:
        path: Config file to read, if any.
        overrides: Values from command line flags. Strings are parsed by key type.
        env: Environment to read MIVA_SEED from. Defaults to os.environ.
        template_vars: Jinja2 variables for the config file.
        embedded: A config dict recovered from an artifact's metadata.

    Returns:
        The resolved Config.

    Raises:
        ConfigError: Unknown key, type mismatch, out-of-range value, or unreadable file.
    """
    values = dict(DEFAULTS)

    if embedded:
        for key, value in embedded.items():
            if key not in DEFAULTS:
                raise ConfigError(key, "unknown key in embedded config")
            values[key] = value

    if path:
        try:
            with open(path, "r") as f:
                text = f.read()
        except OSError:
            raise ConfigError("config", "could not read config file {0}".format(path)) from None
        values.update(read_config_text(text, template_vars))

    env = os.environ if env is None else env
    if "MIVA_SEED" in env:
        values["seed"] = parse_value("seed", env["MIVA_SEED"])

    for key, value in (overrides or {}).items():
        values[key] = parse_value(key, value) if type(value) == str else value

    validate(values)
    return Config(values)


class ConfigManager:
    """The Config Manager

    This class reads command line input and a configuration file and presents the resulting configuration for easy
    access. This class' state is not modified after initialization.

    Note: Command line options always supercede their configuration file equivalents.

    Attributes:
        miva: Base class instance.
        args: The parsed command line namespace.
        command: The subcommand being run.
        vars: Template variables given as +name=value.
        config: The resolved Config.
    """

    def __init__(self, miva: "Miva", argv: List[str]):
        """ConfigManager class initializer.

        Args:
            miva: Base class instance.
            argv: Command line arguments, without the program name.
        """
        self.miva = miva  # A link back to the top-level base class.

        self.vars = {}  # type: Dict[str, str]
        argv = self.__read_cmdline_vars(list(argv))
        self.args = self.__read_cmdline(argv)
        self.command = self.args.command
        self.config = self.__prepare_config()

    def __contains__(self, item: str) -> bool:
        return item in self.config

    def __getitem__(self, item: str) -> Any:
        return self.config[item]

    def __iter__(self) -> ItemsView:
        return self.config.items()

    def __read_cmdline_vars(self, argv: List[str]) -> List[str]:
        """Read command line template variable assignments first.

        These need to get out of the way before we use Argparse, which can't handle them.

        Returns:
            The remaining arguments.
        """
        remaining = []
        for item in argv:
            if item.startswith("+"):
                assignment = item[1:].split("=", 1)
                if len(assignment) != 2 or not assignment[0]:
                    # Not valid.
                    print("[0] FATAL: Config: __read_cmdline_vars: invalid variable assignment: " + item)
                    raise SystemExit(2)
                self.vars[assignment[0]] = assignment[1]
            else:
                remaining.append(item)
        return remaining

    def __read_cmdline(self, argv: List[str]) -> argparse.Namespace:
        """Read in command line options using ArgumentParser.

        Returns:
            Result of parser.parse_args()
        """
        return build_parser().parse_args(argv)

    def __prepare_config(self) -> Config:
        """Combine the config file, the environment and the command line flags, favoring command line flags."""
        args = self.args

        overrides = {}
        for assignment in args.set or []:
            key, sep, value = assignment.partition("=")
            if not sep:
                print("[0] FATAL: Config: __prepare_config: --set expects key=value, got " + assignment)
                raise SystemExit(2)
            overrides[key.strip()] = value

        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.verbose is not None:
            overrides["log.verbose"] = args.verbose
        if args.halt is not None:
            overrides["log.halt"] = args.halt
        if getattr(args, "iters", None) is not None:
            overrides["base_iters" if self.command == "pretrain-base" else "iters"] = args.iters
        if getattr(args, "steps", None) is not None:
            overrides["ddim_steps"] = args.steps
        if getattr(args, "alpha_shared", None) is not None:
            overrides["alpha_shared"] = args.alpha_shared
        if getattr(args, "lowpass_ratio", None) is not None:
            overrides["lowpass_ratio"] = args.lowpass_ratio
        if getattr(args, "clips", None) is not None:
            overrides["clips"] = args.clips

        embedded = None
        if args.from_artifact:
            # Imported here, filetype pulls in torch and pygame.
            import filetype

            embedded = filetype.read_embedded_config(args.from_artifact)
            if embedded is None:
                print("[0] FATAL: Config: __prepare_config: no embedded config in " + args.from_artifact)
                raise SystemExit(1)

        try:
            return parse_config(args.config, overrides, template_vars=self.vars, embedded=embedded)
        except ConfigError as e:
            print("[0] FATAL: Config: __prepare_config: " + str(e))
            raise SystemExit(1) from None


def build_parser() -> argparse.ArgumentParser:
    """Build the command line parser for every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", dest="config", type=str, metavar="<file>", help="config file to use")
    common.add_argument(
        "--set", dest="set", action="append", metavar="<key=value>", help="override one config key (repeatable)"
    )
    common.add_argument("--seed", dest="seed", type=int, metavar="<n>", help="set the random seed")
    common.add_argument(
        "--from-artifact", dest="from_artifact", type=str, metavar="<file>", help="reuse the config embedded in a file"
    )

    group1 = common.add_mutually_exclusive_group()
    group1.add_argument("--quiet", default=None, action="store_false", dest="verbose", help="quiet logging mode")
    group1.add_argument("--verbose", default=None, action="store_true", dest="verbose", help="verbose logging mode")

    group2 = common.add_mutually_exclusive_group()
    group2.add_argument("--halt", default=None, action="store_true", dest="halt", help="halt on errors or warnings")
    group2.add_argument(
        "--continue", default=None, action="store_false", dest="halt", help="continue despite errors or warnings"
    )

    parser = argparse.ArgumentParser(
        prog="miva",
        description=VERSION,
        formatter_class=lambda prog: argparse.HelpFormatter(prog, max_help_position=40),
    )
    parser.add_argument("--version", action="version", version="{0}\n{1}".format(VERSION, COPYRIGHT))
    sub = parser.add_subparsers(dest="command", metavar="<command>")
    sub.required = True

    p = sub.add_parser("pretrain-base", parents=[common], help="pretrain the toy base model")
    p.add_argument("--data", dest="data", action="append", required=True, metavar="<dir>", help="dataset directory")
    p.add_argument("--out", dest="out", required=True, metavar="<file>", help="base checkpoint to write")
    p.add_argument("--iters", dest="iters", type=int, metavar="<n>", help="training iterations")
    p.add_argument("--loss-csv", dest="loss_csv", metavar="<file>", help="write the loss curve here")

    p = sub.add_parser("train-miva", parents=[common], help="train one adapter on one motion pattern")
    p.add_argument("--data", dest="data", required=True, metavar="<dir>", help="dataset directory")
    p.add_argument("--base", dest="base", required=True, metavar="<file>", help="base checkpoint")
    p.add_argument("--out", dest="out", required=True, metavar="<file>", help="adapter checkpoint to write")
    p.add_argument("--iters", dest="iters", type=int, metavar="<n>", help="training iterations")
    p.add_argument("--masked", dest="masked", action="store_true", help="train a masked adapter")
    p.add_argument("--loss-csv", dest="loss_csv", metavar="<file>", help="write the loss curve here")

    for name, text in (("animate", "animate an image"), ("compose", "animate an image with several adapters")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--image", dest="image", required=True, metavar="<file>", help="input PNG image")
        p.add_argument("--base", dest="base", required=True, metavar="<file>", help="base checkpoint")
        p.add_argument(
            "--adapter",
            dest="adapter",
            action="append",
            required=(name == "compose"),
            metavar="<file[:weight]>",
            help="adapter checkpoint and weight (repeatable, order sets stacking)",
        )
        p.add_argument("--mask", dest="mask", action="append", metavar="<file>", help="subject mask PNG (repeatable)")
        p.add_argument("--alpha-shared", dest="alpha_shared", type=float, metavar="<a>", help="shared-noise alpha")
        p.add_argument("--lowpass-ratio", dest="lowpass_ratio", type=float, metavar="<r>", help="low-pass ratio")
        p.add_argument("--steps", dest="steps", type=int, metavar="<n>", help="DDIM steps")
        p.add_argument("--out", dest="out", required=True, metavar="<file>", help="MIVV video to write")
        p.add_argument("--png", dest="png", metavar="<dir>", help="also write 8-bit PNG frames here")
        p.add_argument("--mask-out", dest="mask_out", metavar="<dir>", help="write generated masks here")

    p = sub.add_parser("eval", parents=[common], help="score a video")
    p.add_argument("--video", dest="video", required=True, metavar="<file>", help="MIVV video")
    p.add_argument("--pattern", dest="pattern", metavar="<name>", help="motion pattern the video should show")
    p.add_argument("--out", dest="out", metavar="<file>", help="CSV report to write (default: stdout)")

    p = sub.add_parser("make-data", parents=[common], help="render a synthetic dataset")
    p.add_argument("--pattern", dest="pattern", required=True, metavar="<name>", help="motion pattern")
    p.add_argument("--clips", dest="clips", type=int, metavar="<n>", help="clips to render")
    p.add_argument("--scenes", dest="scenes", type=int, default=20, metavar="<n>", help="scenes for camera motions")
    p.add_argument("--out", dest="out", required=True, metavar="<dir>", help="dataset directory to write")

    sub.add_parser("selftest", parents=[common], help="run the invariant suites")

    return parser
