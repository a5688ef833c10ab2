################################
# Miva Desk I2V Adapter Suite  #
# miva.py                      #
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

import sys
import time
from typing import Any, Callable, Dict, List, Optional

import torch

# Import manager classes.
from configmanager import ConfigManager
from logmanager import LOG
from databasemanager import DatabaseManager
from resourcemanager import ResourceManager
from adaptermanager import AdapterManager

from check import HaltError, MivaError
import filetype
import metrics
import pipeline
import selftest
import synthdata
import trainer


class Miva:
    """The top-level base class

    This class contains the manager instances and runs one command. It is built from the command line, runs, records
    the run in the ledger, and shuts down.

    Attributes:
        config: ConfigManager instance.
        log: LogManager instance.
        database: DatabaseManager instance.
        resource: ResourceManager instance.
        adapters: AdapterManager instance.
        status: Exit status of the last run.
    """

    def __init__(self, argv: List[str]):
        """Base class initializer.

        Args:
            argv: Command line arguments, without the program name.

        Raises:
            SystemExit: On a usage error (2) or a bad configuration (1).
        """
        self.argv = list(argv)
        self.log = LOG
        self.config = ConfigManager(self, self.argv)
        if not self.log.configure(self.config.config):
            raise SystemExit(1)
        for line in self.config.config.lines():
            self.log.info("Config", line)
        self.database = DatabaseManager(self, self.config["ledger"])
        self.resource = ResourceManager(self)
        self.adapters = AdapterManager(self)

        torch.use_deterministic_algorithms(True)

        self.status = 0
        self.__extra = {}  # type: Dict[str, Any]
        self.__commands = {
            "pretrain-base": self._pretrain_base,
            "train-miva": self._train_miva,
            "animate": self._animate,
            "compose": self._animate,
            "eval": self._eval,
            "make-data": self._make_data,
            "selftest": self._selftest,
        }  # type: Dict[str, Callable[[], int]]

    @property
    def progress(self) -> bool:
        """Progress bars go to an interactive terminal only, and not alongside verbose logging."""
        return sys.stderr.isatty() and not self.log.verbose

    def _run(self) -> int:
        """Run the command and record it in the ledger."""
        command = self.config.command
        self.log.info("Miva", "running", command)
        start = time.perf_counter()
        try:
            self.status = self.__commands[command]()
        except HaltError as e:
            print("[{0}] FATAL: Miva: halted: {1}".format(self.log.count, e))
            self.status = 1
        except (MivaError, OSError) as e:
            self.log.msg("ERROR", "Miva", command, e)
            self.status = 1
        seconds = time.perf_counter() - start
        self.database.record(
            command,
            self.argv,
            self.config.config.to_dict(),
            self.resource.outputs,
            seconds,
            self.status,
            self.__extra,
        )
        self._terminate()
        return self.status

    def _pretrain_base(self) -> int:
        args, config = self.config.args, self.config.config
        datasets = [self.resource.request_dataset(directory) for directory in args.data]
        if any(dataset is None for dataset in datasets):
            return 1
        dataset = datasets[0]
        for other in datasets[1:]:
            dataset = dataset.merged(other)

        settings = trainer.TrainConfig.from_config(config, base=True)
        base, losses = trainer.pretrain_base(dataset, config, settings, self.progress)
        if not self.adapters.save_base(base, args.out, config.to_dict(), losses):
            return 1
        self.resource.outputs.append(args.out)
        self.__extra["base_hash"] = base.parameter_hash()
        self.__extra["final_loss"] = losses[-1] if losses else None
        if args.loss_csv and not self.__write_losses(args.loss_csv, losses):
            return 1
        self.log.msg("INFO", "Miva", "pretrain-base", "wrote", args.out, "patterns", dataset.patterns)
        return 0

    def _train_miva(self) -> int:
        args, config = self.config.args, self.config.config
        dataset = self.resource.request_dataset(args.data)
        base = self.adapters.load_base(args.base)
        if dataset is None or base is None:
            return 1

        ranks = {"cfa": config["ranks.cfa"], "ca": config["ranks.ca"], "tsa": config["ranks.tsa"]}
        train = trainer.train_mmiva if args.masked else trainer.train_miva
        adapter = train(
            dataset, base, trainer.TrainConfig.from_config(config), ranks, None, config.to_dict(), self.progress
        )
        if not self.adapters.save_adapter(adapter, base, args.out):
            return 1
        self.resource.outputs.append(args.out)

        breakdown = adapter.parameter_breakdown()
        total = base.count_parameters()
        self.log.msg(
            "INFO",
            "Miva",
            "train-miva",
            adapter.kind,
            adapter.pattern,
            "parameters",
            ", ".join("{0} {1}".format(group, breakdown[group]) for group in sorted(breakdown)),
            "base {0} ({1:.2%})".format(total, breakdown["total"] / total),
        )
        self.__extra["parameters"] = breakdown
        if args.masked:
            self.__extra["ground_truth_branches"] = adapter.branch_log.count("ground_truth")
        if args.loss_csv and not self.__write_losses(args.loss_csv, adapter.loss_curve):
            return 1
        return 0

    def _animate(self) -> int:
        args, config = self.config.args, self.config.config
        image = self.resource.request_image(args.image)
        base = self.adapters.load_base(args.base)
        if image is None or base is None:
            return 1
        model = self.adapters.attach_specs(base, args.adapter or [])
        if model is None:
            return 1
        subject_masks = []
        for path in args.mask or []:
            mask = self.resource.request_mask(path)
            if mask is None:
                return 1
            subject_masks.append(mask)

        result = pipeline.animate(
            image, model, pipeline.GenerationConfig.from_config(config), subject_masks, progress=self.progress
        )
        patterns = [adapter.pattern for adapter in model.stack.adapters] if model.stack else []
        self.__extra["timing"] = result.timings
        if not self.resource.write_video(args.out, result.video, pattern=",".join(patterns), timing=result.timings):
            return 1
        if args.png and not self.resource.write_frames(args.png, result.video):
            return 1
        if args.mask_out:
            if not result.masks:
                self.log.msg("WARNING", "Miva", "animate", "no masked adapter attached, no masks to write")
            for j, S in enumerate(result.masks):
                if not self.resource.write_frames(args.mask_out, S.maps, "mask{0}".format(j)):
                    return 1
        self.log.msg(
            "INFO",
            "Miva",
            self.config.command,
            "wrote",
            args.out,
            "{0:.2f}s video, {1:.2f}s masks, {2} mask computations".format(
                result.timings["video_seconds"], result.timings["mask_seconds"], result.timings["mask_computations"]
            ),
        )
        return 0

    def _eval(self) -> int:
        args, config = self.config.args, self.config.config
        frames = self.resource.request_video(args.video)
        if frames is None:
            return 1
        values = metrics.evaluate_video(frames)
        names = sorted(values)
        columns = ["video"] + names
        row = [args.video] + ["{0:.6f}".format(values[name]) for name in names]  # type: List[Any]
        if args.pattern:
            verdict = metrics.follows_pattern(values, args.pattern)
            columns += ["pattern", "follows_pattern"]
            row += [args.pattern, "" if verdict is None else str(verdict).lower()]
        self.__extra["metrics"] = values

        if args.out:
            return 0 if self.resource.write_csv(args.out, columns, [row]) else 1
        sys.stdout.write(filetype.format_csv(config.to_dict(), columns, [row]))
        return 0

    def _make_data(self) -> int:
        args, config = self.config.args, self.config.config
        if args.pattern not in synthdata.PATTERN_NAMES:
            self.log.msg("ERROR", "Miva", "make-data", "unknown pattern", args.pattern, synthdata.PATTERN_NAMES)
            return 1
        dataset = synthdata.make_dataset(
            args.pattern, config["clips"], config["clip_frames"], config["image_size"], config["seed"], args.scenes
        )
        if not self.resource.write_dataset(dataset, args.out):
            return 1
        self.log.msg("INFO", "Miva", "make-data", "wrote", args.out, len(dataset), "clips")
        return 0

    def _selftest(self) -> int:
        results = selftest.run_selftest(self.config.config)
        for result in results:
            print(result.line())
        failed = [result.name for result in results if not result.passed]
        self.__extra["selftest"] = {result.name: result.passed for result in results}
        print("{0} of {1} properties passed".format(len(results) - len(failed), len(results)))
        return 1 if failed else 0

    def __write_losses(self, filename: str, losses: List[float]) -> bool:
        rows = [[i, repr(loss)] for i, loss in enumerate(losses)]
        return self.resource.write_csv(filename, ["iteration", "loss"], rows)

    def _terminate(self) -> None:
        """Cleanup before shutdown."""
        self.database._terminate()
        self.log._terminate()


def dispatch(argv: List[str]) -> int:
    """Run one command line.

    Args:
        argv: Arguments after the program name.

    Returns:
        0 on success, 1 on a runtime failure, 2 on a usage error.
    """
    try:
        entry = Miva(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    return entry._run()


def main(argv: Optional[List[str]] = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)
