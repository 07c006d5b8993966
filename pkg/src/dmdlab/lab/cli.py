"""Command-line entry point.

    lab train-teacher <cfg.json> [--out DIR]
    lab run <cfg.json> [--out DIR]
    lab preset <name> [--override k=v ...] [--out DIR]
    lab plot <run_dir>

Exit codes: 2 config/schema violation (message names the key), 3 non-finite
training abort (diagnostic dump path printed), 4 plot called on an empty
metrics file. LAB_SEED overrides the config seed.
"""

import argparse
import json
import sys
from pathlib import Path

from ..distill import NonFiniteError
from .config import ConfigError, load_run_config, load_teacher_config
from .plots import PlotDataError, plot_run
from .presets import PRESET_NAMES, run_preset
from .runner import run_config, train_teacher_cli


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError("<override>", f"expected k=v, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Few-step distillation lab on synthetic conditional mixtures")
    sub = parser.add_subparsers(dest="command", required=True)

    p_teacher = sub.add_parser("train-teacher", help="train a teacher checkpoint")
    p_teacher.add_argument("config")
    p_teacher.add_argument("--out", default=".")

    p_run = sub.add_parser("run", help="run one distillation config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)

    p_preset = sub.add_parser("preset", help="run a named experiment preset")
    p_preset.add_argument("name", choices=PRESET_NAMES)
    p_preset.add_argument("--out", default=None)
    p_preset.add_argument("--override", action="append", default=[],
                          metavar="K=V")

    p_plot = sub.add_parser("plot", help="emit SVG plots for a run directory")
    p_plot.add_argument("run_dir")

    args = parser.parse_args(argv)
    try:
        if args.command == "train-teacher":
            out = train_teacher_cli(load_teacher_config(args.config),
                                    Path(args.out))
            print(f"teacher checkpoint written to {out}")
        elif args.command == "run":
            cfg = load_run_config(args.config)
            out_dir = args.out or cfg["out_dir"] or (
                Path(args.config).resolve().parent
                / (Path(args.config).stem + "_run"))
            artifacts = run_config(cfg, out_dir)
            print(f"run artifacts in {artifacts.dir}")
        elif args.command == "preset":
            overrides = dict(_parse_override(o) for o in args.override)
            out_root = Path(args.out or f"runs/{args.name}")
            arts = run_preset(args.name, out_root, overrides)
            print(f"{len(arts)} runs in {out_root} (summary.csv written)")
        elif args.command == "plot":
            written = plot_run(args.run_dir)
            for path in written:
                print(path)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except KeyError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NonFiniteError as err:
        dump = err.context.get("dump_path", "<no dump>")
        print(f"error: training aborted on non-finite direction; "
              f"diagnostics at {dump}", file=sys.stderr)
        return 3
    except PlotDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
