import logging
import platform
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Annotated, Any, Optional, Union

import click
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape

from stratified_eval.datamodel.requests import RunConfig
from stratified_eval.errors import (
    ConfigError,
    DataError,
    MetricError,
    StratifiedEvalError,
)
from stratified_eval.evaluation import get_tool_version, run_evaluation
from stratified_eval.helper_functions import (
    _to_list_of_strings,
    load_config_file,
    merge_config,
    parse_threshold_rule,
)
from stratified_eval.report import render_html, render_json
from stratified_eval.storage import REPORT_FILENAME, RESULTS_FILENAME, get_output_dir

err_console = Console(stderr=True)
console = Console()

app = typer.Typer(
    no_args_is_help=True,
    rich_markup_mode="rich",
)

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 1
EXIT_DATA_ERROR = 2


class ColoredLogFormatter(logging.Formatter):
    COLOR_CODES = {
        logging.DEBUG: "\033[94m",  # Blue
        logging.INFO: "\033[92m",  # Green
        logging.WARNING: "\033[93m",  # Yellow
        logging.ERROR: "\033[91m",  # Red
        logging.CRITICAL: "\033[95m",  # Magenta
    }
    RESET_CODE = "\033[0m"

    def format(self, record):
        color = self.COLOR_CODES.get(record.levelno, "")
        record.levelname = f"{color}{record.levelname}{self.RESET_CODE}"
        return super().format(record)


def _setup_logging(verbose: int) -> None:
    if verbose == 0:
        level = logging.WARNING
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(levelname)s:\t%(asctime)s - %(name)s - %(message)s",
        datefmt="%H:%M:%S",
    )
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in root_logger.handlers:
        if handler.formatter and not isinstance(handler.formatter, ColoredLogFormatter):
            handler.setFormatter(ColoredLogFormatter(handler.formatter._fmt))


def version_callback(value: bool) -> None:
    if value:
        console.print(f"stratified-eval version: {get_tool_version()}")
        console.print(
            f"Python: {sys.implementation.cache_tag} ({platform.python_version()})"
        )
        console.print(f"Platform: {platform.platform()}")
        raise typer.Exit()


def _split(value: Optional[str]) -> Optional[list[str]]:
    return _to_list_of_strings(value) if value is not None else None


def build_run_config(
    config_file: Optional[Path], overrides: dict[str, Any]
) -> RunConfig:
    """Merge the config file with the command-line flags, flags winning."""
    base = load_config_file(config_file) if config_file is not None else {}
    try:
        return RunConfig.model_validate(merge_config(base, overrides))
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigError(f"Invalid configuration: {details}") from None


@app.command()
def evaluate(
    *,
    input_path: Annotated[
        Optional[Path],
        typer.Option("--input", help="CSV file with one row per prediction."),
    ] = None,
    score_col: Annotated[
        Optional[str], typer.Option(help="Column holding the scores in [0, 1].")
    ] = None,
    label_col: Annotated[
        Optional[str], typer.Option(help="Column holding the 0/1 labels.")
    ] = None,
    attrs: Annotated[
        Optional[str],
        typer.Option(
            help=(
                "Comma-separated categorical attribute columns. "
                "Continuous attributes must be binned beforehand."
            )
        ),
    ] = None,
    value_cols: Annotated[
        Optional[str],
        typer.Option(help="Comma-separated numeric per-row columns for mean:<col>."),
    ] = None,
    metrics: Annotated[
        Optional[str], typer.Option(help="Comma-separated metric ids to report.")
    ] = None,
    test_metrics: Annotated[
        Optional[str],
        typer.Option(help="Comma-separated metric ids to test against complements."),
    ] = None,
    threshold: Annotated[
        Optional[str],
        typer.Option(
            help=(
                "Decision threshold rule: [blue]fixed:<t>[/blue], "
                "[blue]base-rate[/blue] or [blue]max-gmean[/blue]."
            )
        ),
    ] = None,
    min_group_size: Annotated[
        Optional[int], typer.Option(help="Smallest subgroup that is evaluated.")
    ] = None,
    max_level: Annotated[
        Optional[int], typer.Option(help="Largest number of intersected attributes.")
    ] = None,
    alpha: Annotated[
        Optional[float], typer.Option(help="Two-sided miscoverage level.")
    ] = None,
    n_boot: Annotated[
        Optional[int], typer.Option(help="Bootstrap resamples per interval.")
    ] = None,
    n_perm: Annotated[
        Optional[int], typer.Option(help="Permutations per test.")
    ] = None,
    recg_min: Annotated[
        Optional[float], typer.Option(help="Lower recall-gain limit of pauprg.")
    ] = None,
    bins: Annotated[
        Optional[int], typer.Option(help="Calibration bins (default min(15, n/10)).")
    ] = None,
    seed: Annotated[Optional[int], typer.Option(help="Random seed.")] = None,
    top_k: Annotated[
        Optional[int], typer.Option(help="Subgroups listed per ranking.")
    ] = None,
    n_jobs: Annotated[
        Optional[int], typer.Option(help="Parallel workers for resampling.")
    ] = None,
    out_dir: Annotated[
        Optional[Path],
        typer.Option(help="Output directory for report.html and results.json."),
    ] = None,
    config: Annotated[
        Optional[Path],
        typer.Option(help="JSON file mirroring the run configuration."),
    ] = None,
    verbose: Annotated[
        int,
        typer.Option(
            "--verbose",
            "-v",
            count=True,
            help="Set the verbosity level. -v for info logging, -vv for debug logging.",
        ),
    ] = 0,
    version: Annotated[
        Union[bool, None],
        typer.Option(
            help="Show the version and exit.",
            callback=version_callback,
            is_eager=True,
        ),
    ] = None,
) -> Any:
    """
    Evaluate a binary classifier [bold]per subgroup[/bold] and write an HTML
    report plus raw JSON results. 📊

    Unset options fall back to the --config file, then to the
    corresponding ENV variable, e.g. STRATIFIED_EVAL_N_BOOT.
    """
    _setup_logging(verbose)

    overrides: dict[str, Any] = {
        "input": {
            "path": str(input_path) if input_path is not None else None,
            "score_col": score_col,
            "label_col": label_col,
            "attr_cols": _split(attrs),
            "value_cols": _split(value_cols),
        },
        "metrics": _split(metrics),
        "tested_metrics": _split(test_metrics),
        "threshold_rule": (
            parse_threshold_rule(threshold).model_dump()
            if threshold is not None
            else None
        ),
        "ci": {"alpha": alpha, "n_boot": n_boot},
        "enumeration": {"min_group_size": min_group_size, "max_level": max_level},
        "n_perm": n_perm,
        "recg_min": recg_min,
        "n_bins": bins,
        "alpha": alpha,
        "seed": seed,
        "top_k": top_k,
        "n_jobs": n_jobs,
        "output_dir": str(out_dir) if out_dir is not None else None,
    }
    cfg = build_run_config(config, overrides)

    output_dir = get_output_dir(cfg.output_dir)
    console.print(f"Evaluating {cfg.input.path} ...")
    bundle = run_evaluation(cfg)
    report_path = render_html(bundle, output_dir / REPORT_FILENAME)
    results_path = render_json(bundle, output_dir / RESULTS_FILENAME)

    completed = sum(1 for t in bundle.tests if t.completed)
    console.print(
        f"{len(bundle.subgroups)} subgroups, {len(bundle.tests)} tests "
        f"({completed} completed)"
    )
    console.print(f"Report at [link=file://{report_path.resolve()}]{report_path}[/]")
    console.print(f"Results at {results_path}")
    return 0


def cli_main(args: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        result = app(
            list(args) if args is not None else None,
            prog_name="stratified-eval",
            standalone_mode=False,
        )
    except ConfigError as e:
        err_console.print(f"[red]Configuration error:[/red] {escape(str(e))}")
        return EXIT_CONFIG_ERROR
    except (DataError, MetricError, FileNotFoundError) as e:
        err_console.print(f"[red]Data error:[/red] {escape(str(e))}")
        return EXIT_DATA_ERROR
    except StratifiedEvalError as e:
        err_console.print(f"[red]Evaluation failed:[/red] {escape(str(e))}")
        return EXIT_CONFIG_ERROR
    except click.UsageError as e:
        e.show()
        return EXIT_CONFIG_ERROR
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        err_console.print("Aborted.")
        return EXIT_CONFIG_ERROR
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(cli_main())


# Launch the CLI when calling python -m stratified_eval
if __name__ == "__main__":
    main()
