#!/usr/bin/env python3
"""GroupTree command line interface."""

import logging
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np
from pythonjsonlogger import jsonlogger
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from src.config.exceptions import ErrorCode, GroupTreeException, config_error
from src.config.run_config import AvemSection, RunConfig, load_run_config
from src.config.settings import settings
from src.dcm.effects import EffectQuery, avem as compute_avem
from src.dp.value_iteration import value_iteration
from src.monitoring.metrics import PhaseTimer, timed
from src.pruning.prune_tree import fit_model
from src.storage.corpus_store import parse_corpus, write_corpus
from src.storage.manifest import RunManifest
from src.storage.model_store import (
    load_model,
    model_to_dot,
    save_model,
    study_table,
    write_json,
    write_report_table,
)
from src.truth.simulate import simulate as simulate_sample
from src.truth.study import TruthKind, build_truth, run_study
from src.utils.error_handler import error_handler, format_cli_error

console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger(__name__)

FORMATS = ("json", "dot", "table")


def configure_logging(log_format: str, level: str) -> None:
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    if log_format == "json":
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(jsonlogger.JsonFormatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
        root.addHandler(handler)
        root.setLevel(level.upper())
    else:
        logging.basicConfig(
            level=level.upper(),
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            stream=sys.stderr,
        )


def _exit_code(run) -> int:
    try:
        result = run()
        return result if isinstance(result, int) else 0
    except click.exceptions.Abort:
        err_console.print("[yellow]Aborted[/yellow]")
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except GroupTreeException as e:
        error_handler.log_error(e)
        err_console.print_json(data=format_cli_error(e), default=str)
        return e.get_exit_code()
    except Exception as e:
        error_handler.log_error(e)
        err_console.print_json(data=format_cli_error(e), default=str)
        return 2


class GroupTreeCLI(click.Group):
    """Exit 0 on success, 1 on usage or configuration errors, 2 otherwise."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        code = _exit_code(lambda: super(GroupTreeCLI, self).main(
            args=args, prog_name=prog_name, complete_var=complete_var, standalone_mode=False, **extra
        ))
        if standalone_mode:
            sys.exit(code)
        return code


def _load(config_path: Optional[str], seed: Optional[int], threads: Optional[int]) -> RunConfig:
    config = load_run_config(config_path)
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if threads is not None:
        updates["threads"] = threads
    return config.model_copy(update=updates) if updates else config


def _out_dir(out: Optional[str]) -> Path:
    path = Path(out or settings.output_dir or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def common_options(func):
    func = click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker processes")(func)
    func = click.option("--seed", type=click.IntRange(min=0), default=None, help="Base random seed")(func)
    func = click.option("--out", "-o", type=click.Path(file_okay=False), default=None, help="Output directory")(func)
    func = click.option("--config", "-c", "config_path", type=click.Path(), default=None, help="Run configuration (YAML)")(func)
    return func


def _leaf_table(model) -> Table:
    alphabet = model.alphabet
    table = Table(title=f"Context tree ({len(model.shape)} nodes, height {model.height})")
    table.add_column("Leaf", style="cyan")
    for g in range(model.group_count):
        table.add_column(f"Group {g + 1}", style="white")
    for w in model.shape.leaves():
        laws = [" ".join(f"{p:.3f}" for p in law) for law in model.distributions[w]]
        table.add_row(alphabet.format(w), *laws)
    return table


@click.group(cls=GroupTreeCLI)
@click.option("--log-format", type=click.Choice(["text", "json"]), default=None, help="Log output format")
@click.option("--log-level", default=None, help="Logging level")
def cli(log_format: Optional[str], log_level: Optional[str]):
    """GroupTree: group context tree estimation"""
    configure_logging(log_format or settings.log_format, log_level or settings.log_level)


@cli.command()
@click.argument("corpus", type=click.Path())
@common_options
@click.option("--format", "-f", "fmt", type=click.Choice(FORMATS), default="json", help="Extra output next to model.json")
@click.option("--max-depth", type=click.IntRange(min=1), default=None, help="Cap on context length")
def fit(corpus: str, config_path, out, seed, threads, fmt: str, max_depth: Optional[int]):
    """Fit a group context tree to a corpus file"""
    config = _load(config_path, seed, threads)
    timer = PhaseTimer()
    with timer.phase("read"):
        sample = parse_corpus(corpus)
    rng = np.random.default_rng(config.seed)
    result = fit_model(
        sample,
        config.estimation,
        max_depth=max_depth or config.fit.max_depth,
        frontier=config.fit.frontier,
        order=config.fit.order,
        rng=rng,
    )
    for name, seconds in result.timings.items():
        timer.record(name, seconds)
    model = result.model

    directory = _out_dir(out)
    manifest = RunManifest(command="fit", config=config.model_dump(mode="json"), seed=config.seed)
    manifest.add_input(corpus)
    manifest.add_output(save_model(model, directory / "model.json"))
    if fmt == "dot":
        dot_path = directory / "tree.dot"
        dot_path.write_text(model_to_dot(model), encoding="utf-8")
        manifest.add_output(dot_path)
    manifest.timings = timer.timings()
    manifest.write(directory)

    if fmt == "table":
        console.print(_leaf_table(model))
    console.print(f"[green]✓ Model written to {directory / 'model.json'}[/green]")


@cli.command()
@click.option("--truth", type=click.Choice([kind.value for kind in TruthKind]), default=TruthKind.ORDER3.value)
@click.option("--n", "n", type=click.IntRange(min=1), required=True, help="Sequence length")
@click.option("--groups", type=click.IntRange(min=1), default=1, help="Number of groups")
@common_options
def simulate(truth: str, n: int, groups: int, config_path, out, seed, threads):
    """Simulate a corpus from one of the built-in true models"""
    config = _load(config_path, seed, threads)
    timer = PhaseTimer()
    with timer.phase("simulate"):
        model = build_truth(TruthKind(truth), groups)
        sim = simulate_sample(model, n, groups, config.seed)
    directory = _out_dir(out)
    path = write_corpus(sim.sample, directory / "corpus.txt", comment=f"truth={truth} n={n} groups={groups} seed={config.seed}")
    manifest = RunManifest(
        command="simulate",
        config={"truth": truth, "n": n, "groups": groups},
        seed=config.seed,
        outputs=[str(path)],
        timings=timer.timings(),
    )
    manifest.write(directory)
    console.print(f"[green]✓ Corpus written to {path}[/green]")


@cli.command()
@common_options
@click.option("--format", "-f", "fmt", type=click.Choice(FORMATS), default="table")
@click.option("--truth", type=click.Choice([kind.value for kind in TruthKind]), default=None)
@click.option("--n", "n", type=click.IntRange(min=1), default=None)
@click.option("--groups", type=click.IntRange(min=1), default=None)
@click.option("--replications", type=click.IntRange(min=1), default=None)
def study(config_path, out, seed, threads, fmt: str, truth, n, groups, replications):
    """Run a Monte Carlo model-selection study"""
    config = _load(config_path, seed, threads)
    overrides = {
        key: value
        for key, value in {"truth": truth, "n": n, "groups": groups, "replications": replications}.items()
        if value is not None
    }
    if overrides:
        config = config.model_copy(update={"study": config.study.model_copy(update=overrides)})
    study_config = config.study_config()

    timer = PhaseTimer()
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=err_console) as progress:
        task = progress.add_task(f"Running {study_config.replications} replications...", total=None)
        with timer.phase("study"):
            report = run_study(study_config)
        progress.update(task, completed=True)

    directory = _out_dir(out)
    manifest = RunManifest(command="study", config=config.model_dump(mode="json"), seed=config.seed)
    manifest.add_output(write_json(report.model_dump(mode="json"), directory / "study.json"))
    manifest.add_output(write_report_table(report, directory / "study.txt"))
    manifest.timings = timer.timings()
    manifest.write(directory)

    if fmt == "table":
        console.print(study_table(report))
    if report.theorem_violations:
        console.print(f"[red]Guarantee violations: {report.theorem_violations}[/red]")
    console.print(f"[green]✓ Report written to {directory / 'study.json'}[/green]")


@cli.command()
@click.argument("model_path", type=click.Path())
@common_options
@click.option("--approximate", is_flag=True, help="Iterate over tree nodes instead of windows")
def dp(model_path: str, config_path, out, seed, threads, approximate: bool):
    """Value iteration on a fitted model (groups are actions)"""
    config = _load(config_path, seed, threads)
    if config.dp is None:
        raise config_error("The run configuration needs a 'dp' section", ErrorCode.USAGE_ERROR)
    section = config.dp
    spec = section.spec()
    timer = PhaseTimer()
    model = timed(timer, "load")(load_model)(model_path)
    with timer.phase("value_iteration"):
        table = value_iteration(
            model,
            spec,
            tol=section.tol,
            max_iter=section.max_iter,
            sweep=section.sweep,
            approximate=approximate or section.approximate,
        )
    directory = _out_dir(out)
    manifest = RunManifest(command="dp", config=config.model_dump(mode="json"), seed=config.seed)
    manifest.add_input(model_path)
    document = {
        "order": table.order,
        "approximate": table.approximate,
        "iterations": table.iterations,
        "residual": table.residual,
        "contraction_ratios": table.contraction_ratios,
        "discount": spec.discount,
        "states": table.as_dict(spec.actions),
    }
    manifest.add_output(write_json(document, directory / "value_table.json"))
    manifest.timings = timer.timings()
    manifest.write(directory)
    console.print(
        f"[green]✓ {len(table.states)} states converged in {table.iterations} sweeps "
        f"(residual {table.residual:.2e})[/green]"
    )


@cli.command()
@click.argument("model_path", type=click.Path())
@common_options
@click.option("--option", "option", default=None, help="Option symbol a")
@click.option("--x", "past_x", default=None, help="Past x, oldest symbol first")
@click.option("--y", "past_y", default=None, help="Past y, oldest symbol first")
def avem(model_path: str, config_path, out, seed, threads, option, past_x, past_y):
    """Average marginal dynamic effect of option a between pasts x and y"""
    config = _load(config_path, seed, threads)
    section = config.avem
    values = {
        "option": option if option is not None else (section.option if section else None),
        "x": past_x if past_x is not None else (section.x if section else None),
        "y": past_y if past_y is not None else (section.y if section else None),
    }
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise config_error(f"Missing effect query fields: {', '.join(missing)}", ErrorCode.USAGE_ERROR, missing=missing)
    query_section = AvemSection(**values)

    timer = PhaseTimer()
    model = timed(timer, "load")(load_model)(model_path)
    query = EffectQuery.from_tokens(model.alphabet, query_section.option, query_section.x, query_section.y)
    report = timed(timer, "avem")(compute_avem)(model, query)
    directory = _out_dir(out)
    manifest = RunManifest(command="avem", config=config.model_dump(mode="json"), seed=config.seed)
    manifest.add_input(model_path)
    manifest.add_output(write_json(report.to_dict(model.alphabet), directory / "effects.json"))
    manifest.timings = timer.timings()
    manifest.write(directory)
    console.print(f"[green]✓ AVEm = {report.avem:.4f} over {model.group_count} agents[/green]")


def main(argv=None) -> int:
    return cli.main(args=argv, prog_name="grouptree", standalone_mode=False)


if __name__ == '__main__':
    sys.exit(main())
