#!/usr/bin/env python3
"""
Experiment runner

    python -m hft_kinetics run recipes/microsim/profile_n25.yaml
    python -m hft_kinetics validate recipes/ziob/ziob_realistic.yaml
    python -m hft_kinetics list-recipes

Progress goes to standard error; data goes to the recipe output directory
(records/, report/ and manifest.json).
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from hft_kinetics.core import ConfigError, FitError, ModelError, RngStream
from hft_kinetics.langevin import run_langevin
from hft_kinetics.microsim import Probes, run_simulation
from hft_kinetics.recipe_library import ExperimentRecipe, RecipeLibrary, load_recipe
from hft_kinetics.records import TickSink, write_manifest, write_samples
from hft_kinetics.reports import RunBundle, emit_report, run_analyses
from hft_kinetics.ziob import ziob_run

logger = logging.getLogger('hft_kinetics')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_IO = 4

# Recipe option sections consumed by the runner rather than an analysis
RUN_OPTIONS = 'run'


def setup_logging(level: Optional[str] = None) -> None:
    level_name = (level or os.getenv('HFTKIN_LOG_LEVEL') or 'INFO').upper()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level_name, logging.INFO))


def replica_seeds(base_seed: int, count: int) -> List[int]:
    """The base seed for a single replica, derived 64-bit seeds otherwise"""
    if count == 1:
        return [int(base_seed)]
    stream = RngStream(base_seed)
    return [stream.replica_seed(k) for k in range(count)]


def run_replica(task: Dict[str, Any]):
    """
    One replica in a worker process; owns its record sink and returns the
    in-memory result for the merged report
    """
    family = task['family']
    rng = RngStream(task['seed'])
    path = os.path.join(task['records_dir'], f"{task['label']}_r{task['index']:02d}.tsv")
    run_options = dict(task.get('run_options') or {})

    if family == 'microsim':
        variant = task['model'].split('-', 1)[1]
        probes = Probes.from_names(task['probes'], **run_options)
        return run_simulation(task['config'], rng, probes, variant=variant, tick_sink=TickSink(path))
    if family == 'langevin':
        samples = run_langevin(task['config'], rng)
        write_samples(path, 'dp_tpip', samples)
        return samples
    if family == 'ziob':
        return ziob_run(task['config'], rng, tick_sink=TickSink(path), **run_options)
    raise ValueError(f"no replica runner for model family {family!r}")


def _tasks(recipe: ExperimentRecipe, seeds: List[int], records_dir: str, reference: bool = False):
    label = 'reference' if reference else ('dp' if recipe.family == 'langevin' else 'ticks')
    return [
        {
            'family': recipe.family,
            'model': recipe.reference_model if reference else recipe.model,
            'config': recipe.reference_config if reference else recipe.config,
            'probes': recipe.probes,
            'seed': seed,
            'index': index,
            'label': label,
            'records_dir': records_dir,
            'run_options': recipe.options.get(RUN_OPTIONS),
        }
        for index, seed in enumerate(seeds)
    ]


def _run_tasks(tasks: List[Dict[str, Any]], workers: int) -> List[Any]:
    if workers <= 1 or len(tasks) <= 1:
        return [run_replica(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(run_replica, tasks))


def execute_recipe(recipe: ExperimentRecipe, workers: Optional[int] = None) -> Dict[str, Any]:
    """
    Run every replica, the reference twin when declared, then the analyses;
    returns the written paths and the report
    """
    start = time.time()
    records_dir = os.path.join(recipe.output_dir, 'records')
    os.makedirs(records_dir, exist_ok=True)
    workers = workers or int(os.getenv('HFTKIN_WORKERS') or recipe.workers)
    seeds = replica_seeds(recipe.config.seed, recipe.replicas)
    logger.info("🔄 recipe %s: model=%s, %d replica(s), %d worker(s)",
                recipe.name, recipe.model, recipe.replicas, workers)

    results: List[Any] = []
    reference: List[Any] = []
    if recipe.family != 'kinetics':
        results = _run_tasks(_tasks(recipe, seeds, records_dir), workers)
        if recipe.reference_model:
            reference = _run_tasks(_tasks(recipe, seeds, records_dir, reference=True), workers)

    bundle = RunBundle(family=recipe.family, config=recipe.config, results=results, reference=reference)
    report = run_analyses(bundle, recipe.analyses, recipe.options)
    outputs = emit_report(report, os.path.join(recipe.output_dir, 'report'))
    outputs += [os.path.join(records_dir, name) for name in sorted(os.listdir(records_dir))]

    wall_time = time.time() - start
    manifest = write_manifest(recipe.output_dir, recipe.name, recipe.payload(), seeds, wall_time,
                              [os.path.relpath(p, recipe.output_dir) for p in outputs],
                              extra={'source': recipe.source_path})
    logger.info("✅ recipe %s finished in %.1fs", recipe.name, wall_time)
    return {'outputs': outputs, 'manifest': manifest, 'report': report}


def run_recipe(path: str, workers: Optional[int] = None) -> int:
    """Load, run and report one recipe file; returns the process exit status"""
    try:
        recipe = load_recipe(path, output_root=os.getenv('HFTKIN_OUTPUT_DIR'))
        execute_recipe(recipe, workers)
    except ConfigError as e:
        _print_issues(path, e)
        return EXIT_CONFIG
    except (ModelError, FitError) as e:
        logger.error("❌ %s: %s", type(e).__name__, e)
        return EXIT_MODEL
    except OSError as e:
        logger.error("❌ I/O error: %s", e)
        return EXIT_IO
    return EXIT_OK


def validate_recipe(path: str) -> int:
    try:
        recipe = load_recipe(path)
    except ConfigError as e:
        _print_issues(path, e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("❌ cannot read %s: %s", path, e)
        return EXIT_IO
    print(f"✅ {path}: {recipe.model}, {len(recipe.analyses)} analyses, {recipe.replicas} replica(s)")
    return EXIT_OK


def list_recipes(recipes_path: Optional[str] = None) -> int:
    library = RecipeLibrary(recipes_path)
    recipes = library.get_all_recipes()
    if not recipes:
        print(f"⚠️ no recipes under {library.recipes_path}")
        return EXIT_OK
    for meta in recipes:
        model = meta.get('model', 'invalid')
        print(f"{meta['recipe_id']:<28} {model:<20} {meta.get('description', '')}")
    return EXIT_OK


def _print_issues(path: str, error: ConfigError) -> None:
    print(f"❌ {path}: invalid recipe", file=sys.stderr)
    for name, message in error.issues:
        print(f"   {name}: {message}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='hft-kinetics', description='Trend-following market model experiments')
    parser.add_argument('--log-level', help='logging level (default: HFTKIN_LOG_LEVEL or INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run a recipe and write its records and report')
    run.add_argument('recipe')
    run.add_argument('--workers', type=int, help='worker processes for replicas')

    check = sub.add_parser('validate', help='check a recipe without running it')
    check.add_argument('recipe')

    catalogue = sub.add_parser('list-recipes', help='print the recipe catalogue')
    catalogue.add_argument('--path', help='catalogue root (default: HFTKIN_RECIPES_DIR or recipes/)')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    if args.command == 'run':
        return run_recipe(args.recipe, args.workers)
    if args.command == 'validate':
        return validate_recipe(args.recipe)
    return list_recipes(args.path)


if __name__ == '__main__':
    sys.exit(main())
