#!/usr/bin/env python3
"""
Recipe Library
Catalogue of experiment recipes kept as YAML files in one folder per model
family, plus loading and validation of a single recipe
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

from hft_kinetics.core import ConfigError, ExperimentConfig, check_positive, parse_number, validate_config
from hft_kinetics.langevin import LangevinConfig, validate_langevin_config
from hft_kinetics.ziob import ZiobConfig, validate_ziob_config

logger = logging.getLogger(__name__)

MICROSIM_CONTINUOUS = 'microsim-continuous'
MICROSIM_POISSON = 'microsim-poisson'
LANGEVIN = 'langevin'
ZIOB = 'ziob'
KINETICS = 'kinetics'
MODELS = (MICROSIM_CONTINUOUS, MICROSIM_POISSON, LANGEVIN, ZIOB, KINETICS)

# Analyses each model family can feed
MODEL_ANALYSES = {
    'microsim': ('profile', 'intervals', 'price_tail', 'layered', 'tanh_response', 'moments', 'equivalence'),
    'langevin': ('price_tail', 'moments', 'stationarity'),
    'ziob': ('price_tail', 'moments', 'layered', 'profile_shape', 'flux_balance', 'event_times'),
    'kinetics': ('oracle_suite', 'powerlaw_superposition'),
}

# Probes an analysis needs from a microsim run
ANALYSIS_PROBES = {
    'profile': 'snapshots',
    'layered': 'layer_counts',
    'tanh_response': 'trend_pairs',
}

PROBE_NAMES = ('ticks', 'snapshots', 'book_events', 'layer_counts', 'trend_pairs', 'trajectory')

# Keyword options a recipe's `run` section may pass to the replica runner
RUN_OPTION_KINDS = {
    'microsim': {'snapshot_interval': 'positive', 'profile_lower': 'real', 'profile_upper': 'positive',
                 'bin_width': 'positive', 'layer_max_depth': 'positive', 'warmup_ticks': 'flag'},
    'langevin': {},
    'ziob': {'book_events': ('log', 'counts'), 'profile_upper': 'positive', 'bin_width': 'positive',
             'layer_max_depth': 'positive'},
    'kinetics': {},
}

# Options read by each analysis; analyses not listed take none
ANALYSIS_OPTION_KINDS = {
    'intervals': {'points': 'count'},
    'price_tail': {'x_min': 'real', 'x_max': 'real', 'min_probability': 'probability', 'points': 'count'},
    'layered': {'bin_width': 'positive', 'max_depth': 'positive'},
    'tanh_response': {'bin_width': 'positive', 'n_bins': 'count', 'min_count': 'count', 'dp_range': 'positive'},
    'stationarity': {'x_min': 'real', 'min_probability': 'probability'},
}

RECIPE_KEYS = {'name', 'description', 'model', 'params', 'probes', 'analyses', 'options', 'output',
               'replicas', 'workers', 'reference_model', 'reference_params'}


def model_family(model: str) -> str:
    return 'microsim' if model.startswith('microsim') else model


@dataclass(frozen=True)
class KineticsConfig:
    """Parameters of the analytic oracle tasks; only a seed is required"""
    seed: int
    params: Dict[str, float] = field(default_factory=dict)

    def get(self, name: str, default: float) -> float:
        return self.params.get(name, default)

    def as_dict(self) -> Dict[str, Any]:
        return {'seed': self.seed, **self.params}


KINETICS_PARAMS = ('L_star', 'sigma', 'N', 'L', 'm', 'kappa_min', 'kappa_max', 'n_samples', 'x_min',
                   'mfpt_samples', 'stationary_walkers', 'profile_points')


def validate_kinetics_config(raw: Dict[str, Any]) -> KineticsConfig:
    issues: List[Tuple[str, str]] = []
    raw = dict(raw or {})
    seed = None
    if raw.get('seed') is None:
        issues.append(('seed', "missing field"))
    else:
        seed = parse_number(raw, 'seed', issues, integer=True)
        if seed is not None and not 0 <= seed < 2 ** 64:
            issues.append(('seed', f"must be a 64-bit unsigned integer, got {seed}"))
    params = check_positive(raw, KINETICS_PARAMS, issues)
    for name in sorted(set(raw) - set(KINETICS_PARAMS) - {'seed'}):
        issues.append((name, "unknown field"))
    if issues:
        raise ConfigError(issues)
    return KineticsConfig(seed=int(seed), params=params)


@dataclass(frozen=True)
class ExperimentRecipe:
    name: str
    description: str
    model: str
    config: Any
    probes: Tuple[str, ...]
    analyses: Tuple[str, ...]
    options: Dict[str, Dict[str, Any]]
    output_dir: str
    replicas: int
    workers: int
    reference_model: Optional[str] = None
    reference_config: Any = None
    source_path: Optional[str] = None

    @property
    def family(self) -> str:
        return model_family(self.model)

    def payload(self) -> Dict[str, Any]:
        """Everything that determines the outputs; hashed into the manifest"""
        return {
            'name': self.name,
            'model': self.model,
            'config': self.config.as_dict(),
            'probes': list(self.probes),
            'analyses': list(self.analyses),
            'options': self.options,
            'replicas': self.replicas,
            'reference_model': self.reference_model,
            'reference_config': self.reference_config.as_dict() if self.reference_config is not None else None,
        }


def _prefixed(prefix: str, error: ConfigError) -> List[Tuple[str, str]]:
    return [(f"{prefix}.{name}", message) for name, message in error.issues]


def check_options(prefix: str, values: Dict[str, Any], kinds: Dict[str, Any]) -> List[Tuple[str, str]]:
    """
    Issues for one options section: unknown keys, wrong types and values
    out of range, each named by its dotted path
    """
    issues: List[Tuple[str, str]] = []
    for key in sorted(values, key=str):
        kind = kinds.get(key)
        value = values[key]
        path = f"{prefix}.{key}"
        if kind is None:
            known = ', '.join(sorted(kinds)) or 'none'
            issues.append((path, f"unknown option (known: {known})"))
        elif isinstance(kind, tuple):
            if value not in kind:
                issues.append((path, f"must be one of {', '.join(kind)}, got {value!r}"))
        elif kind == 'flag':
            if not isinstance(value, bool):
                issues.append((path, f"expected true or false, got {value!r}"))
        else:
            local: List[Tuple[str, str]] = []
            number = parse_number(values, key, local, integer=(kind == 'count'))
            if number is not None:
                if kind in ('positive', 'count') and number <= 0:
                    local.append((key, f"must be > 0, got {number}"))
                elif kind == 'probability' and not 0.0 < number < 1.0:
                    local.append((key, f"must lie in (0, 1), got {number}"))
            issues.extend((path, message) for _, message in local)
    return issues


def build_model_config(model: str, params: Dict[str, Any]):
    family = model_family(model)
    if family == 'microsim':
        return validate_config(params)
    if family == LANGEVIN:
        return validate_langevin_config(params)
    if family == ZIOB:
        return validate_ziob_config(params)
    return validate_kinetics_config(params)


def parse_recipe(data: Any, source_path: Optional[str] = None,
                 output_root: Optional[str] = None) -> ExperimentRecipe:
    """
    Validate a parsed recipe mapping; every problem is reported with its
    dotted field path
    """
    if not isinstance(data, dict):
        raise ConfigError([('recipe', "expected a mapping at the top level")])
    issues: List[Tuple[str, str]] = []
    for key in sorted(set(data) - RECIPE_KEYS):
        issues.append((key, "unknown section"))

    default_name = os.path.splitext(os.path.basename(source_path))[0] if source_path else None
    name = data.get('name') or default_name
    if not name:
        issues.append(('name', "missing field"))

    model = data.get('model')
    if model not in MODELS:
        issues.append(('model', f"must be one of {', '.join(MODELS)}, got {model!r}"))

    params = data.get('params')
    config = None
    if not isinstance(params, dict):
        issues.append(('params', "expected a mapping of model parameters"))
    elif model in MODELS:
        try:
            config = build_model_config(model, params)
        except ConfigError as exc:
            issues.extend(_prefixed('params', exc))

    analyses = data.get('analyses') or []
    if not isinstance(analyses, list):
        issues.append(('analyses', "expected a list"))
        analyses = []
    if model in MODELS:
        allowed = MODEL_ANALYSES[model_family(model)]
        for item in analyses:
            if item not in allowed:
                issues.append(('analyses', f"{item!r} is not available for {model} (choose from {', '.join(allowed)})"))

    probes = data.get('probes') or []
    if not isinstance(probes, list):
        issues.append(('probes', "expected a list"))
        probes = []
    probes = list(dict.fromkeys(probes + [ANALYSIS_PROBES[a] for a in analyses if a in ANALYSIS_PROBES]))
    for item in probes:
        if item not in PROBE_NAMES:
            issues.append(('probes', f"unknown probe {item!r} (choose from {', '.join(PROBE_NAMES)})"))

    options = data.get('options') or {}
    if not isinstance(options, dict) or not all(isinstance(v, dict) for v in options.values()):
        issues.append(('options', "expected a mapping from analysis name to a mapping of options"))
        options = {}
    for key in sorted(set(options) - set(analyses) - {'run'}):
        issues.append((f"options.{key}", "not an analysis of this recipe and not 'run'"))
    if model in MODELS:
        issues.extend(check_options('options.run', options.get('run') or {}, RUN_OPTION_KINDS[model_family(model)]))
    for key in sorted(set(options) & set(analyses)):
        issues.extend(check_options(f"options.{key}", options[key], ANALYSIS_OPTION_KINDS.get(key, {})))

    counts = check_positive(data, ('replicas', 'workers'), issues, integer=True)

    output = data.get('output') or {}
    if not isinstance(output, dict):
        issues.append(('output', "expected a mapping"))
        output = {}
    if output_root:
        output_dir = os.path.join(output_root, name or 'recipe')
    else:
        output_dir = output.get('directory') or os.path.join('results', name or 'recipe')

    reference_model = data.get('reference_model')
    reference_config = None
    if reference_model is not None:
        if reference_model not in (MICROSIM_CONTINUOUS, MICROSIM_POISSON) or model_family(model or '') != 'microsim':
            issues.append(('reference_model', "only microsim recipes can name a microsim reference model"))
        elif isinstance(params, dict):
            merged = dict(params)
            merged.update(data.get('reference_params') or {})
            try:
                reference_config = validate_config(merged)
            except ConfigError as exc:
                issues.extend(_prefixed('reference_params', exc))
    if 'equivalence' in analyses and reference_model is None:
        issues.append(('reference_model', "the equivalence analysis needs a reference model"))

    if issues:
        raise ConfigError(issues)

    return ExperimentRecipe(
        name=name,
        description=str(data.get('description', '')).strip(),
        model=model,
        config=config,
        probes=tuple(probes),
        analyses=tuple(analyses),
        options={k: dict(v) for k, v in options.items()},
        output_dir=output_dir,
        replicas=int(counts.get('replicas', 1)),
        workers=int(counts.get('workers', 1)),
        reference_model=reference_model,
        reference_config=reference_config,
        source_path=source_path,
    )


def load_recipe(path: str, output_root: Optional[str] = None) -> ExperimentRecipe:
    """
    Read and validate a recipe file; OSError propagates, YAML syntax errors
    become ConfigError
    """
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([('recipe', f"not valid YAML: {exc}")]) from exc
    return parse_recipe(data, source_path=path, output_root=output_root)


class RecipeLibrary:
    def __init__(self, recipes_path: str = None):
        """
        Initialise the catalogue rooted at `recipes_path`
        """
        self.recipes_path = recipes_path or os.getenv('HFTKIN_RECIPES_DIR') or os.path.join(
            os.path.dirname(__file__), '..', 'recipes'
        )

        # folder -> model family
        self.folder_model_map = {
            'microsim': 'microsim',
            'langevin': 'langevin',
            'ziob': 'ziob',
            'kinetics': 'kinetics',
        }

        self._metadata_cache = {}

    def clear_cache(self):
        self._metadata_cache = {}

    def get_all_recipes(self) -> List[Dict[str, Any]]:
        """
        Metadata of every recipe, sorted by folder then name
        """
        recipes = []
        for folder_name, family in self.folder_model_map.items():
            folder_path = os.path.join(self.recipes_path, folder_name)
            if not os.path.isdir(folder_path):
                continue
            for filename in sorted(os.listdir(folder_path)):
                if filename.endswith(('.yaml', '.yml')):
                    recipes.append(self._extract_metadata(os.path.join(folder_path, filename), family))
        recipes.sort(key=lambda r: (r.get('family', ''), r.get('recipe_id', '')))
        return recipes

    def get_recipe_by_id(self, recipe_id: str) -> Optional[Dict[str, Any]]:
        path = self.find_recipe_path(recipe_id)
        if path is None:
            return None
        family = self.folder_model_map[os.path.basename(os.path.dirname(path))]
        return self._extract_metadata(path, family)

    def find_recipe_path(self, recipe_id: str) -> Optional[str]:
        for folder_name in self.folder_model_map:
            for ext in ('.yaml', '.yml'):
                path = os.path.join(self.recipes_path, folder_name, f"{recipe_id}{ext}")
                if os.path.exists(path):
                    return path
        return None

    def get_recipe_content(self, recipe_id: str) -> Dict[str, Any]:
        """
        Validated recipe with status flag; never raises
        """
        path = self.find_recipe_path(recipe_id)
        if path is None:
            return {'success': False, 'error': 'Recipe not found'}
        try:
            recipe = load_recipe(path)
        except ConfigError as e:
            return {'success': False, 'error': str(e), 'issues': e.issues, 'file_path': path}
        except OSError as e:
            return {'success': False, 'error': f"Error reading file: {e}", 'file_path': path}
        return {'success': True, 'recipe_id': recipe_id, 'recipe': recipe, 'file_path': path}

    def search_recipes(self, query: str) -> List[Dict[str, Any]]:
        query_lower = query.lower()
        results = []
        for meta in self.get_all_recipes():
            if query_lower in meta.get('recipe_id', '').lower():
                results.append({**meta, 'match_type': 'name'})
            elif query_lower in meta.get('description', '').lower():
                results.append({**meta, 'match_type': 'description'})
        return results

    def get_recipes_by_model(self, model: str) -> List[Dict[str, Any]]:
        return [meta for meta in self.get_all_recipes() if meta.get('model') == model]

    def get_library_stats(self) -> Dict[str, Any]:
        recipes = self.get_all_recipes()
        by_model: Dict[str, int] = {}
        for meta in recipes:
            by_model[meta.get('model', 'unknown')] = by_model.get(meta.get('model', 'unknown'), 0) + 1
        return {
            'total_recipes': len(recipes),
            'by_model': dict(sorted(by_model.items())),
            'invalid': [m['recipe_id'] for m in recipes if m.get('error')],
            'library_path': self.recipes_path,
        }

    def _extract_metadata(self, file_path: str, family: str) -> Dict[str, Any]:
        if file_path in self._metadata_cache:
            return self._metadata_cache[file_path]

        recipe_id = os.path.splitext(os.path.basename(file_path))[0]
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
            if not isinstance(data, dict):
                raise ValueError("top level is not a mapping")
            metadata = {
                'recipe_id': recipe_id,
                'family': family,
                'model': data.get('model', 'unknown'),
                'description': ' '.join(str(data.get('description', '')).split()),
                'analyses': list(data.get('analyses') or []),
                'replicas': data.get('replicas', 1),
                'file_path': file_path,
            }
        except (OSError, ValueError, yaml.YAMLError) as e:
            logger.warning("⚠️ unreadable recipe %s: %s", file_path, e)
            metadata = {
                'recipe_id': recipe_id,
                'family': family,
                'description': f'Error: {e}',
                'file_path': file_path,
                'error': True,
            }

        self._metadata_cache[file_path] = metadata
        return metadata
