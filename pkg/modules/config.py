"""
Run configuration.

Settings resolve with precedence command-line flags > JSON config file >
environment (VIGAN_* variables, optionally from a .env file) > built-in defaults.
The resolved settings are written next to every output for provenance.
"""
import os
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional

from dotenv import dotenv_values, find_dotenv

from .data import BatchSizes
from .errors import UsageError
from .file_io import write_json_atomic
from .neural_net import AdamSettings
from .training import TrainConfig
from .vigan_model import ArchitectureConfig, LossWeights

logger = logging.getLogger(__name__)

ENV_PREFIX = 'VIGAN_'
CONFIG_SUFFIX = '.config.json'


def parse_int_list(value: Any) -> List[int]:
    """'2000,5000,5000' or [2000, 5000, 5000] -> [2000, 5000, 5000]."""
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [part for part in str(value).replace(' ', '').split(',') if part != '']
    try:
        return [int(item) for item in items]
    except (TypeError, ValueError):
        raise UsageError(f'expected a comma-separated list of integers, got {value!r}')


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off', ''):
        return False
    raise UsageError(f'expected a boolean, got {value!r}')


CONVERTERS: Dict[str, Callable[[Any], Any]] = {'seed': int, 'iters': parse_int_list, 'stages': parse_int_list, 'lr': float, 'beta1': float, 'beta2': float, 'eps': float, 'lambda_ae': float, 'lambda_cyc': float, 'batch_size': int, 'generator_loss': str, 'stage3_paired_only': parse_bool, 'log_every': int, 'generator_hidden': parse_int_list, 'discriminator_hidden': parse_int_list, 'dae_hidden': parse_int_list, 'dae_code': int, 'log_level': str, 'rank': int, 'iterations': int, 'shrinkage': float, 'seeds': int, 'workers': int, 'tolerance': float, 'step': float, 'kind': str, 'dim_x': int, 'dim_y': int, 'noise': float, 'paired': int, 'x_only': int, 'y_only': int, 'validation': int, 'test': int}

TRAIN_DEFAULTS: Dict[str, Any] = {'seed': 7, 'iters': [2000, 5000, 5000], 'stages': [1, 2, 3], 'lr': 0.0002, 'beta1': 0.5, 'beta2': 0.999, 'eps': 1e-08, 'lambda_ae': 10.0, 'lambda_cyc': 10.0, 'batch_size': 64, 'generator_loss': 'minimax', 'stage3_paired_only': False, 'log_every': 100, 'generator_hidden': [64, 64], 'discriminator_hidden': [64, 64], 'dae_hidden': [64, 32], 'dae_code': 16}


def coerce(key: str, value: Any) -> Any:
    converter = CONVERTERS.get(key)
    if converter is None or value is None:
        return value
    try:
        return converter(value)
    except (TypeError, ValueError) as e:
        raise UsageError(f'invalid value {value!r} for {key}: {e}')


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a flat JSON object of settings."""
    if not os.path.exists(path):
        raise UsageError(f'config file not found: {path}')
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise UsageError(f'config file {path} is not valid JSON: {e}')
    if not isinstance(data, dict):
        raise UsageError(f'config file {path} must hold a JSON object')
    return {key.replace('-', '_'): value for key, value in data.items()}


def load_environment(environ: Optional[Mapping[str, str]]=None, dotenv_path: Optional[str]=None) -> Dict[str, Any]:
    """
    Collect VIGAN_* settings from a .env file and the process environment.

    Process variables win over the .env file. Keys are lower-cased with the
    prefix removed, e.g. VIGAN_LAMBDA_CYC -> lambda_cyc.
    """
    merged: Dict[str, Optional[str]] = {}
    if environ is None:
        path = dotenv_path or find_dotenv(usecwd=True)
        if path:
            merged.update(dotenv_values(path))
        merged.update(os.environ)
    else:
        merged.update(environ)
    return {key[len(ENV_PREFIX):].lower(): value for key, value in merged.items() if key.startswith(ENV_PREFIX) and value is not None}


@dataclass
class RunConfig:
    """Resolved settings of one subcommand and where each value came from."""
    command: str
    settings: Dict[str, Any]
    sources: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)

    def get(self, key: str, default: Any=None) -> Any:
        value = self.settings.get(key)
        return default if value is None else value

    def to_dict(self) -> Dict[str, Any]:
        return {'command': self.command, 'settings': self.settings, 'sources': self.sources, 'outputs': self.outputs}

    def write(self, output_path: str) -> str:
        """Persist next to an output as `<output>.config.json`; returns the path written."""
        path = output_path.rstrip('/\\') + CONFIG_SUFFIX
        write_json_atomic(path, self.to_dict())
        return path

    def train_config(self) -> TrainConfig:
        batch = int(self.get('batch_size'))
        return TrainConfig(iterations=self.get('iters'), batch_sizes=BatchSizes(paired=batch, x=batch, y=batch), weights=LossWeights(lambda_ae=self.get('lambda_ae'), lambda_cyc=self.get('lambda_cyc')), adam=AdamSettings(learning_rate=self.get('lr'), beta1=self.get('beta1'), beta2=self.get('beta2'), eps=self.get('eps')), architecture=ArchitectureConfig(generator_hidden=self.get('generator_hidden'), discriminator_hidden=self.get('discriminator_hidden'), dae_hidden=self.get('dae_hidden'), dae_code=self.get('dae_code')), seed=self.get('seed'), stages=self.get('stages'), generator_loss=self.get('generator_loss'), stage3_paired_only=bool(self.get('stage3_paired_only')), log_every=self.get('log_every'))


def resolve_run_config(command: str, flags: Mapping[str, Any], defaults: Optional[Mapping[str, Any]]=None, config_path: Optional[str]=None, environ: Optional[Mapping[str, str]]=None, dotenv_path: Optional[str]=None) -> RunConfig:
    """
    Merge the configuration layers for one subcommand.

    Args:
        command: Subcommand name
        flags: Parsed command-line values; None means "not given"
        defaults: Built-in defaults; only these keys are read from the environment
        config_path: Optional JSON config file
        environ: Environment mapping to use instead of os.environ and .env (tests)
        dotenv_path: Explicit .env file

    Returns:
        RunConfig: Resolved settings with the source of each value
    """
    defaults = dict(defaults or {})
    settings: Dict[str, Any] = {}
    sources: Dict[str, str] = {}
    for key, value in defaults.items():
        settings[key] = coerce(key, value)
        sources[key] = 'default'
    for key, value in load_environment(environ, dotenv_path).items():
        if key in defaults:
            settings[key] = coerce(key, value)
            sources[key] = 'environment'
    if config_path:
        for key, value in load_config_file(config_path).items():
            if key not in defaults and key not in flags:
                logger.warning(f'Ignoring unknown setting {key!r} in {config_path}')
                continue
            settings[key] = coerce(key, value)
            sources[key] = 'config'
    for key, value in flags.items():
        if value is not None:
            settings[key] = coerce(key, value)
            sources[key] = 'flag'
        elif key not in settings:
            settings[key] = None
            sources[key] = 'unset'
    logger.debug(f'{command}: resolved settings {settings}')
    return RunConfig(command=command, settings=settings, sources=sources)
