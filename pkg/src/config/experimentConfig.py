"""Centralized configuration for geoscore experiments.

All tunable defaults live here so experiment policy can change without
touching pipeline code. An experiment config file is a flat JSON object whose
keys must be a subset of `experimentDefaults`; anything else is rejected so a
typo in a sweep fails loudly instead of silently using a default.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..errors import ConfigError
from ..io.jsonIo import canonicalJson, readJson

artifactKinds = ('dipole', 'hot_pixel', 'streak', 'edge_step')

synthDefaults = {
    'nInliers': 2700,
    'nOutliers': 400,
    'trainSize': 2000,
    'validationSize': 300,
    'side': 21,
    'channels': 3,
    'psfSigmaRange': [1.0, 2.0],
    'noiseSigma': 0.1,
    'maxJitter': 1.0,
    'artifactMix': {kind: 0.25 for kind in artifactKinds},
    'seed': 0,
}

# Artifact mix for the benchmark variant where edges dominate the bogus class.
edgeDominatedMix = {'dipole': 0.1, 'hot_pixel': 0.1, 'streak': 0.4, 'edge_step': 0.4}

classifierDefaults = {
    'architecture': 'compact_cnn',
    'batchSize': 128,
    'learningRate': 1e-3,
    'beta1': 0.9,
    'beta2': 0.999,
    'adamEpsilon': 1e-8,
    'maxEpochs': 50,
    'patience': 0,
    'earlyStopping': True,
    'originalSchedule': False,
}

scorerDefaults = {
    'clipEpsilon': 1e-6,
    'dirichletTolerance': 1e-8,
    'dirichletMaxIterations': 1000,
    'thresholdPercentile': 2.3,
    'predictBatchSize': 512,
}

selectionDefaults = {
    'selectionLow': 0.49,
    'selectionHigh': 0.51,
    'suspiciousLow': 0.45,
    'suspiciousHigh': 0.55,
    'pairArchitecture': 'compact_cnn',
    'pairMaxEpochs': 30,
}

experimentDefaults: dict[str, Any] = {
    # data
    'datasetDir': None,
    'cropSize': None,
    'synthSeed': synthDefaults['seed'],
    **{key: value for key, value in synthDefaults.items() if key != 'seed'},
    # catalogs
    'catalogs': ['shifts9'],
    'catalogPath': None,
    'shiftSize': None,
    'selectionCatalog': 'flipshift18',
    # classifier
    **classifierDefaults,
    # scorer
    **scorerDefaults,
    # selection
    **selectionDefaults,
    # runs
    'seeds': list(range(10)),
    'welchPairs': [],
    'outputDir': 'geoscoreRuns',
    'deterministic': False,
    'jobs': 1,
}

_numericKeys = {key for key, value in experimentDefaults.items() if isinstance(value, (int, float)) and not isinstance(value, bool)}
_boolKeys = {key for key, value in experimentDefaults.items() if isinstance(value, bool)}
_listKeys = {key for key, value in experimentDefaults.items() if isinstance(value, list)}
_positiveIntKeys = ('cropSize', 'shiftSize')
_pathKeys = ('datasetDir', 'catalogPath')


def defaultJobs() -> int:
    raw = os.environ.get('GEOSCORE_JOBS')
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError as error:
        raise ConfigError(f'GEOSCORE_JOBS must be an integer, got {raw!r}') from error
    if jobs < 1:
        raise ConfigError(f'GEOSCORE_JOBS must be >= 1, got {jobs}')
    return jobs


def _checkTypes(values: dict[str, Any]) -> None:
    for key, value in values.items():
        if value is None:
            continue
        if key in _positiveIntKeys and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
            raise ConfigError(f'Config key {key!r} must be a positive integer, got {value!r}')
        if key in _pathKeys and not isinstance(value, str):
            raise ConfigError(f'Config key {key!r} must be a path string, got {value!r}')
        if key in _boolKeys and not isinstance(value, bool):
            raise ConfigError(f'Config key {key!r} must be true/false, got {value!r}')
        if key in _numericKeys and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f'Config key {key!r} must be numeric, got {value!r}')
        if key in _listKeys and not isinstance(value, list):
            raise ConfigError(f'Config key {key!r} must be a list, got {value!r}')
        if key == 'artifactMix' and not isinstance(value, dict):
            raise ConfigError(f'Config key {key!r} must be an object, got {value!r}')


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict[str, Any]

    def __getattr__(self, key: str) -> Any:
        if key.startswith('__') or key == 'values':
            raise AttributeError(key)
        try:
            return self.values[key]
        except KeyError as error:
            raise AttributeError(key) from error

    def toDict(self) -> dict[str, Any]:
        return {key: self.values[key] for key in sorted(self.values)}

    def replace(self, **updates: Any) -> ExperimentConfig:
        return buildExperimentConfig({**self.toDict(), **updates})

    def fingerprint(self, keys: list[str] | None = None) -> str:
        selected = self.toDict() if keys is None else {key: self.values[key] for key in keys}
        return configFingerprint(selected)


def configFingerprint(payload: Any) -> str:
    return hashlib.sha256(canonicalJson(payload).encode('utf-8')).hexdigest()


def buildExperimentConfig(overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(experimentDefaults))
    if unknown:
        raise ConfigError(f'Unknown config keys {unknown}; valid keys: {sorted(experimentDefaults)}')
    _checkTypes(overrides)

    merged = {**experimentDefaults, **overrides}
    if not merged['catalogs']:
        raise ConfigError('Config key "catalogs" must name at least one catalog')
    if not all(isinstance(name, str) and name for name in merged['catalogs']):
        raise ConfigError(f'Config key "catalogs" must list catalog names or files, got {merged["catalogs"]!r}')
    if not merged['seeds']:
        raise ConfigError('Config key "seeds" must list at least one seed')
    for pair in merged['welchPairs']:
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f'welchPairs entries must be [catalogA, catalogB], got {pair!r}')
    if merged['jobs'] < 1:
        raise ConfigError(f'jobs must be >= 1, got {merged["jobs"]}')
    return ExperimentConfig(merged)


def loadExperimentConfig(filePath: str | Path | None) -> ExperimentConfig:
    """Merge a JSON config file (or a run manifest) over the defaults; `None` gives the defaults."""
    if filePath is None:
        return buildExperimentConfig({'jobs': defaultJobs()})
    try:
        payload = readJson(filePath)
    except ValueError as error:
        raise ConfigError(str(error)) from error
    if not isinstance(payload, dict):
        raise ConfigError(f'Config file {filePath} must contain a JSON object')
    if 'stage' in payload and isinstance(payload.get('config'), dict):
        # a stage manifest: rerun with the exact config it echoes
        payload = dict(payload['config'])
    payload.setdefault('jobs', defaultJobs())
    return buildExperimentConfig(payload)


__all__ = [
    'artifactKinds',
    'synthDefaults',
    'edgeDominatedMix',
    'classifierDefaults',
    'scorerDefaults',
    'selectionDefaults',
    'experimentDefaults',
    'ExperimentConfig',
    'buildExperimentConfig',
    'loadExperimentConfig',
    'configFingerprint',
    'defaultJobs',
]
