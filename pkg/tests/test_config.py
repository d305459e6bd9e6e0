from __future__ import annotations

import json
from pathlib import Path

import pytest

from src.config.experimentConfig import (
    buildExperimentConfig,
    experimentDefaults,
    loadExperimentConfig,
)
from src.errors import ConfigError

assetsDir = Path(__file__).resolve().parent.parent / 'assets'


def test_defaults_are_used_without_a_file(monkeypatch):
    monkeypatch.delenv('GEOSCORE_JOBS', raising=False)
    config = loadExperimentConfig(None)
    assert config.catalogs == ['shifts9']
    assert config.thresholdPercentile == 2.3
    assert config.selectionLow == 0.49 and config.selectionHigh == 0.51
    assert config.jobs == 1
    assert config.toDict().keys() == experimentDefaults.keys()


def test_file_values_override_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv('GEOSCORE_JOBS', raising=False)
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'catalogs': ['geo72', 'shifts36'], 'seeds': [3], 'maxEpochs': 4}))
    config = loadExperimentConfig(path)
    assert config.catalogs == ['geo72', 'shifts36']
    assert config.seeds == [3]
    assert config.maxEpochs == 4
    assert config.batchSize == 128


def test_jobs_come_from_the_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('GEOSCORE_JOBS', '3')
    path = tmp_path / 'config.json'
    path.write_text('{}')
    assert loadExperimentConfig(path).jobs == 3
    path.write_text('{"jobs": 2}')
    assert loadExperimentConfig(path).jobs == 2

    monkeypatch.setenv('GEOSCORE_JOBS', 'many')
    with pytest.raises(ConfigError, match='GEOSCORE_JOBS'):
        loadExperimentConfig(None)


def test_unknown_keys_are_listed():
    with pytest.raises(ConfigError, match="Unknown config keys \\['epochs'\\]"):
        buildExperimentConfig({'epochs': 3})


@pytest.mark.parametrize(
    'overrides, message',
    [
        ({'maxEpochs': 'ten'}, 'numeric'),
        ({'deterministic': 1}, 'true/false'),
        ({'seeds': 4}, 'list'),
        ({'artifactMix': [0.25]}, 'object'),
        ({'catalogs': []}, 'at least one catalog'),
        ({'seeds': []}, 'at least one seed'),
        ({'welchPairs': [['shifts9']]}, 'welchPairs'),
        ({'jobs': 0}, 'jobs'),
        ({'cropSize': 20.5}, 'positive integer'),
        ({'shiftSize': 0}, 'positive integer'),
        ({'shiftSize': True}, 'positive integer'),
        ({'catalogPath': 5}, 'path string'),
        ({'catalogs': ['shifts9', 3]}, 'catalog names or files'),
    ],
)
def test_invalid_values_are_rejected(overrides, message):
    with pytest.raises(ConfigError, match=message):
        buildExperimentConfig(overrides)


def test_stage_manifest_reruns_its_config(tmp_path):
    original = buildExperimentConfig({'catalogs': ['flipshift18'], 'seeds': [5], 'jobs': 2})
    manifest = tmp_path / 'manifest.json'
    manifest.write_text(json.dumps({'stage': 'train', 'fingerprint': 'x', 'config': original.toDict()}))
    assert loadExperimentConfig(manifest).toDict() == original.toDict()


def test_malformed_files_raise_config_errors(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"catalogs": ')
    with pytest.raises(ConfigError, match='Invalid JSON'):
        loadExperimentConfig(path)
    path.write_text('[1, 2]')
    with pytest.raises(ConfigError, match='JSON object'):
        loadExperimentConfig(path)
    with pytest.raises(FileNotFoundError):
        loadExperimentConfig(tmp_path / 'missing.json')


def test_fingerprints_depend_only_on_selected_keys():
    base = buildExperimentConfig({'seeds': [0, 1]})
    changed = base.replace(maxEpochs=7)
    assert base.fingerprint() == buildExperimentConfig({'seeds': [0, 1]}).fingerprint()
    assert base.fingerprint() != changed.fingerprint()
    assert base.fingerprint(['nInliers', 'side']) == changed.fingerprint(['nInliers', 'side'])
    assert len(base.fingerprint()) == 64


def test_replace_revalidates():
    with pytest.raises(ConfigError):
        buildExperimentConfig().replace(jobs=0)


def test_unknown_attribute_raises_attribute_error():
    with pytest.raises(AttributeError):
        buildExperimentConfig().notAKey


def test_bundled_configs_load(monkeypatch):
    monkeypatch.delenv('GEOSCORE_JOBS', raising=False)
    for name in ('deskConfig', 'edgeDominatedConfig', 'geo72SelectedConfig', 'selectionConfig', 'smokeConfig'):
        config = loadExperimentConfig(assetsDir / f'{name}.json')
        assert config.catalogs
