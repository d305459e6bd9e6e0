from __future__ import annotations

import json

import numpy as np
import pytest

from runGeoscore import main
from src.io.csvIo import readScoreCsv
from src.io.scorerIo import loadScorer
from src.io.stampIo import readDataset
from src.transforms.transformCatalog import loadCatalogFile

tinyConfig = {
    'nInliers': 140,
    'nOutliers': 30,
    'trainSize': 60,
    'validationSize': 50,
    'architecture': 'linear_softmax',
    'batchSize': 64,
    'maxEpochs': 1,
    'catalogs': ['shifts9'],
    'seeds': [0],
    'selectionCatalog': 'shifts9',
    'pairArchitecture': 'linear_softmax',
    'pairMaxEpochs': 1,
}


def _writeConfig(tmp_path, **overrides) -> str:
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({**tinyConfig, **overrides}))
    return str(path)


def _run(command: str, configPath: str, outDir) -> int:
    return main([command, '--config', configPath, '--out', str(outDir), '--deterministic'])


def test_pipeline_writes_every_stage_output(tmp_path):
    outDir = tmp_path / 'out'
    assert _run('pipeline', _writeConfig(tmp_path), outDir) == 0

    runDir = outDir / 'runs' / 'shifts9' / 'seed0'
    for name in ('model.gscm', 'train.json', 'scorer.gsds', 'scores.csv', 'metrics.json', 'manifest.json'):
        assert (runDir / name).exists(), name
    assert (outDir / 'eval' / 'table.txt').exists()
    assert 'Laplacian oracle AUROC' in (outDir / 'report.txt').read_text()

    test = readDataset(outDir / 'data' / 'test.stmp', splitTag='test')
    scores, predicted = readScoreCsv(runDir / 'scores.csv')
    scorer = loadScorer(runDir / 'scorer.gsds')
    assert len(scores) == len(test) == 60
    np.testing.assert_array_equal(predicted, (scores >= scorer.threshold).astype(np.uint8))

    metrics = json.loads((runDir / 'metrics.json').read_text())
    assert 0.0 <= metrics['auroc'] <= 1.0
    assert set(metrics['diagnostics']) == {'likelihoodAuroc', 'simpleAuroc'}

    manifest = json.loads((runDir / 'manifest.json').read_text())
    assert manifest['stage'] == 'score'
    assert manifest['config']['deterministic'] is True
    assert manifest['config']['outputDir'] == str(outDir)


def test_rerun_skips_up_to_date_stages(tmp_path):
    configPath = _writeConfig(tmp_path)
    outDir = tmp_path / 'out'
    assert _run('pipeline', configPath, outDir) == 0
    modelPath = outDir / 'runs' / 'shifts9' / 'seed0' / 'model.gscm'
    stamp = modelPath.stat().st_mtime_ns

    assert _run('pipeline', configPath, outDir) == 0
    assert modelPath.stat().st_mtime_ns == stamp

    assert main(['train', '--config', configPath, '--out', str(outDir), '--deterministic', '--force']) == 0
    assert modelPath.stat().st_mtime_ns != stamp


def test_stage_manifest_reproduces_its_run(tmp_path):
    outDir = tmp_path / 'out'
    assert _run('pipeline', _writeConfig(tmp_path), outDir) == 0
    scoresPath = outDir / 'runs' / 'shifts9' / 'seed0' / 'scores.csv'
    original = scoresPath.read_bytes()

    manifestPath = outDir / 'runs' / 'shifts9' / 'seed0' / 'manifest.json'
    assert main(['score', '--config', str(manifestPath), '--force']) == 0
    assert scoresPath.read_bytes() == original


def test_deterministic_runs_write_identical_scores(tmp_path):
    configPath = _writeConfig(tmp_path)
    assert _run('pipeline', configPath, tmp_path / 'first') == 0
    assert _run('pipeline', configPath, tmp_path / 'second') == 0
    relative = 'runs/shifts9/seed0/scores.csv'
    assert (tmp_path / 'first' / relative).read_bytes() == (tmp_path / 'second' / relative).read_bytes()


def test_select_writes_a_pruned_catalog(tmp_path):
    outDir = tmp_path / 'out'
    configPath = _writeConfig(tmp_path)
    assert _run('synth', configPath, outDir) == 0
    assert _run('select', configPath, outDir) == 0

    selectionDir = outDir / 'selection' / 'shifts9'
    selected = loadCatalogFile(selectionDir / 'selected.catalog')
    assert selected[0].isIdentity
    assert 1 <= len(selected) <= 9
    assert (selectionDir / 'report.txt').read_text().startswith('Catalog shifts9: 9 transformations')
    assert len(json.loads((selectionDir / 'pairs.json').read_text())) == 36


def test_selected_catalog_is_scored_next_to_its_source(tmp_path):
    outDir = tmp_path / 'out'
    configPath = _writeConfig(
        tmp_path,
        catalogs=['shifts9', 'selected:shifts9'],
        seeds=[0, 1],
        welchPairs=[['shifts9', 'selected:shifts9']],
        # one-epoch pair classifiers are near chance; keep every spec so the selection still trains
        selectionLow=0.0,
        selectionHigh=0.0,
    )
    assert _run('pipeline', configPath, outDir) == 0

    selected = loadCatalogFile(outDir / 'selection' / 'shifts9' / 'selected.catalog')
    for seed in (0, 1):
        runDir = outDir / 'runs' / 'shifts9-selected' / f'seed{seed}'
        assert (runDir / 'scores.csv').exists()
        assert loadScorer(runDir / 'scorer.gsds').catalog.specs == selected.specs

    aggregate = json.loads((outDir / 'eval' / 'aggregate.json').read_text())
    assert [row['catalog'] for row in aggregate['catalogs']] == ['shifts9', 'selected:shifts9']
    (comparison,) = aggregate['welch']
    assert (comparison['catalogA'], comparison['catalogB']) == ('shifts9', 'selected:shifts9')
    assert {'aurocT', 'aurocP', 'accuracyT', 'accuracyP'} <= set(comparison)


def test_selected_entry_needs_a_select_run(tmp_path, capsys):
    outDir = tmp_path / 'out'
    configPath = _writeConfig(tmp_path, catalogs=['selected:shifts9'])
    assert _run('synth', configPath, outDir) == 0
    assert _run('train', configPath, outDir) == 1
    assert 'run the select stage first' in capsys.readouterr().err


def test_catalog_file_entries_run_under_the_file_stem(tmp_path):
    catalogPath = tmp_path / 'corners.catalog'
    catalogPath.write_text(
        'flip=0 shift=0,0 rot=0 gauss=0 laplace=0\n'
        'flip=0 shift=3,3 rot=0 gauss=0 laplace=0\n'
        'flip=0 shift=-3,-3 rot=0 gauss=0 laplace=0\n'
    )
    outDir = tmp_path / 'out'
    assert _run('pipeline', _writeConfig(tmp_path, catalogs=[str(catalogPath)]), outDir) == 0

    scorer = loadScorer(outDir / 'runs' / 'corners' / 'seed0' / 'scorer.gsds')
    assert len(scorer.catalog) == 3



def test_unknown_catalog_fails_with_valid_names(tmp_path, capsys):
    assert _run('pipeline', _writeConfig(tmp_path, catalogs=['geo7']), tmp_path / 'out') == 1
    error = capsys.readouterr().err
    assert 'geo7' in error
    assert 'shifts9' in error and 'flipshift18' in error


def test_missing_config_file_fails(tmp_path, capsys):
    assert main(['synth', '--config', str(tmp_path / 'missing.json')]) == 1
    assert 'not found' in capsys.readouterr().err


def test_eval_before_training_fails(tmp_path, capsys):
    outDir = tmp_path / 'out'
    configPath = _writeConfig(tmp_path)
    assert _run('synth', configPath, outDir) == 0
    assert _run('eval', configPath, outDir) == 1
    assert 'stage "eval" failed' in capsys.readouterr().err


def test_subcommand_is_required():
    with pytest.raises(SystemExit):
        main([])
