"""Experiment stages: synth, train, score, select, eval, report, pipeline.

Output layout under the run directory:

    data/{train,validation,test}.stmp       + manifest.json
    runs/<catalog>/seed<s>/model.gscm       + train.json
    runs/<catalog>/seed<s>/scorer.gsds, scores.csv, metrics.json + manifest.json
    selection/<catalog>/matrix.csv, pairs.json, report.txt, selected.catalog + manifest.json
    eval/results.json, aggregate.json, table.txt + manifest.json
    report.txt

Each stage writes a manifest echoing the full config plus a fingerprint of the
config keys and upstream fingerprints it depends on. A stage whose manifest
fingerprint matches and whose outputs all exist is skipped unless `force`.
"""

from __future__ import annotations

import logging
import multiprocessing
from collections.abc import Iterator
from concurrent.futures import ProcessPoolExecutor, as_completed
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..classifier.selfLabeled import buildSelfLabeled
from ..classifier.training import (
    ClassifierConfig,
    configureDeterminism,
    limitThreads,
    originalEpochSchedule,
    trainClassifier,
)
from ..config.experimentConfig import (
    ExperimentConfig,
    classifierDefaults,
    configFingerprint,
    scorerDefaults,
    selectionDefaults,
    synthDefaults,
)
from ..errors import ConfigError, StageError
from ..eval.metrics import RunResult, aggregateRuns, auroc, evaluateScores, formatAggregateTable, welchRows
from ..eval.oracleDetector import laplacianOracleScores
from ..io.checkpointIo import loadCheckpoint, saveCheckpoint
from ..io.csvIo import readScoreCsv, writeScoreCsv
from ..io.jsonIo import atomicWriteText, readJson, writeJson
from ..io.scorerIo import loadScorer, saveScorer
from ..io.stampIo import readDataset, writeDataset
from ..scoring.dirichletScoring import (
    classify,
    fitScorer,
    fitThreshold,
    likelihoodScoresFromSoftmax,
    scoresFromSoftmax,
    simpleScoresFromSoftmax,
    transformedSoftmax,
)
from ..selection.transformSelection import (
    buildDiscriminationMatrix,
    formatSelectionReport,
    saveMatrix,
    selectTransformations,
)
from ..stamps.stampModel import StampDataset, prepareDataset, splitTags
from ..synth.stampSynth import SynthConfig, generateBenchmark
from ..transforms.transformCatalog import (
    TransformSet,
    buildCatalog,
    defaultShiftSize,
    formatCatalogText,
    loadCatalogFile,
    writeCatalogFile,
)

logger = logging.getLogger(__name__)

dataKeys = ['datasetDir', 'cropSize', 'synthSeed', *(key for key in synthDefaults if key != 'seed')]
trainKeys = ['shiftSize', 'deterministic', *classifierDefaults]
scoreKeys = list(scorerDefaults)
selectKeys = ['selectionCatalog', 'shiftSize', 'deterministic', *classifierDefaults, *selectionDefaults]


@dataclass(frozen=True)
class PipelineContext:
    config: ExperimentConfig
    outDir: Path
    force: bool = False
    jobs: int = 1
    deterministic: bool = False

    @property
    def dataDir(self) -> Path:
        return self.outDir / 'data'

    def runDir(self, catalogEntry: str, seed: int) -> Path:
        return self.outDir / 'runs' / runName(catalogEntry) / f'seed{seed}'

    def selectedCatalogPath(self, sourceName: str) -> Path:
        return self.outDir / 'selection' / runName(sourceName) / 'selected.catalog'


def buildContext(
    config: ExperimentConfig,
    *,
    outDir: str | Path | None = None,
    force: bool = False,
    jobs: int | None = None,
    deterministic: bool | None = None,
) -> PipelineContext:
    """Resolve CLI overrides against the config; the resolved values are echoed in manifests."""
    updates: dict[str, Any] = {}
    if outDir is not None:
        updates['outputDir'] = str(outDir)
    if jobs is not None:
        updates['jobs'] = jobs
    if deterministic is not None:
        updates['deterministic'] = deterministic
    if updates:
        config = config.replace(**updates)
    return PipelineContext(config, Path(config.outputDir), force, config.jobs, config.deterministic)


@contextmanager
def stageGuard(stage: str) -> Iterator[None]:
    """Re-raise any failure inside a stage as a StageError naming that stage."""
    try:
        yield
    except StageError:
        raise
    except Exception as error:
        raise StageError(stage, error) from error


def _isUpToDate(ctx: PipelineContext, manifestPath: Path, fingerprint: str, outputs: list[Path]) -> bool:
    if ctx.force or not manifestPath.exists() or not all(path.exists() for path in outputs):
        return False
    try:
        return readJson(manifestPath).get('fingerprint') == fingerprint
    except ValueError:
        return False


def _writeManifest(
    ctx: PipelineContext,
    manifestPath: Path,
    stage: str,
    fingerprint: str,
    outputs: list[Path],
    **extra: Any,
) -> None:
    writeJson(
        manifestPath,
        {
            'stage': stage,
            'fingerprint': fingerprint,
            'config': ctx.config.toDict(),
            'outputs': [str(path.relative_to(ctx.outDir)) for path in outputs],
            **extra,
        },
    )


def _fingerprint(ctx: PipelineContext, keys: list[str], **upstream: Any) -> str:
    return configFingerprint({'config': {key: ctx.config.values[key] for key in keys}, **upstream})


# data


def synthConfigFrom(config: ExperimentConfig) -> SynthConfig:
    return SynthConfig(
        **{key: config.values[key] for key in synthDefaults if key not in ('seed', 'psfSigmaRange')},
        psfSigmaRange=tuple(config.psfSigmaRange),
        seed=config.synthSeed,
    )


def _splitPaths(directory: Path) -> dict[str, Path]:
    return {tag: directory / f'{tag}.stmp' for tag in splitTags}


def dataFingerprint(ctx: PipelineContext) -> str:
    return _fingerprint(ctx, dataKeys)


def cmdSynth(ctx: PipelineContext) -> dict[str, Path]:
    """Generate the synthetic benchmark, or ingest STMP files from `datasetDir`."""
    with stageGuard('synth'):
        paths = _splitPaths(ctx.dataDir)
        manifestPath = ctx.dataDir / 'manifest.json'
        fingerprint = dataFingerprint(ctx)
        if _isUpToDate(ctx, manifestPath, fingerprint, list(paths.values())):
            logger.info('synth | up to date, skipping')
            return paths

        config = ctx.config
        if config.datasetDir:
            sources = _splitPaths(Path(config.datasetDir))
            splits = {tag: prepareDataset(readDataset(path, splitTag=tag), cropSize=config.cropSize) for tag, path in sources.items()}
            origin: dict[str, Any] = {'datasetDir': str(config.datasetDir)}
        else:
            synthConfig = synthConfigFrom(config)
            splits = generateBenchmark(synthConfig)
            if config.cropSize is not None:
                splits = {tag: prepareDataset(dataset, cropSize=config.cropSize) for tag, dataset in splits.items()}
            origin = {'synth': synthConfig.toDict()}

        for tag, dataset in splits.items():
            writeDataset(dataset, paths[tag])
        _writeManifest(
            ctx,
            manifestPath,
            'synth',
            fingerprint,
            list(paths.values()),
            sizes={tag: len(dataset) for tag, dataset in splits.items()},
            **origin,
        )
        print(f'Wrote {ctx.dataDir}')
        return paths


def loadSplits(ctx: PipelineContext) -> dict[str, StampDataset]:
    paths = _splitPaths(ctx.dataDir)
    missing = [str(path) for path in paths.values() if not path.exists()]
    if missing:
        raise FileNotFoundError(f'Dataset files missing (run the synth stage first): {", ".join(missing)}')
    return {tag: readDataset(path, splitTag=tag) for tag, path in paths.items()}


# catalogs entries: a named catalog, custom-from-file (with catalogPath), a path
# to a *.catalog file, or selected:<name> for the pruned catalog of a select run
selectedPrefix = 'selected:'
catalogFileSuffix = '.catalog'


def selectionSource(entry: str) -> str | None:
    return entry[len(selectedPrefix):] if entry.startswith(selectedPrefix) else None


def selectionSources(entries: list[str]) -> list[str]:
    sources = [source for source in map(selectionSource, entries) if source is not None]
    return list(dict.fromkeys(sources))


def runName(entry: str) -> str:
    """Directory-safe name of a catalogs entry."""
    source = selectionSource(entry)
    if source is not None:
        return f'{runName(source)}-selected'
    if entry.endswith(catalogFileSuffix):
        return Path(entry).stem
    return entry


def resolveCatalog(ctx: PipelineContext, entry: str, width: int) -> TransformSet:
    source = selectionSource(entry)
    if source is not None:
        path = ctx.selectedCatalogPath(source)
        if not path.exists():
            raise FileNotFoundError(f'Selected catalog for {source!r} not found (run the select stage first): {path}')
        return loadCatalogFile(path, name=runName(entry))
    if entry.endswith(catalogFileSuffix):
        return loadCatalogFile(entry)
    config = ctx.config
    shiftSize = config.shiftSize if config.shiftSize is not None else defaultShiftSize(width)
    return buildCatalog(entry, shiftSize=shiftSize, catalogPath=config.catalogPath)


def classifierConfigFrom(config: ExperimentConfig, nClasses: int, seed: int) -> ClassifierConfig:
    maxEpochs = originalEpochSchedule(nClasses) if config.originalSchedule else config.maxEpochs
    return ClassifierConfig(
        architecture=config.architecture,
        nClasses=nClasses,
        batchSize=config.batchSize,
        learningRate=config.learningRate,
        beta1=config.beta1,
        beta2=config.beta2,
        adamEpsilon=config.adamEpsilon,
        maxEpochs=maxEpochs,
        patience=config.patience,
        earlyStopping=config.earlyStopping and not config.originalSchedule,
        seed=seed,
        deterministic=config.deterministic,
        evalBatchSize=config.predictBatchSize,
    )


# train / score


def _trainFingerprint(ctx: PipelineContext, catalog: TransformSet, seed: int) -> str:
    return _fingerprint(ctx, trainKeys, data=dataFingerprint(ctx), catalog=formatCatalogText(catalog), seed=seed)


def _scoreFingerprint(ctx: PipelineContext, catalog: TransformSet, seed: int) -> str:
    return _fingerprint(ctx, scoreKeys, train=_trainFingerprint(ctx, catalog, seed))


def trainRun(ctx: PipelineContext, catalogName: str, seed: int) -> Path:
    runDir = ctx.runDir(catalogName, seed)
    modelPath = runDir / 'model.gscm'
    manifestPath = runDir / 'train.json'
    splits = loadSplits(ctx)
    catalog = resolveCatalog(ctx, catalogName, splits['train'].stampShape[-1])
    fingerprint = _trainFingerprint(ctx, catalog, seed)
    if _isUpToDate(ctx, manifestPath, fingerprint, [modelPath]):
        logger.info('train | %s seed %d | up to date, skipping', catalogName, seed)
        return modelPath

    logger.info('train | %s seed %d | k %d', catalogName, seed, len(catalog))
    trainSet = buildSelfLabeled(splits['train'], catalog)
    validationSet = buildSelfLabeled(splits['validation'], catalog)
    model = trainClassifier(trainSet, validationSet, classifierConfigFrom(ctx.config, len(catalog), seed))
    model.metadata['catalog'] = catalog.name
    saveCheckpoint(model, modelPath)
    _writeManifest(
        ctx,
        manifestPath,
        'train',
        fingerprint,
        [modelPath],
        catalog=catalog.name,
        seed=seed,
        history=model.metadata['history'],
        returnedEpoch=model.metadata['returnedEpoch'],
    )
    return modelPath


def scoreRun(ctx: PipelineContext, catalogName: str, seed: int) -> Path:
    """Fit the Dirichlet scorer and threshold, then score the test split."""
    runDir = ctx.runDir(catalogName, seed)
    outputs = [runDir / 'scorer.gsds', runDir / 'scores.csv', runDir / 'metrics.json']
    manifestPath = runDir / 'manifest.json'
    splits = loadSplits(ctx)
    catalog = resolveCatalog(ctx, catalogName, splits['train'].stampShape[-1])
    fingerprint = _scoreFingerprint(ctx, catalog, seed)
    if _isUpToDate(ctx, manifestPath, fingerprint, outputs):
        logger.info('score | %s seed %d | up to date, skipping', catalogName, seed)
        return outputs[1]

    config = ctx.config
    model = loadCheckpoint(runDir / 'model.gscm')
    scorer = fitScorer(
        model,
        splits['train'],
        catalog,
        clipEpsilon=config.clipEpsilon,
        tolerance=config.dirichletTolerance,
        maxIterations=config.dirichletMaxIterations,
        batchSize=config.predictBatchSize,
    )
    scorer = scorer.withThreshold(fitThreshold(scorer, splits['validation'], model, percentile=config.thresholdPercentile))

    test = splits['test']
    probabilities = transformedSoftmax(model, test.pixels, catalog, batchSize=config.predictBatchSize)
    scores = scoresFromSoftmax(scorer.alpha, probabilities, clipEpsilon=scorer.clipEpsilon)
    result = evaluateScores(
        scores,
        test.labels,
        scorer.threshold,
        catalogName=catalogName,
        seed=seed,
        configFingerprint=fingerprint,
    )
    isInlier = test.labels == 1
    likelihood = likelihoodScoresFromSoftmax(scorer.alpha, probabilities, clipEpsilon=scorer.clipEpsilon)
    simple = simpleScoresFromSoftmax(probabilities, clipEpsilon=scorer.clipEpsilon)
    diagnostics = {
        'likelihoodAuroc': auroc(likelihood[isInlier], likelihood[~isInlier]),
        'simpleAuroc': auroc(simple[isInlier], simple[~isInlier]),
    }

    saveScorer(scorer, outputs[0])
    writeScoreCsv(outputs[1], scores, classify(scores, scorer.threshold))
    writeJson(outputs[2], {**result.toDict(), 'diagnostics': diagnostics})
    _writeManifest(ctx, manifestPath, 'score', fingerprint, outputs, catalog=catalog.name, seed=seed)
    logger.info('score | %s seed %d | auroc %.4f | accuracy %.4f', catalogName, seed, result.auroc, result.accuracy)
    return outputs[1]


runStages = {'train': trainRun, 'score': scoreRun}


def _runJob(stage: str, ctx: PipelineContext, catalogName: str, seed: int) -> Path:
    return runStages[stage](ctx, catalogName, seed)


def _forEachRun(ctx: PipelineContext, stage: str) -> list[Path]:
    """Run one stage over every (catalog, seed), in a process pool when jobs > 1."""
    runs = [(catalogName, seed) for catalogName in ctx.config.catalogs for seed in ctx.config.seeds]
    with stageGuard(stage):
        splits = loadSplits(ctx)
        for catalogName in ctx.config.catalogs:
            resolveCatalog(ctx, catalogName, splits['train'].stampShape[-1])
        configureDeterminism(ctx.deterministic)

        if ctx.jobs <= 1 or len(runs) == 1:
            return [_runJob(stage, ctx, catalogName, seed) for catalogName, seed in runs]

        results: dict[tuple[str, int], Path] = {}
        context = multiprocessing.get_context('spawn')
        with ProcessPoolExecutor(max_workers=ctx.jobs, mp_context=context, initializer=limitThreads) as executor:
            futures = {executor.submit(_runJob, stage, ctx, catalogName, seed): (catalogName, seed) for catalogName, seed in runs}
            for future in as_completed(futures):
                results[futures[future]] = future.result()
        return [results[run] for run in runs]


def cmdTrain(ctx: PipelineContext) -> list[Path]:
    paths = _forEachRun(ctx, 'train')
    print(f'Trained {len(paths)} classifiers under {ctx.outDir / "runs"}')
    return paths


def cmdScore(ctx: PipelineContext) -> list[Path]:
    paths = _forEachRun(ctx, 'score')
    print(f'Wrote {len(paths)} score files under {ctx.outDir / "runs"}')
    return paths


# select


def cmdSelect(ctx: PipelineContext, catalogName: str | None = None) -> Path:
    """Discrimination matrix and pruned catalog for `catalogName` (default `selectionCatalog`)."""
    with stageGuard('select'):
        config = ctx.config
        catalogName = catalogName or config.selectionCatalog
        if selectionSource(catalogName) is not None:
            raise ConfigError(f'Cannot select from an already selected catalog: {catalogName!r}')
        selectionDir = ctx.outDir / 'selection' / runName(catalogName)
        outputs = [selectionDir / name for name in ('matrix.csv', 'pairs.json', 'report.txt', 'selected.catalog')]
        manifestPath = selectionDir / 'manifest.json'

        splits = loadSplits(ctx)
        catalog = resolveCatalog(ctx, catalogName, splits['train'].stampShape[-1])
        seed = config.seeds[0]
        fingerprint = _fingerprint(ctx, selectKeys, data=dataFingerprint(ctx), catalog=formatCatalogText(catalog), seed=seed)
        if _isUpToDate(ctx, manifestPath, fingerprint, outputs):
            logger.info('select | %s | up to date, skipping', catalogName)
            return outputs[3]

        configureDeterminism(ctx.deterministic)
        pairConfig = ClassifierConfig(
            architecture=config.pairArchitecture,
            nClasses=2,
            batchSize=config.batchSize,
            learningRate=config.learningRate,
            beta1=config.beta1,
            beta2=config.beta2,
            adamEpsilon=config.adamEpsilon,
            maxEpochs=config.pairMaxEpochs,
            patience=0,
            earlyStopping=True,
            seed=seed,
            deterministic=config.deterministic,
            evalBatchSize=config.predictBatchSize,
        )
        matrix = buildDiscriminationMatrix(splits['train'], splits['validation'], catalog, pairConfig, jobs=ctx.jobs)
        saveMatrix(matrix, outputs[0])
        writeJson(
            outputs[1],
            {f'{i},{j}': {**metadata, 'accuracy': float(matrix.accuracies[i, j])} for (i, j), metadata in sorted(matrix.pairMetadata.items())},
        )

        result = selectTransformations(
            matrix,
            config.selectionLow,
            config.selectionHigh,
            suspiciousLow=config.suspiciousLow,
            suspiciousHigh=config.suspiciousHigh,
        )
        report = formatSelectionReport(matrix, result)
        atomicWriteText(outputs[2], report)
        writeCatalogFile(result.catalog, outputs[3])
        _writeManifest(ctx, manifestPath, 'select', fingerprint, outputs, catalog=catalogName, survivors=result.survivors)
        print(report, end='')
        print(f'Wrote {outputs[3]}')
        return outputs[3]


# eval / report


def _collectResults(ctx: PipelineContext, test: StampDataset) -> list[RunResult]:
    """Recompute each run's metrics from its score CSV and stored threshold."""
    results = []
    for catalogName in ctx.config.catalogs:
        for seed in ctx.config.seeds:
            runDir = ctx.runDir(catalogName, seed)
            scores, _ = readScoreCsv(runDir / 'scores.csv')
            if len(scores) != len(test):
                raise ValueError(f'{runDir / "scores.csv"} has {len(scores)} rows, the test split has {len(test)}')
            manifest = readJson(runDir / 'manifest.json')
            catalog = resolveCatalog(ctx, catalogName, test.stampShape[-1])
            scorer = loadScorer(runDir / 'scorer.gsds', catalog=catalog)
            results.append(
                evaluateScores(
                    scores,
                    test.labels,
                    scorer.threshold,
                    catalogName=catalogName,
                    seed=seed,
                    configFingerprint=manifest['fingerprint'],
                )
            )
    return results


def cmdEval(ctx: PipelineContext) -> Path:
    with stageGuard('eval'):
        evalDir = ctx.outDir / 'eval'
        test = loadSplits(ctx)['test']
        if test.labels is None:
            raise ConfigError('The test split has no labels; evaluation needs inlier/outlier tags')

        results = _collectResults(ctx, test)
        rows = aggregateRuns(results)
        comparisons = welchRows(results, ctx.config.welchPairs)
        oracleScores = laplacianOracleScores(test.pixels)
        isInlier = test.labels == 1
        oracleAuroc = auroc(oracleScores[isInlier], oracleScores[~isInlier])

        table = formatAggregateTable(rows, comparisons)
        outputs = [evalDir / 'results.json', evalDir / 'aggregate.json', evalDir / 'table.txt']
        writeJson(outputs[0], [result.toDict() for result in results])
        writeJson(outputs[1], {'catalogs': rows, 'welch': comparisons, 'oracleAuroc': oracleAuroc})
        atomicWriteText(outputs[2], table)
        fingerprint = configFingerprint(sorted(result.configFingerprint for result in results) + [ctx.config.welchPairs])
        _writeManifest(ctx, evalDir / 'manifest.json', 'eval', fingerprint, outputs)

        print(table, end='')
        print(f'Laplacian oracle AUROC: {100 * oracleAuroc:.2f}%')
        print(f'Wrote {outputs[1]}')
        return outputs[1]


def cmdReport(ctx: PipelineContext) -> Path:
    """Collect the evaluation table and any selection reports into one text file."""
    with stageGuard('report'):
        tablePath = ctx.outDir / 'eval' / 'table.txt'
        if not tablePath.exists():
            raise FileNotFoundError(f'Evaluation table not found (run the eval stage first): {tablePath}')
        aggregate = readJson(ctx.outDir / 'eval' / 'aggregate.json')

        sections = ['# Detection', '', tablePath.read_text(encoding='utf-8').rstrip(), '']
        sections.append(f'Laplacian oracle AUROC: {100 * aggregate["oracleAuroc"]:.2f}%')
        for reportPath in sorted((ctx.outDir / 'selection').glob('*/report.txt')):
            sections.extend(['', f'# Selection ({reportPath.parent.name})', '', reportPath.read_text(encoding='utf-8').rstrip()])

        outputPath = ctx.outDir / 'report.txt'
        atomicWriteText(outputPath, '\n'.join(sections) + '\n')
        print(f'Wrote {outputPath}')
        return outputPath


def cmdPipeline(ctx: PipelineContext) -> Path:
    """synth -> [select] -> train -> score (scorer, threshold, test scores) -> eval -> report.

    select runs once per selected:<name> entry in `catalogs`, so a pruned catalog
    is trained and compared next to its source in one experiment.
    """
    cmdSynth(ctx)
    for sourceName in selectionSources(ctx.config.catalogs):
        cmdSelect(ctx, sourceName)
    cmdTrain(ctx)
    cmdScore(ctx)
    cmdEval(ctx)
    return cmdReport(ctx)


commands = {
    'synth': cmdSynth,
    'train': cmdTrain,
    'score': cmdScore,
    'select': cmdSelect,
    'eval': cmdEval,
    'report': cmdReport,
    'pipeline': cmdPipeline,
}
