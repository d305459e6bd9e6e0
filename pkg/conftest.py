from __future__ import annotations

import pytest


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption('--runslow', action='store_true', default=False, help='Run desk-scale acceptance experiments.')


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line('markers', 'slow: desk-scale experiment, skipped unless --runslow is given')


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption('--runslow'):
        return
    skipSlow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skipSlow)
