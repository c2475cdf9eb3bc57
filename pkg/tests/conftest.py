import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_data import build_planted_fixture  # noqa: E402

from obsdx.catalog import PromptStyle  # noqa: E402
from obsdx.evaluation import evaluate, load_label_table, predict_table  # noqa: E402
from obsdx.inference import AggregationMode  # noqa: E402


@pytest.fixture(scope="session")
def planted_fixture():
    return build_planted_fixture(seed=2024, n_studies=50, dimension=512)


@pytest.fixture(scope="session")
def planted_table(planted_fixture):
    return load_label_table(planted_fixture.labels_csv(), planted_fixture.catalog)


@pytest.fixture(scope="session")
def planted_predictions(planted_fixture, planted_table):
    return predict_table(
        planted_table,
        planted_fixture.catalog,
        planted_fixture.backend,
        PromptStyle.REPORT_STYLE,
        AggregationMode.MEAN,
    )


@pytest.fixture(scope="session")
def planted_report(planted_fixture, planted_table, planted_predictions):
    return evaluate(planted_table, planted_predictions)
