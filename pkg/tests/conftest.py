import pytest

from fintt.theory import check_finitary, check_standard

from .test_theory import mltt_builder


@pytest.fixture(scope="session")
def corpus_tt():
    th = mltt_builder("tt").theory()
    check_finitary(th)
    check_standard(th)
    return th


@pytest.fixture(scope="session")
def corpus_cf():
    th = mltt_builder("cf").theory()
    check_finitary(th)
    check_standard(th)
    return th
