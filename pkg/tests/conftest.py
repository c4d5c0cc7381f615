import pytest

from radnorm.cli import data_path, synthetic_corpus_path, synthetic_lexicon_path
from radnorm.corpus import load_corpus
from radnorm.expansion import load_abbreviations
from radnorm.lexicon import parse_lexicon


@pytest.fixture(scope="session")
def synthetic_lexicon():
    with open(synthetic_lexicon_path(), encoding="utf-8") as handle:
        return parse_lexicon(handle)


@pytest.fixture(scope="session")
def synthetic_reports():
    return load_corpus(synthetic_corpus_path())


@pytest.fixture(scope="session")
def abbreviations():
    return load_abbreviations(data_path("abbreviations.tsv"))


SMALL_LEXICON_TSV = """\
rid\tpreferred_name\tsynonyms\tparents\tdefinition
RID1\tanatomical entity\t\t\t
RID2\tclinical finding\t\t\t
RID1301\tlung\t\tRID1\t
RID1534\tcostophrenic sulcus\tcostophrenic angle\tRID1\t
RID5055\tdisorder of brain\tencephalopathy\tRID2\t
"""


@pytest.fixture
def small_lexicon():
    return parse_lexicon(SMALL_LEXICON_TSV)
