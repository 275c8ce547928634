import pytest

from pathlib import Path

from leximark.embedder import EmbedConfig, ProviderBundle
from leximark.entropy import load_frequency_table
from leximark.providers import LexiconSynonymProvider
from leximark.wordnet import load_tsv_lexicon

FIXTURES = Path(__file__).parent / "fixtures"

FOX_ORIGINAL = "The quick brown fox jumps over the lazy dog"
FOX_WATERMARKED = "The speedy brown fox leaps over the sluggish dog"
ECOMMERCE_ORIGINAL = (
    "The e-commerce platform leverages AI to personalize product recommendations."
)
ECOMMERCE_WATERMARKED = (
    "The e-commerce platform utilizes AI to customize item recommendations."
)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def freq_table():
    return load_frequency_table(FIXTURES / "frequency.tsv")


@pytest.fixture(scope="session")
def stub_lexicon():
    return load_tsv_lexicon(FIXTURES / "stub_lexicon.tsv")


@pytest.fixture(scope="session")
def inverse_lexicon():
    return load_tsv_lexicon(FIXTURES / "inverse_lexicon.tsv")


@pytest.fixture()
def stub_bundle(stub_lexicon):
    return ProviderBundle(synonyms=LexiconSynonymProvider(stub_lexicon))


@pytest.fixture()
def k3_config():
    return EmbedConfig(k=3)
