import pytest

from calrank.corpus import Corpus, Document, generate_synthetic


@pytest.fixture
def two_doc_corpus():
    # d1: "cat", d2: "cat dog" -> n=2, df[cat]=2, df[dog]=1, avg_len=1.5
    return Corpus.from_documents([Document("d1", "cat"), Document("d2", "cat dog")])


@pytest.fixture(scope="session")
def small_synthetic():
    """500 docs, 2 topics, 20 relevant each; shared read-only across tests."""
    return generate_synthetic(seed=11, n_docs=500, n_topics=2, relevant_per_topic=20)
