import pytest

from ledgerlift.cleaner import clean_table
from ledgerlift.core import ExtractedRow
from ledgerlift.extraction import RawPageExtract, parse_response
from ledgerlift.synth import Corpus, CorpusSpec, generate_corpus, render_page


def corpus_extracts(corpus: Corpus) -> list[RawPageExtract]:
    """Parse every rendered fixture page, bypassing the backend layer."""
    extracts = []
    for page, usage in zip(corpus.pages, corpus.usages):
        segments, open_table, quarantined = parse_response(render_page(page), page.number)
        extracts.append(
            RawPageExtract(
                page=page.number,
                segments=segments,
                usage=usage,
                open_table=open_table,
                quarantined=quarantined,
            )
        )
    return extracts


def cleaned_rows(corpus: Corpus) -> dict[str, list[ExtractedRow]]:
    """Run the cleaner over a corpus in memory; fail loudly on quarantines."""
    rows: dict[str, list[ExtractedRow]] = {}
    for extract in corpus_extracts(corpus):
        result = clean_table(extract, corpus.spec.unit)
        assert not result.quarantined, result.quarantined
        for name, batch in result.rows_by_archetype.items():
            rows.setdefault(name, []).extend(batch)
    return rows


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return generate_corpus(CorpusSpec(seed=7, major_heads=2, fanout=(2, 3), pages=10))


@pytest.fixture(scope="session")
def small_rows(small_corpus) -> dict[str, list[ExtractedRow]]:
    return cleaned_rows(small_corpus)
