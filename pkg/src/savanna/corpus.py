"""Corpus ingestion, deduplication, verse alignment and mixture assembly.

Documents flow through this module as :class:`CorpusDocument` records:
cleaned text units with provenance.  Deduplication is exact (hash based) at
whole-document and paragraph granularity; paragraph boundary is a blank
line.  Back-translation is delegated to an external MT service behind the
:class:`MtClient` interface.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol

import requests

Source = str
_SOURCES = {
    "web",
    "book_ocr",
    "radio_transcript",
    "dictionary",
    "community",
    "parallel",
    "bible",
    "synthetic_bt",
}

_PARAGRAPH_SPLIT = re.compile(r"\n\s*\n")


def _hash_text(*parts: str) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()[:16]


@dataclass
class CorpusDocument:
    id: str
    lang: str
    text: str
    source: Source
    license_note: str = ""
    char_count: int = 0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.source not in _SOURCES:
            raise ValueError(f"unknown source: {self.source!r}")
        if not self.text:
            raise ValueError("document text must be non-empty")
        if self.char_count == 0:
            self.char_count = len(self.text)
        if self.source == "synthetic_bt" and "source_doc_id" not in self.provenance:
            raise ValueError("synthetic_bt documents must carry MT provenance")


def make_document(lang: str, text: str, source: Source, license_note: str = "",
                  provenance: dict | None = None) -> CorpusDocument:
    """Build a document with a stable content-derived id."""
    return CorpusDocument(
        id=_hash_text(lang, source, text),
        lang=lang,
        text=text,
        source=source,
        license_note=license_note,
        provenance=provenance or {},
    )


@dataclass(frozen=True, order=True)
class VerseRef:
    book: str
    chapter: int
    verse: int

    def __post_init__(self) -> None:
        if self.chapter < 1 or self.verse < 1:
            raise ValueError("chapter and verse must be >= 1")


@dataclass
class ParallelPair:
    src_lang: str
    tgt_lang: str
    src_text: str
    tgt_text: str
    origin: Source = "parallel"
    doc_id: str | None = None

    def __post_init__(self) -> None:
        if self.src_lang == self.tgt_lang:
            raise ValueError("src_lang must differ from tgt_lang")
        if not self.src_text or not self.tgt_text:
            raise ValueError("both sides of a parallel pair must be non-empty")


@dataclass
class MixtureSpec:
    source_weights: dict[str, float] = field(default_factory=dict)
    lang_weights: dict[str, float] = field(default_factory=dict)
    default_weight: float = 1.0
    include_instruction_replay: bool = False

    def bucket_weight(self, source: str, lang: str) -> float:
        sw = self.source_weights.get(source, self.default_weight)
        lw = self.lang_weights.get(lang, self.default_weight)
        if sw < 0 or lw < 0:
            raise ValueError("weights must be >= 0")
        return sw * lw


def _paragraphs(text: str) -> list[str]:
    return [p for p in _PARAGRAPH_SPLIT.split(text) if p.strip()]


def _content_key(text: str) -> str:
    return " ".join(text.split())


def dedup(docs: Iterable[CorpusDocument]) -> Iterator[CorpusDocument]:
    """Remove exact duplicates at document and paragraph granularity.

    A whole document whose normalized text was seen before is dropped; a
    paragraph seen before (in any earlier document, or earlier in the same
    document) is removed.  Output preserves first-seen order and is
    deterministic; dedup(dedup(S)) == dedup(S).
    """
    seen_docs: set[str] = set()
    seen_paragraphs: set[str] = set()
    for doc in docs:
        doc_key = _hash_text(_content_key(doc.text))
        if doc_key in seen_docs:
            continue
        seen_docs.add(doc_key)
        kept: list[str] = []
        for para in _paragraphs(doc.text):
            para_key = _hash_text(_content_key(para))
            if para_key in seen_paragraphs:
                continue
            seen_paragraphs.add(para_key)
            kept.append(para)
        if not kept:
            continue
        new_text = "\n\n".join(kept)
        if new_text == doc.text:
            yield doc
        else:
            yield replace(doc, text=new_text, char_count=len(new_text))


# --- Verse-aligned Bible editions ------------------------------------------


def _load_book_table() -> dict[str, str]:
    raw = json.loads(resources.files("savanna.data").joinpath("bible_books.json").read_text())
    table: dict[str, str] = {}
    for book in raw["canon"]:
        table[book.casefold()] = book
    for book, names in raw["aliases"].items():
        for name in names:
            table[name.casefold()] = book
    return table


_BOOK_TABLE: dict[str, str] | None = None


def canonical_book(name: str) -> str:
    global _BOOK_TABLE
    if _BOOK_TABLE is None:
        _BOOK_TABLE = _load_book_table()
    key = " ".join(name.split()).casefold()
    if key not in _BOOK_TABLE:
        raise KeyError(f"unknown book name: {name!r}")
    return _BOOK_TABLE[key]


@dataclass
class BibleEdition:
    lang: str
    verses: dict[VerseRef, str]


def load_bible_tsv(path: str | Path, lang: str) -> BibleEdition:
    """Load ``book<TAB>chapter<TAB>verse<TAB>text`` lines into an edition.

    Book names are canonicalized against the shared 66-book table; a
    duplicate verse key raises an error naming the key.
    """
    verses: dict[VerseRef, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            ref = VerseRef(canonical_book(parts[0]), int(parts[1]), int(parts[2]))
            if ref in verses:
                raise ValueError(f"duplicate verse key: {ref}")
            verses[ref] = parts[3]
    return BibleEdition(lang=lang, verses=verses)


@dataclass
class AlignmentResult:
    pairs: list[ParallelPair]
    only_in_a: list[VerseRef]
    only_in_b: list[VerseRef]


def align_bibles(edition_a: BibleEdition, edition_b: BibleEdition) -> AlignmentResult:
    """Pair verses present in both editions with non-empty text on both sides."""
    keys_a, keys_b = set(edition_a.verses), set(edition_b.verses)
    pairs = []
    for ref in sorted(keys_a & keys_b):
        text_a, text_b = edition_a.verses[ref], edition_b.verses[ref]
        if not text_a.strip() or not text_b.strip():
            continue
        pairs.append(
            ParallelPair(
                src_lang=edition_a.lang,
                tgt_lang=edition_b.lang,
                src_text=text_a,
                tgt_text=text_b,
                origin="bible",
                doc_id=f"{ref.book}_{ref.chapter}:{ref.verse}",
            )
        )
    return AlignmentResult(
        pairs=pairs,
        only_in_a=sorted(keys_a - keys_b),
        only_in_b=sorted(keys_b - keys_a),
    )


# --- Back-translation -------------------------------------------------------


class MtClientError(Exception):
    pass


class MtClient(Protocol):
    name: str

    def translate(self, text: str, source: str, target: str) -> str: ...


class HttpMtClient:
    """MT service speaking ``POST {"text", "source", "target"}``.

    Retries with exponential backoff, at most 3 attempts.
    """

    def __init__(self, base_url: str, name: str | None = None, timeout: float = 30.0,
                 session: requests.Session | None = None, backoff: float = 0.5):
        self.base_url = base_url
        self.name = name or base_url
        self.timeout = timeout
        self.backoff = backoff
        self._session = session or requests.Session()

    def translate(self, text: str, source: str, target: str) -> str:
        payload = {"text": text, "source": source, "target": target}
        last_error: Exception | None = None
        for attempt in range(3):
            try:
                resp = self._session.post(self.base_url, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()["translation"]
            except Exception as exc:  # transport or schema failure
                last_error = exc
                if attempt < 2:
                    time.sleep(self.backoff * (2 ** attempt))
        raise MtClientError(f"translation failed after 3 attempts: {last_error}")


class StubMtClient:
    """Deterministic in-process client for tests and demos."""

    def __init__(self, fn: Callable[[str, str, str], str] | None = None, name: str = "stub"):
        self.name = name
        self._fn = fn or (lambda text, source, target: f"TT:{text}")

    def translate(self, text: str, source: str, target: str) -> str:
        return self._fn(text, source, target)


@dataclass
class BackTranslationResult:
    documents: list[CorpusDocument]
    errors: list[dict]


def backtranslate(english_docs: list[CorpusDocument], target: str,
                  client: MtClient) -> BackTranslationResult:
    """Translate English documents into ``target``, one synthetic doc each.

    Failed items are recorded as error entries, never silently fabricated.
    """
    documents: list[CorpusDocument] = []
    errors: list[dict] = []
    for doc in english_docs:
        try:
            translation = client.translate(doc.text, "eng", target)
        except MtClientError as exc:
            errors.append({"source_doc_id": doc.id, "target": target, "error": str(exc)})
            continue
        documents.append(
            make_document(
                lang=target,
                text=translation,
                source="synthetic_bt",
                license_note=doc.license_note,
                provenance={
                    "source_doc_id": doc.id,
                    "client": client.name,
                    "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                },
            )
        )
    return BackTranslationResult(documents=documents, errors=errors)


# --- Pretraining mixture assembly -------------------------------------------


def _allocate(sample_size: int, weights: dict, capacities: dict) -> dict:
    """Largest-remainder allocation of ``sample_size`` across buckets,
    proportional to weight and capped at bucket capacity."""
    remaining = sample_size
    alloc = {k: 0 for k in weights}
    active = {k for k, w in weights.items() if w > 0 and capacities[k] > 0}
    while remaining > 0 and active:
        total_w = sum(weights[k] for k in active)
        exact = {k: remaining * weights[k] / total_w for k in active}
        floors = {k: min(int(exact[k]), capacities[k] - alloc[k]) for k in active}
        assigned = sum(floors.values())
        for k in active:
            alloc[k] += floors[k]
        leftover = remaining - assigned
        # distribute leftover by largest fractional remainder, stable key order
        order = sorted(active, key=lambda k: (-(exact[k] - int(exact[k])), k))
        for k in order:
            if leftover == 0:
                break
            if alloc[k] < capacities[k]:
                alloc[k] += 1
                leftover -= 1
        remaining = leftover
        active = {k for k in active if alloc[k] < capacities[k]}
    return alloc


def assemble_pretraining(docs: Iterable[CorpusDocument], spec: MixtureSpec, seed: int,
                         sample_size: int | None = None,
                         instruction_docs: Iterable[CorpusDocument] | None = None,
                         ) -> tuple[list[CorpusDocument], dict]:
    """Weighted stratified sampling without replacement per (source, lang).

    Deterministic for a fixed seed.  Returns the sampled documents and a
    manifest of per-bucket document and character counts.  With
    ``sample_size=None`` the weights act as include/exclude filters.
    """
    buckets: dict[tuple[str, str], list[CorpusDocument]] = {}
    for doc in docs:
        buckets.setdefault((doc.source, doc.lang), []).append(doc)

    weights = {key: spec.bucket_weight(*key) for key in buckets}
    if buckets and all(w == 0 for w in weights.values()):
        raise ValueError("all bucket weights are zero")

    keys = sorted(buckets)
    if sample_size is None:
        chosen = {key: list(buckets[key]) if weights[key] > 0 else [] for key in keys}
    else:
        capacities = {key: len(buckets[key]) for key in keys}
        alloc = _allocate(sample_size, weights, capacities)
        chosen = {}
        for key in keys:
            n = alloc.get(key, 0)
            bucket = buckets[key]
            if n >= len(bucket):
                chosen[key] = list(bucket)
            else:
                rng = random.Random(f"{seed}:{key[0]}:{key[1]}")
                idx = sorted(rng.sample(range(len(bucket)), n))
                chosen[key] = [bucket[i] for i in idx]

    output: list[CorpusDocument] = []
    manifest: dict = {"seed": seed, "buckets": {}}
    for key in keys:
        docs_out = chosen[key]
        output.extend(docs_out)
        manifest["buckets"][f"{key[0]}/{key[1]}"] = {
            "weight": weights[key],
            "docs_in": len(buckets[key]),
            "docs_out": len(docs_out),
            "chars_in": sum(d.char_count for d in buckets[key]),
            "chars_out": sum(d.char_count for d in docs_out),
        }

    if spec.include_instruction_replay and instruction_docs is not None:
        replay = list(instruction_docs)
        output.extend(replay)
        manifest["buckets"]["instruction_replay"] = {
            "weight": 1.0,
            "docs_in": len(replay),
            "docs_out": len(replay),
            "chars_in": sum(d.char_count for d in replay),
            "chars_out": sum(d.char_count for d in replay),
        }
    manifest["total_docs"] = len(output)
    manifest["total_chars"] = sum(d.char_count for d in output)
    return output, manifest


# --- JSONL I/O ---------------------------------------------------------------


def write_documents_jsonl(docs: Iterable[CorpusDocument], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(doc.__dict__, ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def read_documents_jsonl(path: str | Path) -> list[CorpusDocument]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                docs.append(CorpusDocument(**json.loads(line)))
    return docs


def write_pairs_jsonl(pairs: Iterable[ParallelPair], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(json.dumps(pair.__dict__, ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def read_pairs_jsonl(path: str | Path) -> list[ParallelPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                pairs.append(ParallelPair(**json.loads(line)))
    return pairs
