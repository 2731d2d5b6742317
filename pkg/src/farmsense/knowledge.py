"""Lexical retrieval over extension-manual text: documents are chunked
with overlap, indexed into a BM25 inverted index, and served back as
scored, citable passages.

Scoring (declared so rankings are reproducible): for each distinct query
term t with document frequency df over N chunks,

    idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
    score(q, c) = sum_t idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))

with k1 = 1.2, b = 0.75. Ties break by (doc_id, chunk_id) ascending.
Tokenization is lowercase split on non-alphanumerics, no stemming.

An index is conceptually immutable once built; re-ingestion should build
a fresh KnowledgeBase and swap the reference.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_CHUNK_TOKENS = 200
DEFAULT_OVERLAP = 40

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")
_HEADING_RE = re.compile(r"^#\s+(.+)$", re.MULTILINE)


class EmptyDocument(ValueError):
    pass


class UnknownPassage(KeyError):
    pass


@dataclass(frozen=True)
class Passage:
    doc_id: str
    chunk_id: int
    text: str
    title: str
    section: str
    token_count: int

    @property
    def ref(self) -> str:
        """Stable identifier used in reply citations."""
        return f"{self.doc_id}#{self.chunk_id}"


def tokenize(text: str) -> list[str]:
    return [m.group().lower() for m in _TOKEN_RE.finditer(text)]


def _token_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group().lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def parse_document(raw: str, fallback_doc_id: str = "doc") -> tuple[str, str, str]:
    """Split a corpus file into (doc_id, title, body).

    Files carry a small `key: value` header terminated by a `---` line;
    recognized keys are title and doc_id. Files without a header are
    treated as all body.
    """
    meta: dict[str, str] = {}
    body = raw
    if "\n---\n" in raw:
        header, body = raw.split("\n---\n", 1)
        for line in header.splitlines():
            if ":" in line:
                key, value = line.split(":", 1)
                meta[key.strip().lower()] = value.strip()
    doc_id = meta.get("doc_id", fallback_doc_id)
    title = meta.get("title", doc_id)
    return doc_id, title, body


class KnowledgeBase:
    def __init__(self, k1: float = BM25_K1, b: float = BM25_B):
        self.k1 = k1
        self.b = b
        self.passages: list[Passage] = []
        self._by_ref: dict[tuple[str, int], int] = {}
        self._postings: dict[str, list[tuple[int, int]]] = {}  # term -> [(passage_idx, tf)]
        self._total_tokens = 0

    # -- ingestion ---------------------------------------------------

    def ingest(
        self,
        text: str,
        title: str | None = None,
        doc_id: str | None = None,
        chunk_tokens: int = DEFAULT_CHUNK_TOKENS,
        overlap: int = DEFAULT_OVERLAP,
    ) -> list[Passage]:
        """Chunk and index one document; returns the new passages.

        Chunks never span a `# heading` boundary, so each passage cites a
        single section. Within a section, adjacent chunks overlap by
        `overlap` tokens and together cover every token.
        """
        if overlap >= chunk_tokens:
            raise ValueError("overlap must be smaller than chunk_tokens")
        doc_id = doc_id or f"doc{len({p.doc_id for p in self.passages}) + 1}"
        title = title or doc_id
        sections = self._section_spans(text)
        spans = [
            (tok, start, end)
            for tok, start, end in _token_spans(text)
            if not self._inside_heading(start, sections)
        ]
        if not spans:
            raise EmptyDocument(f"document {doc_id!r} has no tokens")

        new_passages = []
        chunk_id = 0
        for section, section_spans in self._group_by_section(spans, sections):
            start = 0
            while True:
                end = min(start + chunk_tokens, len(section_spans))
                window = section_spans[start:end]
                passage = Passage(
                    doc_id=doc_id,
                    chunk_id=chunk_id,
                    text=text[window[0][1] : window[-1][2]],
                    title=title,
                    section=section,
                    token_count=len(window),
                )
                self._add(passage, [tok for tok, _, _ in window])
                new_passages.append(passage)
                chunk_id += 1
                if end >= len(section_spans):
                    break
                start = end - overlap
        return new_passages

    @classmethod
    def _group_by_section(cls, spans, sections):
        groups: list[tuple[str, list]] = []
        for span in spans:
            section = cls._section_at(span[1], sections)
            if not groups or groups[-1][0] != section:
                groups.append((section, []))
            groups[-1][1].append(span)
        return groups

    def ingest_file(self, path: str | Path, **kwargs) -> list[Passage]:
        path = Path(path)
        doc_id, title, body = parse_document(path.read_text(), fallback_doc_id=path.stem)
        return self.ingest(body, title=title, doc_id=doc_id, **kwargs)

    @classmethod
    def build(cls, corpus_dir: str | Path, **kwargs) -> "KnowledgeBase":
        kb = cls()
        for path in sorted(Path(corpus_dir).glob("*.txt")):
            kb.ingest_file(path, **kwargs)
        return kb

    def _add(self, passage: Passage, tokens: list[str]) -> None:
        key = (passage.doc_id, passage.chunk_id)
        if key in self._by_ref:
            raise ValueError(f"duplicate chunk {key}")
        idx = len(self.passages)
        self.passages.append(passage)
        self._by_ref[key] = idx
        self._total_tokens += len(tokens)
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for term, tf in counts.items():
            self._postings.setdefault(term, []).append((idx, tf))

    @staticmethod
    def _section_spans(text: str) -> list[tuple[int, int, str]]:
        return [(m.start(), m.end(), m.group(1).strip()) for m in _HEADING_RE.finditer(text)]

    @staticmethod
    def _inside_heading(pos: int, sections: list[tuple[int, int, str]]) -> bool:
        return any(start <= pos < end for start, end, _ in sections)

    @staticmethod
    def _section_at(pos: int, sections: list[tuple[int, int, str]]) -> str:
        current = "general"
        for start, _, name in sections:
            if start <= pos:
                current = name
            else:
                break
        return current

    # -- search --------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.passages)

    @property
    def avgdl(self) -> float:
        return self._total_tokens / len(self.passages) if self.passages else 0.0

    def search(self, query: str, k: int = 4) -> list[tuple[Passage, float]]:
        """Top-k passages by BM25 score, descending; deterministic."""
        if not self.passages:
            return []
        terms = sorted(set(tokenize(query)))
        n = len(self.passages)
        avgdl = self.avgdl
        scores: dict[int, float] = {}
        for term in terms:
            postings = self._postings.get(term)
            if not postings:
                continue
            df = len(postings)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            for idx, tf in postings:
                dl = self.passages[idx].token_count
                denom = tf + self.k1 * (1.0 - self.b + self.b * dl / avgdl)
                scores[idx] = scores.get(idx, 0.0) + idf * tf * (self.k1 + 1.0) / denom
        ranked = sorted(
            scores.items(),
            key=lambda pair: (-pair[1], self.passages[pair[0]].doc_id, self.passages[pair[0]].chunk_id),
        )
        return [(self.passages[idx], score) for idx, score in ranked[:k]]

    # -- citations -------------------------------------------------------

    def get_passage(self, doc_id: str, chunk_id: int) -> Passage:
        try:
            return self.passages[self._by_ref[(doc_id, chunk_id)]]
        except KeyError:
            raise UnknownPassage(f"{doc_id}#{chunk_id}") from None

    def get_by_ref(self, ref: str) -> Passage:
        doc_id, _, chunk = ref.rpartition("#")
        if not doc_id or not chunk.isdigit():
            raise UnknownPassage(ref)
        return self.get_passage(doc_id, int(chunk))

    def cite(self, passage: Passage) -> str:
        """Human-readable citation: "title §section ¶chunk"."""
        if (passage.doc_id, passage.chunk_id) not in self._by_ref:
            raise UnknownPassage(passage.ref)
        return f"{passage.title} §{passage.section} ¶{passage.chunk_id}"

    def resolve_citation(self, citation: str) -> Passage:
        """Map a citation string produced by cite() back to its passage."""
        for passage in self.passages:
            if self.cite(passage) == citation:
                return passage
        raise UnknownPassage(citation)

    # -- persistence -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        doc = {
            "version": 1,
            "k1": self.k1,
            "b": self.b,
            "passages": [
                {
                    "doc_id": p.doc_id,
                    "chunk_id": p.chunk_id,
                    "text": p.text,
                    "title": p.title,
                    "section": p.section,
                    "token_count": p.token_count,
                }
                for p in self.passages
            ],
            "postings": {term: posts for term, posts in self._postings.items()},
            "total_tokens": self._total_tokens,
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeBase":
        doc = json.loads(Path(path).read_text())
        if doc.get("version") != 1:
            raise ValueError(f"unsupported index version {doc.get('version')!r}")
        kb = cls(k1=doc["k1"], b=doc["b"])
        for rec in doc["passages"]:
            passage = Passage(**rec)
            idx = len(kb.passages)
            kb.passages.append(passage)
            kb._by_ref[(passage.doc_id, passage.chunk_id)] = idx
        kb._postings = {term: [tuple(p) for p in posts] for term, posts in doc["postings"].items()}
        kb._total_tokens = doc["total_tokens"]
        return kb
