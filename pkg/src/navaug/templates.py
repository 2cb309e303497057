"""Instruction templates: mask noun phrases in human-written sentences,
categorize by direction keyword, filter by language-model loss, and fill
slots at generation time.
"""

from __future__ import annotations

import logging
import math
import subprocess
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from navaug.errors import MissingTemplateError, ParseError
from navaug.jsonl import dumps_stable, read_jsonl

logger = logging.getLogger(__name__)

OBJECT_SLOT = "<OBJECT>"

DEFAULT_PROBE_OBJECTS = ("signboard", "traffic light", "awning", "telephone pole")

DEFAULT_KEEP_FRACTION = 0.5

_SENTENCE_PUNCT = frozenset(".!?")


class Category(str, Enum):
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    FORWARD = "forward"
    STOP = "stop"


DIRECTION_KEYWORDS: dict[str, Category] = {
    "left": Category.TURN_LEFT,
    "right": Category.TURN_RIGHT,
    "forward": Category.FORWARD,
    "stop": Category.STOP,
}


class SpanKind(str, Enum):
    NOUN_PHRASE = "NOUN_PHRASE"
    DIRECTION_WORD = "DIRECTION_WORD"


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    kind: SpanKind

    def __post_init__(self) -> None:
        if not isinstance(self.kind, SpanKind):
            object.__setattr__(self, "kind", SpanKind(self.kind))
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"bad span bounds ({self.start}, {self.end})")


@dataclass(frozen=True)
class ChunkAnnotation:
    """Token-aligned noun-phrase and direction-word spans for one sentence."""

    sentence_id: str
    tokens: tuple[str, ...]
    spans: tuple[Span, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "spans", tuple(self.spans))
        prev_end = 0
        for span in self.spans:
            if span.start < prev_end:
                raise ValueError(
                    f"{self.sentence_id}: spans must be sorted and non-overlapping"
                )
            if span.end > len(self.tokens):
                raise ValueError(f"{self.sentence_id}: span {span} exceeds token range")
            prev_end = span.end

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "ChunkAnnotation":
        spans = tuple(Span(int(s), int(e), SpanKind(k)) for s, e, k in record["spans"])
        return cls(str(record["sentence_id"]), tuple(record["tokens"]), spans)

    def to_json_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "tokens": list(self.tokens),
            "spans": [[s.start, s.end, s.kind.value] for s in self.spans],
        }


@dataclass(frozen=True)
class Template:
    """A masked sentence: zero or one OBJECT slot, one direction keyword."""

    text: tuple[str, ...]
    category: Category
    source_sentence_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "text", tuple(self.text))
        slots = sum(1 for t in self.text if t == OBJECT_SLOT)
        if slots > 1:
            raise ValueError("template has multiple object slots")
        # exactly one distinct keyword also guarantees the text is
        # non-empty once slots are removed
        keywords = {t.lower() for t in self.text if t.lower() in DIRECTION_KEYWORDS}
        if keywords != {_KEYWORD_OF[self.category]}:
            raise ValueError(
                f"template keywords {sorted(keywords)} inconsistent with {self.category.value}"
            )

    @property
    def has_slot(self) -> bool:
        return OBJECT_SLOT in self.text


_KEYWORD_OF = {cat: kw for kw, cat in DIRECTION_KEYWORDS.items()}


@dataclass(frozen=True)
class ScoredTemplate:
    template: Template
    lm_loss: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lm_loss) and self.lm_loss >= 0.0):
            raise ValueError(f"lm_loss must be finite and >= 0, got {self.lm_loss}")


@dataclass(frozen=True)
class TemplateBank:
    """Filtered templates grouped by category, plus build provenance."""

    categories: Mapping[Category, tuple[ScoredTemplate, ...]]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cats = {cat: tuple(self.categories.get(cat, ())) for cat in Category}
        for cat, entries in cats.items():
            texts = [st.template.text for st in entries]
            if len(set(texts)) != len(texts):
                raise ValueError(f"duplicate template texts in {cat.value}")
            for st in entries:
                if st.template.category is not cat:
                    raise ValueError("template filed under wrong category")
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def templates(self, category: Category) -> tuple[ScoredTemplate, ...]:
        return self.categories[category]

    def __len__(self) -> int:
        return sum(len(v) for v in self.categories.values())

    def to_json_dict(self) -> dict:
        return {
            "categories": {
                cat.value: [
                    {
                        "text": list(st.template.text),
                        "source_sentence_id": st.template.source_sentence_id,
                        "lm_loss": st.lm_loss,
                    }
                    for st in self.categories[cat]
                ]
                for cat in Category
            },
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "TemplateBank":
        cats = {}
        for cat in Category:
            entries = []
            for rec in doc.get("categories", {}).get(cat.value, []):
                tpl = Template(tuple(rec["text"]), cat, str(rec["source_sentence_id"]))
                entries.append(ScoredTemplate(tpl, float(rec["lm_loss"])))
            cats[cat] = tuple(entries)
        return cls(cats, dict(doc.get("metadata", {})))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(dumps_stable(self.to_json_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TemplateBank":
        import json

        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(str(path), exc.lineno, f"invalid bank JSON: {exc.msg}") from exc
        return cls.from_json_dict(doc)


def tokenize(text: str) -> list[str]:
    """Whitespace tokens; a trailing sentence punctuation mark splits off."""
    tokens = []
    for raw in text.split():
        if len(raw) > 1 and raw[-1] in _SENTENCE_PUNCT:
            tokens.append(raw[:-1])
            tokens.append(raw[-1])
        else:
            tokens.append(raw)
    return tokens


def split_sentences(text: str) -> list[list[str]]:
    """Token sequences split on sentence-final punctuation tokens."""
    sentences: list[list[str]] = []
    current: list[str] = []
    for token in tokenize(text):
        current.append(token)
        if token in _SENTENCE_PUNCT:
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return sentences


def sentence_id_for(corpus_id: str, index: int) -> str:
    """Stable id for sentence `index` of corpus record `corpus_id`."""
    return f"{corpus_id}#{index}"


def distinct_keywords(tokens: Iterable[str]) -> set[str]:
    return {t.lower() for t in tokens if t.lower() in DIRECTION_KEYWORDS}


def categorize(tokens: Sequence[str]) -> Category | None:
    """Category by direction keyword; None unless exactly one is present."""
    found = distinct_keywords(tokens)
    if len(found) != 1:
        return None
    return DIRECTION_KEYWORDS[found.pop()]


def sentence_to_templates(annotation: ChunkAnnotation) -> list[Template]:
    """Mask noun phrases and keep the sentence as a template candidate.

    Returns at most one template; multi-slot, multi-direction, and
    keyword-free sentences are discarded.
    """
    masked: list[str] = []
    cursor = 0
    for span in annotation.spans:
        masked.extend(annotation.tokens[cursor : span.start])
        if span.kind is SpanKind.NOUN_PHRASE:
            masked.append(OBJECT_SLOT)
        else:
            masked.extend(annotation.tokens[span.start : span.end])
        cursor = span.end
    masked.extend(annotation.tokens[cursor:])

    if sum(1 for t in masked if t == OBJECT_SLOT) >= 2:
        return []
    if len(distinct_keywords(masked)) >= 2:
        return []
    category = categorize(masked)
    if category is None:
        return []
    return [Template(tuple(masked), category, annotation.sentence_id)]


def fill_template(template: Template, object_name: str | None = None) -> str:
    """Surface sentence with the slot replaced verbatim by `object_name`."""
    if template.has_slot:
        if object_name is None:
            raise ValueError(
                f"template from {template.source_sentence_id} has a slot but no object was given"
            )
        tokens = [object_name if t == OBJECT_SLOT else t for t in template.text]
    else:
        tokens = list(template.text)
    return " ".join(tokens)


def _dedupe(candidates: Sequence[Template]) -> list[Template]:
    seen: set[tuple[Category, tuple[str, ...]]] = set()
    out = []
    for tpl in candidates:
        key = (tpl.category, tpl.text)
        if key not in seen:
            seen.add(key)
            out.append(tpl)
    return out


def _probe_sentences(template: Template, probe_objects: Sequence[str]) -> list[str]:
    if template.has_slot:
        return [fill_template(template, obj) for obj in probe_objects]
    return [fill_template(template)]


def _select(
    scored: list[tuple[int, ScoredTemplate]],
    keep_fraction: float,
    metadata: dict,
) -> TemplateBank:
    """Per category, keep the ceil(keep_fraction * n) lowest-loss entries."""
    by_cat: dict[Category, list[tuple[int, ScoredTemplate]]] = {cat: [] for cat in Category}
    for order, st in scored:
        by_cat[st.template.category].append((order, st))
    kept: dict[Category, tuple[ScoredTemplate, ...]] = {}
    for cat, entries in by_cat.items():
        entries.sort(key=lambda pair: (pair[1].lm_loss, pair[0]))
        n_keep = math.ceil(keep_fraction * len(entries))
        kept[cat] = tuple(st for _, st in entries[:n_keep])
    metadata = dict(metadata)
    metadata["kept_per_category"] = {cat.value: len(kept[cat]) for cat in Category}
    return TemplateBank(kept, metadata)


def lm_filter(
    candidates: Sequence[Template],
    scorer: Callable[[str], float],
    probe_objects: Sequence[str] = DEFAULT_PROBE_OBJECTS,
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    corpus_id: str | None = None,
) -> TemplateBank:
    """Score candidates with a sentence-loss function and keep the most
    fluent `keep_fraction` per category.

    A scorer failure (exception or non-finite/negative loss) drops that
    template with a warning.
    """
    if not 0.0 <= keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in [0, 1], got {keep_fraction}")
    deduped = _dedupe(candidates)
    scored: list[tuple[int, ScoredTemplate]] = []
    dropped = 0
    for order, tpl in enumerate(deduped):
        losses = []
        for sentence in _probe_sentences(tpl, probe_objects):
            try:
                losses.append(float(scorer(sentence)))
            except Exception as exc:
                logger.warning(
                    "scorer failed on %r (template %s): %s",
                    sentence,
                    tpl.source_sentence_id,
                    exc,
                )
                losses = None
                break
        if losses is None or not all(math.isfinite(x) and x >= 0.0 for x in losses):
            if losses is not None:
                logger.warning(
                    "scorer returned invalid loss for template %s", tpl.source_sentence_id
                )
            dropped += 1
            continue
        scored.append((order, ScoredTemplate(tpl, sum(losses) / len(losses))))
    metadata = _bank_metadata(corpus_id, keep_fraction, probe_objects, len(candidates), dropped)
    return _select(scored, keep_fraction, metadata)


def lm_filter_from_scores(
    candidates: Sequence[Template],
    scores: Mapping[tuple[str, str], float],
    probe_objects: Sequence[str] = DEFAULT_PROBE_OBJECTS,
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    corpus_id: str | None = None,
) -> TemplateBank:
    """Like lm_filter, but losses come from a precomputed table keyed by
    (template_id, probe); template_id is the source sentence id.
    """
    if not 0.0 <= keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in [0, 1], got {keep_fraction}")
    deduped = _dedupe(candidates)
    scored: list[tuple[int, ScoredTemplate]] = []
    dropped = 0
    for order, tpl in enumerate(deduped):
        probes = list(probe_objects) if tpl.has_slot else [""]
        losses = []
        for probe in probes:
            loss = scores.get((tpl.source_sentence_id, probe))
            if loss is None or not (math.isfinite(loss) and loss >= 0.0):
                logger.warning(
                    "missing or invalid score for template %s probe %r",
                    tpl.source_sentence_id,
                    probe,
                )
                losses = None
                break
            losses.append(float(loss))
        if losses is None:
            dropped += 1
            continue
        scored.append((order, ScoredTemplate(tpl, sum(losses) / len(losses))))
    metadata = _bank_metadata(corpus_id, keep_fraction, probe_objects, len(candidates), dropped)
    return _select(scored, keep_fraction, metadata)


def _bank_metadata(corpus_id, keep_fraction, probe_objects, n_candidates, n_dropped) -> dict:
    return {
        "corpus_id": corpus_id,
        "keep_fraction": keep_fraction,
        "probe_objects": list(probe_objects),
        "candidate_count": n_candidates,
        "dropped_count": n_dropped,
    }


def probe_requests(
    candidates: Sequence[Template], probe_objects: Sequence[str] = DEFAULT_PROBE_OBJECTS
) -> list[dict]:
    """Scoring work items for an external scorer: one record per probe.

    Slotless templates get a single record with probe "".
    """
    requests = []
    for tpl in _dedupe(candidates):
        if tpl.has_slot:
            for probe in probe_objects:
                requests.append(
                    {
                        "template_id": tpl.source_sentence_id,
                        "probe": probe,
                        "sentence": fill_template(tpl, probe),
                    }
                )
        else:
            requests.append(
                {
                    "template_id": tpl.source_sentence_id,
                    "probe": "",
                    "sentence": fill_template(tpl),
                }
            )
    return requests


def load_corpus(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs from a JSONL corpus, in file order."""
    out = []
    for line_no, record in read_jsonl(path):
        if "id" not in record or "text" not in record:
            raise ParseError(str(path), line_no, "corpus record needs 'id' and 'text'")
        out.append((str(record["id"]), str(record["text"])))
    return out


def load_annotations(path: str | Path) -> dict[str, ChunkAnnotation]:
    out: dict[str, ChunkAnnotation] = {}
    for line_no, record in read_jsonl(path):
        try:
            ann = ChunkAnnotation.from_json_dict(record)
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(str(path), line_no, f"bad annotation: {exc}") from exc
        if ann.sentence_id in out:
            raise ParseError(str(path), line_no, f"duplicate sentence_id {ann.sentence_id!r}")
        out[ann.sentence_id] = ann
    return out


def extract_candidates(
    corpus: Sequence[tuple[str, str]],
    annotations: Mapping[str, ChunkAnnotation],
) -> tuple[list[Template], dict[str, int]]:
    """Template candidates from every annotated sentence, in corpus order.

    Sentences without an annotation are counted and skipped; annotated
    sentences whose tokens disagree with the corpus text are errors.
    """
    candidates: list[Template] = []
    stats = {"sentences": 0, "unannotated": 0, "filtered": 0}
    for corpus_id, text in corpus:
        for index, tokens in enumerate(split_sentences(text)):
            stats["sentences"] += 1
            sid = sentence_id_for(corpus_id, index)
            ann = annotations.get(sid)
            if ann is None:
                stats["unannotated"] += 1
                logger.warning("no annotation for sentence %s", sid)
                continue
            if list(ann.tokens) != tokens:
                raise ValueError(
                    f"annotation tokens for {sid} disagree with corpus text"
                )
            produced = sentence_to_templates(ann)
            if produced:
                candidates.extend(produced)
            else:
                stats["filtered"] += 1
    return candidates, stats


class TemplateSampler:
    """Without-replacement template draws for one generation episode.

    Each category keeps a shuffled pool; exhaustion reshuffles, so short
    banks repeat only after every template has been used once.
    """

    def __init__(self, bank: TemplateBank, rng) -> None:
        self._bank = bank
        self._rng = rng
        self._pools: dict[Category, list[Template]] = {}

    def sample_template(self, category: Category) -> Template:
        pool = self._pools.get(category)
        if not pool:
            entries = self._bank.templates(category)
            if not entries:
                raise MissingTemplateError(category.value)
            pool = [st.template for st in entries]
            for i in range(len(pool) - 1, 0, -1):
                j = int(self._rng.integers(0, i + 1))
                pool[i], pool[j] = pool[j], pool[i]
            self._pools[category] = pool
        return pool.pop()


class SubprocessScorer:
    """Line-protocol scorer: one sentence written, one decimal loss read."""

    def __init__(self, command: Sequence[str]) -> None:
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def __call__(self, sentence: str) -> float:
        if self._proc.poll() is not None:
            raise RuntimeError("scorer process has exited")
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(sentence.replace("\n", " ") + "\n")
        self._proc.stdin.flush()
        reply = self._proc.stdout.readline()
        if reply == "":
            raise RuntimeError("scorer process closed its output")
        return float(reply.strip())

    def close(self) -> None:
        if self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __enter__(self) -> "SubprocessScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
