"""FrameNet fulltext corpus model.

Parses FrameNet fulltext annotation XML into an immutable in-memory corpus,
reads/writes a JSONL interchange format, and routes sentences into
train/dev/test splits by document manifest.

JSONL schema (one sentence per line, UTF-8):

    {"doc_id": ..., "sentence_id": ..., "text": ...,
     "annotations": [{"frame": ..., "lexical_unit": ...,
                      "trigger": {"start": ..., "end": ...},
                      "elements": [{"role": ..., "start": ..., "end": ...}
                                   or {"role": ..., "ni": "DNI"|"INI"|"CNI"}]}]}

Offsets are 0-based character offsets into `text`; `end` is exclusive.
Elements merged from discontinuous labels carry an extra `"merged": true` key.
"""

from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

log = logging.getLogger(__name__)

FRAMENET_NS = "{http://framenet.icsi.berkeley.edu}"
NI_TYPES = ("DNI", "INI", "CNI")


class CorpusError(Exception):
    """Unrecoverable parsing or schema problem."""


@dataclass(frozen=True)
class Span:
    """Character span within a sentence; `end` is exclusive, `text` caches the substring."""

    start: int
    end: int
    text: str


@dataclass(frozen=True)
class FrameElementAnn:
    """One frame element: either a text span or a null-instantiation marker."""

    role_name: str
    span: Optional[Span] = None
    null_instantiation: Optional[str] = None
    merged: bool = False  # span covers multiple discontinuous labels

    def __post_init__(self):
        if not self.role_name:
            raise CorpusError("frame element with empty role name")
        if (self.span is None) == (self.null_instantiation is None):
            raise CorpusError(
                f"element {self.role_name!r} must have exactly one of span / null instantiation"
            )
        if self.null_instantiation is not None and self.null_instantiation not in NI_TYPES:
            raise CorpusError(f"unknown null-instantiation type {self.null_instantiation!r}")


@dataclass(frozen=True)
class FrameAnnotation:
    """One evoked frame: trigger span plus labeled frame elements."""

    frame_name: str
    lexical_unit: str
    trigger: Span
    elements: tuple[FrameElementAnn, ...]

    def __post_init__(self):
        if not self.frame_name:
            raise CorpusError("annotation with empty frame name")

    def spanned_elements(self) -> list[FrameElementAnn]:
        return [e for e in self.elements if e.span is not None]


@dataclass(frozen=True)
class Sentence:
    sentence_id: str
    doc_id: str
    text: str
    annotations: tuple[FrameAnnotation, ...] = ()


@dataclass(frozen=True)
class SplitManifest:
    """Document-level train/dev/test routing; the three lists are pairwise disjoint."""

    train_docs: tuple[str, ...]
    dev_docs: tuple[str, ...]
    test_docs: tuple[str, ...]

    def __post_init__(self):
        tr, dv, te = set(self.train_docs), set(self.dev_docs), set(self.test_docs)
        if tr & dv or tr & te or dv & te:
            overlap = (tr & dv) | (tr & te) | (dv & te)
            raise CorpusError(f"split manifest lists overlap: {sorted(overlap)}")

    def split_of(self, doc_id: str) -> str:
        if doc_id in self.train_docs:
            return "train"
        if doc_id in self.dev_docs:
            return "dev"
        if doc_id in self.test_docs:
            return "test"
        raise CorpusError(f"document {doc_id!r} is missing from the split manifest")


@dataclass
class SkippedRecord:
    """Annotation record dropped during parsing, with the reason."""

    sentence_id: str
    reason: str


def _check_span(span: Span, text: str, sentence_id: str, what: str) -> None:
    if not (0 <= span.start < span.end <= len(text)):
        raise CorpusError(
            f"{what} span [{span.start},{span.end}) outside sentence {sentence_id!r} "
            f"of length {len(text)}"
        )
    if text[span.start : span.end] != span.text:
        raise CorpusError(f"{what} span text mismatch in sentence {sentence_id!r}")


def _byte_offset(data: bytes, line: int, column: int) -> int:
    # expat positions are (1-based line, 0-based column)
    lines = data.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def parse_fulltext_doc(
    xml_bytes: bytes, skipped: Optional[list[SkippedRecord]] = None
) -> list[Sentence]:
    """Parse one FrameNet fulltext annotation document.

    Frame-evoking annotation sets (those carrying a luName) become
    FrameAnnotations; FE labels with offsets become spanned elements, itype
    labels become null-instantiation markers; all other layers are ignored.
    Records with offsets inconsistent with the sentence text are skipped and
    counted (collected into `skipped` when given).
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        line, col = exc.position
        raise CorpusError(
            f"malformed XML at byte offset {_byte_offset(xml_bytes, line, col)}: {exc}"
        ) from exc

    ns = FRAMENET_NS if root.tag.startswith(FRAMENET_NS) else ""
    doc_id = _document_id(root, ns)

    sentences = []
    n_skipped = 0
    for index, sent_el in enumerate(root.iter(ns + "sentence")):
        text_el = sent_el.find(ns + "text")
        text = text_el.text if text_el is not None and text_el.text is not None else ""
        sentence_id = sent_el.get("ID") or f"{doc_id}_{index}"
        sent_doc = doc_id or sent_el.get("docID") or "unknown"

        annotations = []
        for aset in sent_el.findall(ns + "annotationSet"):
            if aset.get("luName") is None:
                continue  # POS/NER layers, not frame-evoking
            if aset.get("status") == "UNANN":
                continue  # frame identified but arguments never annotated
            try:
                annotations.append(_parse_annotation_set(aset, ns, text, sentence_id))
            except CorpusError as exc:
                n_skipped += 1
                if skipped is not None:
                    skipped.append(SkippedRecord(sentence_id, str(exc)))
                log.warning("skipping annotation in sentence %s: %s", sentence_id, exc)
        sentences.append(
            Sentence(
                sentence_id=sentence_id,
                doc_id=sent_doc,
                text=text,
                annotations=tuple(annotations),
            )
        )
    if n_skipped:
        log.warning("document %s: skipped %d annotation record(s)", doc_id, n_skipped)
    return sentences


def _document_id(root: ET.Element, ns: str) -> str:
    header = root.find(ns + "header")
    if header is not None:
        corpus_el = header.find(ns + "corpus")
        if corpus_el is not None:
            doc_el = corpus_el.find(ns + "document")
            corpus_name = corpus_el.get("name", "")
            doc_name = doc_el.get("name", "") if doc_el is not None else ""
            if corpus_name and doc_name:
                return f"{corpus_name}__{doc_name}"
            if doc_name:
                return doc_name
    return ""


def _parse_annotation_set(
    aset: ET.Element, ns: str, text: str, sentence_id: str
) -> FrameAnnotation:
    frame_name = aset.get("frameName", "")
    lexical_unit = aset.get("luName", "")

    target_labels = []
    fe_labels: list[ET.Element] = []
    for layer in aset.findall(ns + "layer"):
        name = layer.get("name")
        if name == "Target":
            target_labels.extend(layer.findall(ns + "label"))
        elif name == "FE" and layer.get("rank", "1") == "1":
            # secondary FE ranks duplicate/extend rank 1 and are ignored
            fe_labels.extend(layer.findall(ns + "label"))

    if not target_labels:
        raise CorpusError("annotation without a Target label")
    trigger = _covering_span([_label_offsets(l) for l in target_labels], text)
    _check_span(trigger, text, sentence_id, "trigger")

    # discontinuous elements appear as several labels sharing a role name;
    # they are merged into the smallest covering span and flagged
    by_role: dict[str, list[tuple[int, int]]] = {}
    ni_elements = []
    order: list[str] = []
    for label in fe_labels:
        role = label.get("name", "")
        if label.get("itype") is not None:
            itype = label.get("itype", "")
            if itype not in NI_TYPES:
                raise CorpusError(f"unknown itype {itype!r} for role {role!r}")
            ni_elements.append(FrameElementAnn(role_name=role, null_instantiation=itype))
            continue
        if role not in by_role:
            by_role[role] = []
            order.append(role)
        by_role[role].append(_label_offsets(label))

    elements = []
    for role in order:
        offsets = by_role[role]
        span = _covering_span(offsets, text)
        _check_span(span, text, sentence_id, f"element {role!r}")
        elements.append(FrameElementAnn(role_name=role, span=span, merged=len(offsets) > 1))
    elements.extend(ni_elements)

    return FrameAnnotation(
        frame_name=frame_name,
        lexical_unit=lexical_unit,
        trigger=trigger,
        elements=tuple(elements),
    )


def _label_offsets(label: ET.Element) -> tuple[int, int]:
    try:
        start = int(label.get("start"))  # type: ignore[arg-type]
        end = int(label.get("end"))  # type: ignore[arg-type]
    except (TypeError, ValueError) as exc:
        raise CorpusError(f"label {label.get('name')!r} without numeric offsets") from exc
    return start, end


def _covering_span(offsets: list[tuple[int, int]], text: str) -> Span:
    # FrameNet offsets are inclusive; Span.end is exclusive
    start = min(s for s, _ in offsets)
    end = max(e for _, e in offsets) + 1
    return Span(start=start, end=end, text=text[start:end])


def parse_fulltext_dir(
    path: Path, skipped: Optional[list[SkippedRecord]] = None
) -> list[Sentence]:
    """Parse every *.xml file in a fulltext directory, in sorted filename order."""
    path = Path(path)
    files = sorted(path.glob("*.xml"))
    if not files:
        raise CorpusError(f"no .xml files under {path}")
    corpus: list[Sentence] = []
    for f in files:
        corpus.extend(parse_fulltext_doc(f.read_bytes(), skipped=skipped))
    return corpus


# --- JSONL interchange ---------------------------------------------------


def _sentence_to_obj(s: Sentence) -> dict:
    anns = []
    for a in s.annotations:
        elements = []
        for e in a.elements:
            if e.span is not None:
                obj: dict = {"role": e.role_name, "start": e.span.start, "end": e.span.end}
                if e.merged:
                    obj["merged"] = True
            else:
                obj = {"role": e.role_name, "ni": e.null_instantiation}
            elements.append(obj)
        anns.append(
            {
                "frame": a.frame_name,
                "lexical_unit": a.lexical_unit,
                "trigger": {"start": a.trigger.start, "end": a.trigger.end},
                "elements": elements,
            }
        )
    return {
        "doc_id": s.doc_id,
        "sentence_id": s.sentence_id,
        "text": s.text,
        "annotations": anns,
    }


def write_jsonl(corpus: Iterable[Sentence], path: Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for s in corpus:
            fh.write(json.dumps(_sentence_to_obj(s), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def _require(obj: dict, key: str, lineno: int, path: str) -> object:
    if key not in obj:
        raise CorpusError(f"line {lineno}: missing field {path}{key}")
    return obj[key]


def load_jsonl(path: Path) -> list[Sentence]:
    """Load a JSONL corpus; span texts are rebuilt from the sentence text and validated."""
    sentences = []
    seen_ids = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc
            sentence = _sentence_from_obj(obj, lineno)
            key = (sentence.doc_id, sentence.sentence_id)
            if key in seen_ids:
                raise CorpusError(f"line {lineno}: duplicate sentence id {key}")
            seen_ids.add(key)
            sentences.append(sentence)
    return sentences


def _sentence_from_obj(obj: dict, lineno: int) -> Sentence:
    text = str(_require(obj, "text", lineno, ""))
    sentence_id = str(_require(obj, "sentence_id", lineno, ""))
    doc_id = str(_require(obj, "doc_id", lineno, ""))

    def make_span(d: dict, path: str) -> Span:
        start = _require(d, "start", lineno, path)
        end = _require(d, "end", lineno, path)
        if not isinstance(start, int) or not isinstance(end, int):
            raise CorpusError(f"line {lineno}: non-integer offsets at {path}")
        span = Span(start=start, end=end, text=text[start:end])
        _check_span(span, text, sentence_id, path)
        return span

    annotations = []
    for i, a in enumerate(obj.get("annotations", [])):
        apath = f"annotations[{i}]."
        elements = []
        for j, e in enumerate(a.get("elements", [])):
            epath = f"{apath}elements[{j}]."
            role = str(_require(e, "role", lineno, epath))
            if "ni" in e:
                elements.append(FrameElementAnn(role_name=role, null_instantiation=e["ni"]))
            else:
                elements.append(
                    FrameElementAnn(
                        role_name=role,
                        span=make_span(e, epath),
                        merged=bool(e.get("merged", False)),
                    )
                )
        annotations.append(
            FrameAnnotation(
                frame_name=str(_require(a, "frame", lineno, apath)),
                lexical_unit=str(_require(a, "lexical_unit", lineno, apath)),
                trigger=make_span(_require(a, "trigger", lineno, apath), apath + "trigger."),
                elements=tuple(elements),
            )
        )
    return Sentence(
        sentence_id=sentence_id, doc_id=doc_id, text=text, annotations=tuple(annotations)
    )


# --- splits ----------------------------------------------------------------


def load_split_manifest(
    path: Path, corpus_docs: Optional[Iterable[str]] = None
) -> SplitManifest:
    """Load a manifest JSON with keys train/dev/test -> arrays of doc ids.

    `"train": "rest"` routes every corpus document not named in dev/test to
    train; this requires `corpus_docs`.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    for key in ("train", "dev", "test"):
        if key not in data:
            raise CorpusError(f"split manifest missing key {key!r}")
    dev = tuple(data["dev"])
    test = tuple(data["test"])
    if data["train"] == "rest":
        if corpus_docs is None:
            raise CorpusError('manifest has "train": "rest" but no corpus was supplied')
        named = set(dev) | set(test)
        seen = []
        for d in corpus_docs:
            if d not in named and d not in seen:
                seen.append(d)
        train = tuple(seen)
    else:
        train = tuple(data["train"])
    return SplitManifest(train_docs=train, dev_docs=dev, test_docs=test)


def split_corpus(
    corpus: Iterable[Sentence], manifest: SplitManifest
) -> tuple[list[Sentence], list[Sentence], list[Sentence]]:
    """Route sentences by doc_id, preserving within-split order."""
    out: dict[str, list[Sentence]] = {"train": [], "dev": [], "test": []}
    for s in corpus:
        out[manifest.split_of(s.doc_id)].append(s)
    return out["train"], out["dev"], out["test"]


def corpus_stats(corpus: Iterable[Sentence]) -> dict:
    """Counts over the corpus; sentences are counted both in total and annotated-only."""
    n_sentences = 0
    n_annotated = 0
    n_annotations = 0
    n_spanned = 0
    frames = set()
    docs = set()
    for s in corpus:
        n_sentences += 1
        docs.add(s.doc_id)
        if s.annotations:
            n_annotated += 1
        for a in s.annotations:
            n_annotations += 1
            frames.add(a.frame_name)
            n_spanned += sum(1 for e in a.elements if e.span is not None)
    return {
        "n_sentences": n_sentences,
        "n_sentences_annotated": n_annotated,
        "n_distinct_frames": len(frames),
        "n_docs": len(docs),
        "n_annotations": n_annotations,
        "n_spanned_elements": n_spanned,
    }
