"""Bundled synthetic corpus: 5 frames x 4 roles, 200 sentences over 10 documents.

Role identity is encoded in the element surface text (each (frame, role) has
three fixed surface variants), so the deterministic text embedder yields
features from which roles are recoverable; every variant occurs in every
document, which guarantees reference-bank coverage for any document split.
The generator is pure; the JSONL file shipped under data/ is its exact
output and a test keeps them in sync.
"""

from __future__ import annotations

from .corpus import FrameAnnotation, FrameElementAnn, Sentence, Span, SplitManifest

FRAMES: dict[str, dict] = {
    "Supply": {
        "verbs": ["provides", "furnishes"],
        "roles": ["Supplier", "Theme", "Recipient", "Time"],
    },
    "Motion": {
        "verbs": ["moves", "travels"],
        "roles": ["Mover", "Source", "Goal", "Path"],
    },
    "Commerce": {
        "verbs": ["buys", "purchases"],
        "roles": ["Buyer", "Seller", "Goods", "Money"],
    },
    "Statement": {
        "verbs": ["announces", "declares"],
        "roles": ["Speaker", "Message", "Addressee", "Medium"],
    },
    "Creation": {
        "verbs": ["assembles", "constructs"],
        "roles": ["Creator", "Entity", "Components", "Place"],
    },
}

N_DOCS = 10
SENTENCES_PER_DOC = 20
VARIANTS = 3


def element_surface(frame: str, role: str, variant: int) -> str:
    greek = ["alpha", "beta", "gamma"][variant % VARIANTS]
    return f"the {role.lower()} {greek}"


def make_synthetic_corpus() -> list[Sentence]:
    """Deterministic 200-sentence corpus; no randomness involved."""
    frame_names = list(FRAMES)
    element_counter = {f: 0 for f in frame_names}
    frame_counter = {f: 0 for f in frame_names}
    sentences = []
    for global_idx in range(N_DOCS * SENTENCES_PER_DOC):
        doc_id = f"doc_{global_idx // SENTENCES_PER_DOC:02d}"
        frame = frame_names[global_idx % len(frame_names)]
        frame_def = FRAMES[frame]
        k = frame_counter[frame]
        frame_counter[frame] += 1

        n_elements = 2 + (k % 3)  # 2, 3, 4 cycling
        verb = frame_def["verbs"][k % len(frame_def["verbs"])]
        picks = []
        for _ in range(n_elements):
            c = element_counter[frame]
            element_counter[frame] += 1
            # consecutive slots rotate roles, so roles within a sentence are
            # distinct; variants advance once per full role rotation
            role = frame_def["roles"][c % len(frame_def["roles"])]
            variant = (c // len(frame_def["roles"])) % VARIANTS
            picks.append((role, element_surface(frame, role, variant)))

        # first element, predicate, then the remaining elements
        tokens = [picks[0][1], verb] + [surface for _, surface in picks[1:]] + ["today"]
        text = " ".join(tokens) + "."
        offsets = []
        pos = 0
        for tok in tokens:
            offsets.append((pos, pos + len(tok)))
            pos += len(tok) + 1

        trigger = Span(offsets[1][0], offsets[1][1], verb)
        elements = [
            FrameElementAnn(
                role_name=picks[0][0],
                span=Span(offsets[0][0], offsets[0][1], picks[0][1]),
            )
        ]
        for j, (role, surface) in enumerate(picks[1:], start=2):
            elements.append(
                FrameElementAnn(role_name=role, span=Span(offsets[j][0], offsets[j][1], surface))
            )
        unused = [r for r in frame_def["roles"] if all(p[0] != r for p in picks)]
        if k % 7 == 3 and unused:  # occasional null instantiation, excluded downstream
            elements.append(FrameElementAnn(role_name=unused[0], null_instantiation="DNI"))

        sentences.append(
            Sentence(
                sentence_id=f"s{global_idx:04d}",
                doc_id=doc_id,
                text=text,
                annotations=(
                    FrameAnnotation(
                        frame_name=frame,
                        lexical_unit=f"{verb}.v",
                        trigger=trigger,
                        elements=tuple(elements),
                    ),
                ),
            )
        )
    return sentences


def make_synthetic_manifest() -> SplitManifest:
    docs = [f"doc_{i:02d}" for i in range(N_DOCS)]
    return SplitManifest(
        train_docs=tuple(docs[:6]), dev_docs=tuple(docs[6:8]), test_docs=tuple(docs[8:])
    )
