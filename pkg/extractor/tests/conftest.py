import json
from pathlib import Path

import pytest
import torch
from tokenizers import BertWordPieceTokenizer
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

HIDDEN_SIZE = 32


@pytest.fixture(scope="session")
def corpus_jsonl():
    """The primary package's bundled synthetic corpus, consumed as a file."""
    from rolecast.cli import builtin_data

    return builtin_data("synthetic_corpus.jsonl")


def _corpus_words(path: Path) -> list[str]:
    words = set()
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            text = json.loads(line)["text"].lower()
            for token in text.replace(".", " . ").split():
                words.add(token)
    return sorted(words)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory, corpus_jsonl):
    """A local randomly-initialized encoder whose vocab covers the corpus."""
    d = tmp_path_factory.mktemp("tinybert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + _corpus_words(corpus_jsonl)
    vocab_path = d / "vocab.txt"
    vocab_path.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    core = BertWordPieceTokenizer(str(vocab_path), lowercase=True)
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=core._tokenizer,
        unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]",
    )
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=HIDDEN_SIZE, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.eval()
    tokenizer.save_pretrained(d)
    model.save_pretrained(d)
    return d
