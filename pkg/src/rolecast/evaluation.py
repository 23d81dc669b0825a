"""Metric computation: binary classifier scores, multi-class role-labeling
scores on gold spans, no-training-data (NOTR) breakdowns, and the two direct
multi-class baselines.

All metric values are percentages in [0, 100].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import model
from .corpus import Sentence
from .instances import PredicateArgumentPair
from .trainer import BatchSource
from .transfer import TargetResult


class EvalError(Exception):
    pass


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def binary_metrics(predictions: Sequence[int], labels: Sequence[int]) -> dict:
    """Per-class precision/recall/F1 plus accuracy for a 0/1 task."""
    preds = np.asarray(predictions)
    gold = np.asarray(labels)
    if len(preds) != len(gold):
        raise EvalError(f"{len(preds)} predictions vs {len(gold)} labels")
    if len(preds) == 0:
        raise EvalError("empty input")
    out: dict = {"accuracy": 100.0 * float((preds == gold).mean()), "n": int(len(preds))}
    for cls in (0, 1):
        tp = int(((preds == cls) & (gold == cls)).sum())
        fp = int(((preds == cls) & (gold != cls)).sum())
        fn = int(((preds != cls) & (gold == cls)).sum())
        p, r, f1 = _prf(tp, fp, fn)
        out[f"class_{cls}"] = {"precision": p, "recall": r, "f1": f1, "support": tp + fn}
    return out


def src_metrics(predicted: Sequence[Optional[str]], gold: Sequence[str]) -> dict:
    """Accuracy plus support-weighted precision/recall/F1 over role names.

    `None` predictions (unclassifiable targets) always count as errors.
    """
    if len(predicted) != len(gold):
        raise EvalError(f"{len(predicted)} predictions vs {len(gold)} gold labels")
    if not gold:
        raise EvalError("empty input")
    n = len(gold)
    classes = sorted(set(gold))
    weighted_p = weighted_r = weighted_f1 = 0.0
    for cls in classes:
        tp = sum(1 for p, g in zip(predicted, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(predicted, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(predicted, gold) if p != cls and g == cls)
        p, r, f1 = _prf(tp, fp, fn)
        weight = (tp + fn) / n
        weighted_p += weight * p
        weighted_r += weight * r
        weighted_f1 += weight * f1
    accuracy = 100.0 * sum(1 for p, g in zip(predicted, gold) if p == g) / n
    if abs(weighted_r - accuracy) > 1e-8:
        raise EvalError(
            f"internal: weighted recall {weighted_r} != accuracy {accuracy}"
        )
    return {
        "accuracy": accuracy,
        "precision": weighted_p,
        "recall": weighted_r,
        "f1": weighted_f1,
        "n": n,
        "n_unclassifiable": sum(1 for p in predicted if p is None),
    }


def notr_report(results: Sequence[TargetResult], dev_corpus: Iterable[Sentence]) -> dict:
    """Accuracy on targets whose frame / (frame, role) never occurs in the dev corpus.

    Only spanned dev elements count as coverage, matching pair extraction.
    """
    dev_frames: set[str] = set()
    dev_roles: set[tuple[str, str]] = set()
    for s in dev_corpus:
        for a in s.annotations:
            dev_frames.add(a.frame_name)
            for e in a.elements:
                if e.span is not None:
                    dev_roles.add((a.frame_name, e.role_name))

    def accuracy(subset: Sequence[TargetResult]) -> Optional[float]:
        if not subset:
            return None
        return 100.0 * sum(1 for r in subset if r.predicted_role == r.gold_role) / len(subset)

    overall = accuracy(results)
    unseen_frame = [r for r in results if r.frame not in dev_frames]
    unseen_role = [r for r in results if (r.frame, r.gold_role) not in dev_roles]

    def block(subset: Sequence[TargetResult]) -> dict:
        acc = accuracy(subset)
        return {
            "n": len(subset),
            "accuracy": acc,
            "delta_vs_overall": None if acc is None or overall is None else acc - overall,
        }

    return {
        "overall": {"n": len(results), "accuracy": overall},
        "unseen_frame": block(unseen_frame),
        "unseen_role": block(unseen_role),
        "n_dev_frames": len(dev_frames),
        "n_test_frames": len({r.frame for r in results}),
    }


# --- direct multi-class baselines --------------------------------------------


@dataclass(frozen=True)
class BaselineParams:
    n_blocks: int = 2
    dropout_rate: float = 0.3
    epochs: int = 60
    batch_size: int = 128
    seed: int = 0
    adam: model.AdamParams = model.AdamParams(learning_rate=3e-3)


def _pair_features(
    pairs: Sequence[PredicateArgumentPair], source: BatchSource, features: str
) -> np.ndarray:
    ids = np.array([p.pair_id for p in pairs], dtype=np.int64)
    elem = source.matrix[source.elem_rows[ids]]
    if features == "element":
        return elem
    if features == "predicate_element":
        return np.hstack([source.matrix[source.pred_rows[ids]], elem])
    raise EvalError(f"unknown feature set {features!r}")


def baseline_direct(
    train_pairs: Sequence[PredicateArgumentPair],
    test_pairs: Sequence[PredicateArgumentPair],
    train_source: BatchSource,
    test_source: BatchSource,
    features: str = "element",
    params: BaselineParams = BaselineParams(),
) -> dict:
    """Train a direct multi-class role classifier over the global role inventory.

    Same architecture family as the analogy model (geometric reduction,
    dropout, rectified-linear blocks), but with one output per role name.
    """
    if not train_pairs:
        raise EvalError("empty training pairs")
    inventory = sorted({p.role_name for p in train_pairs})
    index = {r: i for i, r in enumerate(inventory)}

    x_train = _pair_features(train_pairs, train_source, features)
    y_train = np.array([index[p.role_name] for p in train_pairs], dtype=np.int64)
    config = model.NetworkConfig(
        input_dim=x_train.shape[1],
        n_blocks=params.n_blocks,
        dropout_rate=params.dropout_rate,
        output_dim=len(inventory),
        seed=params.seed,
    )
    ckpt = model.init_checkpoint(config)
    rng = np.random.Generator(np.random.PCG64(params.seed))
    step = 0
    for _ in range(params.epochs):
        order = rng.permutation(len(x_train))
        for lo in range(0, len(order), params.batch_size):
            sel = order[lo : lo + params.batch_size]
            _, gw, gb = model.loss_and_grad(
                ckpt, x_train[sel], y_train[sel], train_mode=True, dropout_seed=step
            )
            model.optimizer_step(ckpt, gw, gb, params.adam)
            step += 1

    x_test = _pair_features(test_pairs, test_source, features)
    preds = model.predict(ckpt, x_test)
    gold = [p.role_name for p in test_pairs]
    predicted = [inventory[i] for i in preds]
    correct = sum(1 for p, g in zip(predicted, gold) if p == g)
    return {
        "features": features,
        "accuracy": 100.0 * correct / len(gold) if gold else 0.0,
        "n_train": len(train_pairs),
        "n_test": len(test_pairs),
        "n_classes": len(inventory),
    }
