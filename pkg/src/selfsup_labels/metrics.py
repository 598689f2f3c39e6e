"""Per-class and macro F1 from a confusion matrix over the three label classes."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput
from .labeling import CLASSES


@dataclass(frozen=True)
class F1Result:
    classes: tuple
    confusion: tuple  # rows actual, columns predicted, ordered as ``classes``
    precision: tuple
    recall: tuple
    f1: tuple
    support: tuple
    macro_f1: float
    weighted_f1: float
    excluded: tuple  # classes left out of the macro mean (zero support)

    def per_class(self):
        return {
            int(c): {"precision": p, "recall": r, "f1": f, "support": s}
            for c, p, r, f, s in zip(self.classes, self.precision, self.recall, self.f1, self.support)
        }

    def as_dict(self):
        return {
            "classes": list(self.classes),
            "confusion": [list(row) for row in self.confusion],
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "support": list(self.support),
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "excluded": list(self.excluded),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["classes"]), tuple(tuple(r) for r in d["confusion"]),
                   tuple(d["precision"]), tuple(d["recall"]), tuple(d["f1"]),
                   tuple(d["support"]), d["macro_f1"], d["weighted_f1"], tuple(d["excluded"]))


def confusion_matrix(predicted, actual, classes=CLASSES):
    index = {c: k for k, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=int)
    for a, p in zip(actual, predicted):
        cm[index[int(a)], index[int(p)]] += 1
    return cm


def f1_from_confusion(cm, classes=CLASSES):
    """Undefined precision or recall (0/0) is taken as 0, so F1 is 0 for that class."""
    cm = np.asarray(cm, dtype=int)
    tp = np.diag(cm).astype(float)
    pred_tot = cm.sum(axis=0).astype(float)
    support = cm.sum(axis=1)
    precision = np.divide(tp, pred_tot, out=np.zeros_like(tp), where=pred_tot > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    present = support > 0
    macro = float(np.mean(f1[present])) if present.any() else 0.0
    weighted = float(np.sum(f1 * support) / support.sum()) if support.sum() else 0.0
    return F1Result(
        classes=tuple(int(c) for c in classes),
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
        support=tuple(int(v) for v in support),
        macro_f1=macro,
        weighted_f1=weighted,
        excluded=tuple(int(c) for c, keep in zip(classes, present) if not keep),
    )


def f1_scores(predicted, actual):
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if len(predicted) != len(actual):
        raise ValueError(f"{len(predicted)} predictions for {len(actual)} targets")
    if len(actual) == 0:
        raise EmptyInput("cannot score an empty label sequence")
    return f1_from_confusion(confusion_matrix(predicted, actual))
