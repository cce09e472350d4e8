import re
import string
from typing import List, Sequence

import numpy as np

from src.core.exceptions import EmptyReferenceError

_PUNCTUATION = re.compile(f"[{re.escape(string.punctuation)}]")


def normalize_text(text: str) -> List[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCTUATION.sub(" ", (text or "").lower()).split()


def edit_distance(reference: Sequence[str], hypothesis: Sequence[str]) -> int:
    """Minimum substitutions + deletions + insertions turning ``reference`` into ``hypothesis``."""
    distances = np.arange(len(hypothesis) + 1)
    for i, word in enumerate(reference, start=1):
        previous = distances.copy()
        distances[0] = i
        for j, other in enumerate(hypothesis, start=1):
            distances[j] = min(
                previous[j] + 1,
                distances[j - 1] + 1,
                previous[j - 1] + (word != other),
            )
    return int(distances[-1])


def wer(reference: str, hypothesis: str) -> float:
    """
    Word error rate of ``hypothesis`` against ``reference``. Unbounded above, so 1 - WER can be
    negative when insertions pile up.

    :raise: EmptyReferenceError: If the reference has no words after normalization
    """
    reference_words = normalize_text(reference)
    if not reference_words:
        raise EmptyReferenceError("WER needs a non-empty reference transcript")
    return edit_distance(reference_words, normalize_text(hypothesis)) / len(reference_words)
