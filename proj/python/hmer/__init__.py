"""Online handwritten math expression recognition."""

import json

from ._core import (
    HmerError,
    ctc_loss,
    featurize,
    normalize,
    parse_ink,
    ramer_simplify,
    srt_to_latex,
)
from ._core import Recognizer as _Recognizer

__all__ = [
    "HmerError",
    "Recognizer",
    "ctc_loss",
    "featurize",
    "normalize",
    "parse_ink",
    "ramer_simplify",
    "srt_to_latex",
]


class Recognizer(_Recognizer):
    """Checkpoint plus grammar. recognize() returns latex, probability,
    alternatives, segments and relations as a dict."""

    def recognize(self, strokes, topk=5):
        result = json.loads(self.recognize_json(strokes, topk))
        result.pop("timing_ms", None)
        return result
