from __future__ import annotations

from typing import List, Optional

from typing_extensions import NotRequired, TypedDict


class SequenceRecord(TypedDict):
    # Unique id of the sequence
    id: str
    # Class label, null for unlabeled data
    label: NotRequired[Optional[str]]
    # One list of D numbers per frame, null for a missing frame
    frames: List[Optional[List[float]]]


class LatentTrace(TypedDict):
    # Id of the generated sequence
    id: str
    # 0-based emitting states x_1..x_T
    states: List[int]
    # 1-based lags z_1..z_T
    lags: List[int]
