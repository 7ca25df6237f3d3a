"""Report and CSV writers for evaluated slices."""

import json
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from slicescope.coherence import SliceMask
from slicescope.dataset_io import DatasetBundle
from slicescope.evaluation import SliceReport
from slicescope.evaluation.projection import Projection
from slicescope.errors import InputError


def write_json(path: str, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def write_report(path: str, reports: List[SliceReport], extra: Optional[Dict[str, Any]] = None) -> None:
    """Write slice reports as JSON, one entry per slice in discovery order."""
    payload: Dict[str, Any] = {"slices": [r.model_dump() for r in reports]}
    if extra:
        payload.update(extra)
    write_json(path, payload)


def masks_frame(bundle: DatasetBundle, masks: List[SliceMask]) -> pd.DataFrame:
    """One row per (slice, member) pair."""
    ids = bundle.sample_ids
    rows = [
        {"slice": s, "index": int(i), "id": ids[i], "loss": float(bundle.losses.values[i])}
        for s, mask in enumerate(masks)
        for i in mask.indices()
    ]
    return pd.DataFrame(rows, columns=["slice", "index", "id", "loss"])


def write_masks(path: str, bundle: DatasetBundle, masks: List[SliceMask]) -> None:
    masks_frame(bundle, masks).to_csv(path, index=False)


def projection_frame(bundle: DatasetBundle, projection: Projection, mask: SliceMask) -> pd.DataFrame:
    if projection.coords.shape[0] != bundle.n or mask.n != bundle.n:
        raise InputError("projection, mask and bundle lengths differ")
    correct = bundle.outcomes.correct
    return pd.DataFrame(
        {
            "id": bundle.sample_ids,
            "pc1": projection.coords[:, 0],
            "pc2": projection.coords[:, 1],
            "in_slice": mask.member,
            "loss": bundle.losses.values,
            "correct": correct if correct is not None else np.full(bundle.n, None),
        }
    )


def write_projection(path: str, bundle: DatasetBundle, projection: Projection, mask: SliceMask) -> None:
    projection_frame(bundle, projection, mask).to_csv(path, index=False)
