"""On-disk multimodal dataset and batch collation.

Layout under a dataset root::

    manifest.jsonl            {"id": ..., "label": ..., "split": "train"|"valid"|"test"} per line
    text/<id>.csv             rows = timesteps, columns = feature dims, no header
    vision/<id>.csv
    audio/<id>.csv
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, field_validator

from app.exceptions import ContractError, DatasetError, EmptyInputError

MODALITIES = ("text", "vision", "audio")
SPLITS = ("train", "valid", "test")
LABEL_RANGE = (-3.0, 3.0)
MANIFEST_NAME = "manifest.jsonl"

PathLike = Union[str, Path]


class ManifestRecord(BaseModel):
    """One line of the dataset manifest."""
    id: str = Field(..., min_length=1)
    label: float
    split: Literal["train", "valid", "test"]

    @field_validator("id")
    @classmethod
    def validate_id(cls, v):
        # ids name the per-modality feature files
        if any(sep in v for sep in ("/", "\\")) or v in (".", "..") or v.startswith("."):
            raise ValueError(f"id must be a plain file name, got {v!r}")
        return v

    @field_validator("label")
    @classmethod
    def validate_label(cls, v):
        if not np.isfinite(v) or not LABEL_RANGE[0] <= v <= LABEL_RANGE[1]:
            raise ValueError(f"label must lie in [-3, 3], got {v}")
        return v


@dataclass(frozen=True)
class Utterance:
    """A labelled utterance with one ``[T_m, D_m]`` feature matrix per modality."""
    id: str
    label: float
    split: str
    features: Dict[str, np.ndarray]

    def length(self, modality: str) -> int:
        return int(self.features[modality].shape[0])


@dataclass
class ModalityBatch:
    """Zero-padded features, availability masks and true lengths per modality."""
    features: Dict[str, np.ndarray]   # [B, T_max, D_m]
    masks: Dict[str, np.ndarray]      # [B, T_max], 1 = available
    lengths: Dict[str, np.ndarray]    # [B]
    labels: np.ndarray                # [B]
    ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        missing = [m for m in MODALITIES if m not in self.features]
        if missing:
            raise ContractError(f"batch is missing modalities {missing}")
        if np.any(self.labels < LABEL_RANGE[0]) or np.any(self.labels > LABEL_RANGE[1]):
            raise ContractError("batch labels must lie in [-3, 3]")

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    def replace(self, **changes) -> "ModalityBatch":
        return replace(self, **changes)


class MultimodalDataset:
    """All utterances of a dataset root, grouped by split."""

    def __init__(self, utterances: Sequence[Utterance], root: Optional[Path] = None):
        self.root = root
        self.utterances = list(utterances)
        self.dims = _check_dims(self.utterances)

    def __len__(self) -> int:
        return len(self.utterances)

    def split(self, name: str) -> List[Utterance]:
        if name not in SPLITS:
            raise ContractError(f"unknown split '{name}', expected one of {SPLITS}")
        return [u for u in self.utterances if u.split == name]


def _check_dims(utterances: Sequence[Utterance]) -> Dict[str, int]:
    dims: Dict[str, int] = {}
    for utterance in utterances:
        for modality in MODALITIES:
            array = utterance.features.get(modality)
            if array is None or array.ndim != 2:
                raise DatasetError(f"utterance '{utterance.id}' has no 2-d {modality} features")
            expected = dims.setdefault(modality, array.shape[1])
            if array.shape[1] != expected:
                raise DatasetError(
                    f"utterance '{utterance.id}' has {array.shape[1]} {modality} dims, "
                    f"other utterances have {expected}"
                )
    return dims


def write_dataset(root: PathLike, utterances: Sequence[Utterance]) -> Path:
    """Write utterances in the dataset layout, replacing any existing manifest.

    Raises:
        DatasetError: If any file cannot be written.
    """
    root = Path(root)
    try:
        for modality in MODALITIES:
            (root / modality).mkdir(parents=True, exist_ok=True)
        with open(root / MANIFEST_NAME, "w", encoding="utf-8") as manifest:
            for utterance in utterances:
                record = ManifestRecord(id=utterance.id, label=utterance.label, split=utterance.split)
                manifest.write(record.model_dump_json() + "\n")
                for modality in MODALITIES:
                    np.savetxt(
                        root / modality / f"{utterance.id}.csv",
                        utterance.features[modality],
                        delimiter=",",
                        fmt="%.17g",
                    )
    except ValidationError as e:
        raise DatasetError(f"invalid utterance record: {e}") from e
    except OSError as e:
        raise DatasetError(f"could not write dataset to {root}: {e}") from e
    logger.info(f"Wrote {len(utterances)} utterances to {root}")
    return root


def _read_features(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"missing feature file {path}")
    try:
        array = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise DatasetError(f"malformed feature file {path}: {e}") from e
    if array.shape[0] == 0:
        raise DatasetError(f"feature file {path} has no timesteps")
    if not np.all(np.isfinite(array)):
        raise DatasetError(f"feature file {path} contains non-finite values")
    return array


def load_dataset(root: PathLike) -> MultimodalDataset:
    """Read a dataset root written by ``write_dataset`` or by hand.

    Raises:
        DatasetError: Missing manifest or feature files, bad records, or
            inconsistent feature widths within a modality.
    """
    root = Path(root)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise DatasetError(f"no {MANIFEST_NAME} under {root}")

    utterances: List[Utterance] = []
    seen = set()
    with open(manifest, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = ManifestRecord(**json.loads(line))
            except (json.JSONDecodeError, TypeError, ValidationError) as e:
                raise DatasetError(f"{manifest}:{line_number}: invalid record: {e}") from e
            if record.id in seen:
                raise DatasetError(f"{manifest}:{line_number}: duplicate id '{record.id}'")
            seen.add(record.id)
            features = {m: _read_features(root / m / f"{record.id}.csv") for m in MODALITIES}
            utterances.append(Utterance(record.id, record.label, record.split, features))

    dataset = MultimodalDataset(utterances, root=root)
    logger.info(f"Loaded {len(dataset)} utterances from {root} with dims {dataset.dims}")
    return dataset


def collate(utterances: Sequence[Utterance]) -> ModalityBatch:
    """Stack utterances into a zero-padded batch.

    Raises:
        EmptyInputError: If ``utterances`` is empty.
    """
    if not utterances:
        raise EmptyInputError("cannot collate an empty list of utterances")
    dims = _check_dims(utterances)
    features, masks, lengths = {}, {}, {}
    for modality in MODALITIES:
        lens = np.array([u.length(modality) for u in utterances], dtype=np.int64)
        padded = np.zeros((len(utterances), int(lens.max()), dims[modality]))
        mask = np.zeros(padded.shape[:2])
        for i, utterance in enumerate(utterances):
            padded[i, :lens[i]] = utterance.features[modality]
            mask[i, :lens[i]] = 1.0
        features[modality], masks[modality], lengths[modality] = padded, mask, lens
    labels = np.array([u.label for u in utterances], dtype=np.float64)
    return ModalityBatch(features, masks, lengths, labels, [u.id for u in utterances])


def iter_batches(
    utterances: Sequence[Utterance],
    batch_size: int,
    seed: Optional[int] = None,
) -> Iterator[ModalityBatch]:
    """Yield collated batches; shuffled when ``seed`` is given, in order otherwise."""
    if batch_size < 1:
        raise ContractError(f"batch_size must be positive, got {batch_size}")
    order = np.arange(len(utterances))
    if seed is not None:
        order = np.random.default_rng(seed).permutation(order)
    for start in range(0, len(order), batch_size):
        yield collate([utterances[i] for i in order[start:start + batch_size]])
