"""Frame-level ingestion: feature schema, CSV loading, aggregation.

A frame row carries bookkeeping columns (``subject, clip, frame, prompt,
actual``) followed by raw numeric columns.  A :class:`FeatureSchema` maps
groups of raw columns onto named feature descriptors; aggregation collapses
each group to a single value (arithmetic mean, or identity for single-column
descriptors).  The canonical schema has 51 descriptors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    DuplicateFrame,
    InvalidLabel,
    MissingColumn,
    NonFiniteValue,
)

ACTUAL_EMOTIONS = ("anger", "disgust", "sadness", "neutral", "surprise", "happiness")

PROMPT_EMOTIONS = (
    "amusement",
    "anger",
    "awe",
    "disgust",
    "enthusiasm",
    "fear",
    "liking",
    "neutral",
    "sadness",
    "surprise",
)

DESCRIPTOR_KINDS = (
    "au_intensity",
    "au_presence",
    "gaze_axis_mean",
    "gaze_angle",
    "eye_landmark_axis_mean",
    "head_pose_component",
    "face_landmark_axis_mean",
)

AGGREGATIONS = ("mean", "identity")

META_COLUMNS = ("subject", "clip", "frame", "prompt", "actual")


@dataclass(frozen=True)
class FeatureDescriptor:
    """One named feature: a set of raw source columns and how to collapse them."""

    name: str
    kind: str
    source_columns: tuple[str, ...]
    aggregation: str

    def __post_init__(self):
        if not self.name:
            raise ConfigError("descriptor name must be non-empty")
        if self.kind not in DESCRIPTOR_KINDS:
            raise ConfigError(f"unknown descriptor kind {self.kind!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if len(self.source_columns) == 0:
            raise ConfigError(f"descriptor {self.name!r} has no source columns")
        if self.aggregation == "identity" and len(self.source_columns) != 1:
            raise ConfigError(
                f"identity descriptor {self.name!r} must have exactly one "
                f"source column, got {len(self.source_columns)}"
            )
        if len(set(self.source_columns)) != len(self.source_columns):
            raise ConfigError(f"descriptor {self.name!r} repeats a source column")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered collection of descriptors; the feature-vector contract."""

    descriptors: tuple[FeatureDescriptor, ...]

    def __post_init__(self):
        names = [d.name for d in self.descriptors]
        if len(set(names)) != len(names):
            raise ConfigError("schema contains duplicate descriptor names")
        if not self.descriptors:
            raise ConfigError("schema must contain at least one descriptor")

    @property
    def n_features(self) -> int:
        return len(self.descriptors)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.descriptors)

    @property
    def source_columns(self) -> tuple[str, ...]:
        """All raw columns the schema consumes, in descriptor order."""
        out: list[str] = []
        seen: set[str] = set()
        for d in self.descriptors:
            for c in d.source_columns:
                if c not in seen:
                    seen.add(c)
                    out.append(c)
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "descriptors": [
                {
                    "name": d.name,
                    "kind": d.kind,
                    "aggregation": d.aggregation,
                    "source_columns": list(d.source_columns),
                }
                for d in self.descriptors
            ]
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureSchema":
        try:
            rows = payload["descriptors"]
        except (TypeError, KeyError):
            raise ConfigError("schema document must have a 'descriptors' list")
        descriptors = []
        for row in rows:
            try:
                descriptors.append(
                    FeatureDescriptor(
                        name=row["name"],
                        kind=row["kind"],
                        source_columns=tuple(row["source_columns"]),
                        aggregation=row["aggregation"],
                    )
                )
            except KeyError as missing:
                raise ConfigError(f"schema descriptor missing field {missing}")
        return cls(descriptors=tuple(descriptors))

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class FrameRecord:
    """One raw frame: bookkeeping fields plus the raw column values."""

    subject_id: str
    clip_id: str
    frame_index: int
    prompt_emotion: str
    actual_emotion: str | None
    raw: dict[str, float] = field(repr=False)


@dataclass
class FeatureVector:
    """Aggregated frame: one value per schema descriptor."""

    values: np.ndarray
    schema_hash: str


# AU sets: 17 intensity-tracked units, plus AU28 which is presence-only.
_AU_INTENSITY_IDS = (
    "01", "02", "04", "05", "06", "07", "09", "10", "12",
    "14", "15", "17", "20", "23", "25", "26", "45",
)
_AU_PRESENCE_IDS = (
    "01", "02", "04", "05", "06", "07", "09", "10", "12",
    "14", "15", "17", "20", "23", "25", "26", "28", "45",
)

_N_EYE_LANDMARKS = 56
_N_FACE_LANDMARKS = 68


def default_schema() -> FeatureSchema:
    """The canonical 51-descriptor schema.

    17 AU intensities, 18 AU presences, 3 gaze axis means, 2 gaze angles,
    3 eye-landmark axis means, 6 head-pose components and 2 face-landmark
    axis means.  Multi-column descriptors collapse by arithmetic mean.
    """
    ds: list[FeatureDescriptor] = []
    for au in _AU_INTENSITY_IDS:
        ds.append(
            FeatureDescriptor(
                name=f"au{au}_intensity",
                kind="au_intensity",
                source_columns=(f"AU{au}_r",),
                aggregation="identity",
            )
        )
    for au in _AU_PRESENCE_IDS:
        ds.append(
            FeatureDescriptor(
                name=f"au{au}_presence",
                kind="au_presence",
                source_columns=(f"AU{au}_c",),
                aggregation="identity",
            )
        )
    for axis in ("x", "y", "z"):
        ds.append(
            FeatureDescriptor(
                name=f"gaze_{axis}_mean",
                kind="gaze_axis_mean",
                source_columns=(f"gaze_0_{axis}", f"gaze_1_{axis}"),
                aggregation="mean",
            )
        )
    for axis in ("x", "y"):
        ds.append(
            FeatureDescriptor(
                name=f"gaze_angle_{axis}",
                kind="gaze_angle",
                source_columns=(f"gaze_angle_{axis}",),
                aggregation="identity",
            )
        )
    for axis in ("x", "y", "z"):
        cols = tuple(
            f"eye_lmk_{axis.upper()}_{i}" for i in range(_N_EYE_LANDMARKS)
        )
        ds.append(
            FeatureDescriptor(
                name=f"eye_landmark_{axis}_mean",
                kind="eye_landmark_axis_mean",
                source_columns=cols,
                aggregation="mean",
            )
        )
    for comp in ("Tx", "Ty", "Tz", "Rx", "Ry", "Rz"):
        ds.append(
            FeatureDescriptor(
                name=f"head_pose_{comp.lower()}",
                kind="head_pose_component",
                source_columns=(f"pose_{comp}",),
                aggregation="identity",
            )
        )
    for axis in ("x", "y"):
        cols = tuple(f"{axis}_{i}" for i in range(_N_FACE_LANDMARKS))
        ds.append(
            FeatureDescriptor(
                name=f"face_landmark_{axis}_mean",
                kind="face_landmark_axis_mean",
                source_columns=cols,
                aggregation="mean",
            )
        )
    return FeatureSchema(descriptors=tuple(ds))


def load_schema(path: str | Path) -> FeatureSchema:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"schema file {path} is not valid JSON: {err}")
    return FeatureSchema.from_dict(payload)


def save_schema(schema: FeatureSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _normalize_label(value, kind: str, allowed: tuple[str, ...], row: int):
    if value is None:
        return None
    text = str(value).strip().lower()
    if text in ("", "nan"):
        return None
    if text not in allowed:
        raise InvalidLabel(kind, text, row=row)
    return text


def load_table(
    paths: str | Path | Sequence[str | Path],
    schema: FeatureSchema,
    threads: int = 1,
) -> pd.DataFrame:
    """Load and validate frame CSVs into one canonical DataFrame.

    Accepts one path or several (several files are concatenated before
    validation, so duplicate detection spans files).  The result is sorted by
    (subject, clip, frame) and restricted to the meta columns plus the
    schema's source columns.  Raw values must parse as finite floats.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    paths = [Path(p) for p in paths]
    if not paths:
        raise ConfigError("no input files given")

    def read_one(p: Path) -> pd.DataFrame:
        frame = pd.read_csv(p, dtype=str, keep_default_na=False, comment="#")
        frame.insert(0, "_source", str(p))
        return frame

    if threads > 1 and len(paths) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(read_one, paths))
    else:
        parts = [read_one(p) for p in paths]

    for part, path in zip(parts, paths):
        for col in META_COLUMNS:
            if col not in part.columns:
                raise MissingColumn(col, path=str(path))
        for col in schema.source_columns:
            if col not in part.columns:
                raise MissingColumn(col, path=str(path))

    df = pd.concat(parts, ignore_index=True) if len(parts) > 1 else parts[0]

    subjects = df["subject"].astype(str).str.strip()
    clips = df["clip"].astype(str).str.strip()
    frames_numeric = pd.to_numeric(df["frame"], errors="coerce")
    bad_frame = ~np.isfinite(frames_numeric.to_numpy(np.float64))
    if bad_frame.any():
        r = int(np.argwhere(bad_frame)[0][0])
        raise NonFiniteValue(row=r, column="frame", value=df.iloc[r]["frame"])
    if (frames_numeric % 1 != 0).any():
        r = int(np.argwhere((frames_numeric % 1 != 0).to_numpy())[0][0])
        raise NonFiniteValue(row=r, column="frame", value=df.iloc[r]["frame"])
    frames = frames_numeric.astype(np.int64)

    prompts = []
    actuals = []
    for row, (p, a) in enumerate(zip(df["prompt"], df["actual"])):
        prompts.append(_normalize_label(p, "prompt", PROMPT_EMOTIONS, row))
        actuals.append(_normalize_label(a, "actual", ACTUAL_EMOTIONS, row))
    for row, p in enumerate(prompts):
        if p is None:
            raise InvalidLabel("prompt", "", row=row)

    source_cols = list(schema.source_columns)
    raw = df[source_cols].apply(pd.to_numeric, errors="coerce").to_numpy(np.float64)
    finite = np.isfinite(raw)
    if not finite.all():
        bad = np.argwhere(~finite)
        r, c = int(bad[0][0]), int(bad[0][1])
        raise NonFiniteValue(row=r, column=source_cols[c], value=df.iloc[r][source_cols[c]])

    data = {
        "subject": subjects,
        "clip": clips,
        "frame": frames,
        "prompt": pd.array(prompts, dtype=object),
        "actual": pd.array(actuals, dtype=object),
    }
    for j, col in enumerate(source_cols):
        data[col] = raw[:, j]
    out = pd.DataFrame(data)

    dup = out.duplicated(subset=["subject", "clip", "frame"], keep=False)
    if dup.any():
        first = out[dup].iloc[0]
        raise DuplicateFrame(first["subject"], first["clip"], int(first["frame"]))

    out = out.sort_values(["subject", "clip", "frame"], kind="stable")
    return out.reset_index(drop=True)


def frames_from_table(df: pd.DataFrame, schema: FeatureSchema) -> list[FrameRecord]:
    source_cols = list(schema.source_columns)
    records = []
    raw = df[source_cols].to_numpy(np.float64)
    for i in range(len(df)):
        row = df.iloc[i]
        records.append(
            FrameRecord(
                subject_id=row["subject"],
                clip_id=row["clip"],
                frame_index=int(row["frame"]),
                prompt_emotion=row["prompt"],
                actual_emotion=row["actual"],
                raw=dict(zip(source_cols, raw[i].tolist())),
            )
        )
    return records


def load_frames(
    path: str | Path | Sequence[str | Path],
    schema: FeatureSchema,
    threads: int = 1,
) -> list[FrameRecord]:
    """Record-level loader: validated frames sorted by (subject, clip, frame)."""
    return frames_from_table(load_table(path, schema, threads=threads), schema)


def aggregate(record: FrameRecord, schema: FeatureSchema) -> FeatureVector:
    """Collapse one frame's raw columns into the schema's feature vector."""
    values = np.empty(schema.n_features, dtype=np.float64)
    for i, d in enumerate(schema.descriptors):
        try:
            cols = [record.raw[c] for c in d.source_columns]
        except KeyError as missing:
            raise MissingColumn(str(missing.args[0]))
        if d.aggregation == "identity":
            values[i] = cols[0]
        else:
            values[i] = float(np.mean(cols))
    if not np.isfinite(values).all():
        bad = int(np.argwhere(~np.isfinite(values))[0][0])
        raise NonFiniteValue(row=record.frame_index, column=schema.descriptors[bad].name)
    return FeatureVector(values=values, schema_hash=schema.hash())


def aggregate_table(df: pd.DataFrame, schema: FeatureSchema) -> np.ndarray:
    """Vectorized aggregation of a validated table; rows align with ``df``."""
    out = np.empty((len(df), schema.n_features), dtype=np.float64)
    for i, d in enumerate(schema.descriptors):
        block = df[list(d.source_columns)].to_numpy(np.float64)
        if d.aggregation == "identity":
            out[:, i] = block[:, 0]
        else:
            out[:, i] = block.mean(axis=1)
    return out


def frames_to_json(records: Iterable[FrameRecord]) -> str:
    payload = [
        {
            "subject": r.subject_id,
            "clip": r.clip_id,
            "frame": r.frame_index,
            "prompt": r.prompt_emotion,
            "actual": r.actual_emotion,
            "raw": {k: r.raw[k] for k in sorted(r.raw)},
        }
        for r in records
    ]
    return json.dumps(payload, sort_keys=True, indent=2)


def frames_from_json(text: str) -> list[FrameRecord]:
    payload = json.loads(text)
    return [
        FrameRecord(
            subject_id=row["subject"],
            clip_id=row["clip"],
            frame_index=int(row["frame"]),
            prompt_emotion=row["prompt"],
            actual_emotion=row["actual"],
            raw=dict(row["raw"]),
        )
        for row in payload
    ]


def label_crosstabs(df: pd.DataFrame) -> dict[str, dict]:
    """Per-subject label bookkeeping: actual-by-prompt counts and totals."""
    out: dict[str, dict] = {}
    for subject, group in df.groupby("subject", sort=True):
        labeled = group[group["actual"].notna()]
        table: dict[str, dict[str, int]] = {
            emo: {p: 0 for p in PROMPT_EMOTIONS} for emo in ACTUAL_EMOTIONS
        }
        for (actual, prompt), count in (
            labeled.groupby(["actual", "prompt"]).size().items()
        ):
            table[actual][prompt] = int(count)
        totals = {emo: int(sum(table[emo].values())) for emo in ACTUAL_EMOTIONS}
        out[str(subject)] = {
            "actual_by_prompt": table,
            "actual_totals": totals,
            "n_frames": int(len(group)),
            "n_labeled": int(len(labeled)),
        }
    return out
