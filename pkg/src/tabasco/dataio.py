"""Record files, manifests and partition/diagnostic outputs.

A dataset directory holds ``records.jsonl`` (one sample per line) and
``manifest.json``. Each record is::

    {"id": 0, "observed_label": 3, "probs": [...M...], "features": [...F...], "true_label": 3}

``true_label`` may be ``null`` for data exported from an external model.
Floats are written with ``repr`` precision, so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataIOError, ValidationError

RECORDS_FILE = "records.jsonl"
MANIFEST_FILE = "manifest.json"
PARTITION_FILE = "partition.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
PROB_TOL = 1e-6

PARTITION_COLUMNS = ("id", "class", "assignment")
DIAGNOSTIC_COLUMNS = (
    "class", "n", "n_clean", "n_noisy", "dimension", "branch", "target_class", "high_conf_size",
    "threshold_h", "wjsd_mean_low", "wjsd_mean_high", "wjsd_var_low", "wjsd_var_high",
    "acd_mean_near", "acd_mean_far", "acd_var_near", "acd_var_far",
    "threshold_d", "mu1", "mu2", "sigma1", "sigma2", "sigma_ratio", "partner_class", "warning",
)


@dataclass(frozen=True)
class SampleRecord:
    id: int
    observed_label: int
    probs: tuple[float, ...]
    features: tuple[float, ...]
    true_label: int | None = None

    def to_json(self) -> str:
        return json.dumps({
            "id": self.id,
            "observed_label": self.observed_label,
            "probs": list(self.probs),
            "features": list(self.features),
            "true_label": self.true_label,
        })


@dataclass(eq=False)
class Dataset:
    """Columnar, validated dataset. ``true_labels`` uses -1 for unknown."""

    ids: np.ndarray
    observed: np.ndarray
    probs: np.ndarray
    features: np.ndarray
    true_labels: np.ndarray
    num_classes: int
    manifest: dict = field(default_factory=dict)
    _groups: dict | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.ids.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def has_truth(self) -> bool:
        return self.n > 0 and bool(np.all(self.true_labels >= 0))

    def groups(self) -> dict[int, np.ndarray]:
        """Row indices per observed class, each sorted by sample id."""
        if self._groups is None:
            order = np.lexsort((self.ids, self.observed))
            labels = self.observed[order]
            self._groups = {int(c): order[labels == c] for c in np.unique(labels)}
        return self._groups

    def observed_counts(self) -> list[int]:
        return np.bincount(self.observed, minlength=self.num_classes).tolist()

    def intrinsic_counts(self) -> list[int]:
        return np.bincount(self.true_labels[self.true_labels >= 0], minlength=self.num_classes).tolist()

    def records(self) -> Iterator[SampleRecord]:
        for i in range(self.n):
            t = int(self.true_labels[i])
            yield SampleRecord(
                id=int(self.ids[i]),
                observed_label=int(self.observed[i]),
                probs=tuple(self.probs[i].tolist()),
                features=tuple(self.features[i].tolist()),
                true_label=None if t < 0 else t,
            )

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.ids[rows], self.observed[rows], self.probs[rows], self.features[rows],
                       self.true_labels[rows], self.num_classes, dict(self.manifest))

    def without_truth(self) -> "Dataset":
        return Dataset(self.ids, self.observed, self.probs, self.features,
                       np.full_like(self.true_labels, -1), self.num_classes, dict(self.manifest))

    @classmethod
    def from_records(cls, records: Iterable[SampleRecord], num_classes: int, feature_dim: int | None = None,
                     manifest: dict | None = None) -> "Dataset":
        records = list(records)
        m = num_classes
        f = feature_dim if feature_dim is not None else (len(records[0].features) if records else 0)
        return cls(
            ids=np.array([r.id for r in records], dtype=np.int64),
            observed=np.array([r.observed_label for r in records], dtype=np.int64),
            probs=np.array([r.probs for r in records], dtype=np.float64).reshape(len(records), m),
            features=np.array([r.features for r in records], dtype=np.float64).reshape(len(records), f),
            true_labels=np.array([-1 if r.true_label is None else r.true_label for r in records],
                                 dtype=np.int64),
            num_classes=m,
            manifest=dict(manifest or {}),
        )


def build_manifest(dataset: Dataset, **extra) -> dict:
    manifest = {
        "num_classes": dataset.num_classes,
        "feature_dim": dataset.feature_dim,
        "record_count": dataset.n,
        "observed_counts": dataset.observed_counts(),
    }
    if dataset.has_truth:
        manifest["intrinsic_counts"] = dataset.intrinsic_counts()
    for key, value in dataset.manifest.items():
        manifest.setdefault(key, value)
    manifest.update(extra)
    return manifest


def _paths(path) -> tuple[Path, Path]:
    path = Path(path)
    if not path.exists():
        raise DataIOError(f"dataset path not found: {path}")
    if path.is_dir():
        return path / RECORDS_FILE, path / MANIFEST_FILE
    return path, path.with_name(MANIFEST_FILE)


def write_dataset(dataset: Dataset, path, **manifest_extra) -> Path:
    """Write ``records.jsonl`` and ``manifest.json`` into directory ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / RECORDS_FILE, "w", encoding="utf-8", newline="\n") as fh:
            for rec in dataset.records():
                fh.write(rec.to_json())
                fh.write("\n")
        manifest = build_manifest(dataset, **manifest_extra)
        (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write dataset to {out}: {exc}") from exc
    return out


def _fail(code, lineno, rec_id, fieldname, msg):
    where = f"line {lineno}" + (f", record id {rec_id}" if rec_id is not None else "")
    raise ValidationError(f"{where}, field '{fieldname}': {msg}", code=code)


def _parse_record(line: str, lineno: int, m: int, f: int) -> SampleRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        _fail("malformed_line", lineno, None, "<json>", str(exc))
    if not isinstance(obj, dict):
        _fail("malformed_line", lineno, None, "<json>", "record must be a JSON object")
    rec_id = obj.get("id")
    for key in ("id", "observed_label", "probs", "features"):
        if key not in obj:
            _fail("malformed_line", lineno, rec_id, key, "missing")
    if not isinstance(rec_id, int) or isinstance(rec_id, bool) or rec_id < 0:
        _fail("malformed_line", lineno, rec_id, "id", "must be a non-negative integer")
    probs, feats = obj["probs"], obj["features"]
    if not isinstance(probs, list) or not all(isinstance(v, (int, float)) for v in probs):
        _fail("malformed_line", lineno, rec_id, "probs", "must be an array of numbers")
    if not isinstance(feats, list) or not all(isinstance(v, (int, float)) for v in feats):
        _fail("malformed_line", lineno, rec_id, "features", "must be an array of numbers")
    if len(probs) != m:
        _fail("dimension_mismatch", lineno, rec_id, "probs", f"length {len(probs)} != num_classes {m}")
    if len(feats) != f:
        _fail("dimension_mismatch", lineno, rec_id, "features", f"length {len(feats)} != feature_dim {f}")
    label = obj["observed_label"]
    if not isinstance(label, int) or not 0 <= label < m:
        _fail("label_out_of_range", lineno, rec_id, "observed_label", f"{label!r} not in [0, {m})")
    truth = obj.get("true_label")
    if truth is not None and (not isinstance(truth, int) or not 0 <= truth < m):
        _fail("label_out_of_range", lineno, rec_id, "true_label", f"{truth!r} not in [0, {m})")
    if any(not math.isfinite(v) or v < 0 or v > 1 for v in probs):
        _fail("probs_not_normalized", lineno, rec_id, "probs", "entries must lie in [0, 1]")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        _fail("probs_not_normalized", lineno, rec_id, "probs", f"sums to {total!r}")
    if any(not math.isfinite(v) for v in feats):
        _fail("invalid_feature", lineno, rec_id, "features", "entries must be finite")
    if not any(v != 0 for v in feats):
        _fail("invalid_feature", lineno, rec_id, "features", "zero-norm feature vector")
    return SampleRecord(rec_id, label, tuple(float(v) for v in probs), tuple(float(v) for v in feats), truth)


def read_manifest(path) -> dict:
    _, manifest_path = _paths(path)
    try:
        return json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataIOError(f"manifest not found: {manifest_path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {manifest_path} is not valid JSON: {exc}", code="bad_manifest") from exc


def read_dataset(path) -> Dataset:
    """Load and validate a dataset directory (or a records file with a sibling manifest)."""
    records_path, _ = _paths(path)
    manifest = read_manifest(path)
    try:
        m = int(manifest["num_classes"])
        f = int(manifest["feature_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"manifest lacks num_classes/feature_dim: {exc}", code="bad_manifest") from exc

    records = []
    seen = set()
    try:
        with open(records_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = _parse_record(line, lineno, m, f)
                if rec.id in seen:
                    _fail("duplicate_id", lineno, rec.id, "id", "duplicate")
                seen.add(rec.id)
                records.append(rec)
    except FileNotFoundError as exc:
        raise DataIOError(f"records file not found: {records_path}") from exc
    if not records:
        raise ValidationError(f"{records_path} contains no records", code="empty_dataset")

    dataset = Dataset.from_records(records, m, f, manifest=manifest)
    if "record_count" in manifest and int(manifest["record_count"]) != dataset.n:
        raise ValidationError(
            f"manifest record_count {manifest['record_count']} != {dataset.n} records", code="manifest_mismatch")
    if "observed_counts" in manifest and list(manifest["observed_counts"]) != dataset.observed_counts():
        raise ValidationError("manifest observed_counts disagree with the records", code="manifest_mismatch")
    return dataset


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(getattr(value, "value", value))


def write_partition(outcomes: dict, path, run_info: dict | None = None) -> tuple[Path, Path]:
    """Write the per-sample assignment and per-class diagnostics CSVs into ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for c, oc in outcomes.items():
            rows += [(int(i), c, "clean") for i in oc.clean_ids]
            rows += [(int(i), c, "noisy") for i in oc.noisy_ids]
        rows.sort()
        with open(out / PARTITION_FILE, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PARTITION_COLUMNS)
            w.writerows(rows)
        with open(out / DIAGNOSTICS_FILE, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DIAGNOSTIC_COLUMNS)
            for c in sorted(outcomes):
                oc = outcomes[c]
                base = {"class": c, "n_clean": oc.clean_ids.size, "n_noisy": oc.noisy_ids.size,
                        "dimension": oc.dimension, "branch": oc.branch, **oc.diagnostics}
                base.setdefault("n", oc.clean_ids.size + oc.noisy_ids.size)
                w.writerow([_fmt(base.get(col)) for col in DIAGNOSTIC_COLUMNS])
        if run_info is not None:
            (out / "run.json").write_text(json.dumps(run_info, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write partition to {out}: {exc}") from exc
    return out / PARTITION_FILE, out / DIAGNOSTICS_FILE


def read_partition(path) -> dict[int, tuple[int, bool]]:
    """Map sample id to ``(class, is_clean)``."""
    p = Path(path)
    if p.is_dir():
        p = p / PARTITION_FILE
    try:
        with open(p, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != PARTITION_COLUMNS:
                raise ValidationError(f"{p}: expected columns {PARTITION_COLUMNS}", code="bad_partition")
            out = {}
            for row in reader:
                if row["assignment"] not in ("clean", "noisy"):
                    raise ValidationError(f"{p}: bad assignment {row['assignment']!r}", code="bad_partition")
                out[int(row["id"])] = (int(row["class"]), row["assignment"] == "clean")
            return out
    except FileNotFoundError as exc:
        raise DataIOError(f"partition file not found: {p}") from exc


def write_csv(rows: list[dict], columns, path) -> Path:
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row.get(col)) for col in columns])
    except OSError as exc:
        raise DataIOError(f"cannot write {p}: {exc}") from exc
    return p


def read_diagnostics(path) -> dict[int, dict]:
    """Per-class diagnostics rows as strings, keyed by class; ``{}`` if absent."""
    p = Path(path)
    if p.is_dir():
        p = p / DIAGNOSTICS_FILE
    if not p.exists():
        return {}
    try:
        with open(p, encoding="utf-8", newline="") as fh:
            return {int(row["class"]): row for row in csv.DictReader(fh)}
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{p}: malformed diagnostics file: {exc}", code="bad_partition") from exc
    except OSError as exc:
        raise DataIOError(f"cannot read {p}: {exc}") from exc
