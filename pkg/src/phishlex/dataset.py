"""Allowlist/blocklist ingestion, curation, labelling and train/test split."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDataset, FormatError, HostError, TooFewExamples
from .features import FeatureVector, extract, feature_matrix, read_feature_csv, write_feature_csv
from .url_model import DomainParts, RawEntry, Source, decompose, is_ip_literal, normalize

__all__ = [
    "Label",
    "LabeledExample",
    "Provenance",
    "LabeledDataset",
    "SplitConfig",
    "load_allowlist",
    "load_blocklist",
    "curate",
    "split",
]


class Label(enum.IntEnum):
    BENIGN = 0
    MALICIOUS = 1

    def __str__(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise FormatError(f"unknown label {text!r}") from None


@dataclass(frozen=True)
class LabeledExample:
    host: str
    parts: DomainParts
    features: FeatureVector
    label: Label

    @classmethod
    def from_host(cls, host: str, label: Label) -> "LabeledExample":
        parts = decompose(host)
        return cls(host, parts, extract(parts), label)


@dataclass
class Provenance:
    allow_read: int = 0
    block_read: int = 0
    malformed_dropped: int = 0
    ip_literals_dropped: int = 0
    duplicates_dropped: int = 0
    overlaps_dropped: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(vars(self))


@dataclass
class LabeledDataset:
    examples: list[LabeledExample]
    provenance: Provenance = field(default_factory=Provenance)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def hosts(self) -> list[str]:
        return [ex.host for ex in self.examples]

    def class_counts(self) -> tuple[int, int]:
        """(benign, malicious)"""
        n_mal = sum(1 for ex in self.examples if ex.label is Label.MALICIOUS)
        return len(self.examples) - n_mal, n_mal

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Feature matrix (n x 21) and 0/1 label vector (1 = malicious)."""
        X = feature_matrix([ex.features for ex in self.examples])
        y = np.array([int(ex.label) for ex in self.examples], dtype=np.int64)
        return X, y

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        return LabeledDataset([self.examples[i] for i in indices])

    def to_csv(self, path) -> int:
        return write_feature_csv(
            path, ((ex.host, ex.features, str(ex.label)) for ex in self.examples)
        )

    @classmethod
    def from_csv(cls, path) -> "LabeledDataset":
        examples = []
        seen: set[str] = set()
        for host, fv, label in read_feature_csv(path):
            if host in seen:
                raise FormatError(f"{path}: duplicate host {host!r}")
            seen.add(host)
            examples.append(LabeledExample(host, decompose(host), fv, Label.parse(label)))
        return cls(examples)


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.5
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


# -- loading -----------------------------------------------------------------


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8-sig")


def load_allowlist(path, limit: int | None = None) -> list[RawEntry]:
    """Read a ``domain`` or ``rank,domain`` list, keeping file order."""
    out: list[RawEntry] = []
    for lineno, row in enumerate(csv.reader(io.StringIO(_read_text(path))), start=1):
        if not row or not "".join(row).strip():
            continue
        if len(row) > 2:
            raise FormatError(f"{path}:{lineno}: expected 'domain' or 'rank,domain'")
        if lineno == 1 and [c.strip().lower() for c in row] in (["rank", "domain"], ["domain"]):
            continue
        domain = row[-1].strip()
        if not domain:
            raise FormatError(f"{path}:{lineno}: empty domain field")
        out.append(RawEntry(domain, Source.ALLOWLIST))
        if limit is not None and len(out) >= limit:
            break
    return out


def load_blocklist(path, limit: int | None = None) -> list[RawEntry]:
    """Read a Phishtank-style CSV (``url`` column) or a bare one-URL-per-line file."""
    text = _read_text(path)
    lines = text.splitlines()
    first = next((ln for ln in lines if ln.strip()), None)
    if first is None:
        return []
    header = [c.strip().lower() for c in next(csv.reader([first]))]
    out: list[RawEntry] = []
    if "url" in header:
        reader = csv.DictReader(io.StringIO(text))
        reader.fieldnames = [c.strip().lower() for c in reader.fieldnames or []]
        urls: Iterable[str] = (row.get("url") or "" for row in reader)
    elif len(header) > 1 and not any("." in c or "/" in c for c in header):
        raise FormatError(f"{path}: header present but no 'url' column")
    else:
        urls = lines
    for url in urls:
        if not url.strip():
            continue
        out.append(RawEntry(url.strip(), Source.BLOCKLIST))
        if limit is not None and len(out) >= limit:
            break
    return out


def load_labeled_hosts(path) -> LabeledDataset:
    """Read a ``host,Type`` file of already-labeled hosts into a dataset."""
    reader = csv.DictReader(io.StringIO(_read_text(path)))
    if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["host", "Type"]:
        raise FormatError(f"{path}: expected header 'host,Type'")
    examples = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        host = normalize(row["host"])
        if host in seen:
            raise FormatError(f"{path}:{lineno}: duplicate host {host!r}")
        seen.add(host)
        examples.append(LabeledExample.from_host(host, Label.parse(row["Type"])))
    return LabeledDataset(examples)


def load_dataset(path) -> LabeledDataset:
    """Load a feature CSV or a plain ``host,Type`` file, chosen by header."""
    with open(path, encoding="utf-8-sig") as fh:
        header = fh.readline().strip()
    if header.replace(" ", "") == "host,Type":
        return load_labeled_hosts(path)
    return LabeledDataset.from_csv(path)


# -- curation ----------------------------------------------------------------


def _survivors(entries: Sequence[RawEntry], prov: Provenance) -> list[str]:
    kept: list[str] = []
    seen: set[str] = set()
    for entry in entries:
        try:
            host = normalize(entry)
            decompose(host)
        except HostError:
            prov.malformed_dropped += 1
            continue
        if is_ip_literal(host):
            prov.ip_literals_dropped += 1
        elif host in seen:
            prov.duplicates_dropped += 1
        else:
            seen.add(host)
            kept.append(host)
    return kept


def curate(allow: Sequence[RawEntry], block: Sequence[RawEntry]) -> LabeledDataset:
    """Normalize, filter, de-duplicate and label the two lists.

    Hosts found on both lists are dropped from both sides.
    """
    prov = Provenance(allow_read=len(allow), block_read=len(block))
    benign = _survivors(allow, prov)
    malicious = _survivors(block, prov)
    overlap = set(benign) & set(malicious)
    prov.overlaps_dropped = 2 * len(overlap)
    examples = [
        LabeledExample.from_host(h, Label.BENIGN) for h in benign if h not in overlap
    ] + [LabeledExample.from_host(h, Label.MALICIOUS) for h in malicious if h not in overlap]
    ds = LabeledDataset(examples, prov)
    n_benign, n_mal = ds.class_counts()
    if n_benign == 0 or n_mal == 0:
        raise EmptyDataset(f"curation left {n_benign} benign and {n_mal} malicious hosts")
    return ds


# -- splitting ---------------------------------------------------------------


def split(ds: LabeledDataset, cfg: SplitConfig = SplitConfig()) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded hold-out split; the train side gets ``floor(n * train_fraction)``."""
    labels = np.array([int(ex.label) for ex in ds.examples], dtype=np.int64)
    for lab in Label:
        if np.count_nonzero(labels == lab) < 2:
            raise TooFewExamples(f"need at least 2 {lab} examples to split")
    rng = np.random.default_rng(cfg.seed)
    train_idx: list[int] = []
    if cfg.stratified:
        for lab in Label:
            idx = rng.permutation(np.flatnonzero(labels == lab))
            train_idx.extend(idx[: math.floor(len(idx) * cfg.train_fraction)].tolist())
    else:
        idx = rng.permutation(len(ds))
        train_idx = idx[: math.floor(len(idx) * cfg.train_fraction)].tolist()
    chosen = set(train_idx)
    train = sorted(chosen)
    test = [i for i in range(len(ds)) if i not in chosen]
    return ds.subset(train), ds.subset(test)
