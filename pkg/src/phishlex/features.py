"""The 21 lexical features computed from a decomposed host.

The short names are the customary column names of feature CSVs; where a
name's prefix suggests a different label (``THUniqueChars`` is the TLD, not
the 3LD), the description below is what is computed:

==  =============  ==========================================
1   UniqueChars    distinct characters in the 3LD
2   TWUniqueChars  distinct characters in the 2LD
3   THUniqueChars  distinct characters in the TLD
4   SDLength       subdomain length
5   DLength        domain length
6   TLDLength      TLD length
7   SLDLength      2LD length
8   THLDLength     3LD length
9   numnum         digits in the 3LD
10  TWnumnum       digits in the 2LD
11  THnumnum       digits in the TLD
12  SubSymbols     symbols in the subdomain
13  DomSymbols     symbols in the domain
14  SuffSymbols    symbols in the TLD
15  Symbols        symbols in the whole host (dots included)
16  Charcontrate   character continuity rate of the host
17  TWLDentropy    Shannon entropy of the 2LD
18  THLDentropy    Shannon entropy of the 3LD
19  Domentropy     Shannon entropy of the TLD
20  deviation      population std-dev of features 17-19
21  mean           mean of features 17-19
==  =============  ==========================================
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError
from .url_model import DomainParts

FEATURE_NAMES: tuple[str, ...] = (
    "UniqueChars",
    "TWUniqueChars",
    "THUniqueChars",
    "SDLength",
    "DLength",
    "TLDLength",
    "SLDLength",
    "THLDLength",
    "numnum",
    "TWnumnum",
    "THnumnum",
    "SubSymbols",
    "DomSymbols",
    "SuffSymbols",
    "Symbols",
    "Charcontrate",
    "TWLDentropy",
    "THLDentropy",
    "Domentropy",
    "deviation",
    "mean",
)
N_FEATURES = len(FEATURE_NAMES)


class CharClass(enum.Enum):
    LETTER = "letter"
    DIGIT = "digit"
    SYMBOL = "symbol"


def char_class(ch: str) -> CharClass:
    if "0" <= ch <= "9":
        return CharClass.DIGIT
    if ch.isalpha():
        return CharClass.LETTER
    return CharClass.SYMBOL


def unique_chars(s: str) -> int:
    return len(set(s))


def count_class(s: str, c: CharClass) -> int:
    return sum(1 for ch in s if char_class(ch) is c)


def continuity_rate(s: str) -> float:
    """Sum of the longest letter, digit and symbol runs over the string length.

    >>> round(continuity_rate("abcdef-12345ab1--.ab1"), 4)
    0.6667
    """
    if not s:
        return 0.0
    longest = dict.fromkeys(CharClass, 0)
    for cls, run in itertools.groupby(s, key=char_class):
        longest[cls] = max(longest[cls], sum(1 for _ in run))
    return sum(longest.values()) / len(s)


def shannon_entropy(s: str) -> float:
    """Base-2 entropy of the character frequency distribution of ``s``."""
    n = len(s)
    if n == 0:
        return 0.0
    h = -sum((k / n) * math.log2(k / n) for k in Counter(s).values())
    return h if h > 0.0 else 0.0


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]

    names = FEATURE_NAMES

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} values, got {len(self.values)}")

    def by_id(self, feature_id: int) -> float:
        """Value of a feature by its 1-based id."""
        return self.values[feature_id - 1]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def extract(parts: DomainParts) -> FeatureVector:
    digit, symbol = CharClass.DIGIT, CharClass.SYMBOL
    entropies = (
        shannon_entropy(parts.sld),
        shannon_entropy(parts.thld),
        shannon_entropy(parts.tld),
    )
    values = (
        unique_chars(parts.thld),
        unique_chars(parts.sld),
        unique_chars(parts.tld),
        len(parts.subdomain),
        len(parts.domain),
        len(parts.tld),
        len(parts.sld),
        len(parts.thld),
        count_class(parts.thld, digit),
        count_class(parts.sld, digit),
        count_class(parts.tld, digit),
        count_class(parts.subdomain, symbol),
        count_class(parts.domain, symbol),
        count_class(parts.tld, symbol),
        count_class(parts.host, symbol),
        continuity_rate(parts.host),
        *entropies,
        statistics.pstdev(entropies),
        (entropies[0] + entropies[1] + entropies[2]) / 3,
    )
    return FeatureVector(tuple(float(v) for v in values))


# -- CSV -------------------------------------------------------------------

CSV_HEADER: tuple[str, ...] = ("host", *FEATURE_NAMES, "Type")


def format_value(v: float) -> str:
    return format(v, ".12g")


def write_feature_csv(path, rows: Iterable[tuple[str, FeatureVector, str]]) -> int:
    """Write ``(host, features, label)`` rows; returns the row count."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for host, fv, label in rows:
            writer.writerow([host, *(format_value(v) for v in fv.values), label])
            n += 1
    return n


def read_feature_csv(path) -> list[tuple[str, FeatureVector, str]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise FormatError(f"{path}: not a feature CSV (bad header)")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise FormatError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            rows.append((row[0], FeatureVector(tuple(float(v) for v in row[1:-1])), row[-1]))
    return rows


def feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        return np.empty((0, N_FEATURES))
    return np.array([fv.values for fv in vectors], dtype=float)
