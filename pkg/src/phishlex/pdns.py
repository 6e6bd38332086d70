"""passivedns log parsing and the 12-hour de-duplication cache.

Log lines carry nine ``||``-separated fields::

    timestamp||client||server||class||query||qtype||answer||ttl||count

Records sharing ``(query, qtype, answer)`` collapse into one aggregate until
12 hours have passed since that aggregate was emitted; the next sighting
after that emits a fresh aggregate. An aggregate keeps the oldest timestamp,
the highest TTL and one count per sighting.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

from .errors import ClockSkew, FieldCountError, NumericFieldError

log = logging.getLogger(__name__)

DELIMITER = "||"
WINDOW_SECONDS = 12 * 3600
SKEW_SECONDS = 60.0

Key = tuple[str, str, str]


@dataclass(frozen=True)
class PdnsRecord:
    timestamp: float
    client: str
    server: str
    rr_class: str
    query: str
    qtype: str
    answer: str
    ttl: int
    count: int

    @property
    def key(self) -> Key:
        return (self.query, self.qtype, self.answer)


@dataclass
class AggregatedPdnsEntry:
    key: Key
    first_seen: float
    max_ttl: int
    count: int
    last_emitted: float

    @property
    def query(self) -> str:
        return self.key[0]


def _int_field(name: str, text: str, minimum: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise NumericFieldError(f"{name} is not an integer: {text!r}") from None
    if value < minimum:
        raise NumericFieldError(f"{name} must be >= {minimum}, got {value}")
    return value


def parse_line(line: str, delimiter: str = DELIMITER) -> PdnsRecord:
    fields = line.rstrip("\r\n").split(delimiter)
    if len(fields) != 9:
        raise FieldCountError(f"expected 9 fields, got {len(fields)}")
    ts, client, server, rr_class, query, qtype, answer, ttl, count = fields
    try:
        timestamp = float(ts)
    except ValueError:
        raise NumericFieldError(f"timestamp is not numeric: {ts!r}") from None
    if not query:
        raise FieldCountError("empty query field")
    return PdnsRecord(
        timestamp=timestamp,
        client=client,
        server=server,
        rr_class=rr_class,
        query=query,
        qtype=qtype,
        answer=answer,
        ttl=_int_field("ttl", ttl, 0),
        count=_int_field("count", count, 1),
    )


def read_log(stream: Iterable[str], delimiter: str = DELIMITER, strict: bool = False) -> Iterator[PdnsRecord]:
    """Parse a log stream, skipping blank lines; bad lines are logged unless ``strict``."""
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            yield parse_line(line, delimiter)
        except (FieldCountError, NumericFieldError) as exc:
            if strict:
                raise
            log.warning("line %d skipped: %s", lineno, exc)


class Aggregator:
    """Single-owner aggregation cache.

    ``add`` returns the entry when a record opens a new aggregate and ``None``
    when it merges into an open one. Aggregates whose window has closed are
    evicted from the cache (they stay in :attr:`emitted`).
    """

    def __init__(self, window: float = WINDOW_SECONDS, skew: float = SKEW_SECONDS):
        self.window = window
        self.skew = skew
        self.watermark = float("-inf")
        self.cache: dict[Key, AggregatedPdnsEntry] = {}
        self.emitted: list[AggregatedPdnsEntry] = []
        self.accepted = 0
        self.skew_dropped = 0

    def add(self, rec: PdnsRecord) -> AggregatedPdnsEntry | None:
        if rec.timestamp < self.watermark - self.skew:
            self.skew_dropped += 1
            raise ClockSkew(
                f"record at {rec.timestamp} is more than {self.skew}s behind {self.watermark}"
            )
        self.accepted += 1
        if rec.timestamp > self.watermark:
            self.watermark = rec.timestamp
            self._evict()
        entry = self.cache.get(rec.key)
        if entry is not None and rec.timestamp - entry.last_emitted < self.window:
            entry.count += 1
            entry.first_seen = min(entry.first_seen, rec.timestamp)
            entry.max_ttl = max(entry.max_ttl, rec.ttl)
            return None
        entry = AggregatedPdnsEntry(rec.key, rec.timestamp, rec.ttl, 1, rec.timestamp)
        self.cache[rec.key] = entry
        self.emitted.append(entry)
        return entry

    def _evict(self) -> None:
        # an aggregate cannot absorb anything once the watermark is a full
        # window plus the skew allowance past its emission
        horizon = self.watermark - self.window - self.skew
        stale = [k for k, e in self.cache.items() if e.last_emitted < horizon]
        for k in stale:
            del self.cache[k]


def aggregate(stream: Iterable[PdnsRecord], window: float = WINDOW_SECONDS, skew: float = SKEW_SECONDS) -> list[AggregatedPdnsEntry]:
    """Aggregate a record stream; skewed records are dropped and logged."""
    agg = Aggregator(window, skew)
    for rec in stream:
        try:
            agg.add(rec)
        except ClockSkew as exc:
            log.warning("dropped: %s", exc)
    return agg.emitted


AGGREGATE_HEADER = ("query", "qtype", "answer", "first_seen", "max_ttl", "count")


def _ts(v: float) -> str:
    return repr(v) if v != int(v) else str(int(v))


def aggregates_to_csv(entries: Iterable[AggregatedPdnsEntry], fh: TextIO | None = None) -> str:
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for e in entries:
        w.writerow([*e.key, _ts(e.first_seen), e.max_ttl, e.count])
    return buf.getvalue() if fh is None else ""


def query_hosts(entries: Iterable[AggregatedPdnsEntry]) -> Iterator[str]:
    """Distinct query names in emission order, trailing dot removed."""
    seen: set[str] = set()
    for e in entries:
        host = e.query.rstrip(".").lower()
        if host and host not in seen:
            seen.add(host)
            yield host
