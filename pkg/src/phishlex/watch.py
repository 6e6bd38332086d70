"""Polling file watcher that classifies new hosts and appends alert records.

Each poll reads the complete lines appended to the input file since the
previous poll. A shrunken file, a replaced inode or a changed head is taken
as a rewrite and the file is reprocessed from the start. Malicious verdicts
are appended to the alert sink as one JSON object per line.

Scheduled retraining runs on a worker thread, writes the new model file
atomically and then swaps the in-memory model; a poll always reads the
current ``(model, digest)`` pair once and uses it for every line it handles.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import model_store
from .classify import classify_hosts
from .dataset import Label, load_dataset
from .errors import HostError
from .evaluate import train

log = logging.getLogger(__name__)

_HEAD_BYTES = 256


@dataclass(frozen=True)
class RetrainConfig:
    training_csv: Path
    every: float

    def __post_init__(self):
        if not self.every > 0:
            raise ValueError("retrain interval must be > 0")


@dataclass(frozen=True)
class WatchConfig:
    input_path: Path
    model_path: Path
    alert_sink: Path
    poll_interval: float = 3600.0
    retrain: RetrainConfig | None = None

    def __post_init__(self):
        if not self.poll_interval > 0:
            raise ValueError("poll_interval must be > 0")


@dataclass(frozen=True)
class AlertRecord:
    emitted_at: str
    host: str
    score: dict
    model_digest: str
    source_line: int
    predicted: str = "Malicious"

    def to_json(self) -> str:
        return json.dumps(
            {
                "emitted_at": self.emitted_at,
                "host": self.host,
                "predicted": self.predicted,
                "score": self.score,
                "model_digest": self.model_digest,
                "source_line": self.source_line,
            },
            sort_keys=True,
        )


def read_alerts(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(ln) for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]


def _utcnow() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


class Watcher:
    def __init__(self, cfg: WatchConfig, clock: Callable[[], float] = time.monotonic):
        self.cfg = cfg
        self.clock = clock
        env = model_store.load(cfg.model_path)
        self._lock = threading.Lock()
        self._current = (env.payload, model_store.file_digest(cfg.model_path))
        self._offset = 0
        self._line_no = 0
        self._inode: int | None = None
        self._head = b""
        self._worker: threading.Thread | None = None
        self._next_retrain = clock() + cfg.retrain.every if cfg.retrain else None
        self.polls = 0
        self.predictions = 0
        self.malicious_predictions = 0
        self.swaps: list[tuple[str, str]] = []

    @property
    def model_digest(self) -> str:
        return self._current[1]

    # -- tailing -----------------------------------------------------------

    def _new_lines(self) -> list[tuple[int, str]]:
        path = self.cfg.input_path
        try:
            st = os.stat(path)
        except FileNotFoundError:
            return []
        with open(path, "rb") as fh:
            head = fh.read(_HEAD_BYTES)
            if (
                st.st_size < self._offset
                or (self._inode is not None and st.st_ino != self._inode)
                or not head.startswith(self._head)
            ):
                log.info("%s was rewritten; starting over", path)
                self._offset = 0
                self._line_no = 0
            self._inode = st.st_ino
            fh.seek(self._offset)
            chunk = fh.read()
        end = chunk.rfind(b"\n")
        if end == -1:
            return []
        complete = chunk[: end + 1]
        self._offset += len(complete)
        self._head = head[: self._offset]
        out = []
        for raw in complete.decode("utf-8", errors="replace").splitlines():
            self._line_no += 1
            text = raw.strip()
            if text and not text.startswith("#"):
                out.append((self._line_no, text))
        return out

    # -- polling -----------------------------------------------------------

    def poll_once(self) -> list[AlertRecord]:
        model, digest = self._current
        self.polls += 1
        try:
            lines = self._new_lines()
        except OSError as exc:
            log.warning("read of %s failed, retrying next poll: %s", self.cfg.input_path, exc)
            return []
        alerts = []
        for line_no, text in lines:
            try:
                (verdict,) = classify_hosts(model, [text])
            except HostError as exc:
                log.warning("line %d skipped: %s", line_no, exc)
                continue
            self.predictions += 1
            if verdict.label is Label.MALICIOUS:
                self.malicious_predictions += 1
                alerts.append(AlertRecord(_utcnow(), verdict.host, verdict.score, digest, line_no))
        if alerts:
            with open(self.cfg.alert_sink, "a", encoding="utf-8") as fh:
                for a in alerts:
                    fh.write(a.to_json() + "\n")
        self.maybe_retrain()
        return alerts

    # -- retraining --------------------------------------------------------

    def maybe_retrain(self) -> bool:
        """Start a retrain worker if one is due and none is running."""
        if self._next_retrain is None or self.clock() < self._next_retrain:
            return False
        if self._worker is not None and self._worker.is_alive():
            return False
        self._next_retrain = self.clock() + self.cfg.retrain.every
        self._worker = threading.Thread(target=self._retrain, name="phishlex-retrain", daemon=True)
        self._worker.start()
        return True

    def _retrain(self) -> None:
        rc = self.cfg.retrain
        model, old = self._current
        try:
            ds = load_dataset(rc.training_csv)
            X, y = ds.arrays()
            new_model = train(model.params, X, y)
            training_digest = model_store.file_digest(rc.training_csv)
            new = model_store.save(new_model, self.cfg.model_path, training_digest)
        except Exception:
            log.exception("retraining from %s failed; keeping current model", rc.training_csv)
            return
        with self._lock:
            self._current = (new_model, new)
            self.swaps.append((old, new))
        log.info("model swapped %s -> %s", old[:12], new[:12])

    def wait_for_retrain(self, timeout: float | None = None) -> None:
        if self._worker is not None:
            self._worker.join(timeout)

    def run(self, stop: threading.Event | None = None, max_polls: int | None = None) -> None:
        stop = stop or threading.Event()
        while not stop.is_set():
            self.poll_once()
            if max_polls is not None and self.polls >= max_polls:
                break
            stop.wait(self.cfg.poll_interval)
