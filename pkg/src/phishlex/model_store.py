"""Canonical ``.plxm`` model files.

A ``.plxm`` file is a single JSON object written with sorted keys, no
insignificant whitespace and Python's shortest round-trip float repr, so the
same model always serializes to the same bytes::

    {
      "algorithm": "forest" | "svm",
      "feature_names": [... 21 names ...],
      "format_version": 1,
      "payload": {...},
      "payload_sha256": "<hex digest of the canonical payload JSON>",
      "training_digest": "<sha256 of the training CSV, or empty>"
    }

Forest payloads hold the forest parameters and one pre-order node list per
tree; each node is ``["D", feature_id, threshold, n_samples, gain]`` or
``["L", benign_count, malicious_count]``. SVM payloads hold the parameters,
the standardizer and the support vectors with their alphas and labels.

The creation timestamp lives in a sidecar ``<file>.meta.json`` so the model
file itself stays byte-reproducible.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import CorruptPayload, SchemaError
from .features import FEATURE_NAMES
from .svm import Standardizer, SvmModel, SvmParams
from .tree import Decision, ForestModel, ForestParams, Leaf, Node, TreeParams, iter_nodes

FORMAT_VERSION = 1
EXTENSION = ".plxm"

Model = Union[ForestModel, SvmModel]


@dataclass(frozen=True)
class ModelEnvelope:
    format_version: int
    algorithm: str
    feature_names: tuple[str, ...]
    payload: Model
    training_digest: str
    created_at: dt.datetime | None = None


def feature_names_for(n_features: int) -> tuple[str, ...]:
    if n_features == len(FEATURE_NAMES):
        return FEATURE_NAMES
    return tuple(f"f{i + 1}" for i in range(n_features))


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- encoding ------------------------------------------------------------------


def _encode_tree(root: Node) -> list:
    out = []
    for nd in iter_nodes(root):
        if isinstance(nd, Decision):
            out.append(["D", nd.feature_id, float(nd.threshold), nd.n_samples, float(nd.gain)])
        else:
            out.append(["L", int(nd.counts[0]), int(nd.counts[1])])
    return out


def _decode_tree(nodes: list) -> Node:
    it = iter(nodes)

    def build() -> Node:
        tag, *rest = next(it)
        if tag == "L":
            return Leaf((int(rest[0]), int(rest[1])))
        if tag != "D":
            raise CorruptPayload(f"unknown node tag {tag!r}")
        fid, thr, n, gain = rest
        left = build()
        right = build()
        return Decision(int(fid), float(thr), left, right, int(n), float(gain))

    root = build()
    if next(it, None) is not None:
        raise CorruptPayload("trailing nodes after tree")
    return root


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def encode_payload(model: Model) -> tuple[str, dict]:
    if isinstance(model, ForestModel):
        p = model.params
        return "forest", {
            "n_features": model.n_features,
            "params": {
                "n_estimators": p.n_estimators,
                "bootstrap": p.bootstrap,
                "seed": p.seed,
                "tree": dataclasses.asdict(p.tree),
            },
            "trees": [_encode_tree(t) for t in model.trees],
        }
    if isinstance(model, SvmModel):
        return "svm", {
            "params": dataclasses.asdict(model.params),
            "standardizer": {
                "means": _floats(model.standardizer.means),
                "stddevs": _floats(model.standardizer.stddevs),
            },
            "support_vectors": [_floats(sv) for sv in model.support_vectors],
            "alphas": _floats(model.alphas),
            "labels": [int(v) for v in model.labels],
            "bias": float(model.bias),
            "converged": bool(model.converged),
            "sweeps": int(model.sweeps),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def decode_payload(algorithm: str, payload: dict) -> Model:
    try:
        if algorithm == "forest":
            p = payload["params"]
            params = ForestParams(
                n_estimators=p["n_estimators"],
                tree=TreeParams(**p["tree"]),
                bootstrap=p["bootstrap"],
                seed=p["seed"],
            )
            n_features = payload["n_features"]
            names = feature_names_for(n_features)
            trees = tuple(_decode_tree(t) for t in payload["trees"])
            if len(trees) != params.n_estimators:
                raise CorruptPayload("tree count does not match n_estimators")
            return ForestModel(trees, params, n_features, names)
        if algorithm == "svm":
            std = payload["standardizer"]
            n = len(std["means"])
            svs = np.array(payload["support_vectors"], dtype=float).reshape(-1, n)
            return SvmModel(
                support_vectors=svs,
                alphas=np.array(payload["alphas"], dtype=float),
                labels=np.array(payload["labels"], dtype=float),
                bias=float(payload["bias"]),
                params=SvmParams(**payload["params"]),
                standardizer=Standardizer(
                    np.array(std["means"], dtype=float), np.array(std["stddevs"], dtype=float)
                ),
                converged=payload["converged"],
                sweeps=payload["sweeps"],
            )
    except (KeyError, TypeError, ValueError, StopIteration) as exc:
        raise CorruptPayload(f"malformed {algorithm} payload: {exc}") from exc
    raise SchemaError(f"unknown algorithm {algorithm!r}")


# -- files ---------------------------------------------------------------------


def dumps(model: Model, training_digest: str = "") -> str:
    algorithm, payload = encode_payload(model)
    body = {
        "algorithm": algorithm,
        "feature_names": list(feature_names_for(model.n_features)),
        "format_version": FORMAT_VERSION,
        "payload": payload,
        "payload_sha256": hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest(),
        "training_digest": training_digest,
    }
    return _canonical(body) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def save(model: Model, path, training_digest: str = "", created_at: dt.datetime | None = None) -> str:
    """Write the model atomically; returns the sha256 of the written file."""
    path = Path(path)
    text = dumps(model, training_digest)
    _atomic_write(path, text)
    stamp = (created_at or dt.datetime.now(dt.timezone.utc)).isoformat()
    _atomic_write(sidecar_path(path), json.dumps({"created_at": stamp}) + "\n")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def loads(text: str) -> ModelEnvelope:
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptPayload(f"not a readable model file: {exc}") from exc
    if not isinstance(body, dict):
        raise CorruptPayload("model file is not a JSON object")
    version = body.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version!r}")
    for key in ("algorithm", "feature_names", "payload", "payload_sha256"):
        if key not in body:
            raise CorruptPayload(f"missing {key!r}")
    payload = body["payload"]
    digest = hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()
    if digest != body["payload_sha256"]:
        raise CorruptPayload("payload hash mismatch")
    model = decode_payload(body["algorithm"], payload)
    names = tuple(body["feature_names"])
    if names != feature_names_for(model.n_features):
        raise SchemaError("feature names do not match the expected feature table")
    return ModelEnvelope(
        format_version=version,
        algorithm=body["algorithm"],
        feature_names=names,
        payload=model,
        training_digest=body.get("training_digest", ""),
    )


def load(path) -> ModelEnvelope:
    path = Path(path)
    env = loads(path.read_text(encoding="utf-8"))
    meta = sidecar_path(path)
    if meta.exists():
        try:
            stamp = json.loads(meta.read_text(encoding="utf-8"))["created_at"]
            env = dataclasses.replace(env, created_at=dt.datetime.fromisoformat(stamp))
        except (ValueError, KeyError, TypeError):
            pass
    return env
