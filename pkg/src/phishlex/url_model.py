"""Host normalization and positional domain decomposition.

Labels are split purely by position, without a public-suffix list, so
``example.co.uk`` has ``tld == "uk"`` and ``sld == "co.uk"``. All counting
downstream happens on Unicode code points; no punycode conversion is done.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import EmptyHost, MalformedHost

__all__ = [
    "Source",
    "RawEntry",
    "DomainParts",
    "normalize",
    "decompose",
    "parse_host",
    "is_ip_literal",
]

_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*://")
_PORT = re.compile(r":[0-9]*$")
_IPV4 = re.compile(r"^([0-9]{1,3})\.([0-9]{1,3})\.([0-9]{1,3})\.([0-9]{1,3})$")
_IPV6 = re.compile(r"^[0-9a-f:]+$")


class Source(enum.Enum):
    ALLOWLIST = "Allowlist"
    BLOCKLIST = "Blocklist"
    PDNS_QUERY = "PdnsQuery"
    WATCH_INPUT = "WatchInput"


@dataclass(frozen=True)
class RawEntry:
    text: str
    source: Source

    def __post_init__(self):
        if not self.text.strip():
            raise EmptyHost("raw entry is blank")


@dataclass(frozen=True)
class DomainParts:
    """A host split into the level views used by the feature extractor.

    ``sld`` and ``thld`` are the two and three rightmost labels joined with
    dots (dots included in their lengths). ``domain`` is the second label
    from the right and ``subdomain`` everything left of it.
    """

    host: str
    labels: tuple[str, ...]
    tld: str
    sld: str
    thld: str
    domain: str
    subdomain: str


def _strip_authority(text: str) -> str:
    text = _SCHEME.sub("", text, count=1)
    for sep in "/?#":
        cut = text.find(sep)
        if cut != -1:
            text = text[:cut]
    if "@" in text:
        text = text.rsplit("@", 1)[1]
    if text.startswith("["):
        end = text.find("]")
        if end != -1:
            return text[1:end]
    return text


def normalize(entry: RawEntry | str) -> str:
    """Reduce a raw URL or domain string to a lowercase bare host.

    >>> normalize("HTTPS://Www.Test.com/login?x=1")
    'www.test.com'
    """
    text = entry.text if isinstance(entry, RawEntry) else entry
    host = _strip_authority(text.strip().lower())
    while True:
        before = host
        if host.count(":") == 1:
            host = _PORT.sub("", host)
        if host.endswith("."):
            host = host[:-1]
        if host == before:
            break
    if not host:
        raise EmptyHost(f"no host left in {text!r}")
    if any(ch.isspace() for ch in host):
        raise MalformedHost(f"whitespace in host {host!r}")
    if ".." in host or host.startswith("."):
        raise MalformedHost(f"empty label in host {host!r}")
    return host


def decompose(host: str) -> DomainParts:
    labels = tuple(host.split("."))
    if any(not label for label in labels):
        raise MalformedHost(f"empty label in host {host!r}")
    n = len(labels)
    tld = labels[-1]
    sld = ".".join(labels[-2:])
    thld = ".".join(labels[-3:])
    domain = labels[-2] if n >= 2 else ""
    subdomain = ".".join(labels[:-2]) if n >= 3 else ""
    return DomainParts(host, labels, tld, sld, thld, domain, subdomain)


def parse_host(text: str) -> DomainParts:
    """normalize + decompose in one step."""
    return decompose(normalize(text))


def is_ip_literal(host: str) -> bool:
    m = _IPV4.match(host)
    if m:
        return all(int(octet) <= 255 for octet in m.groups())
    return host.count(":") >= 2 and bool(_IPV6.match(host))
