import pytest
from hypothesis import given, strategies as st

from phishlex.errors import EmptyHost, HostError, MalformedHost
from phishlex.url_model import RawEntry, Source, decompose, is_ip_literal, normalize, parse_host


@pytest.mark.parametrize(
    "raw, host",
    [
        ("HTTPS://Www.Test.com/login?x=1", "www.test.com"),
        ("in.dex.test.com", "in.dex.test.com"),
        ("http://user:pw@evil.test:8080/a", "evil.test"),
        ("evil.test.", "evil.test"),
        ("evil.test.:443", "evil.test"),
        ("  Mixed.CASE.org  ", "mixed.case.org"),
        ("ftp://files.example.net#frag", "files.example.net"),
        ("example.com?q=1", "example.com"),
        ("http://[2001:db8::1]/x", "2001:db8::1"),
    ],
)
def test_normalize(raw, host):
    assert normalize(raw) == host


def test_normalize_accepts_raw_entry():
    assert normalize(RawEntry("HTTP://A.B.C/", Source.BLOCKLIST)) == "a.b.c"


@pytest.mark.parametrize("raw", ["test..com", ".lead.com", "white space.com"])
def test_malformed(raw):
    with pytest.raises(MalformedHost):
        normalize(raw)


@pytest.mark.parametrize("raw", ["http://", "/path/only", "   "])
def test_empty(raw):
    with pytest.raises(HostError):
        normalize(raw)


def test_blank_raw_entry_rejected():
    with pytest.raises(EmptyHost):
        RawEntry("  ", Source.ALLOWLIST)


def test_decompose_worked_example():
    p = decompose("in.dex.test.com")
    assert (p.tld, p.sld, p.thld, p.domain, p.subdomain) == ("com", "test.com", "dex.test.com", "test", "in.dex")
    assert p.labels == ("in", "dex", "test", "com")


def test_decompose_single_label():
    p = decompose("com")
    assert (p.tld, p.sld, p.thld, p.domain, p.subdomain) == ("com", "com", "com", "", "")


def test_decompose_two_labels():
    p = decompose("google.com")
    assert (p.tld, p.sld, p.thld, p.domain, p.subdomain) == ("com", "google.com", "google.com", "google", "")


def test_decompose_is_positional_not_suffix_aware():
    # no public-suffix list: co.uk is treated like any other pair of labels
    p = decompose("shop.bbc.co.uk")
    assert (p.tld, p.sld, p.domain, p.subdomain) == ("uk", "co.uk", "co", "shop.bbc")


def test_decompose_rejects_empty_label():
    with pytest.raises(MalformedHost):
        decompose("a..b")


@pytest.mark.parametrize(
    "host, expected",
    [("192.168.10.1", True), ("999.1.1.1", False), ("b1ng0.com", False), ("1.2.3", False), ("2001:db8::1", True)],
)
def test_is_ip_literal(host, expected):
    assert is_ip_literal(host) is expected


labels = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=8)


@given(st.lists(labels, min_size=1, max_size=6))
def test_decompose_reassembles(parts):
    host = ".".join(parts)
    p = decompose(host)
    assert p.host == host
    assert p.thld.endswith(p.sld) and p.sld.endswith(p.tld)
    rebuilt = ".".join(x for x in (p.subdomain, p.domain, p.tld) if x)
    assert rebuilt == host or len(parts) == 1


@given(st.lists(labels, min_size=1, max_size=5))
def test_normalize_idempotent(parts):
    host = ".".join(parts)
    assert normalize(normalize("HTTP://" + host.upper() + "/x")) == host


def test_parse_host_combines_both():
    assert parse_host("https://Login.Paypal.com.evil.xyz/x").thld == "com.evil.xyz"
