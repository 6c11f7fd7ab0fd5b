from __future__ import annotations

import random
import re
import string

import pytest
from hypothesis import given, settings, strategies as st

from cascadia.ingest import Activity, Kind, PostThread
from cascadia.synth import PlantTruth
from cascadia.urlclass import (
    BENIGN_LABEL, CATEGORY_CLASS, CRITICAL_CATEGORIES, LIGHT_CATEGORIES, WHITELIST_LABEL,
    SEVERITY, BlacklistIndex, ThreadValue, UrlClass, UrlLabel, classify_url, extract_urls, label_thread,
    load_whitelist, normalize_host,
)

# Independent oracle for extraction: a regular expression over the same stop set.
URL_RE = re.compile(r"https?://[^\s()\[\]{}<>\"'`|\\^]+", re.IGNORECASE)


def test_extract_examples():
    assert extract_urls("no links here") == []
    assert extract_urls("see https://example.com/a and http://b.co") == ["https://example.com/a", "http://b.co"]
    assert extract_urls("(http://x.org/p) <https://y.org>") == ["http://x.org/p", "https://y.org"]
    assert extract_urls("dup http://a.b http://a.b") == ["http://a.b", "http://a.b"]
    assert extract_urls("bare http:// then HTTPS://Z.io") == ["HTTPS://Z.io"]


def test_extract_fuzz_against_regex_and_planted():
    rng = random.Random(42)
    alphabet = string.ascii_letters + string.digits + " \t\n.,;:/?#()[]<>\"'-_=&%"
    for _ in range(10_000):
        pieces, planted = [], []
        for _ in range(rng.randint(0, 4)):
            pieces.append("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12))))
            url = rng.choice(["http://", "https://", "HTTP://"]) + "".join(
                rng.choice(string.ascii_lowercase + "./-_?=&") for _ in range(rng.randint(1, 15)))
            planted.append(url)
            pieces.append(" " + url + rng.choice([" ", ")", "\n", "> ", ""]))
        pieces.append(" ")
        text = "".join(pieces)
        found = extract_urls(text)
        assert found == URL_RE.findall(text)
        for url in planted:
            assert any(url in f for f in found)


@pytest.mark.parametrize("url, host", [
    ("https://WWW.Example.COM:8080/x?y", "example.com"),
    ("http://sub.shop.example.org/p", "sub.shop.example.org"),
    ("http://user:pw@www.a.test:80", "a.test"),
    ("https://a.test./x", "a.test"),
    ("https://a.www.b.test#f", "a.www.b.test"),
])
def test_normalize_host(url, host):
    assert normalize_host(url) == host


@pytest.mark.parametrize("url", ["https:///", "http://:80/x", "ftp://a.b"])
def test_normalize_host_errors(url):
    with pytest.raises(ValueError):
        normalize_host(url)


def test_classify_fixture_table(whitelist, index):
    table = [
        ("facebook.com", WHITELIST_LABEL),
        ("youtube.com", WHITELIST_LABEL),
        ("m.facebook.com", WHITELIST_LABEL),
        ("en.wikipedia.org", WHITELIST_LABEL),
        ("cheap-deals-store.test", UrlLabel(UrlClass.LIGHT, "shopping")),
        ("promo.cheap-deals-store.test", UrlLabel(UrlClass.LIGHT, "shopping")),
        ("account-verify-login.test", UrlLabel(UrlClass.CRITICAL, "spyware")),
        ("totally-new.example", BENIGN_LABEL),
        ("daily-gazette.test", BENIGN_LABEL),  # untracked category
    ]
    for host, expected in table:
        assert classify_url(host, whitelist, index) == expected, host


def test_whitelist_before_blacklist():
    idx = BlacklistIndex.from_mapping({"porn": ["facebook.com"]})
    assert classify_url("facebook.com", {"facebook.com"}, idx) == WHITELIST_LABEL
    assert classify_url("facebook.com", set(), idx) == UrlLabel(UrlClass.LIGHT, "porn")


def test_longest_suffix_wins():
    idx = BlacklistIndex.from_mapping({"shopping": ["a.test"], "spyware": ["x.a.test"], "porn": ["test"]})
    assert idx.lookup("y.x.a.test") == "spyware"
    assert idx.lookup("z.a.test") == "shopping"
    assert idx.lookup("other.test") is None  # bare TLD entries never match subdomains


def test_multi_category_host_prefers_critical():
    idx = BlacklistIndex.from_mapping({"shopping": ["h.test"], "drugs": ["h.test"], "advertising": ["g.test"],
                                       "porn": ["g.test"]})
    assert idx.lookup("h.test") == "drugs"
    assert idx.lookup("g.test") == "advertising"


def test_list_files(tmp_path):
    for cat, body in {"gamble": "# c\nWWW.Bet.Test\n\nhttp://casino.test/x\n", "unknown": "z.test\n"}.items():
        (tmp_path / cat).mkdir()
        (tmp_path / cat / "domains").write_text(body)
    idx = BlacklistIndex.load(tmp_path)
    assert idx.host_to_category == {"bet.test": "gamble", "casino.test": "gamble"}
    wl = tmp_path / "wl.txt"
    wl.write_text("# header\nExample.com\n\n")
    assert load_whitelist(wl) == frozenset({"example.com"})


def test_label_invariants():
    for cat in LIGHT_CATEGORIES + CRITICAL_CATEGORIES:
        assert UrlLabel(CATEGORY_CLASS[cat], cat).category == cat
    for bad in [(UrlClass.LIGHT, None), (UrlClass.BENIGN, "porn"), (UrlClass.LIGHT, "spyware"),
                (UrlClass.CRITICAL, "porn")]:
        with pytest.raises(ValueError):
            UrlLabel(*bad)


hosts = st.lists(st.sampled_from(["a", "b", "shop", "test", "x1", "www"]), min_size=1, max_size=4).map(".".join)


@settings(max_examples=300, deadline=None)
@given(host=hosts, listed=st.dictionaries(hosts, st.sampled_from(sorted(CATEGORY_CLASS)), max_size=6))
def test_classify_class_category_consistency(host, listed):
    mapping = {}
    for h, c in listed.items():
        mapping.setdefault(c, []).append(h)
    lab = classify_url(host, {"b.test"}, BlacklistIndex.from_mapping(mapping))
    assert (lab.category is not None) == (lab.cls in (UrlClass.LIGHT, UrlClass.CRITICAL))


def _thread(*texts):
    acts = tuple(Activity(f"c{n}", Kind.COMMENT, "u", n, text=t) for n, t in enumerate(texts))
    return PostThread("p", "g", 0, acts)


def test_label_thread_examples(whitelist, index):
    lab = label_thread(_thread("hello", "no links"), whitelist, index)
    assert lab.value is ThreadValue.NONTARGET and lab.worst is None
    lab = label_thread(_thread("http://cheap-deals-store.test/a", "x https://account-verify-login.test"),
                       whitelist, index)
    assert lab.value is ThreadValue.TARGET and lab.worst is UrlClass.CRITICAL
    lab = label_thread(_thread("https://facebook.com/x", "http://site1.example"), whitelist, index)
    assert not lab.is_target


@settings(max_examples=100, deadline=None)
@given(texts=st.lists(st.sampled_from([
    "plain", "http://cheap-deals-store.test", "https://lucky-casino.test/x", "http://site.example",
    "http://youtube.com/w"]), max_size=5))
def test_label_thread_monotone(whitelist, index, texts):
    before = label_thread(_thread(*texts), whitelist, index).worst
    after = label_thread(_thread(*texts, "see http://hack-tools.test/"), whitelist, index).worst
    assert after is UrlClass.CRITICAL
    rank = {None: 0, UrlClass.LIGHT: 1, UrlClass.CRITICAL: 2}
    assert rank[after] >= rank[before]
    assert SEVERITY[UrlClass.CRITICAL] > SEVERITY[UrlClass.LIGHT]


def test_label_thread_matches_generator_truth(planted, whitelist, index):
    threads, truth = planted
    assert {t.post_id: label_thread(t, whitelist, index).is_target for t in threads} == truth.targets
    assert all(isinstance(p, PlantTruth) for p in truth.plants)
