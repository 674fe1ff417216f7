import os

import httpx
import pytest

from oer_quality.harvester import (
    FieldMapping,
    HarvestConfig,
    HarvestStatus,
    harvest,
)
from oer_quality.metadata import HarvestError, QualityFlag

BASE_URL = "https://oer.example.org/api/search"


def _item(index: int) -> dict:
    return {
        "url": f"https://oer.example.org/resource/{index}",
        "title": f"Resource {index}",
        "subjects": ["Nursing"],
        "date_issued": "2018-02-01",
        "quality_control": "with control",
    }


class FakeRepository:
    """Serves `total` items through the default mapping's offset/limit parameters."""

    def __init__(self, total: int, failures=None):
        self.total = total
        self.failures = list(failures or [])
        self.requests: list[httpx.Request] = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        if self.failures:
            status = self.failures.pop(0)
            if status is not None:
                return httpx.Response(status)
        offset = int(request.url.params["offset"])
        limit = int(request.url.params["limit"])
        items = [_item(i) for i in range(offset, min(offset + limit, self.total))]
        return httpx.Response(200, json={"results": items})

    def client(self) -> httpx.Client:
        return httpx.Client(transport=httpx.MockTransport(self))


def _config(**overrides) -> HarvestConfig:
    values = dict(base_url=BASE_URL, query="nursing", page_size=3, backoff_seconds=0.0)
    values.update(overrides)
    return HarvestConfig(**values)


def test_harvest_pages_until_exhausted():
    """Verifies two full pages and an empty one yield six records."""
    repository = FakeRepository(total=6)
    report = harvest(_config(), client=repository.client())
    assert report.status is HarvestStatus.EXHAUSTED
    assert len(report.records) == 6
    assert report.pages_fetched == 3
    assert [r.url.params["offset"] for r in repository.requests] == ["0", "3", "6"]
    assert repository.requests[0].url.params["q"] == "nursing"
    assert report.records[0].title == "Resource 0"
    assert report.records[5].quality_flag is QualityFlag.WITH_CONTROL


def test_short_page_ends_the_harvest():
    """Verifies a page shorter than page_size is the last one requested."""
    repository = FakeRepository(total=5)
    report = harvest(_config(), client=repository.client())
    assert report.status is HarvestStatus.EXHAUSTED
    assert len(report.records) == 5
    assert len(repository.requests) == 2


def test_transient_failures_are_retried():
    """Verifies two 500 responses followed by success cost two retries."""
    repository = FakeRepository(total=2, failures=[500, 500])
    delays = []
    report = harvest(
        _config(backoff_seconds=1.0), client=repository.client(), sleep=delays.append
    )
    assert report.status is HarvestStatus.EXHAUSTED
    assert report.retries == 2
    assert len(report.records) == 2
    assert delays == [1.0, 2.0]


def test_rate_limit_is_retried():
    """Verifies a 429 response is retried like a server error."""
    repository = FakeRepository(total=1, failures=[429])
    report = harvest(_config(), client=repository.client(), sleep=lambda _: None)
    assert report.retries == 1
    assert len(report.records) == 1


def test_max_records_truncates():
    """Verifies the harvest stops at max_records."""
    repository = FakeRepository(total=100)
    report = harvest(_config(max_records=4), client=repository.client())
    assert report.status is HarvestStatus.TRUNCATED
    assert len(report.records) == 4
    assert len(repository.requests) == 2


def test_persistent_failure_keeps_partial_results():
    """Verifies exhausted retries end the harvest with the records fetched so far."""
    repository = FakeRepository(total=10, failures=[None] + [503] * 4)
    report = harvest(_config(retry_limit=3), client=repository.client())
    assert report.failed
    assert len(report.records) == 3
    assert report.retries == 3
    assert "giving up after 4 attempts" in report.errors[-1]


def test_client_errors_are_not_retried():
    """Verifies a 404 fails the harvest immediately."""
    repository = FakeRepository(total=10, failures=[404])
    report = harvest(_config(), client=repository.client())
    assert report.failed
    assert report.retries == 0
    assert report.records == []
    assert "HTTP 404" in report.errors[0]


def test_unexpected_payload_fails_the_harvest():
    """Verifies a response without the item list is reported, not raised."""

    def handler(request):
        return httpx.Response(200, json={"hits": []})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    report = harvest(_config(), client=client)
    assert report.failed
    assert "results" in report.errors[0]


def test_malformed_items_are_rejected():
    """Verifies non-object and mistyped items are rejected with their raw form."""

    def handler(request):
        if request.url.params["offset"] != "0":
            return httpx.Response(200, json={"results": []})
        items = [_item(0), "oops", {"title": ["a", "b"]}]
        return httpx.Response(200, json={"results": items})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    report = harvest(_config(), client=client)
    assert len(report.records) == 1
    assert [r.index for r in report.rejected] == [2, 3]
    assert report.rejected[0].raw == '"oops"'
    assert report.total_entries == 3


def test_custom_mapping_with_nested_fields(tmp_path):
    """Verifies parameter names, item path and dotted field paths from a mapping file."""
    mapping_path = tmp_path / "mapping.yaml"
    mapping_path.write_text(
        "params: {query: term, offset: start, page_size: rows}\n"
        "items_path: [response, docs]\n"
        "fields:\n"
        "  url: link\n"
        "  title: meta.title\n"
        "  quality_control: review.status\n",
        encoding="utf-8",
    )

    def handler(request):
        assert request.url.params["term"] == "anatomy"
        docs = [
            {
                "link": "https://oer.example.org/9",
                "meta": {"title": "Bones"},
                "review": {"status": "Without Control"},
            }
        ]
        return httpx.Response(200, json={"response": {"docs": docs}})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    config = _config(query="anatomy", mapping_path=mapping_path)
    report = harvest(config, client=client)
    assert report.status is HarvestStatus.EXHAUSTED
    record = report.records[0]
    assert record.title == "Bones"
    assert record.url == "https://oer.example.org/9"
    assert record.quality_flag is QualityFlag.WITHOUT_CONTROL


def test_bad_mapping_file(tmp_path):
    """Verifies an incomplete mapping file raises HarvestError."""
    path = tmp_path / "mapping.yaml"
    path.write_text("fields: {}\n", encoding="utf-8")
    with pytest.raises(HarvestError, match="cannot load field mapping"):
        FieldMapping.load(path)


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"base_url": ""}, "base_url"),
        ({"page_size": 0}, "page_size"),
        ({"max_records": 0}, "max_records"),
        ({"retry_limit": -1}, "retry_limit"),
        ({"request_timeout": 0}, "request_timeout"),
    ],
)
def test_config_validation(overrides, message):
    """Verifies invalid harvest settings raise HarvestError."""
    with pytest.raises(HarvestError, match=message):
        _config(**overrides)


@pytest.mark.live
@pytest.mark.skipif(
    os.environ.get("OER_HARVEST_LIVE") != "1", reason="set OER_HARVEST_LIVE=1 to run"
)
def test_live_harvest():
    """Verifies a small harvest against the repository named in OER_HARVEST_URL."""
    config = HarvestConfig(
        base_url=os.environ["OER_HARVEST_URL"],
        query=os.environ.get("OER_HARVEST_QUERY", "nursing"),
        page_size=5,
        max_records=5,
    )
    report = harvest(config)
    assert not report.failed
    assert report.total_entries > 0
