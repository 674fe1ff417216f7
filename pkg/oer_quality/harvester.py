"""
Fetches OER metadata from a repository search API.

The harvester pages through search results with offset/limit parameters,
maps each item onto the canonical schema through a YAML field mapping, and
builds records with the same code path the file parsers use. Transient
failures (connection errors, 429 and 5xx responses) are retried with
exponential backoff; a persistent failure ends the harvest with whatever was
collected so far.

The HTTP client is injectable, so tests run offline against an
`httpx.MockTransport`.
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import Enum, auto
from pathlib import Path

import httpx
import yaml

from oer_quality.ingestion import EntryError, IngestReport, Rejection, record_from_mapping
from oer_quality.metadata import HarvestError

logger = logging.getLogger(__name__)

DEFAULT_MAPPING_PATH = Path(__file__).with_name("harvest_mapping.yaml")
RETRY_STATUSES = (429, 500, 502, 503, 504)


@dataclass(frozen=True)
class HarvestConfig:
    base_url: str
    query: str
    page_size: int = 50
    max_records: int = 10_000
    """Records beyond this are not requested; the harvest stops early."""
    retry_limit: int = 3
    request_timeout: float = 30.0
    backoff_seconds: float = 1.0
    mapping_path: Path | None = None

    def __post_init__(self):
        if not self.base_url:
            raise HarvestError("base_url is required")
        if self.page_size < 1:
            raise HarvestError("page_size must be at least 1")
        if self.max_records < 1:
            raise HarvestError("max_records must be at least 1")
        if self.retry_limit < 0:
            raise HarvestError("retry_limit must not be negative")
        if self.request_timeout <= 0:
            raise HarvestError("request_timeout must be positive")


@dataclass(frozen=True)
class FieldMapping:
    """How to query the API and where each canonical field lives in an item."""

    params: Mapping[str, str]
    items_path: tuple[str, ...]
    fields: Mapping[str, str]

    @classmethod
    def load(cls, path: "str | Path | None" = None) -> "FieldMapping":
        path = Path(path) if path is not None else DEFAULT_MAPPING_PATH
        try:
            document = yaml.safe_load(path.read_text(encoding="utf-8"))
            return cls(
                params=dict(document["params"]),
                items_path=tuple(document.get("items_path") or ()),
                fields=dict(document["fields"]),
            )
        except (OSError, yaml.YAMLError, KeyError, TypeError) as e:
            raise HarvestError(f"cannot load field mapping {path}: {e}") from e

    def request_params(self, query: str, offset: int, page_size: int) -> dict:
        return {
            self.params["query"]: query,
            self.params["offset"]: offset,
            self.params["page_size"]: page_size,
        }

    def extract_items(self, payload) -> list:
        node = payload
        for key in self.items_path:
            if not isinstance(node, Mapping) or key not in node:
                raise ValueError(f"response has no {'/'.join(self.items_path)!r}")
            node = node[key]
        if not isinstance(node, list):
            raise ValueError("response items are not a list")
        return node

    def map_item(self, item) -> dict:
        if not isinstance(item, Mapping):
            raise EntryError(f"expected an object, got {type(item).__name__}")
        mapped = {}
        for canonical, source in self.fields.items():
            value = item
            for part in source.split("."):
                value = value.get(part) if isinstance(value, Mapping) else None
            mapped[canonical] = value
        return mapped


class HarvestStatus(Enum):
    """Where a harvest stands."""

    HARVESTING = auto()
    """More pages may follow."""

    EXHAUSTED = auto()
    """The API returned its last page."""

    TRUNCATED = auto()
    """`max_records` was reached."""

    FAILED = auto()
    """A request kept failing; the report holds a partial result."""


@dataclass
class HarvestReport(IngestReport):
    status: HarvestStatus = HarvestStatus.HARVESTING
    pages_fetched: int = 0
    retries: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.status is HarvestStatus.FAILED


class _RetryableStatus(Exception):
    def __init__(self, response: httpx.Response):
        super().__init__(f"HTTP {response.status_code}")
        self.response = response


class Harvester:
    """Runs one harvest. Pages are fetched sequentially."""

    def __init__(
        self,
        config: HarvestConfig,
        client: httpx.Client | None = None,
        mapping: FieldMapping | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._config = config
        self._client = client
        self._mapping = mapping or FieldMapping.load(config.mapping_path)
        self._sleep = sleep
        self._offset = 0
        self._report = HarvestReport(source=config.base_url)

    @property
    def status(self) -> HarvestStatus:
        return self._report.status

    def run(self) -> HarvestReport:
        owns_client = self._client is None
        if owns_client:
            self._client = httpx.Client(timeout=self._config.request_timeout)
        try:
            while self.status is HarvestStatus.HARVESTING:
                self._fetch_page()
        finally:
            if owns_client:
                self._client.close()

        report = self._report
        match report.status:
            case HarvestStatus.FAILED:
                logger.error(
                    "harvest failed after %d pages: %s", report.pages_fetched, report.errors[-1]
                )
            case _:
                logger.info(
                    "harvest %s: %s over %d pages (%d retries)",
                    report.status.name.lower(),
                    report.summary_line(),
                    report.pages_fetched,
                    report.retries,
                )
        return report

    # --- Page handling ---

    def _fetch_page(self) -> None:
        config, report = self._config, self._report
        params = self._mapping.request_params(config.query, self._offset, config.page_size)
        payload = self._get_with_retry(params)
        if payload is None:
            report.status = HarvestStatus.FAILED
            return
        try:
            items = self._mapping.extract_items(payload)
        except ValueError as e:
            report.errors.append(f"offset {self._offset}: {e}")
            report.status = HarvestStatus.FAILED
            return

        report.pages_fetched += 1
        for position, item in enumerate(items):
            if len(report.records) >= config.max_records:
                report.status = HarvestStatus.TRUNCATED
                return
            self._add_item(self._offset + position + 1, item)
        self._offset += len(items)

        if len(report.records) >= config.max_records:
            report.status = HarvestStatus.TRUNCATED
        elif len(items) < config.page_size:
            report.status = HarvestStatus.EXHAUSTED

    def _add_item(self, index: int, item) -> None:
        try:
            record = record_from_mapping(self._mapping.map_item(item), index, self._report.notes)
        except EntryError as e:
            logger.debug("item %d rejected: %s", index, e)
            self._report.rejected.append(
                Rejection(index, str(e), json.dumps(item, default=str, ensure_ascii=False))
            )
            return
        self._report.records.append(record)

    def _get_with_retry(self, params: dict):
        """Returns the decoded JSON payload, or None once retries are exhausted."""
        config = self._config
        attempt = 0
        while True:
            try:
                response = self._client.get(
                    config.base_url, params=params, timeout=config.request_timeout
                )
                if response.status_code in RETRY_STATUSES:
                    raise _RetryableStatus(response)
                response.raise_for_status()
                return response.json()
            except httpx.HTTPStatusError as e:
                self._report.errors.append(f"{params}: HTTP {e.response.status_code}")
                return None
            except ValueError as e:
                self._report.errors.append(f"{params}: response is not JSON ({e})")
                return None
            except (httpx.TransportError, _RetryableStatus) as e:
                if attempt >= config.retry_limit:
                    self._report.errors.append(
                        f"{params}: giving up after {attempt + 1} attempts ({e})"
                    )
                    return None
                delay = config.backoff_seconds * 2**attempt
                logger.warning("request failed (%s); retrying in %.1fs", e, delay)
                self._sleep(delay)
                attempt += 1
                self._report.retries += 1


def harvest(
    config: HarvestConfig,
    client: httpx.Client | None = None,
    mapping: FieldMapping | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> HarvestReport:
    """Harvests records for `config.query`; see `Harvester`."""
    return Harvester(config, client=client, mapping=mapping, sleep=sleep).run()
