"""
Polite HTTP client.

This module provides the fetch contract used by the harvester: robots.txt
enforcement, a randomised delay between requests and bounded retries. One
client instance is driven strictly sequentially.
"""
import asyncio
import logging
import random
import time
from enum import Enum
from typing import Awaitable, Callable, Optional
from urllib.parse import urljoin, urlsplit

import httpx
from pydantic import BaseModel

from app.config import RunConfig
from app.services.robots import ROBOTS_PATH, RobotsPolicy, is_allowed, parse_robots

logger = logging.getLogger(__name__)


class DelaySampler:
    """
    Uniform random delay source.

    Every sample lies in [max(min_s, crawl_delay_s), max(max_s, that bound)];
    the sequence is reproducible under a fixed seed.
    """

    def __init__(
        self,
        min_s: float,
        max_s: float,
        seed: Optional[int] = None,
        crawl_delay_s: Optional[float] = None,
    ) -> None:
        if min_s < 0 or max_s < min_s:
            raise ValueError(f"Invalid delay interval [{min_s}, {max_s}]")
        self.min_s = min_s
        self.max_s = max_s
        self.crawl_delay_s = crawl_delay_s
        self._rng = random.Random(seed)

    @classmethod
    def from_config(cls, config: RunConfig) -> "DelaySampler":
        return cls(config.min_delay_s, config.max_delay_s, seed=config.rng_seed)

    @property
    def lower_bound(self) -> float:
        """Effective minimum delay."""
        return max(self.min_s, self.crawl_delay_s or 0.0)

    def next_delay(self) -> float:
        """Draw the next delay in seconds."""
        low = self.lower_bound
        high = max(self.max_s, low)
        if high == low:
            return low
        return min(max(self._rng.uniform(low, high), low), high)


def next_delay(sampler: DelaySampler) -> float:
    """Draw the next delay from `sampler`."""
    return sampler.next_delay()


class FetchStatus(str, Enum):
    """Outcome class of a fetch."""

    OK = "ok"
    RETRYABLE_ERROR = "retryable_error"
    PERMANENT_ERROR = "permanent_error"
    DISALLOWED = "disallowed"


class FetchOutcome(BaseModel):
    """
    Result of one fetch, never an exception.

    Attributes:
        url: Requested URL
        status: Outcome class
        content: Body bytes (ok only)
        content_type: Content-Type header (ok only)
        http_status: Last HTTP status seen, if any
        detail: Error description for non-ok outcomes
        attempts: Requests issued for this fetch (0 when disallowed)
    """

    url: str
    status: FetchStatus
    content: Optional[bytes] = None
    content_type: Optional[str] = None
    http_status: Optional[int] = None
    detail: Optional[str] = None
    attempts: int = 0

    @property
    def ok(self) -> bool:
        return self.status == FetchStatus.OK


def _request_path(url: str) -> str:
    parts = urlsplit(url)
    path = parts.path or "/"
    return f"{path}?{parts.query}" if parts.query else path


def _origin(url: str) -> str:
    parts = urlsplit(url)
    return f"{parts.scheme}://{parts.netloc}"


class PoliteClient:
    """
    Sequential HTTP client honouring robots.txt, pacing and retry limits.

    Retries reuse the delay sampler rather than exponential backoff, so the
    request rate stays within the pacing contract.
    """

    def __init__(
        self,
        http: httpx.AsyncClient,
        sampler: DelaySampler,
        user_agent: str,
        max_retries: int = 3,
        policy: Optional[RobotsPolicy] = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], Awaitable[None]] = asyncio.sleep,
    ) -> None:
        """
        Initialize the client.

        Args:
            http: Underlying httpx client (its User-Agent header is set here)
            sampler: Delay source
            user_agent: Descriptive user-agent sent with every request
            max_retries: Extra attempts after a transient failure
            policy: Pre-loaded robots policy; loaded lazily when None
            clock: Monotonic clock, injectable for tests
            sleep: Async sleep, injectable for tests
        """
        self.http = http
        self.http.headers["User-Agent"] = user_agent
        self.sampler = sampler
        self.user_agent = user_agent
        self.max_retries = max_retries
        self.policy = policy
        self.requests_issued = 0
        self._clock = clock
        self._sleep = sleep
        self._last_request_end: Optional[float] = None

    @classmethod
    def from_config(
        cls,
        config: RunConfig,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ) -> "PoliteClient":
        """
        Build a client and its httpx transport from the run configuration.

        Args:
            config: Run configuration
            transport: Optional transport (tests pass an ASGI transport)
        """
        http = httpx.AsyncClient(
            timeout=config.request_timeout_s,
            follow_redirects=True,
            transport=transport,
        )
        return cls(
            http=http,
            sampler=DelaySampler.from_config(config),
            user_agent=config.user_agent,
            max_retries=config.max_retries,
        )

    async def __aenter__(self) -> "PoliteClient":
        return self

    async def __aexit__(self, *exc_info: object) -> None:
        await self.aclose()

    async def aclose(self) -> None:
        await self.http.aclose()

    async def _wait_turn(self) -> None:
        """Sleep until the sampled delay has elapsed since the previous request."""
        if self._last_request_end is None:
            return
        delay = self.sampler.next_delay()
        remaining = delay - (self._clock() - self._last_request_end)
        while remaining > 0:
            await self._sleep(remaining)
            remaining = delay - (self._clock() - self._last_request_end)

    def _permanent(self, url: str, detail: str, attempts: int, http_status: Optional[int] = None) -> FetchOutcome:
        logger.warning(f"Permanent error fetching {url}: {detail}")
        return FetchOutcome(
            url=url,
            status=FetchStatus.PERMANENT_ERROR,
            http_status=http_status,
            detail=detail,
            attempts=attempts,
        )

    async def _fetch_with_retries(self, url: str) -> FetchOutcome:
        attempts = 0
        http_status: Optional[int] = None
        detail = "no attempt made"

        for attempt in range(self.max_retries + 1):
            await self._wait_turn()
            attempts += 1
            self.requests_issued += 1
            try:
                response = await self.http.get(url)
            except httpx.TimeoutException as e:
                detail = f"timeout: {e!r}"
            except httpx.UnsupportedProtocol as e:
                return self._permanent(url, f"unsupported protocol: {e!r}", attempts)
            except httpx.TransportError as e:
                detail = f"transport error: {e!r}"
            except (httpx.HTTPError, httpx.InvalidURL) as e:
                return self._permanent(url, f"request error: {e!r}", attempts)
            else:
                http_status = response.status_code
                if response.is_success:
                    return FetchOutcome(
                        url=url,
                        status=FetchStatus.OK,
                        content=response.content,
                        content_type=response.headers.get("content-type"),
                        http_status=http_status,
                        attempts=attempts,
                    )
                detail = f"HTTP {http_status}"
                if http_status < 500:
                    return self._permanent(url, detail, attempts, http_status)
            finally:
                self._last_request_end = self._clock()

            if attempt < self.max_retries:
                logger.warning(
                    f"Transient error fetching {url} ({detail}); "
                    f"retry {attempt + 1}/{self.max_retries}"
                )

        logger.error(f"Giving up on {url} after {attempts} attempts: {detail}")
        return FetchOutcome(
            url=url,
            status=FetchStatus.RETRYABLE_ERROR,
            http_status=http_status,
            detail=detail,
            attempts=attempts,
        )

    async def load_robots(self, origin: str) -> RobotsPolicy:
        """
        Fetch and cache `<origin>/robots.txt` for the rest of the run.

        A 4xx answer means no restrictions; an unreachable file (5xx or
        transport failure after retries) means nothing may be fetched.

        Args:
            origin: Scheme and host, e.g. "https://example.org"

        Returns:
            RobotsPolicy: The cached policy
        """
        robots_url = urljoin(origin, ROBOTS_PATH)
        outcome = await self._fetch_with_retries(robots_url)
        if outcome.ok:
            policy = parse_robots((outcome.content or b"").decode("utf-8", errors="replace"))
            logger.info(f"Loaded robots.txt from {robots_url}: {len(policy.rules)} rules")
        elif outcome.status == FetchStatus.PERMANENT_ERROR and outcome.http_status is not None:
            policy = RobotsPolicy.allow_everything()
            logger.info(f"No robots.txt at {robots_url} ({outcome.detail}); no restrictions")
        else:
            policy = RobotsPolicy.refuse_everything()
            logger.error(f"robots.txt at {robots_url} unreachable ({outcome.detail}); refusing all paths")

        self.policy = policy
        self.sampler.crawl_delay_s = policy.crawl_delay_for(self.user_agent)
        if self.sampler.crawl_delay_s is not None:
            logger.info(f"Honouring Crawl-delay of {self.sampler.crawl_delay_s}s")
        return policy

    def allows(self, url: str) -> bool:
        """True if the cached policy lets this client fetch `url`."""
        if self.policy is None:
            raise RuntimeError("robots policy not loaded; call load_robots first")
        return is_allowed(self.policy, self.user_agent, _request_path(url))

    async def fetch(self, url: str) -> FetchOutcome:
        """
        GET `url` politely.

        Args:
            url: Absolute URL

        Returns:
            FetchOutcome: ok, retryable_error, permanent_error or disallowed;
            a disallowed URL is never requested
        """
        if self.policy is None:
            await self.load_robots(_origin(url))
        if not self.allows(url):
            logger.info(f"robots.txt disallows {url}; not fetching")
            return FetchOutcome(url=url, status=FetchStatus.DISALLOWED, detail="disallowed by robots.txt")
        return await self._fetch_with_retries(url)
