"""
Tests for the polite HTTP client.

Requests go to an httpx.MockTransport; the clock and sleep are replaced so
pacing can be checked without waiting.
"""
from typing import Callable, Dict, List

import httpx
import pytest

from app.services.polite_client import DelaySampler, FetchStatus, PoliteClient, next_delay
from app.services.robots import RobotsPolicy

AGENT = "bifaces-harvester/1.0 (test)"
ROBOTS_OK = "User-agent: *\nDisallow: /private/\n"


class FakeClock:
    """Monotonic clock advanced only by sleeping."""

    def __init__(self) -> None:
        self.now = 0.0
        self.sleeps: List[float] = []

    def __call__(self) -> float:
        return self.now

    async def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.now += seconds


def scripted_handler(routes: Dict[str, List[int]], seen: List[httpx.Request]) -> Callable:
    """Handler answering each path with its queued statuses, then 200."""

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        if request.url.path == "/robots.txt" and "/robots.txt" not in routes:
            return httpx.Response(200, text=ROBOTS_OK)
        queue = routes.get(request.url.path, [])
        status = queue.pop(0) if queue else 200
        return httpx.Response(status, content=b"body" if status == 200 else b"")

    return handler


def make_client(handler, clock: FakeClock, max_retries: int = 3, min_s: float = 0.0, max_s: float = 0.0, **kwargs):
    http = httpx.AsyncClient(transport=httpx.MockTransport(handler))
    return PoliteClient(
        http=http,
        sampler=DelaySampler(min_s, max_s, seed=3),
        user_agent=AGENT,
        max_retries=max_retries,
        clock=clock,
        sleep=clock.sleep,
        **kwargs,
    )


def test_delay_sampler_stays_in_interval():
    """Samples lie within [min_s, max_s]."""
    sampler = DelaySampler(1.0, 3.0, seed=42)
    samples = [next_delay(sampler) for _ in range(1000)]
    assert all(1.0 <= s <= 3.0 for s in samples)
    assert len(set(samples)) > 1


def test_delay_sampler_reproducible_with_seed():
    """The same seed yields the same sequence."""
    a = DelaySampler(1.0, 3.0, seed=9)
    b = DelaySampler(1.0, 3.0, seed=9)
    assert [a.next_delay() for _ in range(20)] == [b.next_delay() for _ in range(20)]


def test_delay_sampler_degenerate_interval():
    """Equal bounds always give that value."""
    sampler = DelaySampler(2.0, 2.0)
    assert {sampler.next_delay() for _ in range(10)} == {2.0}


def test_delay_sampler_honours_crawl_delay():
    """Crawl-delay raises the lower bound, and the upper bound with it."""
    sampler = DelaySampler(1.0, 3.0, seed=1, crawl_delay_s=5.0)
    assert sampler.lower_bound == 5.0
    assert all(s == 5.0 for s in (sampler.next_delay() for _ in range(10)))


def test_delay_sampler_rejects_inverted_interval():
    """Invalid intervals raise ValueError."""
    with pytest.raises(ValueError):
        DelaySampler(3.0, 1.0)


@pytest.mark.asyncio
async def test_fetch_ok_sends_user_agent():
    """A successful fetch returns the body; the User-Agent is sent."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    async with make_client(scripted_handler({}, seen), clock) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.OK
    assert outcome.content == b"body"
    assert outcome.attempts == 1
    assert [r.url.path for r in seen] == ["/robots.txt", "/page"]
    assert all(r.headers["user-agent"] == AGENT for r in seen)


@pytest.mark.asyncio
async def test_transient_error_is_retried():
    """5xx answers are retried until success."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    async with make_client(scripted_handler({"/page": [503, 502]}, seen), clock) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.ok
    assert outcome.attempts == 3


@pytest.mark.asyncio
async def test_retries_are_bounded():
    """After max_retries extra attempts the fetch gives up."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    handler = scripted_handler({"/page": [503] * 10}, seen)
    async with make_client(handler, clock, max_retries=2) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.RETRYABLE_ERROR
    assert outcome.attempts == 3
    assert outcome.http_status == 503
    assert sum(1 for r in seen if r.url.path == "/page") == 3


@pytest.mark.asyncio
async def test_permanent_error_not_retried():
    """4xx answers are final."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    async with make_client(scripted_handler({"/page": [404]}, seen), clock) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.PERMANENT_ERROR
    assert outcome.attempts == 1
    assert outcome.http_status == 404


@pytest.mark.asyncio
@pytest.mark.parametrize("status", [400, 403, 408, 410, 425, 429])
async def test_every_client_error_is_permanent(status):
    """Timeouts and rate limits answered with a 4xx are not retried either."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    async with make_client(scripted_handler({"/page": [status]}, seen), clock) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.PERMANENT_ERROR
    assert outcome.http_status == status
    assert outcome.attempts == 1
    assert [r.url.path for r in seen].count("/page") == 1


@pytest.mark.asyncio
@pytest.mark.parametrize(
    "error",
    [
        lambda request: httpx.InvalidURL("Invalid non-printable ASCII character in URL"),
        lambda request: httpx.UnsupportedProtocol("Request URL has an unsupported protocol", request=request),
        lambda request: httpx.TooManyRedirects("Exceeded maximum allowed redirects", request=request),
        lambda request: httpx.DecodingError("Invalid gzip body", request=request),
    ],
)
async def test_request_errors_become_permanent_outcomes(error):
    """httpx errors other than timeouts and transport failures end the fetch without raising."""
    clock = FakeClock()
    calls: List[httpx.Request] = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(request)
        raise error(request)

    policy = RobotsPolicy.allow_everything()
    async with make_client(handler, clock, policy=policy) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.PERMANENT_ERROR
    assert outcome.attempts == 1
    assert outcome.http_status is None
    assert len(calls) == 1


@pytest.mark.asyncio
async def test_robots_request_error_refuses_everything():
    """A robots.txt that cannot be requested at all is treated as unreachable."""
    clock = FakeClock()

    def handler(request: httpx.Request) -> httpx.Response:
        raise httpx.InvalidURL("bad host")

    async with make_client(handler, clock) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.DISALLOWED


@pytest.mark.asyncio
async def test_transport_errors_are_retryable():
    """Connection failures are retried and reported when they persist."""
    clock = FakeClock()

    def handler(request: httpx.Request) -> httpx.Response:
        raise httpx.ConnectError("refused", request=request)

    policy = RobotsPolicy.allow_everything()
    async with make_client(handler, clock, max_retries=1, policy=policy) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.RETRYABLE_ERROR
    assert outcome.attempts == 2
    assert "transport error" in outcome.detail


@pytest.mark.asyncio
async def test_disallowed_url_is_never_requested():
    """robots.txt exclusions produce a disallowed outcome without a request."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    async with make_client(scripted_handler({}, seen), clock) as client:
        outcome = await client.fetch("http://archive.test/private/secret.html")

    assert outcome.status == FetchStatus.DISALLOWED
    assert outcome.attempts == 0
    assert [r.url.path for r in seen] == ["/robots.txt"]


@pytest.mark.asyncio
async def test_missing_robots_allows_everything():
    """A 404 robots.txt imposes no restriction."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    async with make_client(scripted_handler({"/robots.txt": [404]}, seen), clock) as client:
        outcome = await client.fetch("http://archive.test/private/x")
    assert outcome.ok


@pytest.mark.asyncio
async def test_unreachable_robots_refuses_everything():
    """A robots.txt that keeps failing with 5xx refuses every path."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    handler = scripted_handler({"/robots.txt": [500] * 10}, seen)
    async with make_client(handler, clock, max_retries=1) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.status == FetchStatus.DISALLOWED
    assert all(r.url.path == "/robots.txt" for r in seen)


@pytest.mark.asyncio
async def test_requests_are_paced():
    """Consecutive requests are separated by at least the sampled delay."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    async with make_client(scripted_handler({}, seen), clock, min_s=2.0, max_s=2.0) as client:
        await client.fetch("http://archive.test/a")
        await client.fetch("http://archive.test/b")

    # robots.txt goes first without waiting; each later request waits 2s.
    assert clock.sleeps == [2.0, 2.0]
    assert client.requests_issued == 3


@pytest.mark.asyncio
async def test_retries_are_paced_too():
    """Retries wait the sampled delay like any other request."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    policy = RobotsPolicy.allow_everything()
    handler = scripted_handler({"/page": [503, 503]}, seen)
    async with make_client(handler, clock, min_s=1.5, max_s=1.5, policy=policy) as client:
        outcome = await client.fetch("http://archive.test/page")

    assert outcome.ok
    assert clock.sleeps == [1.5, 1.5]


@pytest.mark.asyncio
async def test_crawl_delay_from_robots_is_honoured():
    """A Crawl-delay larger than the configured delay wins."""
    seen: List[httpx.Request] = []
    clock = FakeClock()
    handler = scripted_handler({}, seen)

    def with_crawl_delay(request: httpx.Request) -> httpx.Response:
        if request.url.path == "/robots.txt":
            return httpx.Response(200, text="User-agent: *\nCrawl-delay: 5\n")
        return handler(request)

    async with make_client(with_crawl_delay, clock, min_s=1.0, max_s=2.0) as client:
        await client.fetch("http://archive.test/a")
    assert clock.sleeps == [5.0]


def test_allows_requires_loaded_policy():
    """Checking a URL before robots.txt is loaded is a programming error."""
    clock = FakeClock()
    client = make_client(scripted_handler({}, []), clock)
    with pytest.raises(RuntimeError):
        client.allows("http://archive.test/page")
