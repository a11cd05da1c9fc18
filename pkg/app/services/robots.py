"""
robots.txt parsing and evaluation.

Implements the Robots Exclusion Protocol as sites serve it in practice:
User-agent groups, Allow/Disallow prefix rules with `*` wildcards and a `$`
end anchor, longest match wins, Allow wins ties, and Crawl-delay.
"""
import logging
import math
import re
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Set

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

WILDCARD_AGENT = "*"
ROBOTS_PATH = "/robots.txt"


class RuleDirective(str, Enum):
    """Rule kind."""

    ALLOW = "allow"
    DISALLOW = "disallow"


class RobotsRule(BaseModel):
    """
    One Allow/Disallow line bound to a user-agent pattern.

    Attributes:
        user_agent: Lowercased agent token of the group ("*" for all)
        directive: allow or disallow
        path: Path pattern (prefix, may contain `*` and a trailing `$`)
    """

    user_agent: str
    directive: RuleDirective
    path: str


class RobotsPolicy(BaseModel):
    """
    Parsed robots.txt.

    Attributes:
        rules: Rules in file order
        agents: Every agent token that opened a group
        crawl_delay_s: First Crawl-delay declared in the file, if any
        crawl_delays: Crawl-delay per agent token
        disallow_all: Set when the robots file could not be fetched; every
            path is then refused
    """

    rules: List[RobotsRule] = Field(default_factory=list)
    agents: List[str] = Field(default_factory=list)
    crawl_delay_s: Optional[float] = None
    crawl_delays: Dict[str, float] = Field(default_factory=dict)
    disallow_all: bool = False

    @classmethod
    def allow_everything(cls) -> "RobotsPolicy":
        return cls()

    @classmethod
    def refuse_everything(cls) -> "RobotsPolicy":
        return cls(disallow_all=True)

    def crawl_delay_for(self, agent: str) -> Optional[float]:
        """Crawl-delay that applies to `agent`, if any group declares one."""
        delays = [
            self.crawl_delays[token]
            for token in _applicable_agents(self, agent)
            if token in self.crawl_delays
        ]
        return max(delays) if delays else None


def parse_robots(text: Optional[str]) -> RobotsPolicy:
    """
    Parse robots.txt contents.

    Lenient: unparseable lines, rules outside any group and unknown fields
    are skipped, so malformed input degrades to permissive rules.

    Args:
        text: File contents (None or empty means no rules)

    Returns:
        RobotsPolicy: Captured groups, rules and crawl delays
    """
    policy = RobotsPolicy()
    if not text:
        return policy

    current_agents: List[str] = []
    in_rules = False

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line or ":" not in line:
            continue
        field, value = (part.strip() for part in line.split(":", 1))
        field = field.lower()

        if field == "user-agent":
            if in_rules:
                current_agents = []
                in_rules = False
            if value:
                token = value.lower()
                current_agents.append(token)
                if token not in policy.agents:
                    policy.agents.append(token)
        elif field in ("allow", "disallow"):
            if not current_agents:
                logger.debug(f"robots.txt line {line_no}: rule outside a group skipped")
                continue
            in_rules = True
            if not value:
                # Empty Disallow means "allow everything"; empty Allow is a no-op.
                continue
            directive = RuleDirective(field)
            for agent in current_agents:
                policy.rules.append(RobotsRule(user_agent=agent, directive=directive, path=value))
        elif field == "crawl-delay":
            if not current_agents:
                continue
            in_rules = True
            try:
                delay = float(value)
            except ValueError:
                logger.debug(f"robots.txt line {line_no}: bad Crawl-delay {value!r}")
                continue
            if not math.isfinite(delay) or delay < 0:
                continue
            for agent in current_agents:
                policy.crawl_delays.setdefault(agent, delay)
            if policy.crawl_delay_s is None:
                policy.crawl_delay_s = delay

    return policy


def product_token(agent: str) -> str:
    """Lower-cased product name of a User-Agent, e.g. "bifaces-harvester" for "Bifaces-Harvester/1.0 (...)"."""
    return agent.split("/", 1)[0].strip().lower()


def _applicable_agents(policy: RobotsPolicy, agent: str) -> Set[str]:
    token = product_token(agent)
    specific = {a for a in policy.agents if a != WILDCARD_AGENT and product_token(a) == token}
    if specific:
        return specific
    return {WILDCARD_AGENT} if WILDCARD_AGENT in policy.agents else set()


@lru_cache(maxsize=1024)
def _compile(pattern: str) -> "re.Pattern[str]":
    anchored = pattern.endswith("$")
    body = pattern[:-1] if anchored else pattern
    regex = ".*".join(re.escape(part) for part in body.split("*"))
    return re.compile("^" + regex + ("$" if anchored else ""))


def is_allowed(policy: RobotsPolicy, agent: str, path: str) -> bool:
    """
    Decide whether `agent` may fetch `path`.

    The longest matching rule among the applicable groups decides; Allow wins
    ties at equal length; no matching rule means allowed.

    Args:
        policy: Parsed robots policy
        agent: User-agent string of the client
        path: URL path, including any query string, starting with "/"

    Returns:
        True if fetching is allowed
    """
    if not path.startswith("/"):
        path = "/" + path
    if path == ROBOTS_PATH:
        return True
    if policy.disallow_all:
        return False

    applicable = _applicable_agents(policy, agent)
    best_length = -1
    allowed = True
    for rule in policy.rules:
        if rule.user_agent not in applicable:
            continue
        if not _compile(rule.path).match(path):
            continue
        length = len(rule.path)
        if length > best_length or (length == best_length and rule.directive == RuleDirective.ALLOW):
            best_length = length
            allowed = rule.directive == RuleDirective.ALLOW
    return allowed
