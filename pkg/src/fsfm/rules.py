"""Editable plain-text rule files backing the security and quality classifiers.

Format: UTF-8, one pattern per line, `#` starts a comment, and a `re:`
prefix marks a regular expression. Plain lines match as case-insensitive
substrings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional


@dataclass(frozen=True)
class Rule:
    source: str
    regex: Optional[re.Pattern] = None
    literal: Optional[str] = None

    def matches(self, content_lower: str, content: str) -> bool:
        if self.regex is not None:
            return self.regex.search(content) is not None
        return self.literal in content_lower


class RuleSet:
    """An ordered collection of patterns with a single match predicate."""

    def __init__(self, rules: Iterable[Rule]):
        self._rules = tuple(rules)
        literals = [rule.literal for rule in self._rules if rule.literal is not None]
        # One alternation pass beats per-pattern scans on hot paths.
        self._literal_union = (
            re.compile("|".join(re.escape(lit) for lit in literals), re.IGNORECASE)
            if literals
            else None
        )
        unionable: list[str] = []
        standalone: list[re.Pattern] = []
        for rule in self._rules:
            if rule.regex is None:
                continue
            # Backreferences and named-group refs would break inside an
            # alternation, so such patterns keep their own compiled form.
            if re.search(r"\\\d|\(\?P=", rule.regex.pattern):
                standalone.append(rule.regex)
            else:
                unionable.append(f"(?:{rule.regex.pattern})")
        self._regex_union = re.compile("|".join(unionable), re.IGNORECASE) if unionable else None
        self._standalone_regexes = tuple(standalone)

    def __len__(self) -> int:
        return len(self._rules)

    def matches(self, content: str) -> bool:
        if self._literal_union is not None and self._literal_union.search(content):
            return True
        if self._regex_union is not None and self._regex_union.search(content):
            return True
        return any(regex.search(content) for regex in self._standalone_regexes)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "RuleSet":
        rules = []
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("re:"):
                rules.append(Rule(source=line, regex=re.compile(line[3:], re.IGNORECASE)))
            else:
                rules.append(Rule(source=line, literal=line.lower()))
        return cls(rules)

    @classmethod
    def from_file(cls, path) -> "RuleSet":
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_lines(text.splitlines())


@dataclass(frozen=True)
class RuleBundle:
    """The three classifier rule sets the scoring engine consumes."""

    dangerous: RuleSet
    sensitive: RuleSet
    refusal: RuleSet


def _read_packaged(name: str) -> RuleSet:
    text = resources.files("fsfm").joinpath("rules", name).read_text(encoding="utf-8")
    return RuleSet.from_lines(text.splitlines())


@lru_cache(maxsize=1)
def default_rules() -> RuleBundle:
    """The rule files shipped with the package."""
    return RuleBundle(
        dangerous=_read_packaged("dangerous.rules"),
        sensitive=_read_packaged("sensitive.rules"),
        refusal=_read_packaged("refusal.rules"),
    )


def load_rules(directory) -> RuleBundle:
    """Load dangerous.rules, sensitive.rules, refusal.rules from a directory."""
    directory = Path(directory)
    return RuleBundle(
        dangerous=RuleSet.from_file(directory / "dangerous.rules"),
        sensitive=RuleSet.from_file(directory / "sensitive.rules"),
        refusal=RuleSet.from_file(directory / "refusal.rules"),
    )
