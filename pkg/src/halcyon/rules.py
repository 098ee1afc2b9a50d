"""Delegation rules: a tiny rule language, its parser and matcher.

Grammar::

    file      := { rule }
    rule      := "rule" NAME ":" "when" pred { "and" pred } "=>" action { ";" action }
    pred      := "payload" "contains" STRING
               | "sender" "is" ID
               | "urgency" (">=" | "≥") LEVEL
    action    := "forward" ID "urgency" "=" LEVEL
               | "reply" ("sender" | ID) STRING

Whitespace between tokens is insignificant and ``#`` starts a comment that
runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .envelope import Envelope, Urgency
from .sender import SendRequest

FORWARD_PREFIX = "fwd[{sender}]: "
ORIGINAL_SENDER = "sender"


class ParseError(ValueError):
    def __init__(self, line: int, column: int, expected: str, found: str) -> None:
        super().__init__(f"line {line}, column {column}: expected {expected}, found {found}")
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found


@dataclass(frozen=True)
class PayloadContains:
    keyword: str

    def holds(self, env: Envelope) -> bool:
        return self.keyword.lower() in env.payload.lower()

    def render(self) -> str:
        return f"payload contains {quote(self.keyword)}"


@dataclass(frozen=True)
class SenderIs:
    principal: str

    def holds(self, env: Envelope) -> bool:
        return env.sender == self.principal

    def render(self) -> str:
        return f"sender is {self.principal}"


@dataclass(frozen=True)
class UrgencyAtLeast:
    level: Urgency

    def holds(self, env: Envelope) -> bool:
        return env.urgency >= self.level

    def render(self) -> str:
        return f"urgency >= {self.level.label}"


Predicate = Union[PayloadContains, SenderIs, UrgencyAtLeast]


@dataclass(frozen=True)
class ForwardTo:
    target: str
    urgency: Urgency

    def render(self) -> str:
        return f"forward {self.target} urgency={self.urgency.label}"


@dataclass(frozen=True)
class ReplyTo:
    # ORIGINAL_SENDER means the sender of the matched envelope
    target: str
    payload: str

    def render(self) -> str:
        return f"reply {self.target} {quote(self.payload)}"


RuleAction = Union[ForwardTo, ReplyTo]


@dataclass(frozen=True)
class Rule:
    name: str
    predicates: tuple[Predicate, ...]
    actions: tuple[RuleAction, ...]
    line: int = field(default=0, compare=False)

    def matches(self, env: Envelope) -> bool:
        return all(p.holds(env) for p in self.predicates)

    def render(self) -> str:
        preds = " and ".join(p.render() for p in self.predicates)
        acts = " ; ".join(a.render() for a in self.actions)
        return f"rule {self.name}: when {preds} => {acts}"


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()
    fallback: Optional[str] = None

    def __len__(self) -> int:
        return len(self.rules)

    def names(self) -> list[str]:
        return [r.name for r in self.rules]


# Actions produced by matching an envelope.


@dataclass(frozen=True)
class Forward:
    request: SendRequest

    @property
    def target(self) -> str:
        (target,) = self.request.destinations
        return target


@dataclass(frozen=True)
class Reply:
    to: str
    payload: str


Action = Union[Forward, Reply]


def quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def forward_request(env: Envelope, target: str, urgency: Urgency) -> SendRequest:
    return SendRequest(
        payload=FORWARD_PREFIX.format(sender=env.sender) + env.payload,
        sender=env.sender,
        destinations=frozenset({target}),
        urgency=urgency,
        validity=env.validity,
        perishable=env.perishable,
    )


def match(env: Envelope, rs: RuleSet) -> list[Action]:
    """Actions of every matching rule, in file order."""
    out: list[Action] = []
    for rule in rs.rules:
        if not rule.matches(env):
            continue
        for act in rule.actions:
            if isinstance(act, ForwardTo):
                out.append(Forward(forward_request(env, act.target, act.urgency)))
            else:
                to = env.sender if act.target == ORIGINAL_SENDER else act.target
                out.append(Reply(to, act.payload))
    return out


def format_rules(rs: RuleSet) -> str:
    return "".join(rule.render() + "\n" for rule in rs.rules)


# --- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<arrow>=>)
  | (?P<geq>>=|≥)
  | (?P<punct>[:;=])
  | (?P<word>[A-Za-z0-9_][A-Za-z0-9_.\-]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                raise ParseError(line, col, "closing quote", "unterminated string")
            raise ParseError(line, col, "token", repr(ch))
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "string":
            body = lexeme[1:-1]
            tokens.append(Token("string", re.sub(r"\\(.)", r"\1", body), line, col))
        elif kind == "geq":
            tokens.append(Token("punct", ">=", line, col))
        elif kind == "arrow":
            tokens.append(Token("punct", "=>", line, col))
        elif kind in ("punct", "word"):
            tokens.append(Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --- parser ------------------------------------------------------------------

_LEVELS = {u.label for u in Urgency}


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, expected: str) -> ParseError:
        t = self.tok
        return ParseError(t.line, t.column, expected, t.describe())

    def at(self, text: str) -> bool:
        return self.tok.kind in ("word", "punct") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.fail(repr(text))
        return self.advance()

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def word(self, expected: str) -> str:
        if self.tok.kind != "word":
            raise self.fail(expected)
        return self.advance().text

    def string(self, expected: str) -> str:
        if self.tok.kind != "string" or not self.tok.text:
            raise self.fail(expected)
        return self.advance().text

    def level(self) -> Urgency:
        if self.tok.kind != "word" or self.tok.text.lower() not in _LEVELS:
            raise self.fail("urgency level")
        return Urgency.parse(self.advance().text)

    def parse(self) -> RuleSet:
        rules: list[Rule] = []
        seen: set[str] = set()
        while self.tok.kind != "eof":
            start = self.expect("rule")
            if self.tok.text in seen and self.tok.kind == "word":
                raise self.fail("unique rule name")
            rule = self.rule(start.line)
            seen.add(rule.name)
            rules.append(rule)
        return RuleSet(tuple(rules))

    def rule(self, line: int) -> Rule:
        name = self.word("rule name")
        self.expect(":")
        self.expect("when")
        preds = [self.predicate()]
        while self.at("and"):
            self.advance()
            preds.append(self.predicate())
        self.expect("=>")
        actions = [self.action()]
        while self.at(";"):
            self.advance()
            actions.append(self.action())
        return Rule(name, tuple(preds), tuple(actions), line)

    def predicate(self) -> Predicate:
        if self.at("payload"):
            self.advance()
            self.expect("contains")
            return PayloadContains(self.string("non-empty keyword string"))
        if self.at("sender"):
            self.advance()
            self.expect("is")
            return SenderIs(self.word("principal id"))
        if self.at("urgency"):
            self.advance()
            self.expect(">=")
            return UrgencyAtLeast(self.level())
        raise self.fail("predicate")

    def action(self) -> RuleAction:
        if self.at("forward"):
            self.advance()
            target = self.word("principal id")
            self.expect("urgency")
            self.expect("=")
            return ForwardTo(target, self.level())
        if self.at("reply"):
            self.advance()
            target = self.word("'sender' or principal id")
            return ReplyTo(target, self.string("non-empty reply payload string"))
        raise self.fail("action")


def parse_rules(text: str) -> RuleSet:
    return _Parser(text).parse()


def merge(rulesets: Iterable[RuleSet], fallback: Optional[str] = None) -> RuleSet:
    rules: list[Rule] = []
    for rs in rulesets:
        rules.extend(rs.rules)
    return RuleSet(tuple(rules), fallback)
