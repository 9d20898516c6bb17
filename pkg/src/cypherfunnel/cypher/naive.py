"""Lightweight token-level validity rules."""

from __future__ import annotations

from .lexer import CypherToken, LexError, tokenize
from .parser import Diagnostic, SyntaxVerdict, lex_diagnostic

CLAUSE_KEYWORDS = frozenset(
    ["MATCH", "RETURN", "WITH", "WHERE", "CREATE", "MERGE", "DELETE", "SET",
     "REMOVE", "UNWIND", "CALL", "LIMIT", "SKIP", "UNION"]
)
REQUIRED_ANY = frozenset(["MATCH", "CREATE", "RETURN", "WITH"])
_PAIRS = {")": "(", "]": "[", "}": "{"}


def _diag(tok: CypherToken, message: str) -> Diagnostic:
    return Diagnostic(tok.offset, tok.line, tok.column, message)


def bracket_diagnostic(tokens: list[CypherToken]) -> Diagnostic | None:
    stack: list[CypherToken] = []
    for tok in tokens:
        if tok.kind != "symbol":
            continue
        if tok.text in "([{":
            stack.append(tok)
        elif tok.text in _PAIRS:
            if not stack:
                return _diag(tok, f"unmatched '{tok.text}'")
            if stack[-1].text != _PAIRS[tok.text]:
                top = stack[-1]
                return _diag(tok, f"'{tok.text}' closes '{top.text}' opened at offset {top.offset}")
            stack.pop()
    if stack:
        return _diag(stack[-1], f"unclosed '{stack[-1].text}'")
    return None


def brackets_balanced(text: str | bytes) -> bool:
    try:
        return bracket_diagnostic(tokenize(text)) is None
    except LexError:
        return False


def naive_validate(text: str | bytes) -> SyntaxVerdict:
    """Bracket balance, no doubled clause keyword, at least one main clause."""
    try:
        tokens = tokenize(text)
    except LexError as exc:
        return SyntaxVerdict.reject(lex_diagnostic(exc))

    diag = bracket_diagnostic(tokens)
    if diag is not None:
        return SyntaxVerdict.reject(diag)

    for prev, tok in zip(tokens, tokens[1:]):
        if tok.kind == "keyword" and prev.kind == "keyword":
            word = tok.upper
            if word in CLAUSE_KEYWORDS and word == prev.upper:
                return SyntaxVerdict.reject(_diag(tok, f"repeated clause keyword {word}"))

    if not any(t.kind == "keyword" and t.upper in REQUIRED_ANY for t in tokens):
        message = "no MATCH, CREATE, RETURN or WITH clause"
        if not tokens:
            return SyntaxVerdict.reject(Diagnostic(0, 1, 1, message))
        return SyntaxVerdict.reject(_diag(tokens[0], message))
    return SyntaxVerdict.ok()
