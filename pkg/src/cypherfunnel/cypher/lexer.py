"""Cypher tokenizer shared by the naive validator and the subset parser."""

from __future__ import annotations

import re
from dataclasses import dataclass

MAX_QUERY_BYTES = 64 * 1024

KEYWORDS = frozenset(
    """
    MATCH OPTIONAL WHERE WITH RETURN UNWIND AS CREATE MERGE ON SET DELETE DETACH
    REMOVE CALL YIELD UNION ALL ORDER BY ASC ASCENDING DESC DESCENDING SKIP LIMIT
    DISTINCT AND OR XOR NOT IN IS NULL TRUE FALSE STARTS ENDS CONTAINS CASE WHEN
    THEN ELSE END FOREACH LOAD CSV EXISTS
    """.split()
)

# longest first so maximal munch works
_SYMBOLS = ("<>", "<=", ">=", "=~", "+=", "..", "(", ")", "[", "]", "{", "}",
            ",", ".", ":", ";", "|", "=", "<", ">", "+", "-", "*", "/", "%", "^", "$")

_IDENT = re.compile(r"[^\W\d]\w*")
_NUMBER = re.compile(
    r"(?:\d+\.\d+(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)|(\d+)"
)
_HEX = re.compile(r"0x[0-9a-fA-F]+")


class LexError(ValueError):
    def __init__(self, offset: int, line: int, column: int, message: str):
        super().__init__(f"{message} at line {line}, column {column} (offset {offset})")
        self.offset = offset
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class CypherToken:
    kind: str  # keyword, identifier, parameter, integer, float, string, symbol
    text: str
    offset: int
    line: int
    column: int

    @property
    def upper(self) -> str:
        return self.text.upper()

    @property
    def end(self) -> int:
        return self.offset + len(self.text)

    def is_keyword(self, *words: str) -> bool:
        return self.kind == "keyword" and self.text.upper() in words

    def is_symbol(self, *symbols: str) -> bool:
        return self.kind == "symbol" and self.text in symbols


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def advance(self, n: int) -> None:
        chunk = self.text[self.pos : self.pos + n]
        newlines = chunk.count("\n")
        if newlines:
            self.line += newlines
            self.col = n - chunk.rfind("\n")
        else:
            self.col += n
        self.pos += n

    def error(self, message: str, offset: int | None = None) -> LexError:
        if offset is None:
            return LexError(self.pos, self.line, self.col, message)
        before = self.text[:offset]
        line = before.count("\n") + 1
        col = offset - (before.rfind("\n") + 1) + 1
        return LexError(offset, line, col, message)


def _scan_quoted(cur: _Cursor, quote: str) -> int:
    """Length of the quoted region starting at cur.pos, escapes included."""
    text, start = cur.text, cur.pos
    i = start + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if quote == "`":
            if ch == "`":
                if i + 1 < n and text[i + 1] == "`":
                    i += 2
                    continue
                return i + 1 - start
        elif ch == "\\":
            i += 2
            continue
        elif ch == quote:
            return i + 1 - start
        i += 1
    what = "backtick identifier" if quote == "`" else "string literal"
    raise cur.error(f"unterminated {what}")


def tokenize(text: str | bytes) -> list[CypherToken]:
    """Split text into tokens; comments and whitespace are dropped."""
    if isinstance(text, (bytes, bytearray)):
        raw = bytes(text)
        if len(raw) > MAX_QUERY_BYTES:
            raise LexError(0, 1, 1, f"query exceeds {MAX_QUERY_BYTES} bytes")
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LexError(exc.start, 1, exc.start + 1, "invalid UTF-8 byte sequence") from None
    elif len(text) > MAX_QUERY_BYTES and len(text.encode("utf-8", "surrogatepass")) > MAX_QUERY_BYTES:
        raise LexError(0, 1, 1, f"query exceeds {MAX_QUERY_BYTES} bytes")

    cur = _Cursor(text)
    tokens: list[CypherToken] = []
    n = len(text)
    while cur.pos < n:
        ch = text[cur.pos]
        if ch.isspace():
            cur.advance(1)
            continue
        if text.startswith("//", cur.pos):
            end = text.find("\n", cur.pos)
            cur.advance((n if end < 0 else end) - cur.pos)
            continue
        if text.startswith("/*", cur.pos):
            end = text.find("*/", cur.pos + 2)
            if end < 0:
                raise cur.error("unterminated block comment")
            cur.advance(end + 2 - cur.pos)
            continue

        start, line, col = cur.pos, cur.line, cur.col
        if ch in "'\"":
            length = _scan_quoted(cur, ch)
            kind = "string"
        elif ch == "`":
            length = _scan_quoted(cur, ch)
            if length == 2:
                raise cur.error("empty backtick identifier")
            kind = "identifier"
        elif ch == "$":
            m = _IDENT.match(text, start + 1) or re.compile(r"\d+").match(text, start + 1)
            if m:
                length = m.end() - start
                kind = "parameter"
            else:
                length, kind = 1, "symbol"
        elif ch.isdigit() or (ch == "." and start + 1 < n and text[start + 1].isdigit()
                              and not (tokens and tokens[-1].text == "." )):
            m = _HEX.match(text, start)
            if m:
                length, kind = m.end() - start, "integer"
            else:
                m = _NUMBER.match(text, start)
                if m is None:
                    raise cur.error("malformed number")
                length = m.end() - start
                kind = "integer" if m.group(1) else "float"
            follow = _IDENT.match(text, start + length)
            if follow:
                raise cur.error("malformed number literal", start)
        elif _IDENT.match(text, start):
            m = _IDENT.match(text, start)
            length = m.end() - start
            kind = "keyword" if m.group().upper() in KEYWORDS else "identifier"
        else:
            for sym in _SYMBOLS:
                if text.startswith(sym, start):
                    length, kind = len(sym), "symbol"
                    break
            else:
                raise cur.error(f"unexpected character {ch!r}")
        tokens.append(CypherToken(kind, text[start : start + length], start, line, col))
        cur.advance(length)
    return tokens


def unquote(token_text: str) -> str:
    """Value of a string literal or backtick identifier token."""
    if token_text[:1] == "`":
        return token_text[1:-1].replace("``", "`")
    if token_text[:1] not in "'\"":
        return token_text
    body = token_text[1:-1]
    escapes = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f",
               "\\": "\\", "'": "'", '"': '"'}
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt in "uU":
                width = 4 if nxt == "u" else 8
                digits = body[i + 2 : i + 2 + width]
                try:
                    out.append(chr(int(digits, 16)))
                    i += 2 + width
                    continue
                except ValueError:
                    pass
            out.append(escapes.get(nxt, "\\" + nxt))
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)
