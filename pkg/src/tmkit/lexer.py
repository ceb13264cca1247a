"""Tokenizer shared by the ``.tm`` parser, the ``.ebl`` parser and expressions."""

from dataclasses import dataclass

from .errors import ParseError

# Unicode spellings are folded to one canonical ASCII form.
_UNICODE = {
    "≤": "<=",
    "≥": ">=",
    "≠": "!=",
    "∧": "and",
    "∨": "or",
    "¬": "not",
    "∈": "in",
    "ℕ": "NAT",
    "×": "*",
    "−": "-",
    "⇒": "=>",
}

# Longest first so that "-->" wins over "-" and ":=" over ":".
_SYMBOLS = [
    "-->", ":=", "<=", ">=", "!=", "/=", "=>",
    "{", "}", "(", ")", ",", ".", ":", "?", "=", "<", ">", "+", "-", "*", "_",
]

KEYWORD_OPS = {"and", "or", "not", "in", "div", "mod", "true", "false"}


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, INT, STRING, OP, EOF
    value: str
    line: int
    column: int

    def describe(self):
        if self.kind == "EOF":
            return "end of input"
        return repr(self.value)


def tokenize(text, origin="<memory>"):
    tokens = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        start_col = col
        if ch in _UNICODE:
            canon = _UNICODE[ch]
            kind = "NAME" if canon == "NAT" else "OP"
            tokens.append(Token(kind, canon, line, start_col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or (ch == "_" and i + 1 < n and (text[i + 1].isalnum() or text[i + 1] == "_")):
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "OP" if word in KEYWORD_OPS else "NAME"
            tokens.append(Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] != '"' and text[j] != "\n":
                j += 1
            if j >= n or text[j] != '"':
                raise ParseError("unterminated string", line, start_col, ['"'], origin)
            tokens.append(Token("STRING", text[i + 1:j], line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                value = "!=" if sym == "/=" else sym
                tokens.append(Token("OP", value, line, start_col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, start_col, [], origin)
    tokens.append(Token("EOF", "", line, col))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual expect/accept helpers."""

    def __init__(self, tokens, origin="<memory>"):
        self.tokens = tokens
        self.pos = 0
        self.origin = origin

    @property
    def current(self):
        return self.tokens[self.pos]

    def peek(self, offset=1):
        idx = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[idx]

    def advance(self):
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, value, kind=None):
        tok = self.current
        if kind is not None and tok.kind != kind:
            return False
        return tok.value == value and tok.kind in ("OP", "NAME")

    def accept(self, value):
        if self.at(value):
            return self.advance()
        return None

    def error(self, message, expected=(), tok=None):
        tok = tok or self.current
        return ParseError(message, tok.line, tok.column, expected, self.origin)

    def expect(self, value):
        if self.at(value):
            return self.advance()
        raise self.error(f"unexpected {self.current.describe()}", [repr(value)])

    def expect_kind(self, kind, what=None):
        tok = self.current
        if tok.kind != kind:
            raise self.error(f"unexpected {tok.describe()}", [what or kind])
        return self.advance()
