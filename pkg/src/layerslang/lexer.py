"""Scanner for Layers source text.

Keywords are reserved and case sensitive; the layer kinds (FI, CI, F, FO,
C, MP, CA) are the only upper-case ones.  Numeric literals keep their exact
decimal spelling so that integer-only contexts can reject fractions without
going through a float.
"""

from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum

from .diagnostics import LexError, Span

KEYWORDS = (
    "const", "batch", "threads", "log", "data", "filename",
    "ascii", "binary", "network", "tr", "ts", "va",
    "FI", "CI", "F", "FO", "C", "MP",
    "CA", "nz", "nr", "nc", "cr", "cc",
    "numnodes", "local", "classification", "regression", "autoencoder", "nk",
    "kr", "kc", "rpad", "cpad", "stride", "sizer",
    "sizec", "script", "mu", "mmu", "l2", "l1",
    "maxn", "drop", "noiser", "noisesd", "brightness", "contrast",
    "lambda", "noiseb", "bn", "act", "shift", "flip",
    "balance", "printkernels", "train", "load", "save", "testout",
    "zscore", "yuv", "center", "div",
    # used by the command grammar although missing from the keyword table
    "test",
)

PUNCTUATION = {
    "{": "LBRACE", "}": "RBRACE", "[": "LBRACK", "]": "RBRACK",
    "(": "LPAREN", ")": "RPAREN", ".": "DOT", ",": "COMMA",
    "=": "EQ", "->": "ARROW",
}

TokenKind = Enum(
    "TokenKind",
    [(kw.upper(), kw) for kw in KEYWORDS]
    + [(name, sym) for sym, name in PUNCTUATION.items()]
    + [("ID", "identifier"), ("CTE", "number"), ("NFILE", "file name"),
       ("EOF", "end of input")],
)

_KEYWORD_KINDS = {kw: TokenKind(kw) for kw in KEYWORDS}
_WHITESPACE = " \t\n\r"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    span: Span = field(compare=False)
    value: Decimal | str | None = None

    def describe(self):
        if self.kind is TokenKind.EOF:
            return "end of input"
        if self.kind in (TokenKind.ID, TokenKind.CTE, TokenKind.NFILE):
            return f"{self.kind.value} '{self.lexeme}'"
        return f"'{self.lexeme}'"


def is_letter(ch):
    return ch == "_" or ("a" <= ch <= "z") or ("A" <= ch <= "Z")


def is_digit(ch):
    return "0" <= ch <= "9"


class Lexer:
    def __init__(self, source):
        self.source = source
        self.pos = 0
        self.line = 1
        self.col = 1

    def _span(self, start, line, col):
        return Span(line, col, start, max(self.pos - start, 1))

    def _advance(self, n=1):
        for _ in range(n):
            if self.source[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _peek(self, k=0):
        i = self.pos + k
        return self.source[i] if i < len(self.source) else ""

    def _skip_trivia(self):
        while self.pos < len(self.source):
            ch = self.source[self.pos]
            if ch in _WHITESPACE:
                self._advance()
            elif ch == "/" and self._peek(1) == "/":
                while self.pos < len(self.source) and self.source[self.pos] != "\n":
                    if self.source[self.pos] == "\0":
                        self._error(LexError.UNEXPECTED_CHAR, "NUL character in source")
                    self._advance()
            else:
                break

    def _error(self, kind, message, start=None, line=None, col=None):
        start = self.pos if start is None else start
        span = Span(line or self.line, col or self.col, start,
                    max(self.pos - start, 1))
        raise LexError(kind, message, span)

    def next_token(self):
        self._skip_trivia()
        start, line, col = self.pos, self.line, self.col
        if self.pos >= len(self.source):
            return Token(TokenKind.EOF, "", Span(line, col, start, 0))
        ch = self.source[self.pos]

        if is_letter(ch):
            while is_letter(self._peek()) or is_digit(self._peek()):
                self._advance()
            text = self.source[start:self.pos]
            kind = _KEYWORD_KINDS.get(text, TokenKind.ID)
            return Token(kind, text, self._span(start, line, col))

        if is_digit(ch):
            while is_digit(self._peek()):
                self._advance()
            if self._peek() == "." and is_digit(self._peek(1)):
                self._advance()
                while is_digit(self._peek()):
                    self._advance()
            if is_letter(self._peek()):
                while is_letter(self._peek()) or is_digit(self._peek()):
                    self._advance()
                self._error(LexError.MALFORMED_NUMBER,
                            f"malformed number '{self.source[start:self.pos]}'",
                            start, line, col)
            text = self.source[start:self.pos]
            return Token(TokenKind.CTE, text, self._span(start, line, col), Decimal(text))

        if ch == '"':
            self._advance()
            while True:
                c = self._peek()
                if c == '"':
                    break
                if c == "" or c in _WHITESPACE:
                    self._error(LexError.UNTERMINATED_FILE,
                                "unterminated file name", start, line, col)
                if c == "\0" or not c.isprintable():
                    self._error(LexError.UNEXPECTED_CHAR,
                                f"invalid character {c!r} in file name")
                self._advance()
            if self.pos == start + 1:
                self._advance()
                self._error(LexError.UNTERMINATED_FILE, "empty file name",
                            start, line, col)
            self._advance()
            text = self.source[start:self.pos]
            return Token(TokenKind.NFILE, text, self._span(start, line, col), text[1:-1])

        if ch == "-" and self._peek(1) == ">":
            self._advance(2)
            return Token(TokenKind.ARROW, "->", self._span(start, line, col))
        if ch in PUNCTUATION:
            self._advance()
            return Token(TokenKind[PUNCTUATION[ch]], ch, self._span(start, line, col))

        if ch == "\0":
            self._error(LexError.UNEXPECTED_CHAR, "NUL character in source")
        self._error(LexError.UNEXPECTED_CHAR, f"unexpected character {ch!r}")


def tokenize(source):
    """Return the full token list for ``source``, ending with an EOF token.

    Raises LexError at the first lexical error.
    """
    lexer = Lexer(source)
    tokens = []
    while True:
        tok = lexer.next_token()
        tokens.append(tok)
        if tok.kind is TokenKind.EOF:
            return tokens
