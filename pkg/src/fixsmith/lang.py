"""Tokenizer, vocabulary, and diagnostic checker for the fixsmith C-subset.

The language is a deterministic miniature of C: declarations, assignments,
arithmetic/relational expressions, ``if``/``else``, ``while`` and ``for``
with braced blocks, and opaque ``printf``/``scanf`` calls.  The grammar and
the diagnostic catalogue live in ``docs/diagnostics.md`` (normative); this
module implements them.

Everything here is pure: the same input always yields byte-identical output,
which is what makes the checker usable as a repair oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "TokenKind",
    "Token",
    "Program",
    "Vocabulary",
    "DEFAULT_VOCAB",
    "LexError",
    "DiagnosticCode",
    "Diagnostic",
    "DiagnosticReport",
    "tokenize",
    "detokenize",
    "program_to_stream",
    "program_from_stream",
    "check",
]


class TokenKind(Enum):
    """Token classes of the closed vocabulary."""

    Keyword = "Keyword"
    TypeName = "TypeName"
    Identifier = "Identifier"
    IntLiteral = "IntLiteral"
    Operator = "Operator"
    Separator = "Separator"  # reserved; no current lexeme maps to it
    OpenBrace = "OpenBrace"
    CloseBrace = "CloseBrace"
    OpenParen = "OpenParen"
    CloseParen = "CloseParen"
    Semicolon = "Semicolon"
    Comma = "Comma"
    Special = "Special"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    vocab_id: int

    def __repr__(self) -> str:
        return f"{self.kind.value}:{self.lexeme}"


@dataclass
class Program:
    """A program as an ordered sequence of token lines (1-based line numbers)."""

    lines: list[list[Token]] = field(default_factory=list)

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @property
    def token_count(self) -> int:
        return sum(len(line) for line in self.lines)

    def line(self, line_no: int) -> list[Token]:
        return self.lines[line_no - 1]

    def replace_line(self, line_no: int, tokens: list[Token]) -> "Program":
        """Return a copy with line ``line_no`` replaced by ``tokens``."""
        new_lines = [list(line) for line in self.lines]
        new_lines[line_no - 1] = list(tokens)
        return Program(new_lines)

    def copy(self) -> "Program":
        return Program([list(line) for line in self.lines])


KEYWORDS = ("if", "else", "while", "for", "printf", "scanf")
TYPE_NAMES = ("int", "float", "char")
# Order matters only for the vocabulary id layout, not for lexing.
OPERATORS = ("=", "==", "!=", "<", ">", "<=", ">=", "+", "-", "*", "/", "%",
             "&&", "||", "!", "&")
_PUNCT_KINDS = {
    ";": TokenKind.Semicolon,
    ",": TokenKind.Comma,
    "(": TokenKind.OpenParen,
    ")": TokenKind.CloseParen,
    "{": TokenKind.OpenBrace,
    "}": TokenKind.CloseBrace,
}

PAD_LEXEME = "_pad_"
EOS_LEXEME = "_eos_"
SOS_LEXEME = "_sos_"
NUM_LEXEME = "NUM"


class LexError(ValueError):
    """Input text falls outside the C-subset alphabet."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class Vocabulary:
    """Closed vocabulary: a bijection between (kind, lexeme) and integer ids.

    Layout (fixed, documented in docs/diagnostics.md): specials, line-number
    tokens, keywords, type names, operators, punctuation, the literal token,
    then the identifier pool.
    """

    def __init__(self, n_identifiers: int = 32, max_lines: int = 64):
        if n_identifiers < 1 or max_lines < 1:
            raise ValueError("vocabulary sizes must be positive")
        self.n_identifiers = n_identifiers
        self.max_lines = max_lines
        entries: list[tuple[TokenKind, str]] = [
            (TokenKind.Special, PAD_LEXEME),
            (TokenKind.Special, EOS_LEXEME),
            (TokenKind.Special, SOS_LEXEME),
        ]
        entries.extend((TokenKind.Special, f"LINE_{k}") for k in range(1, max_lines + 1))
        entries.extend((TokenKind.Keyword, kw) for kw in KEYWORDS)
        entries.extend((TokenKind.TypeName, tn) for tn in TYPE_NAMES)
        entries.extend((TokenKind.Operator, op) for op in OPERATORS)
        entries.extend((kind, lex) for lex, kind in _PUNCT_KINDS.items())
        entries.append((TokenKind.IntLiteral, NUM_LEXEME))
        entries.extend((TokenKind.Identifier, f"ID_{i}") for i in range(n_identifiers))
        self._entries = entries
        self._ids = {entry: i for i, entry in enumerate(entries)}
        self.pad_id = self._ids[(TokenKind.Special, PAD_LEXEME)]
        self.eos_id = self._ids[(TokenKind.Special, EOS_LEXEME)]
        self.sos_id = self._ids[(TokenKind.Special, SOS_LEXEME)]
        self._line_base = self._ids[(TokenKind.Special, "LINE_1")]

    @property
    def size(self) -> int:
        return len(self._entries)

    def id_of(self, kind: TokenKind, lexeme: str) -> int:
        try:
            return self._ids[(kind, lexeme)]
        except KeyError:
            raise KeyError(f"not in vocabulary: {kind.value}:{lexeme}") from None

    def token(self, kind: TokenKind, lexeme: str) -> Token:
        return Token(kind, lexeme, self.id_of(kind, lexeme))

    def by_id(self, vocab_id: int) -> Token:
        kind, lexeme = self._entries[vocab_id]
        return Token(kind, lexeme, vocab_id)

    def line_id(self, line_no: int) -> int:
        """Id of the LINE_k token for a 1-based line number."""
        if not 1 <= line_no <= self.max_lines:
            raise KeyError(f"line number {line_no} outside 1..{self.max_lines}")
        return self._line_base + line_no - 1

    def line_no_of(self, vocab_id: int) -> int | None:
        """Inverse of line_id; None when the id is not a LINE_k token."""
        if self._line_base <= vocab_id < self._line_base + self.max_lines:
            return vocab_id - self._line_base + 1
        return None

    def identifier(self, index: int) -> Token:
        return self.token(TokenKind.Identifier, f"ID_{index}")


DEFAULT_VOCAB = Vocabulary()

_TWO_CHAR_OPS = ("==", "!=", "<=", ">=", "&&", "||")
_ONE_CHAR_OPS = set("=<>+-*/%!&")


def _classify_word(word: str) -> tuple[TokenKind, str] | None:
    if word in KEYWORDS:
        return TokenKind.Keyword, word
    if word in TYPE_NAMES:
        return TokenKind.TypeName, word
    if word == NUM_LEXEME:
        return TokenKind.IntLiteral, NUM_LEXEME
    return None


def _is_pool_name(word: str, n_identifiers: int) -> bool:
    if not word.startswith("ID_"):
        return False
    tail = word[3:]
    return tail.isdigit() and int(tail) < n_identifiers


def tokenize(source: str, vocab: Vocabulary = DEFAULT_VOCAB) -> Program:
    """Lex ASCII source into a Program over the closed vocabulary.

    Raw identifier names are renamed to the ID_k pool in first-occurrence
    order (names already of pool form keep their slot); every integer literal
    collapses to the single NUM token.  Raises LexError on characters outside
    the alphabet or when the identifier pool is exhausted.
    """
    if source == "":
        return Program([])
    rename: dict[str, str] = {}
    used_slots: set[int] = set()

    def pool_name(raw: str, line_no: int, col: int) -> str:
        if raw in rename:
            return rename[raw]
        if _is_pool_name(raw, vocab.n_identifiers):
            rename[raw] = raw
            used_slots.add(int(raw[3:]))
            return raw
        for slot in range(vocab.n_identifiers):
            if slot not in used_slots:
                used_slots.add(slot)
                rename[raw] = f"ID_{slot}"
                return rename[raw]
        raise LexError(
            f"identifier pool exhausted ({vocab.n_identifiers} names)", line_no, col
        )

    lines: list[list[Token]] = []
    for line_no, text in enumerate(source.split("\n"), start=1):
        toks: list[Token] = []
        i = 0
        n = len(text)
        while i < n:
            ch = text[i]
            if ord(ch) >= 128:
                raise LexError(f"non-ASCII character {ch!r}", line_no, i + 1)
            if ch in " \t\r":
                i += 1
                continue
            if ch.isalpha() or ch == "_":
                j = i + 1
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                word = text[i:j]
                classified = _classify_word(word)
                if classified is not None:
                    toks.append(vocab.token(*classified))
                else:
                    toks.append(
                        vocab.token(TokenKind.Identifier, pool_name(word, line_no, i + 1))
                    )
                i = j
                continue
            if ch.isdigit():
                j = i + 1
                while j < n and text[j].isdigit():
                    j += 1
                toks.append(vocab.token(TokenKind.IntLiteral, NUM_LEXEME))
                i = j
                continue
            if ch in _PUNCT_KINDS:
                toks.append(vocab.token(_PUNCT_KINDS[ch], ch))
                i += 1
                continue
            two = text[i:i + 2]
            if two in _TWO_CHAR_OPS:
                toks.append(vocab.token(TokenKind.Operator, two))
                i += 2
                continue
            if ch in _ONE_CHAR_OPS:
                toks.append(vocab.token(TokenKind.Operator, ch))
                i += 1
                continue
            raise LexError(f"character {ch!r} outside the C-subset alphabet", line_no, i + 1)
        lines.append(toks)
    return Program(lines)


def detokenize(program: Program) -> str:
    """Render a Program as text: one space between tokens, newline between lines."""
    return "\n".join(" ".join(t.lexeme for t in line) for line in program.lines)


def program_to_stream(program: Program) -> str:
    """Serialize to the token-stream form: `kind:lexeme` space-separated, one line per program line."""
    return "\n".join(
        " ".join(f"{t.kind.value}:{t.lexeme}" for t in line) for line in program.lines
    )


def program_from_stream(text: str, vocab: Vocabulary = DEFAULT_VOCAB) -> Program:
    """Parse the token-stream form back into a Program."""
    if text == "":
        return Program([])
    lines: list[list[Token]] = []
    for raw_line in text.split("\n"):
        toks: list[Token] = []
        for item in raw_line.split():
            kind_name, _, lexeme = item.partition(":")
            if not lexeme and not item.endswith(":"):
                raise ValueError(f"malformed token-stream item: {item!r}")
            try:
                kind = TokenKind(kind_name)
            except ValueError:
                raise ValueError(f"unknown token kind in stream: {kind_name!r}") from None
            toks.append(vocab.token(kind, lexeme))
        lines.append(toks)
    return Program(lines)


class DiagnosticCode(Enum):
    UnbalancedParen = "UnbalancedParen"
    UnbalancedBrace = "UnbalancedBrace"
    MissingSemicolon = "MissingSemicolon"
    UndeclaredVariable = "UndeclaredVariable"
    MalformedExpression = "MalformedExpression"
    EmptyProgram = "EmptyProgram"


@dataclass(frozen=True)
class Diagnostic:
    line: int
    code: DiagnosticCode
    detail: str

    def render(self) -> str:
        return f"line {self.line}: {self.code.value}: {self.detail}"


@dataclass(frozen=True)
class DiagnosticReport:
    diagnostics: tuple[Diagnostic, ...]
    count: int

    @property
    def accepted(self) -> bool:
        return self.count == 0

    def render(self) -> str:
        return "\n".join(d.render() for d in self.diagnostics)


DIAGNOSTIC_CAP = 50

_BINARY_OPS = {"+", "-", "*", "/", "%", "==", "!=", "<", ">", "<=", ">=", "&&", "||", "&"}
_UNARY_OPS = {"!", "-", "&"}


def _balance_pass(positions: list[tuple[int, int, Token]],
                  out: list[tuple[int, int, DiagnosticCode, str]]) -> None:
    paren_stack: list[tuple[int, int]] = []
    brace_stack: list[tuple[int, int]] = []
    for line_no, col, tok in positions:
        if tok.kind is TokenKind.OpenParen:
            paren_stack.append((line_no, col))
        elif tok.kind is TokenKind.CloseParen:
            if paren_stack:
                paren_stack.pop()
            else:
                out.append((line_no, col, DiagnosticCode.UnbalancedParen,
                            "')' without matching '('"))
        elif tok.kind is TokenKind.OpenBrace:
            brace_stack.append((line_no, col))
        elif tok.kind is TokenKind.CloseBrace:
            if brace_stack:
                brace_stack.pop()
            else:
                out.append((line_no, col, DiagnosticCode.UnbalancedBrace,
                            "'}' without matching '{'"))
    for line_no, col in paren_stack:
        out.append((line_no, col, DiagnosticCode.UnbalancedParen, "'(' is never closed"))
    for line_no, col in brace_stack:
        out.append((line_no, col, DiagnosticCode.UnbalancedBrace, "'{' is never closed"))


class _StatementScanner:
    """Single linear pass over the token stream with panic-mode recovery.

    After any diagnostic the scanner skips ahead to the next semicolon
    (consumed) or brace (left for the top loop), so one defect cannot cascade
    into unbounded follow-up diagnostics.
    """

    def __init__(self, positions: list[tuple[int, int, Token]]):
        self.toks = positions
        self.i = 0
        self.declared: set[str] = set()
        self.out: list[tuple[int, int, DiagnosticCode, str]] = []
        # Position of the most recently consumed token; anchors diagnostics
        # that complain about something missing at the end of a statement.
        self.prev_pos = (1, 0)

    def peek(self) -> Token | None:
        if self.i < len(self.toks):
            return self.toks[self.i][2]
        return None

    def pos(self) -> tuple[int, int]:
        if self.i < len(self.toks):
            line_no, col, _ = self.toks[self.i]
            return line_no, col
        return self.prev_pos

    def advance(self) -> Token:
        line_no, col, tok = self.toks[self.i]
        self.prev_pos = (line_no, col)
        self.i += 1
        return tok

    def diag(self, code: DiagnosticCode, detail: str, at_prev: bool = False) -> None:
        line_no, col = self.prev_pos if at_prev else self.pos()
        self.out.append((line_no, col, code, detail))

    def panic(self) -> None:
        while True:
            t = self.peek()
            if t is None:
                return
            if t.kind is TokenKind.Semicolon:
                self.advance()
                return
            if t.kind in (TokenKind.OpenBrace, TokenKind.CloseBrace):
                return
            self.advance()

    # --- expressions -----------------------------------------------------

    def expr(self) -> bool:
        """Validate `operand (binop operand)*`; emit one diagnostic on failure."""
        if not self._operand():
            return False
        while True:
            t = self.peek()
            if t is not None and t.kind is TokenKind.Operator and t.lexeme in _BINARY_OPS:
                self.advance()
                if not self._operand():
                    return False
                continue
            return True

    def _operand(self) -> bool:
        while True:
            t = self.peek()
            if t is not None and t.kind is TokenKind.Operator and t.lexeme in _UNARY_OPS:
                self.advance()
                continue
            break
        t = self.peek()
        if t is None:
            self.diag(DiagnosticCode.MalformedExpression,
                      "expression ends abruptly", at_prev=True)
            return False
        if t.kind is TokenKind.IntLiteral:
            self.advance()
            return True
        if t.kind is TokenKind.Identifier:
            self._use(t)
            self.advance()
            return True
        if t.kind is TokenKind.OpenParen:
            self.advance()
            if not self.expr():
                return False
            nxt = self.peek()
            if nxt is not None and nxt.kind is TokenKind.CloseParen:
                self.advance()
                return True
            self.diag(DiagnosticCode.MalformedExpression,
                      "expected ')' to close a grouped expression")
            return False
        self.diag(DiagnosticCode.MalformedExpression,
                  f"expected an operand, found '{t.lexeme}'")
        return False

    def _use(self, tok: Token) -> None:
        if tok.lexeme not in self.declared:
            self.diag(DiagnosticCode.UndeclaredVariable,
                      f"'{tok.lexeme}' is used before any declaration")

    # --- statements ------------------------------------------------------

    def run(self) -> None:
        while True:
            t = self.peek()
            if t is None:
                return
            if t.kind in (TokenKind.OpenBrace, TokenKind.CloseBrace):
                self.advance()
                continue
            if t.kind is TokenKind.Semicolon:  # empty statement
                self.advance()
                continue
            if t.kind is TokenKind.TypeName:
                self.declaration()
            elif t.kind is TokenKind.Keyword and t.lexeme in ("if", "while"):
                self.cond_block(t.lexeme)
            elif t.kind is TokenKind.Keyword and t.lexeme == "else":
                self.else_clause()
            elif t.kind is TokenKind.Keyword and t.lexeme == "for":
                self.for_stmt()
            elif t.kind is TokenKind.Keyword and t.lexeme in ("printf", "scanf"):
                self.call_stmt()
            elif t.kind is TokenKind.Identifier:
                self.assignment()
            else:
                self.diag(DiagnosticCode.MalformedExpression,
                          f"statement cannot start with '{t.lexeme}'")
                self.advance()
                self.panic()

    def expect_semicolon(self) -> None:
        t = self.peek()
        if t is not None and t.kind is TokenKind.Semicolon:
            self.advance()
            return
        self.diag(DiagnosticCode.MissingSemicolon,
                  "expected ';' to end the statement", at_prev=True)
        self.panic()

    def declaration(self) -> None:
        self.advance()  # type name
        while True:
            t = self.peek()
            if t is None or t.kind is not TokenKind.Identifier:
                lex = "end of input" if t is None else f"'{t.lexeme}'"
                self.diag(DiagnosticCode.MalformedExpression,
                          f"expected a variable name in declaration, found {lex}")
                self.panic()
                return
            self.declared.add(t.lexeme)
            self.advance()
            t = self.peek()
            if t is not None and t.kind is TokenKind.Operator and t.lexeme == "=":
                self.advance()
                if not self.expr():
                    self.panic()
                    return
                t = self.peek()
            if t is not None and t.kind is TokenKind.Comma:
                self.advance()
                continue
            self.expect_semicolon()
            return

    def assignment(self) -> None:
        lhs = self.advance()
        self._use(lhs)
        t = self.peek()
        if t is None or not (t.kind is TokenKind.Operator and t.lexeme == "="):
            lex = "end of input" if t is None else f"'{t.lexeme}'"
            self.diag(DiagnosticCode.MalformedExpression,
                      f"expected '=' after '{lhs.lexeme}', found {lex}")
            self.panic()
            return
        self.advance()
        if not self.expr():
            self.panic()
            return
        self.expect_semicolon()

    def simple_assign(self) -> bool:
        """Assignment without the trailing semicolon (for-header clauses)."""
        t = self.peek()
        if t is None or t.kind is not TokenKind.Identifier:
            lex = "end of input" if t is None else f"'{t.lexeme}'"
            self.diag(DiagnosticCode.MalformedExpression,
                      f"expected a variable assignment, found {lex}")
            return False
        self._use(t)
        self.advance()
        t = self.peek()
        if t is None or not (t.kind is TokenKind.Operator and t.lexeme == "="):
            lex = "end of input" if t is None else f"'{t.lexeme}'"
            self.diag(DiagnosticCode.MalformedExpression,
                      f"expected '=' in assignment, found {lex}")
            return False
        self.advance()
        return self.expr()

    def expect_open_paren(self, ctx: str) -> bool:
        t = self.peek()
        if t is not None and t.kind is TokenKind.OpenParen:
            self.advance()
            return True
        lex = "end of input" if t is None else f"'{t.lexeme}'"
        self.diag(DiagnosticCode.MalformedExpression,
                  f"expected '(' after '{ctx}', found {lex}")
        self.panic()
        return False

    def expect_close_paren(self, ctx: str) -> bool:
        t = self.peek()
        if t is not None and t.kind is TokenKind.CloseParen:
            self.advance()
            return True
        lex = "end of input" if t is None else f"'{t.lexeme}'"
        self.diag(DiagnosticCode.MalformedExpression,
                  f"expected ')' to close the {ctx} header, found {lex}")
        self.panic()
        return False

    def expect_block_open(self, ctx: str) -> None:
        t = self.peek()
        if t is not None and t.kind is TokenKind.OpenBrace:
            return  # top loop consumes it
        self.diag(DiagnosticCode.UnbalancedBrace,
                  f"expected '{{' to open the {ctx} body", at_prev=True)
        self.panic()

    def cond_block(self, kw: str) -> None:
        self.advance()  # if / while
        if not self.expect_open_paren(kw):
            return
        if not self.expr():
            self.panic()
            return
        if not self.expect_close_paren(kw):
            return
        self.expect_block_open(kw)

    def else_clause(self) -> None:
        self.advance()  # else
        t = self.peek()
        if t is not None and t.kind is TokenKind.OpenBrace:
            return
        if t is not None and t.kind is TokenKind.Keyword and t.lexeme == "if":
            return  # else-if chains parse as a fresh if statement
        self.diag(DiagnosticCode.UnbalancedBrace,
                  "expected '{' or 'if' after 'else'", at_prev=True)
        self.panic()

    def for_stmt(self) -> None:
        self.advance()  # for
        if not self.expect_open_paren("for"):
            return
        t = self.peek()
        if not (t is not None and t.kind is TokenKind.Semicolon):
            if not self.simple_assign():
                self.panic()
                return
        t = self.peek()
        if t is not None and t.kind is TokenKind.Semicolon:
            self.advance()
        else:
            self.diag(DiagnosticCode.MissingSemicolon,
                      "expected ';' after the for-loop initializer", at_prev=True)
            self.panic()
            return
        t = self.peek()
        if not (t is not None and t.kind is TokenKind.Semicolon):
            if not self.expr():
                self.panic()
                return
        t = self.peek()
        if t is not None and t.kind is TokenKind.Semicolon:
            self.advance()
        else:
            self.diag(DiagnosticCode.MissingSemicolon,
                      "expected ';' after the for-loop condition", at_prev=True)
            self.panic()
            return
        t = self.peek()
        if not (t is not None and t.kind is TokenKind.CloseParen):
            if not self.simple_assign():
                self.panic()
                return
        if not self.expect_close_paren("for"):
            return
        self.expect_block_open("for")

    def call_stmt(self) -> None:
        kw = self.advance()
        if not self.expect_open_paren(kw.lexeme):
            return
        t = self.peek()
        if not (t is not None and t.kind is TokenKind.CloseParen):
            if not self.expr():
                self.panic()
                return
            while True:
                t = self.peek()
                if t is not None and t.kind is TokenKind.Comma:
                    self.advance()
                    if not self.expr():
                        self.panic()
                        return
                    continue
                break
        if not self.expect_close_paren(kw.lexeme):
            return
        self.expect_semicolon()


def check(program: Program, cap: int = DIAGNOSTIC_CAP) -> DiagnosticReport:
    """Run the deterministic checker and return the capped diagnostic report.

    Two independent passes: global delimiter balance (strict pairing) and a
    statement scan with panic-mode recovery.  Diagnostics are merged in
    (line, column) order; ties keep balance-pass entries first.
    """
    positions: list[tuple[int, int, Token]] = []
    for line_no, line in enumerate(program.lines, start=1):
        for col, tok in enumerate(line):
            positions.append((line_no, col, tok))
    if not positions:
        diags = (Diagnostic(1, DiagnosticCode.EmptyProgram, "program has no tokens"),)
        return DiagnosticReport(diags, min(len(diags), cap))
    raw: list[tuple[int, int, DiagnosticCode, str]] = []
    _balance_pass(positions, raw)
    scanner = _StatementScanner(positions)
    scanner.run()
    raw.extend(scanner.out)
    raw.sort(key=lambda item: (item[0], item[1]))
    diags = tuple(Diagnostic(line_no, code, detail) for line_no, _, code, detail in raw[:cap])
    return DiagnosticReport(diags, len(diags))
