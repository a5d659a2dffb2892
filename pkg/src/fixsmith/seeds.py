"""Generator for accepted seed programs.

The corpus needs correct programs to mutate.  Real student submissions are
out of reach, so seed "tasks" are instantiated from templates over the
C-subset: declarations followed by a mix of assignments, conditionals, loops
and opaque printf/scanf calls.  Every generated program passes the checker
with zero diagnostics by construction (and is asserted to).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lang import DEFAULT_VOCAB, Program, Token, TokenKind, Vocabulary, check


@dataclass
class SeedConfig:
    min_tokens: int = 75
    max_tokens: int = 450
    max_lines: int = 64
    max_variables: int = 8

    def __post_init__(self) -> None:
        if self.min_tokens < 6 or self.max_tokens < self.min_tokens:
            raise ValueError("bad token bounds")


class _Builder:
    def __init__(self, rng: np.random.Generator, cfg: SeedConfig, vocab: Vocabulary):
        self.rng = rng
        self.cfg = cfg
        self.vocab = vocab
        self.lines: list[list[Token]] = []
        self.vars: list[str] = []
        self.used: set[str] = set()

    def tok(self, kind: TokenKind, lexeme: str) -> Token:
        return self.vocab.token(kind, lexeme)

    def op(self, lexeme: str) -> Token:
        return self.tok(TokenKind.Operator, lexeme)

    def var(self) -> Token:
        name = self.vars[int(self.rng.integers(len(self.vars)))]
        self.used.add(name)
        return self.tok(TokenKind.Identifier, name)

    def num(self) -> Token:
        return self.tok(TokenKind.IntLiteral, "NUM")

    def operand(self) -> list[Token]:
        r = self.rng.random()
        if r < 0.45:
            return [self.num()]
        if r < 0.9:
            return [self.var()]
        return [self.tok(TokenKind.OpenParen, "(")] + self.expr(depth=1) + [
            self.tok(TokenKind.CloseParen, ")")]

    def expr(self, depth: int = 0) -> list[Token]:
        arith = ["+", "-", "*", "/", "%"]
        out = self.operand() if depth else self.operand()
        n_ops = int(self.rng.integers(0, 3 if depth == 0 else 2))
        for _ in range(n_ops):
            out.append(self.op(arith[int(self.rng.integers(len(arith)))]))
            out += [self.num()] if self.rng.random() < 0.5 else [self.var()]
        return out

    def cond(self) -> list[Token]:
        rel = ["<", ">", "<=", ">=", "==", "!="]
        return [self.var(), self.op(rel[int(self.rng.integers(len(rel)))]), self.num()]

    # --- statements ------------------------------------------------------

    def declarations(self) -> None:
        n_vars = int(self.rng.integers(2, self.cfg.max_variables + 1))
        names = [f"ID_{i}" for i in range(n_vars)]
        self.vars = names
        i = 0
        while i < n_vars:
            group = min(int(self.rng.integers(1, 4)), n_vars - i)
            line = [self.tok(TokenKind.TypeName, "int")]
            for j in range(group):
                line.append(self.tok(TokenKind.Identifier, names[i + j]))
                if self.rng.random() < 0.5:
                    line += [self.op("="), self.num()]
                if j + 1 < group:
                    line.append(self.tok(TokenKind.Comma, ","))
            line.append(self.tok(TokenKind.Semicolon, ";"))
            self.lines.append(line)
            i += group

    def assignment(self) -> list[Token]:
        return [self.var(), self.op("=")] + self.expr() + [self.tok(TokenKind.Semicolon, ";")]

    def printf_stmt(self) -> list[Token]:
        return ([self.tok(TokenKind.Keyword, "printf"), self.tok(TokenKind.OpenParen, "(")]
                + [self.var()] + [self.tok(TokenKind.CloseParen, ")"),
                                  self.tok(TokenKind.Semicolon, ";")])

    def scanf_stmt(self) -> list[Token]:
        return ([self.tok(TokenKind.Keyword, "scanf"), self.tok(TokenKind.OpenParen, "("),
                 self.op("&"), self.var(), self.tok(TokenKind.CloseParen, ")"),
                 self.tok(TokenKind.Semicolon, ";")])

    def body(self, n: int) -> list[list[Token]]:
        out = []
        for _ in range(n):
            r = self.rng.random()
            if r < 0.7:
                out.append(self.assignment())
            elif r < 0.85:
                out.append(self.printf_stmt())
            else:
                out.append(self.scanf_stmt())
        return out

    def if_block(self) -> None:
        header = ([self.tok(TokenKind.Keyword, "if"), self.tok(TokenKind.OpenParen, "(")]
                  + self.cond() + [self.tok(TokenKind.CloseParen, ")"),
                                   self.tok(TokenKind.OpenBrace, "{")])
        self.lines.append(header)
        self.lines.extend(self.body(int(self.rng.integers(1, 3))))
        if self.rng.random() < 0.4:
            self.lines.append([self.tok(TokenKind.CloseBrace, "}"),
                               self.tok(TokenKind.Keyword, "else"),
                               self.tok(TokenKind.OpenBrace, "{")])
            self.lines.extend(self.body(int(self.rng.integers(1, 3))))
        self.lines.append([self.tok(TokenKind.CloseBrace, "}")])

    def while_block(self) -> None:
        header = ([self.tok(TokenKind.Keyword, "while"), self.tok(TokenKind.OpenParen, "(")]
                  + self.cond() + [self.tok(TokenKind.CloseParen, ")"),
                                   self.tok(TokenKind.OpenBrace, "{")])
        self.lines.append(header)
        self.lines.extend(self.body(int(self.rng.integers(1, 3))))
        self.lines.append([self.tok(TokenKind.CloseBrace, "}")])

    def for_block(self) -> None:
        v = self.var()
        header = ([self.tok(TokenKind.Keyword, "for"), self.tok(TokenKind.OpenParen, "("),
                   v, self.op("="), self.num(), self.tok(TokenKind.Semicolon, ";"),
                   v, self.op("<"), self.num(), self.tok(TokenKind.Semicolon, ";"),
                   v, self.op("="), v, self.op("+"), self.num(),
                   self.tok(TokenKind.CloseParen, ")"), self.tok(TokenKind.OpenBrace, "{")])
        self.used.add(v.lexeme)
        self.lines.append(header)
        self.lines.extend(self.body(int(self.rng.integers(1, 3))))
        self.lines.append([self.tok(TokenKind.CloseBrace, "}")])

    def build(self) -> Program:
        target = int(self.rng.integers(self.cfg.min_tokens, self.cfg.max_tokens + 1))
        self.declarations()
        while sum(len(l) for l in self.lines) < target - 8:
            if len(self.lines) >= self.cfg.max_lines - 6:
                break
            r = self.rng.random()
            if r < 0.5:
                self.lines.append(self.assignment())
            elif r < 0.65:
                self.if_block()
            elif r < 0.8:
                self.while_block()
            elif r < 0.9:
                self.for_block()
            else:
                self.lines.append(self.printf_stmt() if self.rng.random() < 0.5
                                  else self.scanf_stmt())
        for name in self.vars:
            if name not in self.used:
                self.lines.append([self.tok(TokenKind.Keyword, "printf"),
                                   self.tok(TokenKind.OpenParen, "("),
                                   self.tok(TokenKind.Identifier, name),
                                   self.tok(TokenKind.CloseParen, ")"),
                                   self.tok(TokenKind.Semicolon, ";")])
                self.used.add(name)
        return Program(self.lines)


def generate_seed_program(rng: np.random.Generator, cfg: SeedConfig | None = None,
                          vocab: Vocabulary = DEFAULT_VOCAB) -> Program:
    """One accepted program; retries internally until bounds and checks hold."""
    cfg = cfg or SeedConfig()
    for _ in range(64):
        program = _Builder(rng, cfg, vocab).build()
        if not (cfg.min_tokens <= program.token_count <= cfg.max_tokens):
            continue
        if program.line_count > cfg.max_lines:
            continue
        if check(program).count == 0:
            return program
    raise RuntimeError("seed generation failed to satisfy bounds; widen SeedConfig")


def generate_seed_programs(n: int, rng: np.random.Generator,
                           cfg: SeedConfig | None = None,
                           vocab: Vocabulary = DEFAULT_VOCAB) -> list[Program]:
    return [generate_seed_program(rng, cfg, vocab) for _ in range(n)]
