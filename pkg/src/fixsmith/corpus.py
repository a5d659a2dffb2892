"""Training-pair synthesis: mutate accepted programs and pair them with fixes.

Mutations come in two families: typographic (delete/insert a delimiter,
replace an operator with an incompatible one) and missing variable
declaration (drop a declarator).  Every fix replaces one whole line; the
paired target always addresses the first incorrect line.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .lang import (DEFAULT_VOCAB, OPERATORS, Program, Token, TokenKind,
                   Vocabulary, check, program_from_stream, program_to_stream)

N_FOLDS = 5
LINE_SEP = "⏎"  # visible newline escape inside tab-separated records


class MutationFamily(Enum):
    Typographic = "Typographic"
    MissingDeclaration = "MissingDeclaration"


class EditKind(Enum):
    DeleteToken = "DeleteToken"
    InsertToken = "InsertToken"
    ReplaceToken = "ReplaceToken"
    DropDeclarator = "DropDeclarator"


class NoMutableSite(ValueError):
    """The program offers no site this mutation family can break."""


class InsufficientSeeds(ValueError):
    """Too few seed tasks to populate every fold."""


class FormatError(ValueError):
    def __init__(self, message: str, record: int):
        super().__init__(f"record {record}: {message}")
        self.record = record


@dataclass(frozen=True)
class MutationRecord:
    family: MutationFamily
    line: int
    edit: EditKind
    payload: tuple[Token, ...]


@dataclass(frozen=True)
class FixTarget:
    """A fix: 1-based line number plus the corrected line, _eos_-terminated.

    line_no None with empty tokens is the explicit "no fix" target (a bare
    _eos_ sequence).
    """

    line_no: int | None
    tokens: tuple[Token, ...]

    @property
    def is_no_fix(self) -> bool:
        return self.line_no is None

    def sequence_ids(self, vocab: Vocabulary = DEFAULT_VOCAB) -> list[int]:
        """Token-id sequence the model is trained to emit (ends with _eos_)."""
        if self.is_no_fix:
            return [vocab.eos_id]
        return [vocab.line_id(self.line_no)] + [t.vocab_id for t in self.tokens] + [vocab.eos_id]

    def to_stream(self, vocab: Vocabulary = DEFAULT_VOCAB) -> str:
        return " ".join(f"{vocab.by_id(i).kind.value}:{vocab.by_id(i).lexeme}"
                        for i in self.sequence_ids(vocab))


def fix_target_from_stream(text: str, vocab: Vocabulary = DEFAULT_VOCAB) -> FixTarget:
    items = text.split()
    if not items:
        raise ValueError("empty fix stream")
    toks = []
    for item in items:
        kind_name, _, lexeme = item.partition(":")
        toks.append(vocab.token(TokenKind(kind_name), lexeme))
    if toks[-1].vocab_id != vocab.eos_id:
        raise ValueError("fix stream does not end with _eos_")
    if len(toks) == 1:
        return FixTarget(None, ())
    line_no = vocab.line_no_of(toks[0].vocab_id)
    if line_no is None:
        raise ValueError("fix stream does not start with a LINE_k token")
    return FixTarget(line_no, tuple(toks[1:-1]))


@dataclass(frozen=True)
class TrainingPair:
    x: Program
    y: FixTarget
    fold: int
    families: tuple[MutationFamily, ...]


_DELETABLE_KINDS = (TokenKind.Semicolon, TokenKind.OpenParen, TokenKind.CloseParen,
                    TokenKind.OpenBrace, TokenKind.CloseBrace, TokenKind.Comma,
                    TokenKind.Operator)
_INSERT_LEXEMES = (";", "(", ")", "{", "}", ",")


def _eligible_delete_lines(p: Program, excluded: set[int]) -> list[int]:
    return [i + 1 for i, line in enumerate(p.lines)
            if i + 1 not in excluded and any(t.kind in _DELETABLE_KINDS for t in line)]


def _eligible_replace_lines(p: Program, excluded: set[int]) -> list[int]:
    return [i + 1 for i, line in enumerate(p.lines)
            if i + 1 not in excluded and any(t.kind is TokenKind.Operator for t in line)]


def _eligible_insert_lines(p: Program, excluded: set[int]) -> list[int]:
    return [i + 1 for i, line in enumerate(p.lines) if i + 1 not in excluded and line]


def _typographic_once(p: Program, rng: np.random.Generator, vocab: Vocabulary,
                      excluded: set[int]) -> tuple[Program, MutationRecord] | None:
    """One random typographic edit that provably breaks the program, or None."""
    kinds = []
    if _eligible_delete_lines(p, excluded):
        kinds.append(EditKind.DeleteToken)
    if _eligible_insert_lines(p, excluded):
        kinds.append(EditKind.InsertToken)
    if _eligible_replace_lines(p, excluded):
        kinds.append(EditKind.ReplaceToken)
    if not kinds:
        return None
    for _ in range(64):
        edit = kinds[int(rng.integers(len(kinds)))]
        if edit is EditKind.DeleteToken:
            lines = _eligible_delete_lines(p, excluded)
            line_no = lines[int(rng.integers(len(lines)))]
            line = p.line(line_no)
            sites = [i for i, t in enumerate(line) if t.kind in _DELETABLE_KINDS]
            idx = sites[int(rng.integers(len(sites)))]
            new_line = line[:idx] + line[idx + 1:]
            record = MutationRecord(MutationFamily.Typographic, line_no, edit, (line[idx],))
        elif edit is EditKind.InsertToken:
            lines = _eligible_insert_lines(p, excluded)
            line_no = lines[int(rng.integers(len(lines)))]
            line = p.line(line_no)
            lexeme = _INSERT_LEXEMES[int(rng.integers(len(_INSERT_LEXEMES)))]
            tok = vocab.token({";": TokenKind.Semicolon, ",": TokenKind.Comma,
                               "(": TokenKind.OpenParen, ")": TokenKind.CloseParen,
                               "{": TokenKind.OpenBrace, "}": TokenKind.CloseBrace}[lexeme],
                              lexeme)
            idx = int(rng.integers(len(line) + 1))
            new_line = line[:idx] + [tok] + line[idx:]
            record = MutationRecord(MutationFamily.Typographic, line_no, edit, (tok,))
        else:
            lines = _eligible_replace_lines(p, excluded)
            line_no = lines[int(rng.integers(len(lines)))]
            line = p.line(line_no)
            sites = [i for i, t in enumerate(line) if t.kind is TokenKind.Operator]
            idx = sites[int(rng.integers(len(sites)))]
            old = line[idx]
            others = [op for op in OPERATORS if op != old.lexeme]
            new = vocab.token(TokenKind.Operator, others[int(rng.integers(len(others)))])
            new_line = line[:idx] + [new] + line[idx + 1:]
            record = MutationRecord(MutationFamily.Typographic, line_no, edit, (old, new))
        mutated = p.replace_line(line_no, new_line)
        if check(mutated).count >= 1:
            return mutated, record
    return None


def _declaration_sites(p: Program, excluded: set[int]) -> list[tuple[int, int]]:
    """(line_no, declarator index) pairs for every declarator in scope."""
    sites = []
    for i, line in enumerate(p.lines):
        if i + 1 in excluded or not line or line[0].kind is not TokenKind.TypeName:
            continue
        n_decl = sum(1 for t in line if t.kind is TokenKind.Identifier)
        sites.extend((i + 1, d) for d in range(n_decl))
    return sites


def _split_declarators(line: list[Token]) -> list[list[Token]]:
    """Split a declaration line (after the type name) into declarator groups."""
    groups: list[list[Token]] = [[]]
    depth = 0
    for tok in line[1:]:
        if tok.kind is TokenKind.Semicolon and depth == 0:
            break
        if tok.kind is TokenKind.OpenParen:
            depth += 1
        elif tok.kind is TokenKind.CloseParen:
            depth -= 1
        if tok.kind is TokenKind.Comma and depth == 0:
            groups.append([])
        else:
            groups[-1].append(tok)
    return groups


def _missing_decl_once(p: Program, rng: np.random.Generator, vocab: Vocabulary,
                       excluded: set[int]) -> tuple[Program, MutationRecord] | None:
    sites = _declaration_sites(p, excluded)
    if not sites:
        return None
    order = rng.permutation(len(sites))
    for k in order:
        line_no, decl_idx = sites[int(k)]
        line = p.line(line_no)
        groups = _split_declarators(line)
        if decl_idx >= len(groups):
            continue
        kept = [g for i, g in enumerate(groups) if i != decl_idx]
        if kept:
            new_line: list[Token] = [line[0]]
            for i, g in enumerate(kept):
                if i:
                    new_line.append(vocab.token(TokenKind.Comma, ","))
                new_line.extend(g)
            new_line.append(vocab.token(TokenKind.Semicolon, ";"))
        else:
            new_line = [vocab.token(TokenKind.Semicolon, ";")]  # empty statement
        mutated = p.replace_line(line_no, new_line)
        if check(mutated).count >= 1:
            record = MutationRecord(MutationFamily.MissingDeclaration, line_no,
                                    EditKind.DropDeclarator, tuple(groups[decl_idx]))
            return mutated, record
    return None


def _require_accepted(p: Program) -> None:
    if check(p).count != 0:
        raise ValueError("mutation source program must pass the checker")


def mutate_typographic(p: Program, rng: np.random.Generator,
                       vocab: Vocabulary = DEFAULT_VOCAB
                       ) -> tuple[Program, FixTarget, MutationRecord]:
    """Break one line with a delimiter/operator edit; the fix restores it."""
    _require_accepted(p)
    result = _typographic_once(p, rng, vocab, set())
    if result is None:
        raise NoMutableSite("no typographic mutation site produces a diagnostic")
    mutated, record = result
    fix = FixTarget(record.line, tuple(p.line(record.line)))
    return mutated, fix, record


def mutate_missing_decl(p: Program, rng: np.random.Generator,
                        vocab: Vocabulary = DEFAULT_VOCAB
                        ) -> tuple[Program, FixTarget, MutationRecord]:
    """Drop one declarator from a declaration; the fix restores the line."""
    _require_accepted(p)
    result = _missing_decl_once(p, rng, vocab, set())
    if result is None:
        raise NoMutableSite("no declaration can be dropped with visible effect")
    mutated, record = result
    fix = FixTarget(record.line, tuple(p.line(record.line)))
    return mutated, fix, record


def _build_pair(seed_program: Program, fold: int, rng: np.random.Generator,
                vocab: Vocabulary, typo_share: float,
                mutations_range: tuple[int, int]) -> TrainingPair:
    lo, hi = mutations_range
    n_mut = int(rng.integers(lo, hi + 1))
    for attempt in range(60):
        if attempt >= 30:
            n_mut = 1
        current = seed_program
        excluded: set[int] = set()
        records: list[MutationRecord] = []
        ok = True
        for _ in range(n_mut):
            use_typo = rng.random() < typo_share
            step = (_typographic_once(current, rng, vocab, excluded) if use_typo
                    else _missing_decl_once(current, rng, vocab, excluded))
            if step is None:  # family has no site left; try the other one
                step = (_missing_decl_once(current, rng, vocab, excluded) if use_typo
                        else _typographic_once(current, rng, vocab, excluded))
            if step is None:
                ok = False
                break
            current, record = step
            excluded.add(record.line)
            records.append(record)
        if not ok:
            continue
        first_line = min(r.line for r in records)
        fix = FixTarget(first_line, tuple(seed_program.line(first_line)))
        broken = check(current).count
        if broken < 1:
            continue
        repaired = current.replace_line(first_line, list(fix.tokens))
        if check(repaired).count >= broken:
            continue  # fix must strictly decrease the diagnostic count
        return TrainingPair(current, fix, fold, tuple(r.family for r in records))
    raise NoMutableSite("could not build a valid pair from this seed program")


def generate_corpus(seeds: list[Program], n_pairs: int, mix: float,
                    rng: np.random.Generator, vocab: Vocabulary = DEFAULT_VOCAB,
                    mutations_range: tuple[int, int] = (1, 5)) -> list[TrainingPair]:
    """Mutate seed programs into n_pairs training pairs across 5 folds.

    mix is the typographic share per mutation (1.0 = all typographic).  Folds
    partition BY SEED: all mutants of one seed land in fold seed_index % 5.
    Deterministic given (seeds, rng state).
    """
    if len(seeds) < N_FOLDS:
        raise InsufficientSeeds(f"need at least {N_FOLDS} seed programs, got {len(seeds)}")
    for i, s in enumerate(seeds):
        if check(s).count != 0:
            raise ValueError(f"seed program {i} does not pass the checker")
    if not 0.0 <= mix <= 1.0:
        raise ValueError("mix must be a typographic share in [0, 1]")
    streams = rng.spawn(n_pairs)
    pairs = []
    for i in range(n_pairs):
        seed_idx = i % len(seeds)
        pairs.append(_build_pair(seeds[seed_idx], seed_idx % N_FOLDS, streams[i],
                                 vocab, mix, mutations_range))
    return pairs


def save_pairs(pairs: list[TrainingPair], path: str | Path,
               vocab: Vocabulary = DEFAULT_VOCAB) -> None:
    """Tab-separated records: fold, x stream (newlines as ⏎), y stream, families."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            x_stream = program_to_stream(pair.x).replace("\n", LINE_SEP)
            families = "+".join(f.value for f in pair.families)
            fh.write(f"{pair.fold}\t{x_stream}\t{pair.y.to_stream(vocab)}\t{families}\n")


def load_pairs(path: str | Path, vocab: Vocabulary = DEFAULT_VOCAB) -> list[TrainingPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for idx, raw in enumerate(fh):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise FormatError(f"expected 4 tab-separated fields, got {len(fields)}", idx)
            fold_text, x_stream, y_stream, families_text = fields
            try:
                fold = int(fold_text)
            except ValueError:
                raise FormatError(f"fold is not an integer: {fold_text!r}", idx) from None
            try:
                x = program_from_stream(x_stream.replace(LINE_SEP, "\n"), vocab)
                y = fix_target_from_stream(y_stream, vocab)
                families = tuple(MutationFamily(f) for f in families_text.split("+") if f)
            except (ValueError, KeyError) as exc:
                raise FormatError(str(exc), idx) from None
            pairs.append(TrainingPair(x, y, fold, families))
    return pairs
