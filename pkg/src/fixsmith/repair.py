"""Compiler-in-the-loop fix selection and the iterative repair procedure."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .lang import (DEFAULT_VOCAB, DiagnosticReport, Program, Vocabulary, check,
                   program_to_stream)
from .decode import CandidateFix


class OutOfRange(ValueError):
    """Fix addresses a line beyond the program."""


class RepairStatus(Enum):
    CompletelyFixed = "CompletelyFixed"
    PartiallyFixed = "PartiallyFixed"
    Unfixed = "Unfixed"


@dataclass
class Iteration:
    chosen: CandidateFix | None
    report_before: DiagnosticReport
    report_after: DiagnosticReport
    program_after: Program


@dataclass
class RepairTrace:
    iterations: list[Iteration]
    initial_count: int
    final_count: int
    status: RepairStatus
    final_program: Program

    def remaining_curve(self, n_iterations: int) -> list[int]:
        """Remaining diagnostics after each of n_iterations rounds (index 0 =
        the initial count); programs that stop early hold their final count."""
        curve = [self.initial_count]
        for it in self.iterations:
            curve.append(it.report_after.count)
        while len(curve) < n_iterations + 1:
            curve.append(curve[-1])
        return curve[:n_iterations + 1]

    def to_dict(self, vocab: Vocabulary = DEFAULT_VOCAB) -> dict:
        return {
            "initial_count": self.initial_count,
            "final_count": self.final_count,
            "status": self.status.value,
            "iterations": [
                {
                    "chosen": None if it.chosen is None else {
                        "line_no": it.chosen.line_no,
                        "score": it.chosen.score,
                        "raw": list(it.chosen.raw),
                    },
                    "count_before": it.report_before.count,
                    "count_after": it.report_after.count,
                    "program_after": program_to_stream(it.program_after),
                }
                for it in self.iterations
            ],
        }


def reconcile(x: Program, fix: CandidateFix) -> Program:
    """Apply a fix: replace line fix.line_no with the fix tokens."""
    if fix.line_no is None:
        raise ValueError("cannot reconcile a no-fix candidate")
    if not 1 <= fix.line_no <= x.line_count:
        raise OutOfRange(f"fix line {fix.line_no} beyond {x.line_count}-line program")
    vocab = DEFAULT_VOCAB
    tokens = [vocab.by_id(i) for i in fix.tokens]
    return x.replace_line(fix.line_no, tokens)


def select_best(x: Program, candidates: Sequence[CandidateFix],
                baseline: DiagnosticReport | None = None
                ) -> tuple[CandidateFix, DiagnosticReport] | None:
    """Pick the applicable candidate whose reconciled program has the fewest
    diagnostics; ties break on higher score, then earlier draw order.
    Returns None unless the best strictly beats the baseline count (fixes
    that introduce or merely preserve errors are rejected)."""
    if baseline is None:
        baseline = check(x)
    best: tuple[int, float, int] | None = None
    best_result: tuple[CandidateFix, DiagnosticReport] | None = None
    for order, cand in enumerate(candidates):
        if cand.line_no is None or not 1 <= cand.line_no <= x.line_count:
            continue
        report = check(reconcile(x, cand))
        key = (report.count, -cand.score, order)
        if best is None or key < best:
            best = key
            best_result = (cand, report)
    if best_result is None or best_result[1].count >= baseline.count:
        return None
    return best_result


Sampler = Callable[[Program], Sequence[CandidateFix]]


def iterative_repair(x: Program, sampler: Sampler, max_iter: int = 5) -> RepairTrace:
    """Draw candidates, apply the best accepted fix, re-check, repeat.

    Stops early when the diagnostic count reaches zero or no candidate
    improves on the current program.  Accepted fixes strictly decrease the
    count, so the loop terminates in at most initial_count applications.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    report = check(x)
    initial = report.count
    iterations: list[Iteration] = []
    current = x
    if initial > 0:
        for _ in range(max_iter):
            selection = select_best(current, sampler(current), baseline=report)
            if selection is None:
                iterations.append(Iteration(None, report, report, current))
                break
            fix, after = selection
            current = reconcile(current, fix)
            iterations.append(Iteration(fix, report, after, current))
            report = after
            if report.count == 0:
                break
    final = report.count
    if final == 0:
        status = RepairStatus.CompletelyFixed
    elif final < initial:
        status = RepairStatus.PartiallyFixed
    else:
        status = RepairStatus.Unfixed
    return RepairTrace(iterations, initial, final, status, current)
