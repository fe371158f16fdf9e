"""Whole-sequence reranking signal: a copy-augmented, class-conditional bigram
model scores each candidate by its conditional generation loss, and losses are
normalized per candidate pool to scores in [0, 1]."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lf
from .data import Corpus, EmptyCorpus

BOS = "<s>"
UNK_WORD = "<unk>"


class EmptyCandidate(Exception):
    pass


class AllZeroLosses(UserWarning):
    pass


def split_logical_form(tokens: Sequence[str]) -> list[str]:
    """Split compound entity/predicate tokens into plain words.

    Numeric literals are kept whole; every other token containing ':', '.' or
    '_' is split on those characters with the namespace piece dropped. The
    operation is idempotent.
    """
    out: list[str] = []
    for tok in tokens:
        if lf.is_numeric(tok):
            out.append(tok)
        elif any(ch in tok for ch in ":._"):
            out.extend(lf.split_compound(tok))
        else:
            out.append(tok)
    return out


@dataclass
class ClassStats:
    """Smoothed bigram counts over the split logical forms of one sketch class."""

    bigram: dict[str, dict[str, int]] = field(default_factory=dict)
    vocab: dict[str, None] = field(default_factory=dict)  # insertion-ordered set

    def observe(self, words: Sequence[str]) -> None:
        prev = BOS
        for w in words:
            self.vocab.setdefault(w, None)
            row = self.bigram.setdefault(prev, {})
            row[w] = row.get(w, 0) + 1
            prev = w

    def prob(self, word: str, prev: str, alpha: float) -> float:
        """Additively smoothed over the class vocabulary plus an unknown slot."""
        size = len(self.vocab) + 1
        row = self.bigram.get(prev if prev in self.vocab or prev == BOS else UNK_WORD, {})
        count = row.get(word, 0) if word in self.vocab else 0
        total = sum(row.values())
        return (count + alpha) / (total + alpha * size)


@dataclass(frozen=True)
class GenMemberConfig:
    lam: float  # copy weight, in (0, 1)
    alpha: float  # smoothing constant, > 0


DEFAULT_MEMBERS = (
    GenMemberConfig(lam=0.3, alpha=0.1),
    GenMemberConfig(lam=0.5, alpha=0.1),
    GenMemberConfig(lam=0.7, alpha=0.1),
)


@dataclass
class GenModel:
    class_stats: dict[str, ClassStats]
    members: tuple[GenMemberConfig, ...] = DEFAULT_MEMBERS

    def stats_for(self, sketch_class: str) -> ClassStats:
        return self.class_stats.get(sketch_class, ClassStats())


def seq_loss(
    question_tokens: Sequence[str],
    target_words: Sequence[str],
    stats: ClassStats,
    lam: float,
    alpha: float,
) -> float:
    """Mean negative log-likelihood of the target under copy + bigram mixture.

    Token probability is lam * copy(w | question) + (1 - lam) * bigram(w | prev)
    where copy(w) is the relative frequency of w among the question tokens.
    """
    if not target_words:
        raise EmptyCandidate("cannot score an empty candidate")
    n_q = len(question_tokens)
    q_counts: dict[str, int] = {}
    for tok in question_tokens:
        q_counts[tok] = q_counts.get(tok, 0) + 1

    total = 0.0
    prev = BOS
    for w in target_words:
        copy_p = q_counts.get(w, 0) / n_q if n_q else 0.0
        p = lam * copy_p + (1.0 - lam) * stats.prob(w, prev, alpha)
        total += -np.log(p)
        prev = w
    return float(total / len(target_words))


def normalize_losses(losses: Sequence[float]) -> list[float]:
    """score_i = 1 - loss_i / max(losses); the max-loss candidate scores 0.

    All-zero pools are degenerate (every candidate scores 1) and are flagged
    with an AllZeroLosses warning.
    """
    if not losses:
        raise ValueError("need at least one loss")
    if any(x < 0 for x in losses):
        raise ValueError("losses must be non-negative")
    peak = max(losses)
    if peak == 0.0:
        warnings.warn("all candidate losses are zero", AllZeroLosses)
        return [1.0 for _ in losses]
    return [1.0 - x / peak for x in losses]


def fit_genmodel(
    train: Corpus, members: Sequence[GenMemberConfig] = DEFAULT_MEMBERS
) -> GenModel:
    """Count class-conditional bigrams over split training logical forms."""
    if not train.samples:
        raise EmptyCorpus("cannot fit the generation scorer on an empty corpus")
    class_stats: dict[str, ClassStats] = {}
    for sample in train:
        stats = class_stats.setdefault(sample.sketch_class, ClassStats())
        stats.observe(split_logical_form(sample.lf.tokens))
    return GenModel(class_stats=class_stats, members=tuple(members))


def gen_scores(
    model: GenModel,
    question_tokens: Sequence[str],
    sketch_class: str,
    candidates_split: Sequence[Sequence[str]],
) -> list[float]:
    """Mean over members of each member's normalized scores for the pool."""
    if not candidates_split:
        return []
    stats = model.stats_for(sketch_class)
    per_member = []
    for member in model.members:
        losses = [
            seq_loss(question_tokens, words, stats, member.lam, member.alpha)
            for words in candidates_split
        ]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AllZeroLosses)
            per_member.append(normalize_losses(losses))
    return [float(np.mean(col)) for col in zip(*per_member)]
