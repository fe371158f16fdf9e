"""End-to-end orchestration: candidate generation from predicted sketches and
spans, score fusion and ranking, simplex grid weight tuning, the evaluation
metrics, and system training plus checkpoint persistence."""

from __future__ import annotations

import dataclasses
import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import genscore, learn, lf, matchers, multitask
from .data import Corpus, EmptyCorpus, Sample
from .genscore import DEFAULT_MEMBERS, GenMemberConfig, GenModel
from .learn import EncoderParams, LinearHead, Vocab
from .matchers import (
    CooccurrenceConfig,
    CooccurrenceModel,
    MatcherConfig,
    MatcherEnsemble,
    MatcherModel,
    PatternIndex,
)
from .multitask import MultiTaskConfig, MultiTaskModel

logger = logging.getLogger(__name__)


class NoCandidates(Exception):
    pass


@dataclass(frozen=True)
class FusionWeights:
    w_pattern: float
    w_pe: float
    w_gen: float

    def __post_init__(self):
        total = self.w_pattern + self.w_pe + self.w_gen
        if min(self.w_pattern, self.w_pe, self.w_gen) < -1e-12 or abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must be a simplex point, got {self}")

    def as_dict(self) -> dict[str, float]:
        return {"w_pattern": self.w_pattern, "w_pe": self.w_pe, "w_gen": self.w_gen}


PATTERN_ONLY = FusionWeights(1.0, 0.0, 0.0)


@dataclass
class Candidate:
    tokens: lf.TokenSeq
    pattern: lf.LfPattern
    entity_fillers: tuple[str, ...]
    freq: int

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class ScoredCandidate:
    candidate: Candidate
    pattern_score: float
    pe_score: float
    gen_score: float
    fused: float = 0.0


# ---------------------------------------------------------------------------
# Candidate generation
# ---------------------------------------------------------------------------

_E_SLOT = re.compile(r"E(\d+)")
_V_SLOT = re.compile(r"V(\d*)")
_T_SLOT = re.compile(r"T(\d*)")


def class_slot_counts(sketch_class: str) -> tuple[int, int, int]:
    """(entity arity, value slots, type slots) read off a sketch-class string."""
    tokens = sketch_class.split()
    e_indices = {int(m.group(1)) for t in tokens if (m := _E_SLOT.fullmatch(t))}
    v_slots = {t for t in tokens if _V_SLOT.fullmatch(t)}
    t_slots = {t for t in tokens if _T_SLOT.fullmatch(t)}
    return (max(e_indices) if e_indices else 0, len(v_slots), len(t_slots))


def assign_spans(
    question_tokens: lf.TokenSeq,
    spans: Sequence[tuple[int, int]],
    sketch_class: str,
) -> tuple[list[str], list[str], list[str], lf.QuestionPattern]:
    """Distribute labeled spans over the slots the sketch class calls for.

    Numeric spans fill value slots; the remaining spans fill entity slots
    first and type slots after, in question order. Returns (entity fillers,
    value fillers, type fillers, question pattern).
    """
    arity, n_values, n_types = class_slot_counts(sketch_class)
    spans = sorted(spans)
    numeric: list[str] = []
    other_spans: list[tuple[int, int]] = []
    for span in spans:
        surface = lf.span_surface(question_tokens, span)
        if lf.is_numeric(surface):
            numeric.append(surface)
        else:
            other_spans.append(span)

    distinct: list[str] = []
    for span in other_spans:
        surface = lf.span_surface(question_tokens, span)
        if surface not in distinct:
            distinct.append(surface)
    if len(distinct) < arity or len(distinct) - arity != n_types:
        raise NoCandidates(
            f"class {sketch_class!r} needs {arity} entity and {n_types} type "
            f"fillers, got {len(distinct)} spans"
        )
    if len(numeric) != n_values:
        raise NoCandidates(
            f"class {sketch_class!r} needs {n_values} value fillers, got {len(numeric)}"
        )
    entity_fillers = distinct[:arity]
    type_fillers = distinct[arity:]
    pseudo_params = [
        lf.ParamAnnotation(surface=lf.span_surface(question_tokens, span), kind="entity", span=span)
        for span in other_spans
        if lf.span_surface(question_tokens, span) in entity_fillers
    ]
    qp = lf.derive_question_pattern(question_tokens, pseudo_params)
    return entity_fillers, numeric, type_fillers, qp


def generate_candidates_from(
    question_tokens: lf.TokenSeq,
    sketch_class: str,
    spans: Sequence[tuple[int, int]],
    index: PatternIndex,
) -> tuple[list[Candidate], lf.QuestionPattern]:
    """Substitute every arity-compatible template of the predicted class."""
    entries = index.patterns(sketch_class)
    if not entries:
        raise NoCandidates(f"no patterns indexed for class {sketch_class!r}")
    entity_fillers, value_fillers, type_fillers, qp = assign_spans(
        question_tokens, spans, sketch_class
    )

    seen: dict[lf.TokenSeq, Candidate] = {}
    for entry in entries:
        template = entry.template
        if template.entity_arity != len(entity_fillers):
            continue
        value_positions = lf.numeric_positions(template.tokens)
        type_positions = [
            i
            for i in lf.isa_argument_positions(template.tokens)
            if not lf.is_entity_slot(template.tokens[i])
        ]
        if len(value_positions) != len(value_fillers):
            continue
        if len(type_positions) != len(type_fillers):
            continue
        try:
            form = lf.substitute_template(template, entity_fillers)
        except lf.ArityMismatch:
            continue
        tokens = list(form.tokens)
        for pos, filler in zip(value_positions, value_fillers):
            tokens[pos] = filler
        for pos, filler in zip(type_positions, type_fillers):
            tokens[pos] = filler
        key = tuple(tokens)
        if key not in seen:
            seen[key] = Candidate(
                tokens=key,
                pattern=entry.pattern,
                entity_fillers=tuple(entity_fillers),
                freq=entry.freq,
            )
        else:
            seen[key].freq = max(seen[key].freq, entry.freq)
    if not seen:
        raise NoCandidates(f"no template of class {sketch_class!r} fits the labeled spans")
    return list(seen.values()), qp


def generate_candidates(
    question_tokens: lf.TokenSeq, model: MultiTaskModel, index: PatternIndex
) -> tuple[list[Candidate], lf.QuestionPattern, str, list[tuple[int, int]]]:
    """Run the trained first stages, then expand the predicted class's templates."""
    probs = multitask.classify_sketch(question_tokens, model)
    sketch_class = model.classes[int(np.argmax(probs))]
    spans = multitask.predict_spans(question_tokens, model)
    candidates, qp = generate_candidates_from(question_tokens, sketch_class, spans, index)
    return candidates, qp, sketch_class, spans


# ---------------------------------------------------------------------------
# Scoring, ranking, weight tuning
# ---------------------------------------------------------------------------


@dataclass
class ParserSystem:
    multitask: MultiTaskModel
    index: PatternIndex
    matcher: MatcherEnsemble
    cooccurrence: CooccurrenceModel
    gen: GenModel
    weights: FusionWeights
    config: "SystemConfig"


def score_components(
    system: ParserSystem,
    question_tokens: lf.TokenSeq,
    qp: lf.QuestionPattern,
    sketch_class: str,
    candidates: Sequence[Candidate],
) -> list[ScoredCandidate]:
    """Attach the three component scores; fusion happens in rank()."""
    gen = genscore.gen_scores(
        system.gen,
        question_tokens,
        sketch_class,
        [genscore.split_logical_form(c.tokens) for c in candidates],
    )
    scored = []
    for cand, g in zip(candidates, gen):
        scored.append(
            ScoredCandidate(
                candidate=cand,
                pattern_score=system.matcher.score(qp.tokens, cand.pattern.tokens),
                pe_score=matchers.score_candidate_pe(
                    cand.tokens, cand.entity_fillers, system.cooccurrence
                ),
                gen_score=g,
            )
        )
    return scored


def rank(scored: Sequence[ScoredCandidate], weights: FusionWeights) -> list[ScoredCandidate]:
    """Fuse and sort descending; ties break on pattern frequency then text."""
    fused = [
        replace(
            s,
            fused=weights.w_pattern * s.pattern_score
            + weights.w_pe * s.pe_score
            + weights.w_gen * s.gen_score,
        )
        for s in scored
    ]
    return sorted(fused, key=lambda s: (-s.fused, -s.candidate.freq, s.candidate.text))


def _top_candidate(
    pack: Sequence[tuple[lf.TokenSeq, float, float, float, int]], weights: FusionWeights
) -> lf.TokenSeq:
    best_key = None
    best_tokens: lf.TokenSeq = ()
    for tokens, ps, pe, gs, freq in pack:
        fused = weights.w_pattern * ps + weights.w_pe * pe + weights.w_gen * gs
        key = (-fused, -freq, " ".join(tokens))
        if best_key is None or key < best_key:
            best_key = key
            best_tokens = tokens
    return best_tokens


def grid_points(step: float = 0.05) -> list[FusionWeights]:
    """Every simplex lattice point with the given spacing (231 at step 0.05)."""
    n = round(1.0 / step)
    points = []
    for i in range(n + 1):
        for j in range(n - i + 1):
            points.append(FusionWeights(i / n, j / n, (n - i - j) / n))
    return points


def tune_weights(
    dev_packs: Sequence[tuple[lf.TokenSeq, Sequence[tuple[lf.TokenSeq, float, float, float, int]]]],
    step: float = 0.05,
) -> FusionWeights:
    """Exhaustive simplex grid search maximizing dev exact match.

    Ties prefer larger w_pattern, then larger w_pe, so the pattern-only corner
    wins when every weighting is equivalent.
    """
    if not dev_packs:
        raise EmptyCorpus("cannot tune fusion weights without scored dev samples")
    best: tuple[tuple[float, float, float], FusionWeights] | None = None
    for weights in grid_points(step):
        hits = sum(
            1
            for gold, pack in dev_packs
            if pack and _top_candidate(pack, weights) == gold
        )
        key = (hits / len(dev_packs), weights.w_pattern, weights.w_pe)
        if best is None or key > best[0]:
            best = (key, weights)
    assert best is not None
    return best[1]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class SampleOutcome:
    gold_class: str
    pred_class: str
    gold_spans: list[tuple[int, int]]
    pred_spans: list[tuple[int, int]]
    gold_lf: lf.TokenSeq
    pred_lf: lf.TokenSeq | None
    gold_generated: bool = False
    in_inventory: bool = True
    no_candidates: bool = False

    @property
    def sketch_ok(self) -> bool:
        return self.pred_class == self.gold_class

    @property
    def entities_ok(self) -> bool:
        return self.pred_spans == self.gold_spans

    @property
    def lf_ok(self) -> bool:
        return self.pred_lf is not None and self.pred_lf == self.gold_lf


def _f1_by_class(outcomes: Sequence[SampleOutcome]) -> dict[str, float]:
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    for o in outcomes:
        if o.sketch_ok:
            tp[o.gold_class] = tp.get(o.gold_class, 0) + 1
        else:
            fn[o.gold_class] = fn.get(o.gold_class, 0) + 1
            fp[o.pred_class] = fp.get(o.pred_class, 0) + 1
    scores = {}
    for cls in {o.gold_class for o in outcomes}:
        t = tp.get(cls, 0)
        precision = t / (t + fp.get(cls, 0)) if t + fp.get(cls, 0) else 0.0
        recall = t / (t + fn.get(cls, 0)) if t + fn.get(cls, 0) else 0.0
        scores[cls] = (
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    return scores


def classify_error(outcome: SampleOutcome) -> str | None:
    """Error taxonomy for a wrong sample: sketch, entities, order or predicate."""
    if outcome.lf_ok:
        return None
    if not outcome.sketch_ok:
        return "wrong_sketch"
    if not outcome.entities_ok:
        return "wrong_entities"
    if outcome.pred_lf is not None and sorted(outcome.pred_lf) == sorted(outcome.gold_lf):
        return "wrong_order"
    return "wrong_predicate"


def compute_metrics(outcomes: Sequence[SampleOutcome]) -> dict:
    """Err_s (1 - F1), Err_e, Err_m and Err_l per class and sample-weighted overall."""
    if not outcomes:
        return {"overall": {}, "per_class": {}, "taxonomy": {}, "counts": {}}
    f1 = _f1_by_class(outcomes)
    per_class: dict[str, dict[str, float]] = {}
    classes = sorted({o.gold_class for o in outcomes})
    n_total = len(outcomes)
    overall = {"err_s": 0.0, "err_e": 0.0, "err_m": 0.0, "err_l": 0.0}
    for cls in classes:
        members = [o for o in outcomes if o.gold_class == cls]
        n = len(members)
        row = {
            "count": n,
            "err_s": 1.0 - f1[cls],
            "err_e": sum(not o.entities_ok for o in members) / n,
            "err_m": sum(not (o.sketch_ok and o.entities_ok) for o in members) / n,
            "err_l": sum(not o.lf_ok for o in members) / n,
        }
        per_class[cls] = row
        for key in overall:
            overall[key] += row[key] * n / n_total

    taxonomy: dict[str, int] = {
        "wrong_sketch": 0,
        "wrong_entities": 0,
        "wrong_order": 0,
        "wrong_predicate": 0,
    }
    exchangeable = 0
    for o in outcomes:
        bucket = classify_error(o)
        if bucket:
            taxonomy[bucket] += 1
            if bucket == "wrong_order" and "or" in o.gold_class.split():
                exchangeable += 1
    taxonomy["exchangeable_near_miss"] = exchangeable

    return {
        "overall": overall,
        "per_class": per_class,
        "taxonomy": taxonomy,
        "counts": {
            "samples": n_total,
            "exact_match": sum(o.lf_ok for o in outcomes),
            "gold_candidate_generated": sum(o.gold_generated for o in outcomes),
            "no_candidates": sum(o.no_candidates for o in outcomes),
            "inventory_misses": sum(not o.in_inventory for o in outcomes),
        },
        "gold_candidate_rate": sum(o.gold_generated for o in outcomes) / n_total,
    }


def analyze_sample(system: ParserSystem, sample: Sample) -> SampleOutcome:
    """Full prediction for one sample, recorded for metric aggregation."""
    outcome = SampleOutcome(
        gold_class=sample.sketch_class,
        pred_class="",
        gold_spans=sample.sorted_spans(),
        pred_spans=[],
        gold_lf=sample.lf.tokens,
        pred_lf=None,
        in_inventory=sample.sketch_class in system.multitask.classes,
    )
    try:
        candidates, qp, pred_class, spans = generate_candidates(
            sample.question_tokens, system.multitask, system.index
        )
    except NoCandidates:
        probs = multitask.classify_sketch(sample.question_tokens, system.multitask)
        outcome.pred_class = system.multitask.classes[int(np.argmax(probs))]
        outcome.pred_spans = multitask.predict_spans(sample.question_tokens, system.multitask)
        outcome.no_candidates = True
        return outcome
    outcome.pred_class = pred_class
    outcome.pred_spans = spans
    outcome.gold_generated = any(c.tokens == sample.lf.tokens for c in candidates)
    scored = score_components(system, sample.question_tokens, qp, pred_class, candidates)
    ranked = rank(scored, system.weights)
    outcome.pred_lf = ranked[0].candidate.tokens
    return outcome


def evaluate(corpus: Corpus, system: ParserSystem) -> dict:
    """MetricsReport plus the error taxonomy and pattern-coverage statistic."""
    outcomes = [analyze_sample(system, sample) for sample in corpus]
    report = compute_metrics(outcomes)
    report["pattern_coverage"] = system.index.coverage(corpus)
    report["fusion_weights"] = system.weights.as_dict()
    report["split"] = corpus.split
    return report


def predict(question: str, system: ParserSystem) -> str:
    """Top-ranked logical form for a raw question, or "" when nothing fits."""
    result = predict_detailed(question, system)
    return result["predicted_logical_form"]


def predict_detailed(question: str, system: ParserSystem) -> dict:
    tokens = lf.tokenize_question(question)
    try:
        candidates, qp, pred_class, spans = generate_candidates(
            tokens, system.multitask, system.index
        )
    except NoCandidates as exc:
        return {
            "predicted_logical_form": "",
            "sketch_class": "",
            "spans": [],
            "candidates": [],
            "diagnostic": str(exc),
        }
    ranked = rank(
        score_components(system, tokens, qp, pred_class, candidates), system.weights
    )
    return {
        "predicted_logical_form": ranked[0].candidate.text,
        "sketch_class": pred_class,
        "spans": [list(span) for span in spans],
        "candidates": [
            {
                "logical_form": s.candidate.text,
                "pattern_score": s.pattern_score,
                "pe_score": s.pe_score,
                "gen_score": s.gen_score,
                "fused": s.fused,
            }
            for s in ranked
        ],
    }


# ---------------------------------------------------------------------------
# System training and persistence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemConfig:
    multitask: MultiTaskConfig = MultiTaskConfig()
    matcher: MatcherConfig = MatcherConfig()
    cooccurrence: CooccurrenceConfig = CooccurrenceConfig()
    gen_members: tuple[GenMemberConfig, ...] = DEFAULT_MEMBERS
    grid_step: float = 0.05


def _dev_packs(system: ParserSystem, dev: Corpus):
    packs = []
    for sample in dev:
        try:
            candidates, qp, pred_class, _ = generate_candidates(
                sample.question_tokens, system.multitask, system.index
            )
        except NoCandidates:
            packs.append((sample.lf.tokens, []))
            continue
        scored = score_components(system, sample.question_tokens, qp, pred_class, candidates)
        packs.append(
            (
                sample.lf.tokens,
                [
                    (s.candidate.tokens, s.pattern_score, s.pe_score, s.gen_score, s.candidate.freq)
                    for s in scored
                ],
            )
        )
    return packs


def train_system(train: Corpus, dev: Corpus, cfg: SystemConfig | None = None) -> ParserSystem:
    """Fit every stage on train, then tune fusion weights on dev."""
    cfg = cfg or SystemConfig()
    if not train.samples:
        raise EmptyCorpus("cannot train a system on an empty corpus")
    logger.info("training multitask model on %d samples", len(train.samples))
    mt = multitask.train_multitask(train, dev, cfg.multitask)
    index = matchers.build_pattern_index(train)
    logger.info("pattern index: %d entries", index.size())
    matcher = matchers.train_matcher_ensemble(train, dev, index, cfg.matcher)
    cooccurrence = matchers.build_cooccurrence(train, cfg.cooccurrence)
    gen = genscore.fit_genmodel(train, cfg.gen_members)
    system = ParserSystem(
        multitask=mt,
        index=index,
        matcher=matcher,
        cooccurrence=cooccurrence,
        gen=gen,
        weights=PATTERN_ONLY,
        config=cfg,
    )
    if dev.samples:
        system.weights = tune_weights(_dev_packs(system, dev), cfg.grid_step)
        logger.info("tuned fusion weights: %s", system.weights)
    return system


MANIFEST_NAME = "manifest.json"
ARRAYS_NAME = "arrays.npz"
PATTERNS_NAME = "patterns.json"
COOCCUR_NAME = "cooccurrence.json"
GENMODEL_NAME = "genmodel.json"


def save_system(system: ParserSystem, model_dir: str | Path) -> None:
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)

    manifest = {
        "format_version": learn.CHECKPOINT_VERSION,
        "classes": system.multitask.classes,
        "mt_vocab": system.multitask.vocab.tokens,
        "matcher_vocab": system.matcher.members[0].vocab.tokens,
        "matcher_members": len(system.matcher.members),
        "fusion_weights": system.weights.as_dict(),
        "config": dataclasses.asdict(system.config),
    }
    learn.save_json(model_dir / MANIFEST_NAME, manifest)

    arrays: dict[str, np.ndarray] = {
        f"mt.{k}": v for k, v in system.multitask.params().items()
    }
    for i, member in enumerate(system.matcher.members):
        for k, v in member.params().items():
            arrays[f"matcher.{i}.{k}"] = v
    arrays["pe.head_w"] = system.cooccurrence.head.weight
    arrays["pe.head_b"] = system.cooccurrence.head.bias
    learn.save_arrays(model_dir / ARRAYS_NAME, arrays)

    learn.save_json(
        model_dir / PATTERNS_NAME,
        {
            cls: [
                {
                    "pattern": list(e.pattern.tokens),
                    "template": list(e.template.tokens),
                    "arity": e.template.entity_arity,
                    "freq": e.freq,
                }
                for e in entries
            ]
            for cls, entries in system.index.by_class.items()
        },
    )
    learn.save_json(
        model_dir / COOCCUR_NAME,
        {
            "pairs": [
                [pred, ent, count]
                for (pred, ent), count in sorted(system.cooccurrence.pair_counts.items())
            ],
            "pred_counts": dict(sorted(system.cooccurrence.pred_counts.items())),
            "ent_counts": dict(sorted(system.cooccurrence.ent_counts.items())),
        },
    )
    learn.save_json(
        model_dir / GENMODEL_NAME,
        {
            "members": [[m.lam, m.alpha] for m in system.gen.members],
            "classes": {
                cls: {
                    "vocab": list(stats.vocab),
                    "bigram": {
                        prev: dict(sorted(row.items()))
                        for prev, row in sorted(stats.bigram.items())
                    },
                }
                for cls, stats in sorted(system.gen.class_stats.items())
            },
        },
    )


def _config_from_dict(raw: dict) -> SystemConfig:
    mt = dict(raw["multitask"])
    mt["loss_weights"] = tuple(mt["loss_weights"])
    return SystemConfig(
        multitask=MultiTaskConfig(**mt),
        matcher=MatcherConfig(**raw["matcher"]),
        cooccurrence=CooccurrenceConfig(**raw["cooccurrence"]),
        gen_members=tuple(GenMemberConfig(*pair) for pair in raw["gen_members"]),
        grid_step=raw["grid_step"],
    )


def load_system(model_dir: str | Path) -> ParserSystem:
    model_dir = Path(model_dir)
    manifest = learn.load_json(model_dir / MANIFEST_NAME)
    arrays = learn.load_arrays(model_dir / ARRAYS_NAME)
    cfg = _config_from_dict(manifest["config"])

    mt_vocab = Vocab(tokens=list(manifest["mt_vocab"]))
    mt = MultiTaskModel(
        vocab=mt_vocab,
        encoder=EncoderParams(
            embedding=arrays["mt.embedding"], window=cfg.multitask.window
        ),
        cls=LinearHead(arrays["mt.cls_w"], arrays["mt.cls_b"]),
        emit=LinearHead(arrays["mt.emit_w"], arrays["mt.emit_b"]),
        trans=arrays["mt.trans"],
        classes=list(manifest["classes"]),
        config=cfg.multitask,
    )

    matcher_vocab = Vocab(tokens=list(manifest["matcher_vocab"]))
    members = []
    for i in range(manifest["matcher_members"]):
        members.append(
            MatcherModel(
                vocab=matcher_vocab,
                encoder=EncoderParams(embedding=arrays[f"matcher.{i}.embedding"], window=0),
                head=LinearHead(arrays[f"matcher.{i}.head_w"], arrays[f"matcher.{i}.head_b"]),
            )
        )

    patterns_raw = learn.load_json(model_dir / PATTERNS_NAME)
    index = PatternIndex()
    for cls, entries in patterns_raw.items():
        index.by_class[cls] = [
            matchers.PatternEntry(
                pattern=lf.LfPattern(tuple(e["pattern"])),
                template=lf.LfTemplate(tuple(e["template"]), e["arity"]),
                freq=e["freq"],
            )
            for e in entries
        ]

    co_raw = learn.load_json(model_dir / COOCCUR_NAME)
    cooccurrence = CooccurrenceModel(
        pair_counts={(p, e): c for p, e, c in co_raw["pairs"]},
        pred_counts=dict(co_raw["pred_counts"]),
        ent_counts=dict(co_raw["ent_counts"]),
        head=LinearHead(arrays["pe.head_w"], arrays["pe.head_b"]),
    )

    gen_raw = learn.load_json(model_dir / GENMODEL_NAME)
    class_stats = {}
    for cls, payload in gen_raw["classes"].items():
        stats = genscore.ClassStats(
            bigram={prev: dict(row) for prev, row in payload["bigram"].items()},
            vocab={tok: None for tok in payload["vocab"]},
        )
        class_stats[cls] = stats
    gen = GenModel(
        class_stats=class_stats,
        members=tuple(GenMemberConfig(lam, alpha) for lam, alpha in gen_raw["members"]),
    )

    weights = FusionWeights(**manifest["fusion_weights"])
    return ParserSystem(
        multitask=mt,
        index=index,
        matcher=MatcherEnsemble(members=members),
        cooccurrence=cooccurrence,
        gen=gen,
        weights=weights,
        config=cfg,
    )
