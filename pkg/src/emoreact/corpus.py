"""Corpus construction: reaction feeds, benchmark label mapping, distant labels.

Reaction feeds are JSON documents shaped like the exports this toolkit
consumes: an array of single-element arrays, each wrapping an object with
``created_time``, ``message`` and an 8-slot ``reactions`` count vector in
the order (total, like, love, haha, wow, sad, angry, thankful).  A flat
array of objects is also accepted in tolerant mode.

Benchmark label schemes (affective headlines, fairy-tale sentences, ISEAR
reports) and the reaction slots all map onto the four canonical emotions
{anger, joy, sadness, surprise}; labels outside that set are dropped.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, FeedParseError, RecordError

log = logging.getLogger(__name__)


class Emotion(Enum):
    """The four canonical emotions, in fixed ordinal order.

    The definition order is load-bearing: deterministic tie-breaks across
    the package resolve to the lowest ordinal.
    """

    ANGER = "anger"
    JOY = "joy"
    SADNESS = "sadness"
    SURPRISE = "surprise"

    @property
    def ordinal(self) -> int:
        return _EMOTION_ORDINALS[self]

    def __lt__(self, other: "Emotion") -> bool:
        return self.ordinal < other.ordinal


EMOTIONS: tuple[Emotion, ...] = tuple(Emotion)
_EMOTION_ORDINALS = {e: i for i, e in enumerate(EMOTIONS)}

REACTION_SLOTS = ("total", "like", "love", "haha", "wow", "sad", "angry", "thankful")

# Slots that carry emotion signal; "like" is the default, most generic
# reaction and "total"/"thankful" carry no single emotion.  The order here
# is also the tie-break order for labeling.
MEANINGFUL_SLOTS = ("love", "haha", "wow", "sad", "angry")
_MEANINGFUL_INDICES = tuple(REACTION_SLOTS.index(s) for s in MEANINGFUL_SLOTS)

# Raw label -> canonical emotion (None = dropped).  Every raw label a
# scheme can produce appears exactly once; lookups of anything else are a
# data error, never a silent fall-through.
SCHEMES: dict[str, dict[str, Emotion | None]] = {
    "facebook": {
        "love": Emotion.JOY,
        "haha": Emotion.JOY,
        "wow": Emotion.SURPRISE,
        "sad": Emotion.SADNESS,
        "angry": Emotion.ANGER,
        "like": None,
        "thankful": None,
    },
    "affective": {
        "anger": Emotion.ANGER,
        "disgust": Emotion.ANGER,
        "fear": None,
        "joy": Emotion.JOY,
        "sadness": Emotion.SADNESS,
        "surprise": Emotion.SURPRISE,
    },
    "fairy_tales": {
        "angry-disgusted": Emotion.ANGER,
        "fearful": None,
        "happy": Emotion.JOY,
        "sad": Emotion.SADNESS,
        "surprised": Emotion.SURPRISE,
    },
    "isear": {
        "anger": Emotion.ANGER,
        "disgust": Emotion.ANGER,
        "fear": None,
        "joy": Emotion.JOY,
        "sadness": Emotion.SADNESS,
        "shame": None,
        "guilt": None,
    },
}

# Per-annotator fairy-tale labels merge angry/disgusted before agreement
# is checked.
_FAIRY_TALE_MERGE = {"angry": "angry-disgusted", "disgusted": "angry-disgusted"}

# Affective headline scores arrive in this fixed order.
AFFECTIVE_SCORE_ORDER = ("anger", "disgust", "fear", "joy", "sadness", "surprise")


def map_raw_label(scheme: str, raw: str) -> Emotion | None:
    """Map a source-scheme label to a canonical emotion, or None if dropped."""
    try:
        table = SCHEMES[scheme]
    except KeyError:
        raise DataError(f"unknown source scheme {scheme!r}") from None
    try:
        return table[raw]
    except KeyError:
        raise DataError(f"unknown raw label {raw!r} for scheme {scheme!r}") from None


@dataclass(frozen=True)
class ReactionPost:
    """One social post with its 8-slot reaction count vector."""

    created_time: str
    message: str
    reactions: tuple[int, ...]

    def __post_init__(self):
        if len(self.reactions) != 8:
            raise ValueError(f"reactions must have 8 slots, got {len(self.reactions)}")
        for slot, count in zip(REACTION_SLOTS, self.reactions):
            if not isinstance(count, int) or isinstance(count, bool):
                raise ValueError(f"reaction count {slot!r} is not an integer")
            if count < 0:
                raise ValueError(f"reaction count {slot!r} is negative")

    def meaningful_counts(self) -> tuple[int, ...]:
        """Counts for (love, haha, wow, sad, angry)."""
        return tuple(self.reactions[i] for i in _MEANINGFUL_INDICES)


@dataclass(frozen=True)
class LabeledDoc:
    """A text paired with one canonical emotion label and a source tag."""

    text: str
    label: Emotion
    source: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("document text is empty")


def parse_reaction_feed(data: bytes | str, strict: bool = False) -> list[ReactionPost]:
    """Parse a reaction-feed JSON document into posts, order preserved.

    The expected shape is an array of single-element arrays of post
    objects; a flat array of objects is also accepted when ``strict`` is
    False.  In tolerant mode invalid records are skipped with a warning;
    in strict mode they raise :class:`RecordError` with the record index.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise FeedParseError(f"invalid JSON at byte {offset}: {e.msg}", offset) from e
    if not isinstance(doc, list):
        raise FeedParseError("feed document must be a JSON array")

    posts: list[ReactionPost] = []
    for i, item in enumerate(doc):
        try:
            posts.append(_parse_feed_record(item, strict))
        except RecordError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            if strict:
                raise RecordError(str(e), i) from e
            log.warning("skipping feed record %d: %s", i, e)
    return posts


def _parse_feed_record(item: object, strict: bool) -> ReactionPost:
    if isinstance(item, list):
        if len(item) != 1:
            raise ValueError(f"wrapper array has {len(item)} elements, expected 1")
        item = item[0]
    elif strict:
        raise ValueError("record is not wrapped in a single-element array")
    if not isinstance(item, dict):
        raise ValueError("record is not a JSON object")
    try:
        created = item["created_time"]
        message = item["message"]
        reactions = item["reactions"]
    except KeyError as e:
        raise ValueError(f"missing key {e.args[0]!r}") from None
    if not isinstance(created, str) or not isinstance(message, str):
        raise ValueError("created_time and message must be strings")
    if not isinstance(reactions, list):
        raise ValueError("reactions must be an array")
    return ReactionPost(created, message, tuple(reactions))


def load_reaction_feed(path: str | Path, strict: bool = False) -> list[ReactionPost]:
    return parse_reaction_feed(Path(path).read_bytes(), strict=strict)


def dump_reaction_feed(posts: Iterable[ReactionPost]) -> str:
    """Serialize posts back to the nested feed shape."""
    doc = [
        [
            {
                "created_time": p.created_time,
                "message": p.message,
                "reactions": list(p.reactions),
            }
        ]
        for p in posts
    ]
    return json.dumps(doc, ensure_ascii=False, indent=1) + "\n"


def write_reaction_feed(posts: Iterable[ReactionPost], path: str | Path) -> None:
    Path(path).write_text(dump_reaction_feed(posts), encoding="utf-8")


def assign_label(
    post: ReactionPost,
    *,
    sum_before_argmax: bool = False,
    drop_ties: bool = False,
) -> Emotion | None:
    """Distant label for a post: the emotion whose reaction count is highest.

    Only the five meaningful slots participate; like, thankful and the
    total are never consulted.  Returns None when all five counts are zero
    (the post is unlabelable) or, with ``drop_ties``, when the maximum is
    shared.  ``sum_before_argmax`` aggregates love+haha into joy before
    taking the argmax instead of comparing raw slot counts.
    """
    counts = post.meaningful_counts()
    if not any(counts):
        return None
    if sum_before_argmax:
        totals = {e: 0 for e in EMOTIONS}
        for slot, count in zip(MEANINGFUL_SLOTS, counts):
            emotion = SCHEMES["facebook"][slot]
            assert emotion is not None
            totals[emotion] += count
        best = max(totals.values())
        winners = [e for e in EMOTIONS if totals[e] == best]
    else:
        best = max(counts)
        winners_raw = [slot for slot, c in zip(MEANINGFUL_SLOTS, counts) if c == best]
        if drop_ties and len(winners_raw) > 1:
            return None
        return SCHEMES["facebook"][winners_raw[0]]
    if drop_ties and len(winners) > 1:
        return None
    return winners[0]


def reaction_entropy(post: ReactionPost) -> float:
    """Shannon entropy (nats) of the normalized meaningful-reaction counts.

    Zero-count slots contribute nothing; a post with no meaningful
    reactions has no distribution and yields +inf.
    """
    counts = post.meaningful_counts()
    total = sum(counts)
    if total == 0:
        return math.inf
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log(p)
    return h


def entropy_filter(posts: Iterable[ReactionPost], max_entropy: float) -> list[ReactionPost]:
    """Keep posts whose reaction distribution is concentrated enough.

    Posts with entropy (in nats) above ``max_entropy`` are removed, as are
    posts with no meaningful reactions at all.
    """
    if max_entropy < 0:
        raise ValueError("max_entropy must be >= 0")
    kept = []
    for post in posts:
        if not any(post.meaningful_counts()):
            continue
        if reaction_entropy(post) <= max_entropy:
            kept.append(post)
    return kept


def parse_canonical_tsv(text: str, source_hint: str = "<string>", strict: bool = False) -> list[LabeledDoc]:
    """Parse the canonical corpus format: ``label<TAB>source<TAB>text`` lines."""
    docs: list[LabeledDoc] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line == "":
            continue
        try:
            docs.append(_parse_canonical_line(line))
        except ValueError as e:
            if strict:
                raise RecordError(str(e), lineno, unit="line") from e
            log.warning("%s line %d skipped: %s", source_hint, lineno, e)
    return docs


def _parse_canonical_line(line: str) -> LabeledDoc:
    fields = line.split("\t", 2)
    if len(fields) != 3:
        raise ValueError(f"expected 3 tab-separated fields, got {len(fields)}")
    label_str, source, text = fields
    try:
        label = Emotion(label_str)
    except ValueError:
        raise ValueError(f"unknown canonical label {label_str!r}") from None
    return LabeledDoc(text, label, source)


def load_canonical_tsv(path: str | Path, strict: bool = False) -> list[LabeledDoc]:
    return parse_canonical_tsv(Path(path).read_text(encoding="utf-8"), str(path), strict=strict)


def dump_canonical_tsv(docs: Iterable[LabeledDoc]) -> str:
    """Serialize docs to canonical TSV; tabs/newlines inside fields become spaces."""
    lines = []
    for doc in docs:
        source = _sanitize_field(doc.source)
        text = _sanitize_field(doc.text)
        lines.append(f"{doc.label.value}\t{source}\t{text}\n")
    return "".join(lines)


def _sanitize_field(value: str) -> str:
    for ch in ("\t", "\n", "\r"):
        value = value.replace(ch, " ")
    return value


def write_canonical_tsv(docs: Iterable[LabeledDoc], path: str | Path) -> None:
    Path(path).write_text(dump_canonical_tsv(docs), encoding="utf-8", newline="")


def map_affective_scores(scores: Sequence[int], threshold: int = 50) -> Emotion | None:
    """Coarse label for a six-score affective headline record.

    ``scores`` follow :data:`AFFECTIVE_SCORE_ORDER`; disgust folds into
    anger (max of the two) and fear is dropped.  Returns the argmax of the
    mapped scores when it reaches ``threshold``, else None; ties resolve
    to the lowest emotion ordinal.
    """
    if len(scores) != 6:
        raise ValueError(f"expected 6 scores, got {len(scores)}")
    for name, s in zip(AFFECTIVE_SCORE_ORDER, scores):
        if not 0 <= s <= 100:
            raise ValueError(f"{name} score {s} outside [0, 100]")
    if not 0 <= threshold <= 100:
        raise ValueError(f"threshold {threshold} outside [0, 100]")
    anger, disgust, _fear, joy, sadness, surprise = scores
    mapped = {
        Emotion.ANGER: max(anger, disgust),
        Emotion.JOY: joy,
        Emotion.SADNESS: sadness,
        Emotion.SURPRISE: surprise,
    }
    best = max(mapped.values())
    if best < threshold:
        return None
    return next(e for e in EMOTIONS if mapped[e] == best)


def load_fairy_tales(
    records: Iterable[tuple[str, Sequence[str]]],
    source: str = "fairy_tales",
    strict: bool = False,
) -> list[LabeledDoc]:
    """Build docs from (sentence, per-annotator labels) fairy-tale records.

    Angry and disgusted merge before agreement is checked; only sentences
    where every annotator agrees survive, and agreed labels that map to
    nothing (fearful) are excluded.
    """
    docs: list[LabeledDoc] = []
    for i, (sentence, raw_labels) in enumerate(records):
        try:
            if not raw_labels:
                raise ValueError("record has no annotator labels")
            merged = []
            for raw in raw_labels:
                merged_label = _FAIRY_TALE_MERGE.get(raw, raw)
                if merged_label not in SCHEMES["fairy_tales"]:
                    raise ValueError(f"unknown raw label {raw!r}")
                merged.append(merged_label)
        except ValueError as e:
            if strict:
                raise RecordError(str(e), i) from e
            log.warning("skipping fairy-tale record %d: %s", i, e)
            continue
        if len(set(merged)) != 1:
            continue
        emotion = SCHEMES["fairy_tales"][merged[0]]
        if emotion is None:
            continue
        docs.append(LabeledDoc(sentence, emotion, source))
    return docs


def synth_corpus(
    n_docs: int,
    vocab_per_class: int = 25,
    noise_rate: float = 0.0,
    seed: int = 0,
    tokens_per_doc: int = 12,
    source: str = "synthetic",
) -> list[LabeledDoc]:
    """Generate a planted-signal corpus with class-specific vocabularies.

    Each document's tokens come from its emotion's own vocabulary
    partition except for a ``noise_rate`` fraction drawn from the other
    partitions.  Classes are assigned round-robin, so the distribution is
    uniform to within one document.  Deterministic for a fixed seed.
    """
    if n_docs < 1:
        raise ValueError("n_docs must be >= 1")
    if vocab_per_class < 1:
        raise ValueError("vocab_per_class must be >= 1")
    if not 0.0 <= noise_rate < 1.0:
        raise ValueError("noise_rate must be in [0, 1)")
    if tokens_per_doc < 1:
        raise ValueError("tokens_per_doc must be >= 1")

    rng = random.Random(seed)
    vocab = {
        e: [f"{e.value}tok{k:03d}" for k in range(vocab_per_class)] for e in EMOTIONS
    }
    docs = []
    for i in range(n_docs):
        emotion = EMOTIONS[i % len(EMOTIONS)]
        others = [e for e in EMOTIONS if e is not emotion]
        tokens = []
        for _ in range(tokens_per_doc):
            if noise_rate and rng.random() < noise_rate:
                tokens.append(rng.choice(vocab[rng.choice(others)]))
            else:
                tokens.append(rng.choice(vocab[emotion]))
        docs.append(LabeledDoc(" ".join(tokens), emotion, source))
    return docs
