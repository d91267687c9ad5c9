"""TREC run/qrels IO and evaluation metrics.

Formats:
    run line:   topic_id Q0 doc_id rank score run_tag
    qrels line: topic_id 0 doc_id grade
    topics:     XML, <topics><topic number="..."><query/><question/>
                <narrative/></topic></topics>

Metric conventions: unjudged documents count as grade 0 everywhere; nDCG
uses linear gain grade/log2(rank+1) (exponential gain behind a flag);
per-topic values are never rounded before display.
"""

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from scipy.stats import t as student_t

from .errors import FormatError
from .util import atomic_write_text

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Topic:
    topic_id: str
    query: str = ""
    question: str = ""
    narrative: str = ""

    def field(self, name):
        if name not in ("query", "question", "narrative"):
            raise ValueError(f"unknown topic field: {name!r}")
        return getattr(self, name)


class JudgmentSet:
    """(topic_id, doc_id) -> grade in {0, 1, 2}."""

    def __init__(self, grades=None):
        self._grades = dict(grades or {})
        for (topic_id, doc_id), grade in self._grades.items():
            _check_grade(grade, topic_id, doc_id)

    def grade(self, topic_id, doc_id):
        """Grade for a pair, 0 when unjudged."""
        return self._grades.get((topic_id, doc_id), 0)

    def is_judged(self, topic_id, doc_id):
        return (topic_id, doc_id) in self._grades

    def topic_ids(self):
        return sorted({t for t, _ in self._grades})

    def grades_for_topic(self, topic_id):
        return {d: g for (t, d), g in self._grades.items() if t == topic_id}

    def relevant_docs(self, topic_id, min_grade=1):
        return {d for (t, d), g in self._grades.items()
                if t == topic_id and g >= min_grade}

    def __len__(self):
        return len(self._grades)

    def items(self):
        return self._grades.items()


def _check_grade(grade, topic_id, doc_id):
    if grade not in (0, 1, 2):
        raise FormatError(f"grade must be 0, 1, or 2; got {grade} for ({topic_id}, {doc_id})")


class Run:
    """Ranked lists per topic, with a run tag."""

    def __init__(self, run_tag="run"):
        if not run_tag:
            raise ValueError("run_tag must be non-empty")
        self.run_tag = run_tag
        self._lists = {}  # topic_id -> list of (doc_id, score)

    @classmethod
    def from_candidates(cls, per_topic, run_tag):
        """Build from topic_id -> ordered Candidate (or (doc_id, score)) lists."""
        run = cls(run_tag)
        for topic_id, cands in per_topic.items():
            pairs = [(c.doc_id, c.score) if hasattr(c, "doc_id") else tuple(c)
                     for c in cands]
            run.set_topic(topic_id, pairs)
        return run

    def set_topic(self, topic_id, pairs):
        seen = set()
        prev = None
        for doc_id, score in pairs:
            if doc_id in seen:
                raise FormatError(f"duplicate doc {doc_id} in topic {topic_id}")
            seen.add(doc_id)
            if prev is not None and score > prev + 1e-12:
                raise FormatError(f"scores not non-increasing in topic {topic_id}")
            prev = score
        self._lists[topic_id] = list(pairs)

    def topic_ids(self):
        return sorted(self._lists)

    def ranking(self, topic_id):
        return self._lists.get(topic_id, [])

    def doc_ids(self, topic_id):
        return [d for d, _ in self.ranking(topic_id)]


# -- file IO ----------------------------------------------------------------

def read_qrels(path):
    """Read a qrels file. Duplicate pairs: last occurrence wins, with a warning."""
    grades = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            topic_id, _, doc_id, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer grade {grade_s!r}") from None
            _check_grade(grade, topic_id, doc_id)
            if (topic_id, doc_id) in grades:
                log.warning("%s:%d: duplicate qrels pair (%s, %s); last wins",
                            path, lineno, topic_id, doc_id)
            grades[(topic_id, doc_id)] = grade
    return JudgmentSet(grades)


def read_run(path):
    run = None
    per_topic = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            topic_id, _, doc_id, _rank, score_s, tag = parts
            try:
                score = float(score_s)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric score {score_s!r}") from None
            per_topic.setdefault(topic_id, []).append((doc_id, score))
            run_tag = tag
    run = Run(run_tag if per_topic else "run")
    for topic_id, pairs in per_topic.items():
        run.set_topic(topic_id, pairs)
    return run


def format_run(run):
    lines = []
    for topic_id in run.topic_ids():
        for rank, (doc_id, score) in enumerate(run.ranking(topic_id), 1):
            lines.append(f"{topic_id} Q0 {doc_id} {rank} {score:.6f} {run.run_tag}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_run(run, path):
    atomic_write_text(path, format_run(run))


def read_topics(path):
    """Parse the topics XML file into Topic records."""
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise FormatError(f"cannot parse topics file {path}: {exc}") from exc
    topics = []
    for el in root.findall("topic"):
        number = el.get("number")
        if not number:
            raise FormatError(f"{path}: topic element without a number attribute")
        topics.append(Topic(
            topic_id=number,
            query=(el.findtext("query") or "").strip(),
            question=(el.findtext("question") or "").strip(),
            narrative=(el.findtext("narrative") or "").strip(),
        ))
    if not topics:
        raise FormatError(f"{path}: no topics found")
    return topics


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class MetricResult:
    per_topic: dict          # topic_id -> value, evaluated topics only
    flagged: tuple           # topic ids excluded or zero-by-definition

    @property
    def mean(self):
        if not self.per_topic:
            return 0.0
        return sum(self.per_topic.values()) / len(self.per_topic)


def _dcg(grades, k, exponential):
    total = 0.0
    for i, g in enumerate(grades[:k], 1):
        gain = (2 ** g - 1) if exponential else g
        total += gain / math.log2(i + 1)
    return total


def ndcg_at_k(run, judgments, k=10, exponential=False):
    """nDCG@k with linear gain by default. Topics absent from the
    judgments are excluded from the mean; judged topics with no relevant
    document contribute 0 and are flagged."""
    if k < 1:
        raise ValueError("k must be >= 1")
    judged_topics = set(judgments.topic_ids())
    per_topic = {}
    flagged = []
    for topic_id in run.topic_ids():
        if topic_id not in judged_topics:
            flagged.append(topic_id)
            continue
        grades = [judgments.grade(topic_id, d) for d in run.doc_ids(topic_id)]
        ideal = sorted(judgments.grades_for_topic(topic_id).values(), reverse=True)
        idcg = _dcg(ideal, k, exponential)
        if idcg == 0:
            per_topic[topic_id] = 0.0
            flagged.append(topic_id)
            continue
        per_topic[topic_id] = _dcg(grades, k, exponential) / idcg
    return MetricResult(per_topic, tuple(flagged))


def precision_at_k(run, judgments, k=5, min_grade=1):
    """Fraction of the top k with grade >= min_grade; short result lists
    still divide by k."""
    if min_grade not in (1, 2):
        raise ValueError("min_grade must be 1 or 2")
    per_topic = {}
    for topic_id in run.topic_ids():
        top = run.doc_ids(topic_id)[:k]
        hits = sum(1 for d in top if judgments.grade(topic_id, d) >= min_grade)
        per_topic[topic_id] = hits / k
    return MetricResult(per_topic, ())


def judged_at_k(run, judgments, k=5):
    per_topic = {}
    for topic_id in run.topic_ids():
        top = run.doc_ids(topic_id)[:k]
        judged = sum(1 for d in top if judgments.is_judged(topic_id, d))
        per_topic[topic_id] = judged / k if k else 0.0
    return MetricResult(per_topic, ())


def recall_at_k(run, judgments, k, min_grade=1):
    """|relevant in top k| / |relevant|; topics with zero relevant
    documents are excluded and flagged."""
    per_topic = {}
    flagged = []
    for topic_id in run.topic_ids():
        relevant = judgments.relevant_docs(topic_id, min_grade)
        if not relevant:
            flagged.append(topic_id)
            continue
        top = set(run.doc_ids(topic_id)[:k])
        per_topic[topic_id] = len(relevant & top) / len(relevant)
    return MetricResult(per_topic, tuple(flagged))


METRICS = {
    "ndcg@10": lambda run, q: ndcg_at_k(run, q, 10),
    "p@5": lambda run, q: precision_at_k(run, q, 5, min_grade=1),
    "p@5-rel": lambda run, q: precision_at_k(run, q, 5, min_grade=2),
    "judged@5": lambda run, q: judged_at_k(run, q, 5),
}


def metric_by_name(name):
    name = name.lower()
    if name in METRICS:
        return METRICS[name]
    if name.startswith("recall@"):
        k = int(name.split("@", 1)[1])
        return lambda run, q: recall_at_k(run, q, k)
    if name.startswith("ndcg@"):
        k = int(name.split("@", 1)[1])
        return lambda run, q: ndcg_at_k(run, q, k)
    if name.startswith("p@"):
        k = int(name.split("@", 1)[1])
        return lambda run, q: precision_at_k(run, q, k)
    raise ValueError(f"unknown metric: {name!r}")


# -- statistics ---------------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    degenerate: bool  # all paired differences zero; no significance claim


def paired_t_test(values_a, values_b):
    """Two-sided paired Student t-test."""
    if len(values_a) != len(values_b):
        raise ValueError("paired vectors must have equal length")
    n = len(values_a)
    if n < 2:
        raise ValueError("need at least 2 pairs")
    diffs = [a - b for a, b in zip(values_a, values_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0:
        return TTestResult(t=0.0, p=1.0, df=n - 1, degenerate=True)
    t_stat = mean / math.sqrt(var / n)
    p = 2 * student_t.sf(abs(t_stat), n - 1)
    return TTestResult(t=t_stat, p=float(p), df=n - 1, degenerate=False)


def per_query_deltas(run_a, run_b, judgments, metric_name):
    """topic -> (value_a, value_b, delta) for topics present in both runs."""
    metric = metric_by_name(metric_name)
    res_a = metric(run_a, judgments).per_topic
    res_b = metric(run_b, judgments).per_topic
    table = {}
    for topic_id in sorted(set(res_a) & set(res_b)):
        a, b = res_a[topic_id], res_b[topic_id]
        table[topic_id] = (a, b, a - b)
    return table


def format_deltas(table, metric_name):
    lines = [f"topic\t{metric_name}_a\t{metric_name}_b\tdelta"]
    for topic_id, (a, b, d) in table.items():
        lines.append(f"{topic_id}\t{a:.4f}\t{b:.4f}\t{d:+.4f}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ConfusionResult:
    matrix: tuple            # 3x3 counts, matrix[a][b]
    agreement: float
    frac_a_higher: float
    frac_a_lower: float
    total: int
    empty: bool


def confusion_and_agreement(labels_a, labels_b):
    """3x3 confusion matrix over pairs judged by both sides.

    labels are mappings key -> grade in {0, 1, 2}. Only the key
    intersection is compared; an empty intersection flags the result."""
    keys = sorted(set(labels_a) & set(labels_b))
    matrix = [[0] * 3 for _ in range(3)]
    higher = lower = 0
    for key in keys:
        a, b = labels_a[key], labels_b[key]
        _check_grade(a, key, "A")
        _check_grade(b, key, "B")
        matrix[a][b] += 1
        if a > b:
            higher += 1
        elif a < b:
            lower += 1
    total = len(keys)
    if total == 0:
        return ConfusionResult(tuple(map(tuple, matrix)), 0.0, 0.0, 0.0, 0, True)
    agree = sum(matrix[i][i] for i in range(3))
    return ConfusionResult(tuple(map(tuple, matrix)), agree / total,
                           higher / total, lower / total, total, False)
