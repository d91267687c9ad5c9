"""Hyperparameter grid search optimizing a recall-style metric.

Cells are evaluated independently against one shared immutable index;
the argmax tie-break is the lexicographically smallest parameter tuple,
in axis declaration order. Two-axis sweeps also return a heatmap matrix
(first axis down the rows, second across the columns).
"""

import math
from dataclasses import dataclass

from . import firststage
from .errors import DataError
from .treceval import Run, metric_by_name
from .util import atomic_write_text


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"axis {self.name}: step must be > 0")
        if self.min > self.max:
            raise ValueError(f"axis {self.name}: min must be <= max")

    def values(self):
        count = int(math.floor((self.max - self.min) / self.step + 1e-9)) + 1
        return [round(self.min + i * self.step, 10) for i in range(count)]

    @classmethod
    def parse(cls, name, spec):
        """Parse 'min:max:step' (a single number means a one-value axis)."""
        parts = spec.split(":")
        if len(parts) == 1:
            v = float(parts[0])
            return cls(name, v, v, 1.0)
        if len(parts) != 3:
            raise ValueError(f"axis {name}: expected min:max:step, got {spec!r}")
        return cls(name, float(parts[0]), float(parts[1]), float(parts[2]))


@dataclass(frozen=True)
class GridSpec:
    model: str                      # bm25 | rm3 | sdm
    axes: tuple                     # Axis, in tie-break priority order
    query_field: str = "query"
    metric: str = "recall@100"
    k: int = firststage.DEFAULT_TOP_K
    date_min: object = None

    def __post_init__(self):
        if self.model not in ("bm25", "rm3", "sdm"):
            raise ValueError(f"unknown model {self.model!r}")
        if not self.axes:
            raise ValueError("grid needs at least one axis")

    def cells(self):
        """All parameter combinations, lexicographic in axis order."""
        combos = [{}]
        for axis in self.axes:
            combos = [dict(c, **{axis.name: v}) for c in combos for v in axis.values()]
        return combos


@dataclass(frozen=True)
class HeatmapMatrix:
    row_axis: str
    col_axis: str
    rows: tuple                     # row axis values
    cols: tuple                     # column axis values
    cells: tuple                    # cells[i][j] for rows[i], cols[j]


def _search_fn(model, index, cell, k, date_min):
    if model == "bm25":
        params = firststage.BM25Params(k1=cell["k1"], b=cell["b"])
        return lambda q: firststage.bm25_search(index, q, params, k, date_min)
    if model == "rm3":
        rm3 = firststage.RM3Params(
            fb_terms=int(cell["fb_terms"]), fb_docs=int(cell["fb_docs"]),
            orig_weight=cell.get("orig_weight", 0.5))
        return lambda q: firststage.rm3_search(
            index, q, firststage.BM25Params(), rm3, k, date_min)
    w_term = cell["w_term"]
    w_ordered = cell["w_ordered"]
    w_unordered = cell.get("w_unordered", round(1.0 - w_term - w_ordered, 10))
    params = firststage.SDMParams(w_term=w_term, w_ordered=w_ordered,
                                  w_unordered=w_unordered)
    return lambda q: firststage.sdm_search(index, q, params, k, date_min)


def evaluate_cell(index, topics, judgments, spec, cell):
    """Mean metric value of one parameter cell across all topics."""
    search = _search_fn(spec.model, index, cell, spec.k, spec.date_min)
    per_topic = {}
    for topic in topics:
        query_text = topic.field(spec.query_field)
        per_topic[topic.topic_id] = search(query_text)
    run = Run.from_candidates(per_topic, run_tag="sweep")
    result = metric_by_name(spec.metric)(run, judgments)
    return result.mean


def grid_search(index, topics, judgments, spec):
    """Evaluate every cell; returns (best_cell, results, heatmap-or-None).

    `results` maps the parameter value tuple (in axis order) to the mean
    metric value. Ties go to the lexicographically smallest tuple.
    """
    if not any(judgments.relevant_docs(t.topic_id) for t in topics):
        raise DataError("grid search needs at least one relevant judgment")
    axis_names = [a.name for a in spec.axes]
    results = {}
    for cell in spec.cells():
        key = tuple(cell[n] for n in axis_names)
        try:
            results[key] = evaluate_cell(index, topics, judgments, spec, cell)
        except ValueError:
            # infeasible cell (e.g. SDM weights that cannot sum to 1)
            continue
    if not results:
        raise DataError("no feasible cells in the grid")
    best_key = max(sorted(results), key=lambda k: results[k])
    best = dict(zip(axis_names, best_key))

    heatmap = None
    if len(spec.axes) == 2:
        rows = tuple(spec.axes[0].values())
        cols = tuple(spec.axes[1].values())
        cells = tuple(tuple(results.get((r, c), float("nan")) for c in cols)
                      for r in rows)
        heatmap = HeatmapMatrix(spec.axes[0].name, spec.axes[1].name,
                                rows, cols, cells)
    return best, results, heatmap


def format_heatmap(matrix):
    """Tab-delimited grid: column header row of the column-axis values,
    then one row per row-axis value; 4-decimal cells."""
    header = [f"{matrix.row_axis}\\{matrix.col_axis}"]
    header += [_fmt_axis(v) for v in matrix.cols]
    lines = ["\t".join(header)]
    for value, row in zip(matrix.rows, matrix.cells):
        lines.append("\t".join([_fmt_axis(value)] + [f"{c:.4f}" for c in row]))
    return "\n".join(lines) + "\n"


def _fmt_axis(v):
    return f"{v:g}"


def emit_heatmap(matrix, path):
    atomic_write_text(path, format_heatmap(matrix))


def format_results_table(results, axis_names, metric):
    """Tabular sweep output for grids of any dimensionality."""
    lines = ["\t".join(list(axis_names) + [metric])]
    for key in sorted(results):
        lines.append("\t".join([_fmt_axis(v) for v in key] + [f"{results[key]:.4f}"]))
    return "\n".join(lines) + "\n"
