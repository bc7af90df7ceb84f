"""
Result tables and epoch series, as markdown or delimiter-separated text.

Percentages are always rendered with 2 decimals. Inside a table, rows are grouped
by test file and the lowest DS Y/O and DS M/F of each group are flagged.
"""
from __future__ import annotations

__all__ = (
    "TABLE_COLUMNS",
    "TableFormat",
    "ResultRow",
    "emit_table",
    "parse_table",
    "emit_series",
    "parse_series",
    "emit_group_counts",
    "load_training_accuracy",
    "mean_rows",
    "report_filename",
)

import dataclasses
import enum
import logging
from pathlib import Path
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Union

import numpy

from voicefair import cfg
from voicefair.dataset import GroupKey
from voicefair.errors import ReportError
from voicefair.utils import format_rows
from voicefair.utils import parse_rows
from voicefair.utils import simplify
from .metrics import DisparityReport
from .metrics import GroupMetrics
from .metrics import disparity

logger = logging.getLogger(__name__)

TABLE_COLUMNS = (
    "Train File",
    "Test File",
    "Acc.",
    "EER",
    "EER O",
    "EER Y",
    "EER F",
    "EER M",
    "DS Y/O",
    "DS M/F",
)

_FLAG_COLUMNS = ("Lowest DS Y/O", "Lowest DS M/F")

_NOT_AVAILABLE = "n/a"

# two independently rounded values differ from their rounded difference by this much
_DS_TOLERANCE = 0.01 + 1e-9


class TableFormat(enum.Enum):
    csv = "csv"
    markdown = "markdown"

    @property
    def extension(self) -> str:
        return "md" if self is TableFormat.markdown else "csv"


@dataclasses.dataclass(frozen=True)
class ResultRow:
    """
    One line of a result table; every rate is a percentage.
    """

    train_file_id: str
    test_file_id: str
    training_accuracy: Optional[float]
    eer: float
    eer_old: float
    eer_young: float
    eer_female: float
    eer_male: float
    ds_young_old: float
    ds_male_female: float

    def __post_init__(self):
        for name, first, second in (
            ("ds_young_old", self.eer_young, self.eer_old),
            ("ds_male_female", self.eer_male, self.eer_female),
        ):
            rounded = abs(round(first, 2) - round(second, 2))
            if abs(getattr(self, name) - rounded) > _DS_TOLERANCE:
                raise ReportError(
                    f"{self.train_file_id} / {self.test_file_id}: {name} "
                    f"{getattr(self, name):.2f} does not match the EER difference "
                    f"{rounded:.2f}"
                )

    @classmethod
    def from_eers(
        cls,
        train_file_id: str,
        test_file_id: str,
        eer: float,
        eer_old: float,
        eer_young: float,
        eer_female: float,
        eer_male: float,
        training_accuracy: Optional[float] = None,
    ) -> ResultRow:
        """
        Build a row from percentages, deriving the Disparity Scores.
        """
        return cls(
            train_file_id=train_file_id,
            test_file_id=test_file_id,
            training_accuracy=training_accuracy,
            eer=eer,
            eer_old=eer_old,
            eer_young=eer_young,
            eer_female=eer_female,
            eer_male=eer_male,
            ds_young_old=disparity(eer_young, eer_old),
            ds_male_female=disparity(eer_male, eer_female),
        )

    @classmethod
    def from_metrics(
        cls,
        train_file_id: str,
        test_file_id: str,
        metrics: GroupMetrics,
        report: DisparityReport,
        training_accuracy: Optional[float] = None,
    ) -> ResultRow:
        return cls(
            train_file_id=train_file_id,
            test_file_id=test_file_id,
            training_accuracy=training_accuracy,
            eer=100 * metrics.eer,
            eer_old=100 * metrics.eer_old,
            eer_young=100 * metrics.eer_young,
            eer_female=100 * metrics.eer_female,
            eer_male=100 * metrics.eer_male,
            ds_young_old=100 * report.ds_young_old,
            ds_male_female=100 * report.ds_male_female,
        )

    @property
    def values(self) -> tuple[float, ...]:
        return (
            self.eer,
            self.eer_old,
            self.eer_young,
            self.eer_female,
            self.eer_male,
            self.ds_young_old,
            self.ds_male_female,
        )


def _percent(value: Optional[float], decimals: int = cfg.percent_decimals) -> str:
    if value is None:
        return _NOT_AVAILABLE
    return f"{value:.{decimals}f}"


def _blocks(rows: Sequence[ResultRow]) -> list[list[ResultRow]]:
    """
    Rows grouped by test file, in order of first appearance.
    """
    blocks: dict[str, list[ResultRow]] = {}
    for row in rows:
        blocks.setdefault(row.test_file_id, []).append(row)
    return list(blocks.values())


def _lowest_flags(block: Sequence[ResultRow]) -> list[tuple[bool, bool]]:
    lowest_age = min(round(row.ds_young_old, 2) for row in block)
    lowest_gender = min(round(row.ds_male_female, 2) for row in block)
    return [
        (
            round(row.ds_young_old, 2) == lowest_age,
            round(row.ds_male_female, 2) == lowest_gender,
        )
        for row in block
    ]


def _cells(row: ResultRow) -> list[str]:
    return [
        row.train_file_id,
        row.test_file_id,
        _percent(row.training_accuracy),
    ] + [_percent(value) for value in row.values]


def emit_table(
    rows: Sequence[ResultRow],
    format: TableFormat = TableFormat.markdown,
    delimiter: str = cfg.delimiter,
) -> str:
    """
    Render result rows in the column order of :data:`TABLE_COLUMNS`.

    Markdown output bolds the lowest Disparity Scores of each test file block; csv
    output appends two 0/1 marker columns instead.

    Raises:
        ReportError: if no row is given.
    """
    if not rows:
        raise ReportError("cannot emit an empty table")

    lines: list[list[str]] = []
    for block in _blocks(rows):
        for row, (lowest_age, lowest_gender) in zip(block, _lowest_flags(block)):
            cells = _cells(row)
            if format is TableFormat.markdown:
                if lowest_age:
                    cells[-2] = f"**{cells[-2]}**"
                if lowest_gender:
                    cells[-1] = f"**{cells[-1]}**"
            else:
                cells += [str(int(lowest_age)), str(int(lowest_gender))]
            lines.append(cells)

    if format is TableFormat.csv:
        return format_rows(TABLE_COLUMNS + _FLAG_COLUMNS, lines, delimiter=delimiter)

    text = [
        "| " + " | ".join(TABLE_COLUMNS) + " |",
        "|" + "|".join("---" for _ in TABLE_COLUMNS) + "|",
    ]
    text += ["| " + " | ".join(cells) + " |" for cells in lines]
    return "\n".join(text) + "\n"


def _row_from_cells(cells: Sequence[str], source: str) -> ResultRow:
    if len(cells) < len(TABLE_COLUMNS):
        raise ReportError(
            f"{source}: expected {len(TABLE_COLUMNS)} cells, got {len(cells)}"
        )
    cells = [cell.strip().strip("*").strip() for cell in cells]
    try:
        accuracy = None if cells[2] == _NOT_AVAILABLE else float(cells[2])
        values = [float(cell) for cell in cells[3 : len(TABLE_COLUMNS)]]
    except ValueError as excp:
        raise ReportError(f"{source}: {excp}") from excp
    return ResultRow(cells[0], cells[1], accuracy, *values)


def parse_table(
    text: str,
    format: TableFormat = TableFormat.markdown,
    delimiter: str = cfg.delimiter,
) -> list[ResultRow]:
    """
    Read back a table written by :func:`emit_table`.
    """
    if format is TableFormat.csv:
        rows = parse_rows(
            text,
            required=TABLE_COLUMNS,
            error_type=ReportError,
            delimiter=delimiter,
            source="table",
        )
        return [
            _row_from_cells([row[column] for column in TABLE_COLUMNS], f"row {number}")
            for number, row in rows
        ]

    lines = [line.strip() for line in text.splitlines() if line.strip().startswith("|")]
    if len(lines) < 2:
        raise ReportError("markdown table without header")
    return [
        _row_from_cells(line.strip("|").split("|"), f"line {number}")
        for number, line in enumerate(lines[2:], start=3)
    ]


def emit_series(
    series: Mapping[str, Mapping[int, float]],
    delimiter: str = cfg.delimiter,
) -> str:
    """
    Long-format ``epoch,slice,eer_percent`` rows sorted by slice then epoch.

    Args:
        series: slice name -> {epoch: eer as a fraction}
    """
    if not any(series.values()):
        raise ReportError("cannot emit an empty series")
    rows = [
        (epoch, name, _percent(100 * series[name][epoch]))
        for name in sorted(series)
        for epoch in sorted(series[name])
    ]
    return format_rows(("epoch", "slice", "eer_percent"), rows, delimiter=delimiter)


def parse_series(
    text: str,
    delimiter: str = cfg.delimiter,
) -> dict[str, dict[int, float]]:
    """
    Read back a series written by :func:`emit_series`, as fractions.
    """
    rows = parse_rows(
        text,
        required=("epoch", "slice", "eer_percent"),
        error_type=ReportError,
        delimiter=delimiter,
        source="series",
    )
    series: dict[str, dict[int, float]] = {}
    for number, row in rows:
        try:
            epoch = int(row["epoch"])
            value = float(row["eer_percent"]) / 100
        except ValueError as excp:
            raise ReportError(f"series: row {number}: {excp}") from excp
        series.setdefault(row["slice"], {})[epoch] = value
    return series


def emit_group_counts(
    counts: Mapping[GroupKey, int],
    format: TableFormat = TableFormat.markdown,
    delimiter: str = cfg.delimiter,
) -> str:
    """
    Speakers per language and group, one row per language.
    """
    languages = sorted({group.language for group in counts})
    if not languages:
        raise ReportError("no group count to emit")

    labels = [
        group.label.replace("-", " ").title()
        for group in GroupKey.all_for_language(languages[0])
    ]
    header = ["Language"] + labels + ["Total"]
    lines = []
    for language in languages:
        values = [counts.get(group, 0) for group in GroupKey.all_for_language(language)]
        cells = [str(value) for value in values] + [str(sum(values))]
        lines.append([language.title()] + cells)

    if format is TableFormat.csv:
        return format_rows(header, lines, delimiter=delimiter)
    text = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    text += ["| " + " | ".join(cells) + " |" for cells in lines]
    return "\n".join(text) + "\n"


def load_training_accuracy(
    path: Union[str, Path],
    delimiter: str = cfg.delimiter,
) -> dict[str, float]:
    """
    Read the ``train_file_id,accuracy`` side file feeding the "Acc." column.
    """
    path = Path(path)
    if not path.is_file():
        raise ReportError(f"training accuracy file not found: {path}")
    rows = parse_rows(
        path.read_text(encoding="utf-8"),
        required=("train_file_id", "accuracy"),
        error_type=ReportError,
        delimiter=delimiter,
        source=path.name,
    )
    accuracies = {}
    for number, row in rows:
        try:
            accuracies[row["train_file_id"].strip()] = float(row["accuracy"])
        except ValueError as excp:
            raise ReportError(f"{path.name}: row {number}: {excp}") from excp
    return accuracies


def mean_rows(rows: Sequence[ResultRow]) -> ResultRow:
    """
    Average rows of the same (train, test) files, e.g. over folds.

    Disparity Scores are recomputed from the averaged EERs. The accuracy is averaged
    only when every row has one.
    """
    if not rows:
        raise ReportError("no row to average")
    pairs = {(row.train_file_id, row.test_file_id) for row in rows}
    if len(pairs) > 1:
        raise ReportError(f"cannot average rows of different files {sorted(pairs)}")

    values = numpy.array([row.values[:5] for row in rows]).mean(axis=0)
    accuracies = [row.training_accuracy for row in rows]
    accuracy = None if None in accuracies else float(numpy.mean(accuracies))
    return ResultRow.from_eers(
        rows[0].train_file_id,
        rows[0].test_file_id,
        *(float(value) for value in values),
        training_accuracy=accuracy,
    )


def report_filename(
    train_id: str,
    test_id: str,
    fold: int,
    format: TableFormat = TableFormat.markdown,
) -> str:
    """
    ``<train_id>__<test_id>__fold<k>.<ext>`` with slugified ids.
    """
    return f"{simplify(train_id)}__{simplify(test_id)}__fold{fold}.{format.extension}"
