"""Leaderboard construction: mean tables, per-language tables, winner counts.

Scores are held at full precision as ``scores[model][direction][lang][metric]``
with directions ``"xx-eng"`` and ``"eng-xx"``; tables are rendered with
3-decimal rounding.  Reference score tables for six published models are
shipped as CSV fixtures under ``savanna/data``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .evalharness import EvalRunReport

XX_TO_ENG = "xx-eng"
ENG_TO_XX = "eng-xx"


@dataclass
class LeaderboardData:
    # scores[model][direction][lang][metric] -> float
    scores: dict[str, dict[str, dict[str, dict[str, float]]]] = field(default_factory=dict)
    language_names: dict[str, str] = field(default_factory=dict)

    def add_score(self, model: str, direction: str, lang: str, metric: str,
                  value: float) -> None:
        self.scores.setdefault(model, {}).setdefault(direction, {}).setdefault(lang, {})[
            metric
        ] = value

    def models(self) -> list[str]:
        return list(self.scores)

    def languages(self) -> list[str]:
        langs: set[str] = set()
        for per_direction in self.scores.values():
            for per_lang in per_direction.values():
                langs.update(per_lang)
        return sorted(langs)

    def validate_consistency(self) -> None:
        """All models must cover the same languages in each direction."""
        reference: dict[str, set[str]] = {}
        for model, per_direction in self.scores.items():
            for direction, per_lang in per_direction.items():
                langs = set(per_lang)
                if direction not in reference:
                    reference[direction] = langs
                elif reference[direction] != langs:
                    raise ValueError(
                        f"model {model!r} covers different languages in {direction} "
                        f"than the other reports"
                    )

    def mean(self, model: str, direction: str, metric: str) -> float:
        per_lang = self.scores[model][direction]
        values = [entry[metric] for entry in per_lang.values() if metric in entry]
        if not values:
            raise ValueError(f"no {metric} scores for {model} {direction}")
        return sum(values) / len(values)

    def bidirectional_mean(self, model: str, lang: str, metric: str = "chrf") -> float:
        a = self.scores[model][XX_TO_ENG][lang][metric]
        b = self.scores[model][ENG_TO_XX][lang][metric]
        return (a + b) / 2


def load_score_csv(data: LeaderboardData, path_or_text: str | Path, direction: str,
                   metric: str) -> None:
    """Load a per-language score table (columns: lang, language, one column
    per model) into ``data``."""
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        with open(path_or_text, encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    else:
        rows = list(csv.reader(io.StringIO(str(path_or_text))))
    header = rows[0]
    models = header[2:]
    for row in rows[1:]:
        lang, lang_name = row[0], row[1]
        data.language_names[lang] = lang_name
        for model, value in zip(models, row[2:]):
            data.add_score(model, direction, lang, metric, float(value))


def published_reference_data() -> LeaderboardData:
    """Scores of the six published models over the 31 evaluation languages."""
    data = LeaderboardData()
    pkg = resources.files("savanna.data")
    load_score_csv(data, pkg.joinpath("chrf_xx_to_eng.csv").read_text(), XX_TO_ENG, "chrf")
    load_score_csv(data, pkg.joinpath("chrf_eng_to_xx.csv").read_text(), ENG_TO_XX, "chrf")
    load_score_csv(data, pkg.joinpath("bleu_xx_to_eng.csv").read_text(), XX_TO_ENG, "bleu")
    return data


def add_run_report(data: LeaderboardData, model: str, report: EvalRunReport) -> None:
    """Fold one evaluation run's per-direction aggregates into the board."""
    for result in report.directions:
        src, tgt = result.direction
        if tgt == "eng":
            direction, lang = XX_TO_ENG, src
        else:
            direction, lang = ENG_TO_XX, tgt
        agg = result.report.aggregates
        for metric in ("chrf", "bleu", "cer", "wer"):
            data.add_score(model, direction, lang, metric, getattr(agg, metric))


def winner_counts(data: LeaderboardData, models: list[str] | None = None,
                  metric: str = "chrf") -> dict[str, int]:
    """Per-model count of languages with the best bidirectional mean score.

    Ties are resolved by flagging every maximal model as a winner.
    """
    models = models or data.models()
    counts = {m: 0 for m in models}
    for lang in data.languages():
        values = {m: data.bidirectional_mean(m, lang, metric) for m in models}
        best = max(values.values())
        for m, v in values.items():
            if v == best:
                counts[m] += 1
    return counts


def mean_table_markdown(data: LeaderboardData) -> str:
    """Mean-score table: one row per model, chrF/BLEU for both directions."""
    data.validate_consistency()
    lines = [
        "| Model | xx->eng chrF | xx->eng BLEU | eng->xx chrF | eng->xx BLEU |",
        "|---|---|---|---|---|",
    ]
    cells = {}
    for model in data.models():
        row = [model]
        for direction in (XX_TO_ENG, ENG_TO_XX):
            for metric in ("chrf", "bleu"):
                try:
                    value = data.mean(model, direction, metric)
                    row.append(f"{value:.3f}")
                    cells[(model, direction, metric)] = value
                except (KeyError, ValueError):
                    row.append("-")
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def per_language_table_markdown(data: LeaderboardData, direction: str,
                                metric: str = "chrf") -> str:
    """Per-language score table with the best score per row flagged in bold."""
    data.validate_consistency()
    models = [m for m in data.models() if direction in data.scores[m]]
    lines = ["| Code | Language | " + " | ".join(models) + " |",
             "|" + "---|" * (len(models) + 2)]
    for lang in data.languages():
        values = {m: data.scores[m][direction][lang][metric] for m in models}
        best = max(values.values())
        row = [lang, data.language_names.get(lang, lang)]
        for m in models:
            cell = f"{values[m]:.3f}"
            if values[m] == best:
                cell = f"**{cell}**"
            row.append(cell)
        lines.append("| " + " | ".join(row) + " |")
    means = [f"**{data.mean(m, direction, metric):.3f}**" for m in models]
    lines.append("| | Mean | " + " | ".join(means) + " |")
    return "\n".join(lines) + "\n"


def bidirectional_chart_csv(data: LeaderboardData, metric: str = "chrf") -> str:
    """CSV of mean bidirectional score per language per model (chart data)."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["language", "model", f"mean_bidirectional_{metric}"])
    for lang in data.languages():
        for model in data.models():
            writer.writerow([lang, model, f"{data.bidirectional_mean(model, lang, metric):.6f}"])
    return out.getvalue()


def make_leaderboard(data: LeaderboardData, winner_models: list[str] | None = None) -> dict:
    """Render every leaderboard artifact from a populated score board."""
    data.validate_consistency()
    artifacts = {
        "mean_table": mean_table_markdown(data),
        "winner_counts": winner_counts(data, winner_models),
    }
    for direction in (XX_TO_ENG, ENG_TO_XX):
        if any(direction in d for d in data.scores.values()):
            artifacts[f"per_language_{direction}"] = per_language_table_markdown(data, direction)
    try:
        artifacts["chart_csv"] = bidirectional_chart_csv(data)
    except KeyError:
        pass  # chart needs both directions
    return artifacts
