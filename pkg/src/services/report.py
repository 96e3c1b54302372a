import glob
import os
from typing import Dict, List, Sequence, Tuple

import pandas as pd
import plotly.graph_objects as go

from src.models.experiment import VARIANT_ORDER, Algorithm, RunRecord
from src.models.game_spec import VariantName

NA = "NA"
ROW_LABELS = {
    VariantName.BASE: "Base",
    VariantName.MOD_POSITION: "Mod-Position",
    VariantName.MOD_COLORSIZE: "Mod-ColorSize",
    VariantName.MOD_IMAGE: "Mod-Image",
}
ROWS = ("Random",) + tuple(ROW_LABELS[v] for v in VARIANT_ORDER)
COLUMN_LABELS = {Algorithm.DQN: "DQN", Algorithm.QLEARN: "Ours"}


def _cell_value(record: RunRecord) -> str:
    if record.skipped:
        return NA
    if record.final is None:
        return ""
    return f"{record.final.mean_normalized:.2f}"


def emit_table(records: Sequence[RunRecord]) -> Tuple[pd.DataFrame, str]:
    """Normalized-score table: one row per variant plus Random, a DQN and an Ours column per game."""
    games: List[str] = []
    for record in records:
        if record.config.game not in games:
            games.append(record.config.game)
    columns = [f"{game} {label}" for game in games for label in COLUMN_LABELS.values()]
    cells: Dict[Tuple[str, str], str] = {}
    for record in records:
        cfg = record.config
        if cfg.algorithm is Algorithm.RANDOM:
            for label in COLUMN_LABELS.values():
                cells[("Random", f"{cfg.game} {label}")] = _cell_value(record)
        else:
            cells[(ROW_LABELS[cfg.variant], f"{cfg.game} {COLUMN_LABELS[cfg.algorithm]}")] = _cell_value(record)
    rows = [row for row in ROWS if any(r == row for r, _ in cells)]
    table = pd.DataFrame(
        [[cells.get((row, column), "") for column in columns] for row in rows],
        index=pd.Index(rows, name="variant"),
        columns=columns,
    )
    text = table.to_string() if rows else "variant " + " ".join(columns)
    return table, text


def table_fragment(record: RunRecord) -> pd.DataFrame:
    cfg = record.config
    final = record.final
    return pd.DataFrame([{
        "game": cfg.game,
        "variant": cfg.variant.value,
        "algorithm": cfg.algorithm.value,
        "mean_score": final.mean_score if final and not record.skipped else None,
        "mean_normalized": final.mean_normalized if final and not record.skipped else None,
        "status": NA if record.skipped else "ok",
    }])


def emit_curves(record: RunRecord) -> pd.DataFrame:
    """One row per evaluation point: epoch, mean normalized score, each training seed, novel-state share."""
    seed_columns = [f"seed_{s}" for s in record.config.seeds]
    rows = []
    for point in record.points:
        row = {"epoch": point.epoch, "mean_normalized": point.mean_normalized}
        row.update({column: value for column, value in zip(seed_columns, point.per_seed)})
        row["novel_state_fraction"] = point.novel_state_fraction
        rows.append(row)
    return pd.DataFrame(rows, columns=["epoch", "mean_normalized", *seed_columns, "novel_state_fraction"])


def write_table(records: Sequence[RunRecord], output_dir: str) -> str:
    table, text = emit_table(records)
    os.makedirs(output_dir, exist_ok=True)
    table.to_csv(os.path.join(output_dir, "table.csv"))
    with open(os.path.join(output_dir, "table.txt"), "w") as f:
        f.write(text + "\n")
    return text


def load_results(output_root: str) -> Tuple[pd.DataFrame, Dict[str, pd.DataFrame]]:
    """Score table and per-cell curves of a finished output directory."""
    table_path = os.path.join(output_root, "table.csv")
    table = pd.read_csv(table_path, index_col=0, dtype=str, keep_default_na=False) if os.path.exists(table_path) \
        else pd.DataFrame()
    curves = {}
    for path in sorted(glob.glob(os.path.join(output_root, "*", "curve.csv"))):
        frame = pd.read_csv(path)
        if not frame.empty:
            curves[os.path.basename(os.path.dirname(path))] = frame
    return table, curves


def curve_figure(curves: Dict[str, pd.DataFrame], title: str = "Normalized score per epoch") -> go.Figure:
    fig = go.Figure()
    for name, frame in curves.items():
        fig.add_trace(go.Scatter(x=frame["epoch"], y=frame["mean_normalized"], mode="lines+markers", name=name))
    fig.update_layout(title=title, xaxis_title="Epoch", yaxis_title="Normalized score", height=450)
    return fig


def novelty_figure(curves: Dict[str, pd.DataFrame]) -> go.Figure:
    fig = go.Figure()
    for name, frame in curves.items():
        fig.add_trace(go.Bar(x=[name], y=[frame["novel_state_fraction"].iloc[-1]], name=name))
    fig.update_layout(title="Evaluation steps in untrained states", yaxis_title="Fraction", showlegend=False)
    return fig
