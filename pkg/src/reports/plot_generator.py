"""
Plot emission: kernel-density overlays of evaluation distributions and
per-SNP 1 - e-value charts with the selection cutoff
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import yaml  # noqa: E402
from scipy import stats  # noqa: E402

from ..errors import DataValidationError  # noqa: E402
from ..exports.csv_exporter import (  # noqa: E402
    DISTRIBUTIONS_FILE, REPORT_FILE, evalue_columns, load_distributions, load_selection_report,
)

SUMMARY_FILE = "run_summary.yaml"
GRID_POINTS = 256
SVG_METADATA = {"Date": None}


def silverman_density(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian KDE with Silverman's bandwidth; a point mass becomes one grid spike"""
    values = np.asarray(values, dtype=float)
    if values.size > 1 and np.ptp(values) > 0:
        try:
            return stats.gaussian_kde(values, bw_method="silverman")(grid)
        except np.linalg.LinAlgError:
            pass
    density = np.zeros_like(grid)
    step = grid[1] - grid[0] if grid.size > 1 else 1.0
    density[int(np.argmin(np.abs(grid - values.mean())))] = 1.0 / step
    return density


def density_grid(samples: Sequence[np.ndarray], n_points: int = GRID_POINTS) -> np.ndarray:
    low = min(float(np.min(s)) for s in samples)
    high = max(float(np.max(s)) for s in samples)
    pad = 0.1 * (high - low) if high > low else 0.05
    return np.linspace(low - pad, high + pad, n_points)


class PlotGenerator:
    """Writes density CSV/SVG per s and the 1 - e-value chart"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        plt.rcParams["svg.hashsalt"] = "familial-evalues"

    def _save(self, figure, path: Path):
        figure.savefig(path, format="svg", metadata=SVG_METADATA)
        plt.close(figure)
        self.logger.debug(f"Wrote {path}")

    def density_table(self, frame: pd.DataFrame) -> pd.DataFrame:
        """Grid plus one density column per distribution, for one s"""
        labels = list(dict.fromkeys(frame["distribution"]))
        samples = {label: frame.loc[frame["distribution"] == label, "score"].to_numpy() for label in labels}
        grid = density_grid(list(samples.values()))
        table = {"grid": grid}
        for label in labels:
            table[label] = silverman_density(samples[label], grid)
        return pd.DataFrame(table)

    def plot_densities(self, table: pd.DataFrame, s: float, selected: Sequence[str], path: Path):
        figure, axis = plt.subplots(figsize=(7, 4.5))
        selected = set(selected)
        for label in table.columns[1:]:
            if label == "full":
                continue
            color = "tab:red" if label in selected else "0.6"
            axis.plot(table["grid"], table[label], color=color, linewidth=0.8)
        axis.plot(table["grid"], table["full"], color="black", linewidth=2.0, label="full model")
        axis.set_xlabel("evaluation score")
        axis.set_ylabel("density")
        axis.set_title(f"Bootstrap evaluation distributions, s = {s:g}")
        axis.legend(loc="upper left")
        figure.tight_layout()
        self._save(figure, path)

    def plot_evalues(self, report: pd.DataFrame, cutoff: Optional[float], q: float, path: Path):
        """1 - e-value per SNP by position; selected SNPs highlighted"""
        figure, axis = plt.subplots(figsize=(8, 4))
        positions = pd.to_numeric(report["position"], errors="coerce")
        x = positions.to_numpy() if positions.notna().all() and len(report) else np.arange(1, len(report) + 1)
        y = 1.0 - report[f"evalue_q{q:g}"].to_numpy(dtype=float)
        chosen = report["selected"].to_numpy(dtype=int) == 1

        axis.scatter(x[~chosen], y[~chosen], color="0.5", s=14, label="not selected")
        axis.scatter(x[chosen], y[chosen], color="tab:red", s=18, label="selected")
        if cutoff is not None:
            axis.axhline(1.0 - cutoff, color="black", linestyle="--", linewidth=1.0, label="cutoff")
        axis.set_xlabel("SNP position")
        axis.set_ylabel(f"1 - e-value (q = {q:g})")
        axis.legend(loc="upper right")
        figure.tight_layout()
        self._save(figure, path)

    def emit_plots(self, in_dir: Path, out_dir: Path) -> List[Path]:
        in_dir, out_dir = Path(in_dir), Path(out_dir)
        distributions_path = in_dir / DISTRIBUTIONS_FILE
        report_path = in_dir / REPORT_FILE
        if not report_path.exists():
            raise DataValidationError("No selection report found; run the select command first", file=str(report_path))
        if not distributions_path.exists():
            raise DataValidationError(
                "No evaluation distributions found; rerun select with --dump-distributions",
                file=str(distributions_path),
            )
        out_dir.mkdir(parents=True, exist_ok=True)

        report = load_selection_report(report_path)
        summary = self._load_summary(in_dir / SUMMARY_FILE)
        selected_ids = report.loc[report["selected"] == 1, "snp_id"].tolist()

        written = []
        distributions = load_distributions(distributions_path)
        for s, frame in distributions.groupby("s", sort=True):
            table = self.density_table(frame)
            csv_path = out_dir / f"density_s{s:g}.csv"
            table.to_csv(csv_path, index=False, float_format="%.10g", lineterminator="\n")
            svg_path = out_dir / f"density_s{s:g}.svg"
            self.plot_densities(table, s, selected_ids, svg_path)
            written.extend([csv_path, svg_path])

        q_levels = sorted(float(column[len("evalue_q"):]) for column in evalue_columns(report))
        q = q_levels[-1]
        thresholds = summary.get("thresholds", {})
        cutoff = thresholds.get(q, thresholds.get(str(q)))
        evalue_path = out_dir / "evalues.svg"
        self.plot_evalues(report, cutoff, q, evalue_path)
        written.append(evalue_path)

        self.logger.info(f"Wrote {len(written)} plot files to {out_dir}")
        return written

    def _load_summary(self, path: Path) -> Dict:
        if not path.exists():
            self.logger.warning(f"{path} not found; the e-value plot will have no cutoff line")
            return {}
        with open(path, "r") as f:
            return yaml.safe_load(f) or {}
