import hashlib
import json
import logging
import os
import platform
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12e"


class QRCHelpers:
    """Helper functions for logging, hashing and artifact persistence"""

    @staticmethod
    def setup_logging(log_level: str = "INFO", log_file: Optional[str] = "qrc_chaos.log"):
        """Setup logging configuration"""
        handlers: List[logging.Handler] = [logging.StreamHandler()]
        if log_file:
            handlers.append(logging.FileHandler(log_file))
        logging.basicConfig(
            level=getattr(logging, log_level.upper()),
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            handlers=handlers,
            force=True,
        )

        # Set specific loggers
        logging.getLogger("matplotlib").setLevel(logging.WARNING)
        logging.getLogger("joblib").setLevel(logging.WARNING)

        logger.info(f"Logging configured: level={log_level}, file={log_file}")

    @staticmethod
    def create_directories(out_dir: str | Path) -> Path:
        """Create the output directory for a run"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Output directory: {out_dir}")
        return out_dir

    @staticmethod
    def hash_arrays(*arrays: np.ndarray) -> str:
        """SHA-256 over the raw bytes (dtype, shape and contents) of arrays"""
        digest = hashlib.sha256()
        for array in arrays:
            array = np.ascontiguousarray(array)
            digest.update(str(array.dtype).encode())
            digest.update(str(array.shape).encode())
            digest.update(array.tobytes())
        return digest.hexdigest()

    @staticmethod
    def hash_text(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @staticmethod
    def hash_file(path: str | Path) -> str:
        digest = hashlib.sha256()
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(65536), b""):
                digest.update(block)
        return digest.hexdigest()

    @staticmethod
    def save_csv(frame: pd.DataFrame, path: str | Path) -> Path:
        """Write a result table with a fixed float format so reruns are byte-identical"""
        path = Path(path)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"Saved {len(frame)} rows to {path}")
        return path

    @staticmethod
    def save_manifest(manifest: Dict[str, Any], path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        logger.info(f"Saved run manifest to {path}")
        return path

    @staticmethod
    def _save_figure(fig, path: str | Path) -> Path:
        path = Path(path)
        plt.rcParams["svg.hashsalt"] = "qrc_chaos"
        fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
        plt.close(fig)
        logger.info(f"Saved plot to {path}")
        return path

    @staticmethod
    def save_line_plot(
        x: Sequence[float],
        series: Dict[str, Sequence[float]],
        path: str | Path,
        xlabel: str,
        ylabel: str,
        title: str = "",
        logy: bool = False,
        shade_positive: Optional[Sequence[float]] = None,
    ) -> Path:
        """Line plot of several named series; optional grey shading where ``shade_positive`` > 0"""
        fig, ax = plt.subplots(figsize=(8, 5))
        for label, values in series.items():
            ax.plot(x, values, label=label, linewidth=1.2)
        if shade_positive is not None:
            x_arr = np.asarray(x)
            ax.fill_between(
                x_arr, 0, 1, where=np.asarray(shade_positive) > 0,
                color="grey", alpha=0.2, transform=ax.get_xaxis_transform(), step="mid",
            )
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        return QRCHelpers._save_figure(fig, path)

    @staticmethod
    def save_scatter_plot(
        points: Dict[str, tuple],
        path: str | Path,
        xlabel: str,
        ylabel: str,
        title: str = "",
    ) -> Path:
        """Scatter of named (x, y) point clouds, e.g. true vs predicted bifurcation samples"""
        fig, ax = plt.subplots(figsize=(8, 5))
        for (label, (xs, ys)), color in zip(points.items(), ["tab:red", "tab:blue", "k"]):
            ax.scatter(xs, ys, s=2, label=label, color=color)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(markerscale=4)
        return QRCHelpers._save_figure(fig, path)

    @staticmethod
    def save_heatmap(
        matrix: np.ndarray,
        row_labels: Sequence,
        col_labels: Sequence,
        path: str | Path,
        xlabel: str,
        ylabel: str,
        title: str = "",
    ) -> Path:
        fig, ax = plt.subplots(figsize=(7, 5))
        sns.heatmap(
            pd.DataFrame(matrix, index=list(row_labels), columns=list(col_labels)),
            annot=True, fmt=".2e", cmap="viridis_r", ax=ax, cbar_kws={"label": "RMSE"},
        )
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        return QRCHelpers._save_figure(fig, path)

    @staticmethod
    def save_histogram_plot(
        counts: np.ndarray,
        edges: np.ndarray,
        fitted: np.ndarray,
        path: str | Path,
        title: str = "",
    ) -> Path:
        """Bar histogram with a fitted probability curve scaled to counts"""
        fig, ax = plt.subplots(figsize=(8, 5))
        widths = np.diff(edges)
        ax.bar(edges[:-1], counts, width=widths, align="edge", alpha=0.7, label="samples")
        centers = edges[:-1] + widths / 2
        ax.plot(centers, fitted, color="tab:red", label="Poisson fit")
        ax.set_xlabel("RMSE")
        ax.set_ylabel("count")
        if title:
            ax.set_title(title)
        ax.legend()
        return QRCHelpers._save_figure(fig, path)

    @staticmethod
    def get_system_info() -> Dict[str, Any]:
        """Get library versions for the run manifest"""
        import joblib
        import scipy
        import sklearn

        return {
            "platform": platform.platform(),
            "python_version": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "scikit-learn": sklearn.__version__,
            "joblib": joblib.__version__,
            "cpu_count": os.cpu_count(),
        }
