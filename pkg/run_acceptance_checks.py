#!/usr/bin/env python3
"""
Acceptance runner for the QRC chaotic-map toolkit
Runs the desk-scale reproduction checks (Lyapunov exponents, bifurcation sweep,
LLE/RMSE correlation, architecture grid, dephasing robustness, ensemble, reproducibility)

Unit tests live in qrc_chaos/tests and run with pytest; the checks here take minutes.
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path
from typing import Dict

import numpy as np

from qrc_chaos.config.settings import ExperimentConfig, settings
from qrc_chaos.schemas.chaos import MapParams
from qrc_chaos.schemas.common import MapKind, Region
from qrc_chaos.services import chaos_maps, experiments
from qrc_chaos.services.statistics import count_clusters
from qrc_chaos.utils.helpers import QRCHelpers


_SWEEPS: Dict[MapKind, object] = {}


def _check(label: str, ok: bool, detail: str) -> bool:
    print(f"  {'✅' if ok else '❌'} {label}: {detail}")
    return ok


def _logistic_sweep(n_jobs: int):
    if MapKind.LOGISTIC not in _SWEEPS:
        grid = np.linspace(2.5, 4.0, 100).tolist()
        _SWEEPS[MapKind.LOGISTIC] = experiments.bifurcation_sweep(ExperimentConfig(), grid, n_jobs=n_jobs)
    return _SWEEPS[MapKind.LOGISTIC]


def _henon_sweep(n_jobs: int):
    if MapKind.HENON not in _SWEEPS:
        grid = np.linspace(*experiments.HENON_SWEEP_RANGE, 100).tolist()
        _SWEEPS[MapKind.HENON] = experiments.bifurcation_sweep(ExperimentConfig(map_kind="henon"), grid, n_jobs=n_jobs)
    return _SWEEPS[MapKind.HENON]


def _nearest_point(sweep, control: float):
    return min(sweep.points, key=lambda p: abs(p.control - control))


def run_lle_checks(n_jobs: int) -> bool:
    """Largest Lyapunov exponents against their closed-form / reference values"""
    print("\n📈 Running Lyapunov Exponent Checks...")
    print("=" * 50)

    results = []
    chaotic = chaos_maps.largest_lyapunov(MapParams(kind="logistic", r=4.0), n_iter=4_000_000, seed=1)
    results.append(_check("logistic r=4", abs(chaotic.lambda_star - np.log(2.0)) <= 1e-3, f"{chaotic.lambda_star:.5f}"))

    fixed = chaos_maps.largest_lyapunov(MapParams(kind="logistic", r=2.5), seed=1)
    results.append(_check("logistic r=2.5", abs(fixed.lambda_star + np.log(2.0)) <= 1e-3, f"{fixed.lambda_star:.5f}"))

    henon = chaos_maps.largest_lyapunov(MapParams(kind="henon", a=1.4, b=0.3), n_iter=1_000_000, seed=1)
    results.append(_check("henon (1.4, 0.3)", abs(henon.lambda_star - 0.419) <= 0.01, f"{henon.lambda_star:.5f}"))
    return all(results)


def run_bifurcation_checks(n_jobs: int) -> bool:
    """Logistic sweep over r in [2.5, 4] with the default architecture"""
    print("\n🌿 Running Bifurcation Sweep Checks...")
    print("=" * 50)

    sweep = _logistic_sweep(n_jobs)
    fixed = _nearest_point(sweep, 2.5)
    period_two = _nearest_point(sweep, 3.2)
    chaotic = _nearest_point(sweep, 3.75)

    results = [
        _check("r=2.5 tail spread", np.ptp(fixed.predicted_tail) < 1e-3, f"{np.ptp(fixed.predicted_tail):.2e}"),
        _check(
            f"r={period_two.control:.4f} clusters",
            count_clusters(period_two.predicted_tail, tol=1e-2) == 2,
            str(count_clusters(period_two.predicted_tail, tol=1e-2)),
        ),
        _check(f"r={chaotic.control:.4f} RMSE", chaotic.rmse <= 5e-3, f"{chaotic.rmse:.3e}"),
    ]
    averages = experiments.regime_averages(sweep)
    print(f"  ℹ️  regime averages: chaotic={averages['chaotic']:.3e}, regular={averages['regular']:.3e}")
    return all(results)


def run_correlation_checks(n_jobs: int) -> bool:
    """Spearman correlation between LLE and RMSE over chaotic sweep points"""
    print("\n🔗 Running LLE / RMSE Correlation Checks...")
    print("=" * 50)

    logistic = experiments.lle_rmse_correlation(_logistic_sweep(n_jobs), Region.CHAOTIC_ONLY)
    henon = experiments.lle_rmse_correlation(_henon_sweep(n_jobs), Region.CHAOTIC_ONLY)
    return all([
        _check("logistic r_s", logistic >= 0.8, f"{logistic:.3f}"),
        _check("henon r_s", henon >= 0.6, f"{henon:.3f}"),
    ])


def run_grid_checks(n_jobs: int) -> bool:
    """Layer / repetition argmin positions"""
    print("\n🧮 Running Architecture Grid Checks...")
    print("=" * 50)

    base = ExperimentConfig(r=3.75)
    next_step = experiments.hyperparameter_grid(base, n_jobs=n_jobs)
    skip_step = experiments.hyperparameter_grid(base.model_copy(update={"gap": 1}), n_jobs=n_jobs)
    henon = experiments.hyperparameter_grid(ExperimentConfig(map_kind="henon", a=1.35), n_jobs=n_jobs)

    return all([
        _check("logistic gap=0 argmin", next_step.argmin == (2, 2), str(next_step.argmin)),
        _check("logistic gap=1 n_rep", skip_step.argmin[1] == 4, str(skip_step.argmin)),
        _check("henon gap=0 argmin", henon.argmin == (1, 2), str(henon.argmin)),
    ])


def run_noise_checks(n_jobs: int) -> bool:
    """In-situ training under dephasing against a clean-trained readout"""
    print("\n🌫️  Running Noise Robustness Checks...")
    print("=" * 50)

    results = []
    for cfg in (ExperimentConfig(r=3.75), ExperimentConfig(map_kind="henon", a=1.35)):
        noise = experiments.noise_robustness(cfg, [0.0, 0.1], n_jobs=n_jobs)
        name = cfg.map_kind.value
        clean, insitu = noise.rmse_clean_trained, noise.rmse_insitu_trained
        results.append(_check(f"{name} gamma=0 agreement", abs(clean[0] - insitu[0]) <= 1e-9, f"{abs(clean[0] - insitu[0]):.1e}"))
        results.append(_check(f"{name} gamma=0.1 in-situ gain", insitu[1] <= 0.1 * clean[1], f"{insitu[1]:.3e} vs {clean[1]:.3e}"))
    return all(results)


def run_ensemble_checks(n_jobs: int, full: bool = False) -> bool:
    """Random-Hamiltonian ensemble histogram shape"""
    print("\n🎲 Running Hamiltonian Ensemble Checks...")
    print("=" * 50)

    n_samples = 1000 if full else experiments.DEFAULT_ENSEMBLE_SAMPLES
    report = experiments.hamiltonian_ensemble(ExperimentConfig(r=3.75), n_samples=n_samples, n_jobs=n_jobs)
    rmses = report.rmses
    lower_half = np.mean(rmses <= rmses.min() + 0.5 * np.ptp(rmses))
    near_median = np.mean(rmses <= 2.0 * np.median(rmses))

    return all([
        _check("fraction in lower half of range", lower_half >= 0.8, f"{lower_half:.2f}"),
        _check("fraction within 2x median", near_median >= 0.8, f"{near_median:.2f}"),
        _check("Poisson fit recorded", np.isfinite(report.poisson_rate), f"rate={report.poisson_rate:.3f}"),
        _check("histogram total", int(report.histogram.sum()) == len(rmses), f"{int(report.histogram.sum())}"),
    ])


def run_reproducibility_checks(n_jobs: int) -> bool:
    """Rerunning a command yields byte-identical CSVs"""
    print("\n🔁 Running Reproducibility Checks...")
    print("=" * 50)

    from qrc_chaos.main import run_command

    results = []
    with tempfile.TemporaryDirectory() as tmp:
        for command in (["generate"], ["train", "--n-jobs", str(n_jobs)]):
            digests = []
            for run in ("first", "second"):
                out = Path(tmp) / run
                if run_command(command + ["--out", str(out)]) != 0:
                    return _check(command[0], False, "command failed")
                out_dir = out / command[0]
                digests.append({p.name: QRCHelpers.hash_file(p) for p in sorted(out_dir.glob("*.csv"))})
            results.append(_check(command[0], digests[0] == digests[1], f"{len(digests[0])} CSV file(s)"))
    return all(results)


def generate_check_report(results: Dict[str, bool], elapsed: float):
    print("\n" + "=" * 60)
    print("📋 ACCEPTANCE REPORT")
    print("=" * 60)
    for name, ok in results.items():
        print(f"{name:<25} {'✅ PASSED' if ok else '❌ FAILED'}")
    failed = sum(1 for ok in results.values() if not ok)
    print(f"\nTotal time: {elapsed / 60:.1f} min")
    if failed == 0:
        print("\n🎉 ALL ACCEPTANCE CHECKS PASSED!")
    else:
        print(f"\n⚠️  {failed} check group(s) failed. Please review the output above.")
    return failed == 0


def main():
    """Main acceptance runner"""
    parser = argparse.ArgumentParser(description="Run QRC acceptance checks")
    parser.add_argument(
        "--test-type",
        choices=["all", "lle", "bifurcation", "correlation", "grid", "noise", "ensemble", "reproducibility"],
        default="all",
        help="Group of checks to run",
    )
    parser.add_argument("--full", action="store_true", help="Full-scale ensemble (1000 reservoirs)")
    parser.add_argument("--n-jobs", type=int, default=settings.n_jobs, help="Parallel workers")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    args = parser.parse_args()

    QRCHelpers.setup_logging("INFO" if args.verbose else "WARNING", log_file=None)

    print("🚀 QRC Chaotic-Map Acceptance Suite")
    print("=" * 60)

    start = time.time()
    results = {}
    if args.test_type in ["all", "lle"]:
        results["Lyapunov exponents"] = run_lle_checks(args.n_jobs)
    if args.test_type in ["all", "bifurcation"]:
        results["Bifurcation sweep"] = run_bifurcation_checks(args.n_jobs)
    if args.test_type in ["all", "correlation"]:
        results["LLE/RMSE correlation"] = run_correlation_checks(args.n_jobs)
    if args.test_type in ["all", "grid"]:
        results["Architecture grid"] = run_grid_checks(args.n_jobs)
    if args.test_type in ["all", "noise"]:
        results["Noise robustness"] = run_noise_checks(args.n_jobs)
    if args.test_type in ["all", "ensemble"]:
        results["Hamiltonian ensemble"] = run_ensemble_checks(args.n_jobs, full=args.full)
    if args.test_type in ["all", "reproducibility"]:
        results["Reproducibility"] = run_reproducibility_checks(args.n_jobs)

    success = generate_check_report(results, time.time() - start)
    return 0 if success else 1


if __name__ == "__main__":
    sys.exit(main())
