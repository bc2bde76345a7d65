"""Dependence-parameter estimation over a duration grid, with trimming and
a seeded Monte Carlo replication harness.

At each duration grid point the kernel surface estimate yields a level
pi_hat and the curvature ratio R = d2pi_hat / (dpi_hat_1 * dpi_hat_2); the
copula parameter solving the generator curvature identity at (pi_hat, R)
is the pointwise estimate theta_hat(t).  The reported estimator averages
the pointwise values over grid points inside a trimming window, skipping
points where the surface estimate is unusable (empty kernel neighborhood,
level outside (0, 1), nonfinite ratio, out-of-domain parameter, or no root).

Monte Carlo replicates are independent jobs with derived seeds; aggregation
is keyed by replicate index, so summaries are bitwise independent of worker
count and scheduling.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .copula import CopulaFamily, NoRootError, theta_from_ratio
from .data import Sample
from .dgp import DgpConfig, oracle_surface, simulate
from .kernel import EmptyNeighborhoodError, KernelSpec, SurfaceEstimate, estimate_surface_grid

__all__ = [
    "AllPointsExcludedError",
    "GridSpec",
    "McSummary",
    "ThetaSeries",
    "default_trim_from_series",
    "monte_carlo",
    "oracle_surface_estimates",
    "replicate_theta_series",
    "summarize_replicates",
    "theta_series",
    "trim_series",
    "write_mc_replicates_csv",
    "write_theta_series_csv",
]

_SOLVABLE_FAMILIES = (CopulaFamily.CLAYTON, CopulaFamily.GUMBEL, CopulaFamily.FRANK)


class AllPointsExcludedError(RuntimeError):
    """No usable grid point survived definedness and trimming."""


@dataclass(frozen=True)
class GridSpec:
    """Duration grid, covariate evaluation point, and trimming window.

    ``t_grid=None`` resolves per sample to ``n_points`` equally spaced
    durations between the 0.5th and 99.5th empirical percentiles of the
    observed durations (extreme quantiles carry no kernel mass).
    ``z_eval=None`` resolves to the sample mean covariate vector.  The trim
    window defaults to no trimming.
    """

    t_grid: tuple[float, ...] | None = None
    z_eval: tuple[float, ...] | None = None
    trim_lo: float = -math.inf
    trim_hi: float = math.inf
    n_points: int = 500

    def __post_init__(self) -> None:
        if self.t_grid is not None:
            tg = tuple(float(t) for t in self.t_grid)
            if len(tg) == 0:
                raise ValueError("t_grid must be nonempty")
            if not all(math.isfinite(t) for t in tg):
                raise ValueError("t_grid must be finite")
            if not all(a < b for a, b in zip(tg, tg[1:])):
                raise ValueError("t_grid must be strictly increasing")
            object.__setattr__(self, "t_grid", tg)
        if self.z_eval is not None:
            ze = tuple(float(v) for v in self.z_eval)
            if not all(math.isfinite(v) for v in ze):
                raise ValueError("z_eval must be finite")
            object.__setattr__(self, "z_eval", ze)
        if math.isnan(self.trim_lo) or math.isnan(self.trim_hi):
            raise ValueError("trim bounds must not be NaN")
        if not self.trim_lo < self.trim_hi:
            raise ValueError(
                f"trim_lo must be below trim_hi, got {self.trim_lo!r} >= {self.trim_hi!r}"
            )
        if not isinstance(self.n_points, int) or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points!r}")

    def resolve(self, sample: Sample | None) -> tuple[np.ndarray, np.ndarray]:
        """Concrete (t_grid, z_eval) for a sample; sample may be None only
        when both are explicit."""
        if self.t_grid is not None:
            t = np.asarray(self.t_grid, dtype=float)
        else:
            if sample is None:
                raise ValueError("default t_grid needs a sample to take percentiles of")
            lo, hi = np.percentile(sample.t, (0.5, 99.5))
            if not lo < hi:
                raise ValueError("degenerate duration range; supply t_grid explicitly")
            t = np.linspace(lo, hi, self.n_points)
        if self.z_eval is not None:
            z = np.asarray(self.z_eval, dtype=float)
        else:
            if sample is None:
                raise ValueError("default z_eval needs a sample to average")
            z = sample.mean_covariates()
        return t, z


@dataclass(frozen=True)
class ThetaSeries:
    """Pointwise parameter estimates along the duration grid.

    ``theta_pointwise`` holds the solved value where one exists (NaN where
    the surface gave nothing to solve), ``defined`` marks points whose
    solution exists and lies inside the family domain, and ``included``
    additionally applies the trim window; ``theta_hat`` is the arithmetic
    mean of the included values.  ``iterations`` and ``near_independence``
    are root-solver diagnostics (zero/False for closed-form families).
    """

    t: np.ndarray
    theta_pointwise: np.ndarray
    defined: np.ndarray
    included: np.ndarray
    iterations: np.ndarray
    near_independence: np.ndarray
    theta_hat: float
    n_included: int
    trim_lo: float
    trim_hi: float

    def __post_init__(self) -> None:
        for arr in (
            self.t,
            self.theta_pointwise,
            self.defined,
            self.included,
            self.iterations,
            self.near_independence,
        ):
            arr.setflags(write=False)


def oracle_surface_estimates(config: DgpConfig, t_grid, z) -> list[SurfaceEstimate]:
    """Exact Clayton surfaces packaged like kernel output (bypass for tests
    and the oracle-check command); the kernel-mass diagnostic is set to 1."""
    return [
        SurfaceEstimate(
            pi_hat=o.pi,
            dpi_hat=(o.dpi_dz1, o.dpi_dz2),
            d2pi_hat=o.d2pi_dz1dz2,
            b_at_z=1.0,
        )
        for o in (oracle_surface(config, float(t), z) for t in np.asarray(t_grid, dtype=float))
    ]


def _solve_pointwise(t_grid, estimates, family):
    n = len(t_grid)
    theta = np.full(n, np.nan)
    defined = np.zeros(n, dtype=bool)
    iterations = np.zeros(n, dtype=np.int64)
    near0 = np.zeros(n, dtype=bool)
    for i, est in enumerate(estimates):
        if est is None:
            continue
        pi = est.pi_hat
        if not (0.0 < pi < 1.0):
            continue
        denom = est.dpi_hat[0] * est.dpi_hat[1]
        if denom == 0.0 or not math.isfinite(denom):
            continue
        ratio = est.d2pi_hat / denom
        if not math.isfinite(ratio):
            continue
        try:
            sol = theta_from_ratio(family, pi, ratio)
        except NoRootError:
            continue
        theta[i] = sol.theta
        iterations[i] = sol.iterations
        near0[i] = sol.near_independence
        defined[i] = sol.admissible  # out-of-domain values stay visible, not averaged
    return theta, defined, iterations, near0


def _assemble(t, theta, defined, iterations, near0, trim_lo, trim_hi) -> ThetaSeries:
    included = defined & (t >= trim_lo) & (t <= trim_hi)
    n_included = int(np.count_nonzero(included))
    if n_included == 0:
        raise AllPointsExcludedError(
            f"no grid point is both defined ({int(np.count_nonzero(defined))} defined)"
            f" and inside the trim window [{trim_lo}, {trim_hi}]"
        )
    theta_hat = float(np.mean(theta[included]))
    return ThetaSeries(
        t=t.copy(),
        theta_pointwise=theta,
        defined=defined,
        included=included,
        iterations=iterations,
        near_independence=near0,
        theta_hat=theta_hat,
        n_included=n_included,
        trim_lo=float(trim_lo),
        trim_hi=float(trim_hi),
    )


def theta_series(
    sample: Sample | None,
    spec: KernelSpec | None,
    grid: GridSpec,
    family: CopulaFamily,
    *,
    surfaces: list[SurfaceEstimate] | None = None,
) -> ThetaSeries:
    """Pointwise theta estimates along the duration grid, plus their
    trimmed average.

    With ``surfaces`` given (one SurfaceEstimate per grid point, e.g. from
    oracle_surface_estimates), the kernel step is bypassed and neither
    sample nor spec is touched beyond grid resolution.  Raises
    AllPointsExcludedError when nothing survives definedness and trimming.
    """
    if family not in _SOLVABLE_FAMILIES:
        raise ValueError(f"family {family!r} has no dependence parameter to estimate")
    t, z = grid.resolve(sample)
    if surfaces is None:
        if sample is None or spec is None:
            raise ValueError("kernel estimation needs both a sample and a kernel spec")
        try:
            estimates: list[SurfaceEstimate | None] = list(
                estimate_surface_grid(sample, spec, t, z)
            )
        except EmptyNeighborhoodError:
            estimates = [None] * len(t)  # no kernel mass at z: whole curve undefined
    else:
        if len(surfaces) != len(t):
            raise ValueError(
                f"got {len(surfaces)} surfaces for {len(t)} grid points"
            )
        estimates = list(surfaces)
    theta, defined, iterations, near0 = _solve_pointwise(t, estimates, family)
    return _assemble(t, theta, defined, iterations, near0, grid.trim_lo, grid.trim_hi)


def trim_series(series: ThetaSeries, trim_lo: float, trim_hi: float) -> ThetaSeries:
    """Re-average an existing series under a different trim window.

    Pointwise values, definedness and diagnostics are reused unchanged;
    only the inclusion mask and the average move.
    """
    if not trim_lo < trim_hi:
        raise ValueError(f"trim_lo must be below trim_hi, got {trim_lo!r} >= {trim_hi!r}")
    return _assemble(
        series.t,
        series.theta_pointwise,
        series.defined,
        series.iterations,
        series.near_independence,
        trim_lo,
        trim_hi,
    )


def default_trim_from_series(series: ThetaSeries, stability_window: int = 25) -> tuple[float, float]:
    """Suggest a trim window where the pointwise series is locally stable.

    Slides a centered window of ``stability_window`` defined points and
    keeps those whose median absolute deviation stays within 3x the
    grid-wide median of such deviations; the widest contiguous run of
    qualifying windows becomes the suggestion.  Falls back to the full
    grid range (with a warning) when nothing qualifies.  A suggestion is
    never applied silently; callers opt in.
    """
    if not isinstance(stability_window, int) or stability_window < 3:
        raise ValueError(f"stability_window must be an integer >= 3, got {stability_window!r}")
    full = (float(series.t[0]), float(series.t[-1]))
    t = series.t[series.defined]
    th = series.theta_pointwise[series.defined]
    w = stability_window
    if t.size < w:
        warnings.warn(
            "too few defined points for a stability window; using the full range",
            stacklevel=2,
        )
        return full
    n_win = t.size - w + 1
    mads = np.empty(n_win)
    for i in range(n_win):
        seg = th[i : i + w]
        mads[i] = np.median(np.abs(seg - np.median(seg)))
    threshold = 3.0 * float(np.median(mads))
    ok = mads <= threshold  # <=: a constant series (all-zero deviations) keeps everything
    if not ok.any():
        warnings.warn("no stable window found; using the full range", stacklevel=2)
        return full
    # widest contiguous run of qualifying windows
    best_start, best_len = 0, 0
    run_start = None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and run_start is None:
            run_start = i
        elif not flag and run_start is not None:
            if i - run_start > best_len:
                best_start, best_len = run_start, i - run_start
            run_start = None
    return float(t[best_start]), float(t[best_start + best_len - 1 + w - 1])


# ----------------------------------------------------------------------
# Monte Carlo harness
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class McSummary:
    """Replicate-level estimates with mean and nearest-rank percentiles.

    ``replicate_thetas`` is NaN at failed replicates; ``mean``/``p05``/
    ``p95`` summarize the successes.  ``config_echo`` records the full run
    configuration the summary was computed under.
    """

    replicate_thetas: np.ndarray
    n_included: np.ndarray
    failed: np.ndarray
    mean: float
    p05: float
    p95: float
    n_failed: int
    config_echo: dict

    def __post_init__(self) -> None:
        for arr in (self.replicate_thetas, self.n_included, self.failed):
            arr.setflags(write=False)


def _nearest_rank(sorted_values: np.ndarray, percent: float) -> float:
    k = max(1, math.ceil(percent / 100.0 * sorted_values.size))
    return float(sorted_values[k - 1])


def _untrimmed(grid: GridSpec) -> GridSpec:
    return replace(grid, trim_lo=-math.inf, trim_hi=math.inf)


def _replicate_job(args) -> ThetaSeries | None:
    dgp, spec, grid, family = args
    sample = simulate(dgp)
    try:
        return theta_series(sample, spec, grid, family)
    except AllPointsExcludedError:
        return None


def replicate_theta_series(
    dgp: DgpConfig,
    spec: KernelSpec,
    grid: GridSpec,
    family: CopulaFamily,
    replicates: int,
    base_seed: int | None = None,
    *,
    workers: int = 1,
) -> list[ThetaSeries | None]:
    """Untrimmed theta series for ``replicates`` independent samples.

    Replicate r uses seed (base_seed + r) mod 2**64, so the result list is a
    pure function of the arguments; trimming is deliberately deferred so one
    set of replicates can be summarized under several windows.  ``workers``
    > 1 distributes replicates over processes without changing any value.
    """
    if not isinstance(replicates, int) or replicates < 1:
        raise ValueError(f"replicates must be a positive integer, got {replicates!r}")
    if not isinstance(workers, int) or workers < 1:
        raise ValueError(f"workers must be a positive integer, got {workers!r}")
    base = dgp.seed if base_seed is None else int(base_seed)
    grid = _untrimmed(grid)
    jobs = [
        (replace(dgp, seed=(base + r) % 2**64), spec, grid, family)
        for r in range(replicates)
    ]
    if workers == 1:
        return [_replicate_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replicate_job, jobs))


def summarize_replicates(
    series_list: list[ThetaSeries | None],
    trim_lo: float,
    trim_hi: float,
    config_echo: dict | None = None,
) -> McSummary:
    """Trim each replicate series, then aggregate the replicate averages.

    A replicate fails (recorded, never raised) when it produced no series
    at all or trimming empties its mask; the summary raises
    AllPointsExcludedError only when every replicate failed.
    """
    n = len(series_list)
    if n == 0:
        raise ValueError("need at least one replicate series")
    thetas = np.full(n, np.nan)
    n_included = np.zeros(n, dtype=np.int64)
    failed = np.zeros(n, dtype=bool)
    for r, series in enumerate(series_list):
        if series is None:
            failed[r] = True
            continue
        try:
            trimmed = trim_series(series, trim_lo, trim_hi)
        except AllPointsExcludedError:
            failed[r] = True
            continue
        thetas[r] = trimmed.theta_hat
        n_included[r] = trimmed.n_included
    ok = np.sort(thetas[~failed])
    if ok.size == 0:
        raise AllPointsExcludedError("every replicate failed under this trim window")
    echo = dict(config_echo or {})
    echo["trim_lo"] = float(trim_lo)
    echo["trim_hi"] = float(trim_hi)
    return McSummary(
        replicate_thetas=thetas,
        n_included=n_included,
        failed=failed,
        mean=float(np.mean(ok)),
        p05=_nearest_rank(ok, 5.0),
        p95=_nearest_rank(ok, 95.0),
        n_failed=int(np.count_nonzero(failed)),
        config_echo=echo,
    )


def _config_echo(dgp, spec, grid, family, replicates, base_seed) -> dict:
    return {
        "family": family.value,
        "theta": dgp.copula.theta,
        "n": dgp.n,
        "base_seed": int(base_seed),
        "replicates": int(replicates),
        "bandwidths": tuple(spec.bandwidths),
        "kernel": spec.kernel.value,
        "grid_points": grid.n_points if grid.t_grid is None else len(grid.t_grid),
        "covariate_scale": dgp.covariate_scale,
        "scale_is_sd": dgp.scale_is_sd,
        "marginals": tuple((m.lam, m.eta, m.beta) for m in dgp.marginals),
    }


def monte_carlo(
    dgp: DgpConfig,
    spec: KernelSpec,
    grid: GridSpec,
    family: CopulaFamily,
    replicates: int,
    base_seed: int | None = None,
    *,
    workers: int = 1,
) -> McSummary:
    """Simulate-and-estimate ``replicates`` times and summarize under the
    grid's trim window.

    Deterministic given the configuration and base seed (default: the DGP
    seed); independent of ``workers``.
    """
    base = dgp.seed if base_seed is None else int(base_seed)
    series = replicate_theta_series(
        dgp, spec, grid, family, replicates, base, workers=workers
    )
    echo = _config_echo(dgp, spec, grid, family, replicates, base)
    return summarize_replicates(series, grid.trim_lo, grid.trim_hi, echo)


# ----------------------------------------------------------------------
# CSV emitters
# ----------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_theta_series_csv(series: ThetaSeries, path) -> None:
    """Write ``t,theta,included`` rows; theta is NaN at undefined points."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "theta", "included"])
        for i in range(series.t.size):
            writer.writerow(
                [
                    _fmt(series.t[i]),
                    _fmt(series.theta_pointwise[i]),
                    str(int(series.included[i])),
                ]
            )


def write_mc_replicates_csv(summary: McSummary, path) -> None:
    """Write ``replicate,theta_hat,n_included,failed`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replicate", "theta_hat", "n_included", "failed"])
        for r in range(summary.replicate_thetas.size):
            writer.writerow(
                [
                    str(r),
                    _fmt(summary.replicate_thetas[r]),
                    str(int(summary.n_included[r])),
                    str(int(summary.failed[r])),
                ]
            )
