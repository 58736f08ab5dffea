"""Monte Carlo estimation of effective diffusivities in randomly oriented media.

The unit square/cube is split into ``N**dim`` sub-cells; every sub-cell gets
``T Q T^T`` with an independent Haar-uniform rotation ``T``.  Each sub-cell is
refined into ``refine**dim`` finite elements.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EffDiffError, TrialError
from .grid import StructuredGrid, TensorField
from .linalg import DEFAULT_TOL, SolverOptions
from .solver import EstimationBC, estimate_effective_diffusivity
from .tensors import rotate_tensor, sample_rotation_matrices, sym_tensor, trial_seed

log = logging.getLogger(__name__)

CSV_COLUMNS = ("trial_index", "seed", "d_eff", "mean", "std", "stderr")


@dataclass(frozen=True)
class McConfig:
    """Campaign parameters.

    ``mass_transfer=None`` selects ``M = 0.5 * d_ref / L`` with ``d_ref`` the
    geometric mean of ``q``.  ``refine`` is the number of elements per
    sub-cell edge.
    """

    dim: int
    n: int
    trials: int
    q: tuple
    master_seed: int = 0
    refine: int | None = None
    c0: float = 1.0
    c1: float = 0.0
    mass_transfer: float | None = None
    tol: float = DEFAULT_TOL
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.n < 1:
            raise ValueError("N must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        q = tuple(float(v) for v in self.q)
        if len(q) != self.dim or min(q) <= 0:
            raise ValueError(f"q needs {self.dim} positive diagonal entries")
        object.__setattr__(self, "q", q)
        if self.refine is None:
            object.__setattr__(self, "refine", 3)
        if self.refine < 1:
            raise ValueError("refine must be at least 1")
        if self.mass_transfer is None:
            d_ref = math.prod(q) ** (1.0 / self.dim)
            object.__setattr__(self, "mass_transfer", 0.5 * d_ref)
        if self.c0 == self.c1:
            raise ValueError("c0 and c1 must differ")

    @property
    def bc(self):
        return EstimationBC(self.c0, self.c1, self.mass_transfer)

    @property
    def solver_options(self):
        return SolverOptions(tol=self.tol, preconditioner=self.preconditioner)


@dataclass(frozen=True)
class McStatistics:
    config: McConfig
    values: tuple
    seeds: tuple

    @property
    def n(self):
        return len(self.values)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def std(self):
        """Sample standard deviation (n - 1 denominator); 0 for one trial."""
        if self.n < 2:
            return 0.0
        return float(np.std(self.values, ddof=1))

    @property
    def stderr(self):
        return self.std / math.sqrt(self.n)

    def reference(self):
        """Exact homogenized value where known (2D), else ``None``."""
        if self.config.dim == 2:
            return geometric_mean_reference(np.diag(self.config.q))
        return None


def geometric_mean_reference(q) -> float:
    """Exact 2D effective diffusivity of a Haar-rotated tensor: sqrt(det Q)."""
    q = sym_tensor(q)
    if q.shape != (2, 2):
        raise ValueError("reference value is only known in 2D")
    return math.sqrt(q[0, 0] * q[1, 1])


def build_random_field(config: McConfig, trial_index: int) -> TensorField:
    """Coefficient realization of one trial; deterministic per
    ``(config.master_seed, trial_index)``."""
    dim, n, m = config.dim, config.n, config.refine
    rng = np.random.default_rng(trial_seed(config.master_seed, trial_index))
    rot = sample_rotation_matrices(rng, dim, n**dim)
    sub = rotate_tensor(rot, np.diag(config.q)).reshape((n,) * dim + (dim, dim))
    for axis in range(dim):
        sub = np.repeat(sub, m, axis=axis)
    return TensorField(StructuredGrid.unit(dim, n * m), sub)


def run_trial(config: McConfig, trial_index: int) -> float:
    fld = build_random_field(config, trial_index)
    return estimate_effective_diffusivity(fld, config.bc, config.solver_options)


def _trial_job(args):
    config, index = args
    try:
        return run_trial(config, index)
    except EffDiffError as exc:
        raise TrialError(index, exc) from None


def monte_carlo(config: McConfig, workers: int = 1) -> McStatistics:
    """Run all trials; per-trial values do not depend on ``workers``."""
    jobs = [(config, i) for i in range(config.trials)]
    if workers <= 1:
        values = []
        for job in jobs:
            values.append(_trial_job(job))
            log.info("trial %d: d_eff = %.6g", job[1], values[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_trial_job, jobs))
    seeds = tuple(trial_seed(config.master_seed, i) for i in range(config.trials))
    return McStatistics(config, tuple(values), seeds)


def default_workers():
    return os.cpu_count() or 1


def campaign_csv(stats: McStatistics, extra=None) -> str:
    """CSV text of a campaign.

    Leading ``# key=value`` lines record the resolved configuration.  Then
    the header ``trial_index,seed,d_eff,mean,std,stderr``, one row per trial
    (last three columns empty) and a final row whose ``trial_index`` is
    ``summary`` (seed and d_eff empty).  Floats use ``repr`` so that reruns
    are byte-identical.
    """
    buf = io.StringIO()
    settings = asdict(stats.config)
    settings.update(extra or {})
    for key, value in settings.items():
        if isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i, (seed, val) in enumerate(zip(stats.seeds, stats.values)):
        writer.writerow([i, seed, repr(val), "", "", ""])
    writer.writerow(["summary", "", "", repr(stats.mean), repr(stats.std), repr(stats.stderr)])
    return buf.getvalue()


def read_campaign_csv(text: str):
    """Parse :func:`campaign_csv` output into ``(settings, values, summary)``."""
    settings, rows = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            settings[key] = value
        elif line:
            rows.append(line)
    reader = list(csv.DictReader(rows))
    values = [float(r["d_eff"]) for r in reader if r["trial_index"] != "summary"]
    summary = next(r for r in reader if r["trial_index"] == "summary")
    return settings, values, {k: float(summary[k]) for k in ("mean", "std", "stderr")}
