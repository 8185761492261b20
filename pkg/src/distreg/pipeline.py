"""End-to-end disruption pipeline: journey aggregation, input features, training, prediction.

For each disruption z = (day, window, ROI) the natural-regime days are
turned into five per-day input realizations over the ROI stations:

  X1  exits arriving from origins whose path to the station stays feasible
      under the disrupted adjacency,
  X2  exits from infeasible origins (X1 + X2 == X3 exactly),
  X3  total exits,
  X4  the across-day mean of X3, repeated on every row,
  X5  the ROI-wide total broadcast to all stations (mean per station by
      default; a `sum` mode is available).

Under the disrupted adjacency every ROI station is isolated, so origins
other than the station itself can never be feasible; journeys that both
start and end at the station count as feasible, which keeps X1 nonzero
wherever same-station traffic exists.

Training fits a mixture-of-embeddings model from the five input
embeddings to the single observed disruption-day exit vector; prediction
combines new inputs with the fitted coefficients and projects the result
onto a basis of rescaled natural marginals for sampling.

Exit-count tensors stay sparse: a day is a map (origin, destination,
exit minute) -> count, never a dense array.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .kernels import (
    GAUSSIAN,
    KernelConfig,
    SampleSet,
    embed,
    pairwise_distances,
    subsample_rows,
)
from .network import Disruption, Graph, bfs_distance, disrupted_adjacency, feasible_origins
from .regression import MixtureEmbeddingModel, TrainingPairs, fit_mixture_embeddings, predict_embedding
from .sampler import Basis, FittedMixture, fit_mixture_weights, sample_mixture

__all__ = [
    "JourneyRecord",
    "DayCounts",
    "InterferenceConfig",
    "PerturbedObservation",
    "aggregate_day",
    "roi_exit_vector",
    "natural_roi_totals",
    "input_variable_samples",
    "decay_inputs",
    "resolve_rho",
    "train",
    "build_basis",
    "predict",
    "N_TUBE_INPUTS",
]

N_TUBE_INPUTS = 5

X5_MEAN = "mean"
X5_SUM = "sum"


@dataclass(frozen=True)
class JourneyRecord:
    """One journey: origin, destination, entry minute, exit minute."""

    origin: int
    destination: int
    t_entry: int
    t_exit: int

    def __post_init__(self) -> None:
        if self.origin < 0 or self.destination < 0:
            raise ValueError(f"negative station id in journey {self}")
        if self.t_entry > self.t_exit:
            raise ValueError(f"t_entry {self.t_entry} exceeds t_exit {self.t_exit}")


@dataclass(frozen=True)
class DayCounts:
    """Sparse exit-count tensor for one day: (origin, destination, exit minute) -> count."""

    day: int
    counts: Mapping[tuple[int, int, int], int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class InterferenceConfig:
    """Pipeline knobs.

    rho=None means "resolve by the median heuristic" (see resolve_rho);
    ridge=None picks the trace-scaled default of the regression module.
    """

    xi: float = 0.25
    beta: float = 1.0
    n_inputs: int = N_TUBE_INPUTS
    rescale_levels: int = 5
    rescale_span: float = 1.5
    kernel_family: str = GAUSSIAN
    rho: float | None = None
    ridge: float | None = None
    g_convention: str = "inverted"
    x5_mode: str = X5_MEAN
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.n_inputs < 1:
            raise ValueError(f"need n_inputs >= 1, got {self.n_inputs}")
        if self.rescale_levels < 2:
            raise ValueError(f"need rescale_levels >= 2, got {self.rescale_levels}")
        if not self.rescale_span > 1:
            raise ValueError(f"need rescale_span > 1, got {self.rescale_span}")
        if self.x5_mode not in (X5_MEAN, X5_SUM):
            raise ValueError(f"unknown x5_mode {self.x5_mode!r}")
        if self.g_convention not in ("inverted", "paper"):
            raise ValueError(f"unknown g_convention {self.g_convention!r}")
        if self.rho is not None and not self.rho > 0:
            raise ValueError(f"rho must be positive or None, got {self.rho}")

    def kernel(self) -> KernelConfig:
        if self.rho is None:
            raise ValueError("rho is unresolved; call resolve_rho first or set it explicitly")
        return KernelConfig(family=self.kernel_family, rho=self.rho)

    def with_rho(self, rho: float) -> "InterferenceConfig":
        return replace(self, rho=float(rho))


@dataclass(frozen=True)
class PerturbedObservation:
    """A disruption together with its observed ROI exit vector (a single realization)."""

    disruption: Disruption
    exit_vector: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.exit_vector, dtype=np.float64).reshape(-1)
        if v.shape[0] != len(self.disruption.roi):
            raise ValueError(
                f"exit vector length {v.shape[0]} != |ROI| {len(self.disruption.roi)}"
            )
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("exit vector must be finite and nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "exit_vector", v)

    @classmethod
    def from_day_counts(cls, dc: DayCounts, z: Disruption) -> "PerturbedObservation":
        return cls(disruption=z, exit_vector=roi_exit_vector(dc, z))


def aggregate_day(
    journeys: Sequence[JourneyRecord], day: int, n_nodes: int, t_window: tuple[int, int]
) -> DayCounts:
    """Count journeys by (origin, destination, exit minute); validates every record."""
    t_min, t_max = t_window
    counts: dict[tuple[int, int, int], int] = {}
    for i, j in enumerate(journeys):
        if not (0 <= j.origin < n_nodes and 0 <= j.destination < n_nodes):
            raise ValueError(
                f"row {i}: station ids ({j.origin}, {j.destination}) out of range "
                f"for {n_nodes} nodes"
            )
        if not (t_min <= j.t_entry <= j.t_exit <= t_max):
            raise ValueError(
                f"row {i}: times ({j.t_entry}, {j.t_exit}) outside window [{t_min}, {t_max}]"
            )
        key = (j.origin, j.destination, j.t_exit)
        counts[key] = counts.get(key, 0) + 1
    return DayCounts(day=day, counts=counts)


def roi_exit_vector(dc: DayCounts, z: Disruption) -> np.ndarray:
    """Exits at each ROI station summed over all origins and the disruption window."""
    if dc.day != z.day:
        raise ValueError(f"day mismatch: counts are for day {dc.day}, disruption is day {z.day}")
    pos = {station: j for j, station in enumerate(z.roi)}
    vec = np.zeros(len(z.roi), dtype=np.int64)
    for (o, d, t), c in dc.counts.items():
        j = pos.get(d)
        if j is not None and z.t_start <= t <= z.t_end:
            vec[j] += c
    return vec


def _window_roi_rows(
    days: Sequence[DayCounts], z: Disruption
) -> np.ndarray:
    """Per-day ROI exit totals within the disruption window, one row per day."""
    pos = {station: j for j, station in enumerate(z.roi)}
    rows = np.zeros((len(days), len(z.roi)))
    for n, dc in enumerate(days):
        for (o, d, t), c in dc.counts.items():
            j = pos.get(d)
            if j is not None and z.t_start <= t <= z.t_end:
                rows[n, j] += c
    return rows


def _sorted_natural_days(natural_days: Sequence[DayCounts], z: Disruption) -> list[DayCounts]:
    days = sorted(natural_days, key=lambda dc: dc.day)
    if any(dc.day == z.day for dc in days):
        raise ValueError(f"natural days must exclude the disruption day {z.day}")
    if len(days) == 0:
        raise ValueError("need at least one natural day")
    if len({dc.day for dc in days}) != len(days):
        raise ValueError("natural days contain duplicate day indices")
    return days


def input_variable_samples(
    natural_days: Sequence[DayCounts],
    z: Disruption,
    g: Graph,
    cfg: InterferenceConfig,
) -> tuple[SampleSet, SampleSet, SampleSet, SampleSet, SampleSet]:
    """Per-day realizations of the five input variables X1..X5 for one disruption.

    Each returned SampleSet has one row per natural day and dimension |ROI|.
    """
    days = _sorted_natural_days(natural_days, z)
    g_dis = disrupted_adjacency(g, z.roi)
    masks = np.stack(
        [
            feasible_origins(g, g_dis, station, cfg.xi, cfg.g_convention)
            for station in z.roi
        ]
    )
    pos = {station: j for j, station in enumerate(z.roi)}
    m = len(z.roi)
    n = len(days)
    x1 = np.zeros((n, m))
    x2 = np.zeros((n, m))
    x3 = np.zeros((n, m))
    for row, dc in enumerate(days):
        for (o, d, t), c in dc.counts.items():
            j = pos.get(d)
            if j is None or not (z.t_start <= t <= z.t_end):
                continue
            x3[row, j] += c
            if masks[j, o]:
                x1[row, j] += c
            else:
                x2[row, j] += c
    col_means = np.mean(x3, axis=0)
    x4 = np.tile(col_means, (n, 1))
    roi_totals = np.sum(x3, axis=1)
    if cfg.x5_mode == X5_MEAN:
        roi_totals = roi_totals / m
    x5 = np.tile(roi_totals[:, None], (1, m))
    return (SampleSet(x1), SampleSet(x2), SampleSet(x3), SampleSet(x4), SampleSet(x5))


def decay_inputs(
    natural_samples: SampleSet,
    center: int,
    g: Graph,
    beta: float,
    n_inputs: int,
) -> tuple[SampleSet, ...]:
    """Generic distance-decay functionals over the full node set.

    The i-th output (i = 1..n_inputs) scales coordinate d of every sample
    by exp(-i * beta * dist(d, center)); coordinates unreachable from
    the center decay to 0.
    """
    if natural_samples.dim != g.n_nodes:
        raise ValueError(
            f"samples have dim {natural_samples.dim} but the graph has {g.n_nodes} nodes"
        )
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if n_inputs < 1:
        raise ValueError(f"need n_inputs >= 1, got {n_inputs}")
    dist = bfs_distance(g, center)
    out = []
    for i in range(1, n_inputs + 1):
        with np.errstate(over="ignore"):
            factors = np.exp(-i * beta * dist)
        factors = np.where(np.isfinite(dist), factors, 0.0)
        out.append(SampleSet(natural_samples.samples * factors[None, :]))
    return tuple(out)


def _disruption_pools(
    natural_days: Sequence[DayCounts],
    observations: Sequence[PerturbedObservation],
    g: Graph,
    cfg: InterferenceConfig,
) -> list[np.ndarray]:
    pools = []
    for obs in observations:
        z = obs.disruption
        naturals = [dc for dc in natural_days if dc.day != z.day]
        sets = input_variable_samples(naturals, z, g, cfg)
        rows = [s.samples for s in sets]
        rows.append(obs.exit_vector[None, :])
        rows.append(_basis_rows(naturals, z, cfg)[0])
        pools.append(np.vstack(rows))
    return pools


def resolve_rho(
    natural_days: Sequence[DayCounts],
    observations: Sequence[PerturbedObservation],
    g: Graph,
    cfg: InterferenceConfig,
) -> float:
    """Median-heuristic bandwidth pooled across disruptions.

    The one kernel serves both the regression fit and the projection of
    predictions onto the rescaled-marginal basis, so the pool mixes, per
    disruption, the input rows, the observed exit vector, and the basis
    rows; the median is taken over the union of within-disruption
    pairwise distances (dimensions differ across disruptions, distances
    pool fine).
    """
    all_dists = []
    for pool in _disruption_pools(natural_days, observations, g, cfg):
        pool = subsample_rows(pool)
        all_dists.append(pairwise_distances(pool, cfg.kernel_family))
    dists = np.concatenate(all_dists)
    m = float(np.median(dists))
    if m <= 0.0:
        raise ValueError("pooled median distance is zero; pass an explicit rho")
    if cfg.kernel_family == GAUSSIAN:
        return 1.0 / (2.0 * m * m)
    return 1.0 / m


def train(
    natural_days: Sequence[DayCounts],
    observations: Sequence[PerturbedObservation],
    g: Graph,
    cfg: InterferenceConfig,
) -> MixtureEmbeddingModel:
    """Fit the mixture-of-embeddings model over all observed disruptions.

    Every observed exit vector is a single realization, so each output
    embedding is the lone kernel atom at that vector. The natural days
    passed in are filtered per disruption so a disruption never sees its
    own day.
    """
    if len(observations) == 0:
        raise ValueError("need at least one observed disruption")
    if cfg.n_inputs != N_TUBE_INPUTS:
        raise ValueError(
            f"the exit-count pipeline builds {N_TUBE_INPUTS} inputs; config says {cfg.n_inputs}"
        )
    kernel = cfg.kernel()
    inputs = []
    outputs = []
    for obs in observations:
        z = obs.disruption
        naturals = [dc for dc in natural_days if dc.day != z.day]
        sets = input_variable_samples(naturals, z, g, cfg)
        inputs.append(tuple(embed(kernel, s) for s in sets))
        outputs.append(embed(kernel, SampleSet(obs.exit_vector[None, :])))
    pairs = TrainingPairs(inputs=tuple(inputs), outputs=tuple(outputs))
    return fit_mixture_embeddings(pairs, ridge=cfg.ridge)


def natural_roi_totals(natural_days: Sequence[DayCounts], z: Disruption) -> np.ndarray:
    """Per-day, per-ROI-station window exit totals (the X3 rows), one row per day."""
    days = _sorted_natural_days(natural_days, z)
    return _window_roi_rows(days, z)


def _basis_rows(
    natural_days: Sequence[DayCounts],
    z: Disruption,
    cfg: InterferenceConfig,
) -> tuple[np.ndarray, list[str]]:
    """Stacked per-component sample rows of the rescaled-marginal basis."""
    totals = natural_roi_totals(natural_days, z)
    n_days, m = totals.shape
    mean_max = float(np.max(np.mean(totals, axis=0)))
    if mean_max <= 0.0:
        raise ValueError("no natural traffic at any ROI station; basis would be degenerate")
    R = cfg.rescale_levels
    C = cfg.rescale_span * mean_max / (R - 1)
    blocks = []
    labels = []
    for r in range(1, R + 1):
        lam = 1.0 + (r - 1) * C
        for j, station in enumerate(z.roi):
            rows = np.zeros((n_days, m))
            rows[:, j] = lam * totals[:, j]
            blocks.append(rows)
            labels.append(f"r{r}_station{station}")
    return np.vstack(blocks), labels


def build_basis(
    natural_days: Sequence[DayCounts],
    z_new: Disruption,
    cfg: InterferenceConfig,
) -> Basis:
    """Rescaled-marginal basis for the output space of a new disruption.

    Component (r, j) holds, per natural day, the ROI-station-j window
    total scaled by lambda_r and placed on coordinate j (all other
    coordinates zero), for r = 1..R with lambda_r = 1 + (r - 1) C and
    C = c * max_j mean-total / (R - 1).
    """
    stacked, labels = _basis_rows(natural_days, z_new, cfg)
    n_days = stacked.shape[0] // len(labels)
    kernel = cfg.kernel()
    components = [
        SampleSet(stacked[i * n_days : (i + 1) * n_days]) for i in range(len(labels))
    ]
    return Basis.from_components(kernel, components, labels)


def predict(
    model: MixtureEmbeddingModel,
    natural_days: Sequence[DayCounts],
    z_new: Disruption,
    g: Graph,
    cfg: InterferenceConfig,
    n_samples: int,
    seed: int,
) -> tuple[FittedMixture, SampleSet]:
    """Predict the perturbed exit distribution for a new disruption and sample from it."""
    if model.arity != N_TUBE_INPUTS:
        raise ValueError(f"model has arity {model.arity}, expected {N_TUBE_INPUTS}")
    kernel = cfg.kernel()
    naturals = [dc for dc in natural_days if dc.day != z_new.day]
    sets = input_variable_samples(naturals, z_new, g, cfg)
    predicted = predict_embedding(model, [embed(kernel, s) for s in sets])
    basis = build_basis(naturals, z_new, cfg)
    mixture = fit_mixture_weights(predicted, basis)
    samples = sample_mixture(mixture, n_samples, seed)
    return mixture, samples
