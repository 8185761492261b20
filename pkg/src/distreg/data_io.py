"""File ingestion/validation and synthetic data generation.

All files are UTF-8 CSV with headers; ids, counts and minutes are
integers. The synthetic generator replaces the proprietary journey data:
it draws per-OD Poisson journey counts for natural days and produces
perturbed days by re-destining a known fraction of the journeys affected
by each disruption, so the perturbed ROI-exit distribution is a known
rescaling of the natural one and recovery can be tested sharply.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .network import Disruption, Graph, bfs_distance, disrupted_adjacency
from .pipeline import DayCounts, InterferenceConfig, JourneyRecord, aggregate_day

__all__ = [
    "SyntheticScenario",
    "SyntheticDataset",
    "GroundTruthRecord",
    "generate_synthetic",
    "write_dataset",
    "load_scenario",
    "load_journeys",
    "load_journeys_dir",
    "load_disruptions",
    "load_graph",
    "load_ground_truth",
    "load_dataset",
    "parse_config",
    "write_config",
    "DatasetBundle",
]

_TOPOLOGIES = ("path", "cycle", "grid", "erdos-renyi")


@dataclass(frozen=True)
class SyntheticScenario:
    """Generator settings: graph shape, demand rates, and disruption ground truth."""

    topology: str
    n_nodes: int
    days: int
    n_disruptions: int
    phi: float
    er_p: float = 0.3
    roi_links: int = 1
    rate_low: float = 0.5
    rate_high: float = 2.0
    t_min: int = 0
    t_max: int = 239
    window_min: int = 45
    window_max: int = 120
    seed: int = 0

    def __post_init__(self) -> None:
        if self.topology not in _TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; expected one of {_TOPOLOGIES}")
        if self.n_nodes < 2:
            raise ValueError(f"need at least 2 nodes, got {self.n_nodes}")
        if self.days < 2:
            raise ValueError(f"need at least 2 days, got {self.days}")
        if self.n_disruptions < 1:
            raise ValueError(f"need at least 1 disruption, got {self.n_disruptions}")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must be in [0, 1], got {self.phi}")
        if self.rate_low < 0 or self.rate_high < self.rate_low:
            raise ValueError(f"invalid rate range [{self.rate_low}, {self.rate_high}]")
        if self.roi_links < 1:
            raise ValueError(f"need roi_links >= 1, got {self.roi_links}")
        if not (0 <= self.t_min <= self.t_max):
            raise ValueError(f"invalid time window [{self.t_min}, {self.t_max}]")
        if not (1 <= self.window_min <= self.window_max <= self.t_max - self.t_min + 1):
            raise ValueError(
                f"invalid disruption window bounds [{self.window_min}, {self.window_max}]"
            )


@dataclass(frozen=True)
class GroundTruthRecord:
    """Per-disruption generation truth: reroute fraction and implied ROI-exit scale."""

    disruption_id: int
    phi: float
    scale: float


@dataclass(frozen=True)
class SyntheticDataset:
    graph: Graph
    journeys: dict[int, list[JourneyRecord]]
    disruptions: list[Disruption]
    ground_truth: list[GroundTruthRecord]
    t_window: tuple[int, int]


@dataclass(frozen=True)
class DatasetBundle:
    """Loaded on-disk dataset, with journeys aggregated per day."""

    graph: Graph
    days: dict[int, DayCounts]
    disruptions: list[Disruption]
    t_window: tuple[int, int]


def _build_graph(s: SyntheticScenario, rng: np.random.Generator) -> Graph:
    n = s.n_nodes
    edges: list[tuple[int, int]] = []
    if s.topology == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif s.topology == "cycle":
        edges = [(i, i + 1) for i in range(n - 1)] + [(n - 1, 0)]
    elif s.topology == "grid":
        rows = max(1, int(np.floor(np.sqrt(n))))
        cols = -(-n // rows)
        for i in range(n):
            r, c = divmod(i, cols)
            if c + 1 < cols and i + 1 < n:
                edges.append((i, i + 1))
            if (r + 1) * cols + c < n:
                edges.append((i, (r + 1) * cols + c))
    else:  # erdos-renyi
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < s.er_p:
                    edges.append((i, j))
    g = Graph.from_edges(n, edges)
    if np.any(~np.isfinite(bfs_distance(g, 0))):
        raise ValueError(
            f"{s.topology} graph with {n} nodes is disconnected; demand pairs would be unreachable"
        )
    return g


def _natural_day_journeys(
    rng: np.random.Generator, rates: np.ndarray, t_min: int, t_max: int
) -> list[JourneyRecord]:
    counts = rng.poisson(rates)
    journeys = []
    origins, destinations = np.nonzero(counts)  # row-major, matching draw order
    for o, d in zip(origins.tolist(), destinations.tolist()):
        for _ in range(int(counts[o, d])):
            t_exit = int(rng.integers(t_min, t_max + 1))
            t_entry = int(rng.integers(t_min, t_exit + 1))
            journeys.append(JourneyRecord(o, d, t_entry, t_exit))
    return journeys


def _reroute_target(g: Graph, roi: tuple[int, ...], destination: int, dist_from_dest: np.ndarray) -> int:
    """Open station adjacent to the ROI that is nearest to the original destination."""
    roi_set = set(roi)
    adj = g.adjacency
    candidates = sorted(
        {
            int(v)
            for r in roi
            for v in np.nonzero(adj[r])[0]
            if int(v) not in roi_set
        }
    )
    if not candidates:
        raise ValueError(f"ROI {roi} has no open adjacent station to reroute to")
    best = min(candidates, key=lambda cand: (dist_from_dest[cand], cand))
    return best


def generate_synthetic(s: SyntheticScenario) -> SyntheticDataset:
    """Generate natural days, disruptions, perturbed days, and the ground truth.

    Perturbed day rule: a journey is affected when its origin or
    destination is in the ROI or when the disruption strictly lengthens
    its shortest path; an affected journey exiting inside the disruption
    window is re-destined, with probability phi, to the nearest open
    ROI-adjacent station. Journeys are never created or destroyed, so
    per-day totals are conserved and ROI window exits scale by (1 - phi)
    in expectation.
    """
    rng = np.random.default_rng(s.seed)
    g = _build_graph(s, rng)
    n = s.n_nodes
    rates = rng.uniform(s.rate_low, s.rate_high, (n, n))

    journeys: dict[int, list[JourneyRecord]] = {}
    for day in range(s.days):
        journeys[day] = _natural_day_journeys(rng, rates, s.t_min, s.t_max)

    all_edges = g.edges()
    if s.roi_links > len(all_edges):
        raise ValueError(f"roi_links {s.roi_links} exceeds edge count {len(all_edges)}")
    dist_nat = np.stack([bfs_distance(g, v) for v in range(n)])

    disruptions: list[Disruption] = []
    ground_truth: list[GroundTruthRecord] = []
    for k in range(s.n_disruptions):
        day = s.days + k
        picked = rng.choice(len(all_edges), size=s.roi_links, replace=False)
        roi = tuple(sorted({v for i in picked for v in all_edges[int(i)]}))
        t_start = int(rng.integers(s.t_min, s.t_max - s.window_min + 2))
        duration = int(rng.integers(s.window_min, s.window_max + 1))
        t_end = min(t_start + duration - 1, s.t_max)
        z = Disruption(day=day, t_start=t_start, t_end=t_end, roi=roi)
        disruptions.append(z)

        g_dis = disrupted_adjacency(g, roi)
        dist_dis = np.stack([bfs_distance(g_dis, v) for v in range(n)])
        roi_set = set(roi)
        base = _natural_day_journeys(rng, rates, s.t_min, s.t_max)
        perturbed = []
        for j in base:
            affected = (
                j.origin in roi_set
                or j.destination in roi_set
                or dist_dis[j.origin, j.destination] > dist_nat[j.origin, j.destination]
            )
            in_window = t_start <= j.t_exit <= t_end
            if affected and in_window and rng.random() < s.phi:
                target = _reroute_target(g, roi, j.destination, dist_nat[j.destination])
                j = JourneyRecord(j.origin, target, j.t_entry, j.t_exit)
            perturbed.append(j)
        journeys[day] = perturbed
        ground_truth.append(GroundTruthRecord(disruption_id=k, phi=s.phi, scale=1.0 - s.phi))

    return SyntheticDataset(
        graph=g,
        journeys=journeys,
        disruptions=disruptions,
        ground_truth=ground_truth,
        t_window=(s.t_min, s.t_max),
    )


# ---------------------------------------------------------------------------
# writers


def write_dataset(ds: SyntheticDataset, out_dir: Path | str, config: InterferenceConfig | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "graph.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u", "v"])
        for u, v in ds.graph.edges():
            writer.writerow([u, v])
    for day in sorted(ds.journeys):
        with open(out / f"journeys_day{day}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["origin", "destination", "t_entry", "t_exit"])
            for j in ds.journeys[day]:
                writer.writerow([j.origin, j.destination, j.t_entry, j.t_exit])
    with open(out / "disruptions.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["day", "t_start", "t_end", "roi"])
        for z in ds.disruptions:
            writer.writerow([z.day, z.t_start, z.t_end, ";".join(str(r) for r in z.roi)])
    with open(out / "ground_truth.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["disruption_id", "phi", "scale"])
        for r in ds.ground_truth:
            writer.writerow([r.disruption_id, repr(float(r.phi)), repr(float(r.scale))])
    if config is not None:
        write_config(out / "config.txt", config)


def write_config(path: Path | str, cfg: InterferenceConfig) -> None:
    lines = [
        f"kernel.family = {cfg.kernel_family}",
        f"kernel.rho = {'auto' if cfg.rho is None else repr(cfg.rho)}",
        f"xi = {cfg.xi!r}",
        f"beta = {cfg.beta!r}",
        f"I = {cfg.n_inputs}",
        f"R = {cfg.rescale_levels}",
        f"c = {cfg.rescale_span!r}",
        f"ridge = {'auto' if cfg.ridge is None else repr(cfg.ridge)}",
        f"g_convention = {cfg.g_convention}",
        f"x5_mode = {cfg.x5_mode}",
        f"seed = {cfg.seed}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# loaders


def _read_rows(path: Path | str, required: Sequence[str]) -> tuple[list[dict], list[str]]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError(f"{path.name}: missing required columns {missing} (header {header})")
        rows = []
        for row in reader:
            row["_line"] = reader.line_num
            rows.append(row)
    return rows, header


def _int_field(row: dict, key: str, path_name: str) -> int:
    raw = (row.get(key) or "").strip()
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{path_name} line {row['_line']}: bad integer {key}={raw!r}") from None


def load_journeys(path: Path | str) -> dict[int, list[JourneyRecord]]:
    """Read one journeys CSV; day comes from a `day` column or the filename suffix."""
    path = Path(path)
    rows, header = _read_rows(path, ["origin", "destination", "t_entry", "t_exit"])
    has_day = "day" in header
    day_from_name: int | None = None
    if not has_day:
        matches = re.findall(r"(\d+)", path.stem)
        if not matches:
            raise ValueError(f"{path.name}: no `day` column and no day number in the filename")
        day_from_name = int(matches[-1])
    out: dict[int, list[JourneyRecord]] = {}
    for row in rows:
        day = _int_field(row, "day", path.name) if has_day else day_from_name
        o = _int_field(row, "origin", path.name)
        d = _int_field(row, "destination", path.name)
        te = _int_field(row, "t_entry", path.name)
        tx = _int_field(row, "t_exit", path.name)
        if o < 0 or d < 0 or te < 0:
            raise ValueError(f"{path.name} line {row['_line']}: negative id or time")
        if tx < te:
            raise ValueError(
                f"{path.name} line {row['_line']}: t_exit {tx} earlier than t_entry {te}"
            )
        out.setdefault(day, []).append(JourneyRecord(o, d, te, tx))
    return out


def load_journeys_dir(data_dir: Path | str) -> dict[int, list[JourneyRecord]]:
    data_dir = Path(data_dir)
    files = sorted(data_dir.glob("journeys*.csv"))
    if not files:
        raise ValueError(f"no journeys*.csv files in {data_dir}")
    out: dict[int, list[JourneyRecord]] = {}
    for f in files:
        for day, recs in load_journeys(f).items():
            out.setdefault(day, []).extend(recs)
    return out


def load_disruptions(path: Path | str) -> list[Disruption]:
    path = Path(path)
    rows, _ = _read_rows(path, ["day", "t_start", "t_end", "roi"])
    out = []
    for row in rows:
        roi_raw = (row.get("roi") or "").strip()
        try:
            roi = tuple(int(tok) for tok in roi_raw.split(";") if tok != "")
        except ValueError:
            raise ValueError(f"{path.name} line {row['_line']}: bad roi list {roi_raw!r}") from None
        try:
            out.append(
                Disruption(
                    day=_int_field(row, "day", path.name),
                    t_start=_int_field(row, "t_start", path.name),
                    t_end=_int_field(row, "t_end", path.name),
                    roi=roi,
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path.name} line {row['_line']}: {exc}") from None
    return out


def load_graph(path: Path | str) -> Graph:
    """Edge-list CSV (`u,v` header). Node count is max id + 1; self/duplicate edges rejected."""
    path = Path(path)
    rows, _ = _read_rows(path, ["u", "v"])
    edges = []
    seen = set()
    max_id = -1
    for row in rows:
        u = _int_field(row, "u", path.name)
        v = _int_field(row, "v", path.name)
        if u < 0 or v < 0:
            raise ValueError(f"{path.name} line {row['_line']}: negative node id")
        if u == v:
            raise ValueError(f"{path.name} line {row['_line']}: self edge ({u}, {v})")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"{path.name} line {row['_line']}: duplicate edge ({u}, {v})")
        seen.add(key)
        edges.append((u, v))
        max_id = max(max_id, u, v)
    if max_id < 0:
        raise ValueError(f"{path.name}: empty edge list")
    return Graph.from_edges(max_id + 1, edges)


def load_ground_truth(path: Path | str) -> list[GroundTruthRecord]:
    path = Path(path)
    rows, _ = _read_rows(path, ["disruption_id", "phi", "scale"])
    return [
        GroundTruthRecord(
            disruption_id=_int_field(row, "disruption_id", path.name),
            phi=float(row["phi"]),
            scale=float(row["scale"]),
        )
        for row in rows
    ]


def load_scenario(path: Path | str) -> SyntheticScenario:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("scenario file must hold a JSON object")
    known = set(SyntheticScenario.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown scenario keys: {unknown}")
    try:
        return SyntheticScenario(**raw)
    except TypeError as exc:
        raise ValueError(f"bad scenario: {exc}") from None


def load_dataset(data_dir: Path | str) -> DatasetBundle:
    """Load graph + journeys + disruptions from a directory and aggregate per day.

    The observation window is inferred: it starts at 0 and ends at the
    latest journey exit or disruption end seen in the data.
    """
    data_dir = Path(data_dir)
    graph = load_graph(data_dir / "graph.csv")
    journeys = load_journeys_dir(data_dir)
    disruptions_path = data_dir / "disruptions.csv"
    disruptions = load_disruptions(disruptions_path) if disruptions_path.exists() else []
    t_hi = 0
    for recs in journeys.values():
        for j in recs:
            t_hi = max(t_hi, j.t_exit)
    for z in disruptions:
        t_hi = max(t_hi, z.t_end)
    t_window = (0, t_hi)
    days = {
        day: aggregate_day(recs, day, graph.n_nodes, t_window)
        for day, recs in sorted(journeys.items())
    }
    for z in disruptions:
        z.validate_against(graph.n_nodes, *t_window)
    return DatasetBundle(graph=graph, days=days, disruptions=disruptions, t_window=t_window)


# ---------------------------------------------------------------------------
# config files


_CONFIG_KEYS = {
    "kernel.family",
    "kernel.rho",
    "xi",
    "beta",
    "I",
    "R",
    "c",
    "ridge",
    "g_convention",
    "x5_mode",
    "seed",
}


def parse_config(path: Path | str) -> InterferenceConfig:
    """Flat key-value config: `key = value` lines, `#` comments, `auto` for rho/ridge."""
    path = Path(path)
    values: dict[str, str] = {}
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path.name} line {ln}: expected `key = value`, got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path.name} line {ln}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"{path.name} line {ln}: duplicate config key {key!r}")
        values[key] = value

    def opt_float(key: str, default: float | None) -> float | None:
        raw = values.get(key)
        if raw is None:
            return default
        if raw == "auto":
            return None
        return float(raw)

    defaults = InterferenceConfig()
    try:
        return InterferenceConfig(
            xi=float(values.get("xi", defaults.xi)),
            beta=float(values.get("beta", defaults.beta)),
            n_inputs=int(values.get("I", defaults.n_inputs)),
            rescale_levels=int(values.get("R", defaults.rescale_levels)),
            rescale_span=float(values.get("c", defaults.rescale_span)),
            kernel_family=values.get("kernel.family", defaults.kernel_family),
            rho=opt_float("kernel.rho", defaults.rho),
            ridge=opt_float("ridge", defaults.ridge),
            g_convention=values.get("g_convention", defaults.g_convention),
            x5_mode=values.get("x5_mode", defaults.x5_mode),
            seed=int(values.get("seed", defaults.seed)),
        )
    except ValueError as exc:
        raise ValueError(f"{path.name}: {exc}") from None
