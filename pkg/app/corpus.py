"""Deterministic scenario and graph corpora for experiments and the acceptance suite."""

import logging
import math

import numpy as np

from app.errors import GenerationFailed, ValidationError
from app.metric_graph import WeightedGraph, grid_graph, unit_disk_graph
from app.models import CostModel, ObjectSpec, ScenarioConfig, TransactionSpec
from app.sched_core import Scenario, validate_scenario

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (2.0, 4.0, 8.0)


def unit_disk_radius(n: int) -> float:
    """Twice the connectivity threshold of a unit-square random geometric graph."""
    if n < 2:
        return 1.0
    return min(1.5, 2.0 * math.sqrt(math.log(n + 1) / (math.pi * n)))


def _small_graph(rng: np.random.Generator, index: int, max_nodes: int) -> WeightedGraph:
    if index % 2 == 0:
        width = int(rng.integers(1, max_nodes + 1))
        height = int(rng.integers(1, max_nodes // width + 1))
        if width * height == 1:
            width = 2
        return grid_graph(width, height)

    n = int(rng.integers(2, max_nodes + 1))
    seed = int(rng.integers(0, 2**32))
    try:
        return unit_disk_graph(n, unit_disk_radius(n), 1.0, seed)
    except GenerationFailed as e:
        logger.warning(f"Falling back to a path-shaped grid for corpus entry {index}: {e}")
        return grid_graph(n, 1)


def corpus(
    seed: int,
    count: int,
    max_nodes: int = 10,
    max_txns: int = 6,
    max_k: int = 1,
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
    prune_factor: float = 8.0,
) -> list[Scenario]:
    """`count` scenarios on small grids and unit-disk graphs, beta=1, all objects at one home.

    With max_k == 1 every scenario has a single object; otherwise max_k objects share the
    home and each transaction needs between 1 and max_k of them.
    """
    if max_nodes < 2:
        raise ValidationError(f"max_nodes must be at least 2, got {max_nodes}")
    if max_txns < 1:
        raise ValidationError(f"max_txns must be at least 1, got {max_txns}")
    if max_k < 1:
        raise ValidationError(f"max_k must be at least 1, got {max_k}")
    if count < 0 or seed < 0:
        raise ValidationError(f"count and seed must not be negative, got count={count} seed={seed}")
    rng = np.random.default_rng(seed)
    scenarios: list[Scenario] = []
    for i in range(count):
        graph = _small_graph(rng, i, max_nodes)
        alpha = float(alphas[int(rng.integers(0, len(alphas)))])
        v_prime = int(rng.integers(0, graph.n))
        objects = tuple(ObjectSpec(id=o, home=v_prime) for o in range(max_k))
        m = int(rng.integers(1, max_txns + 1))
        transactions = []
        for t in range(m):
            k = int(rng.integers(1, max_k + 1))
            objs = tuple(int(o) for o in rng.choice(max_k, size=k, replace=False))
            transactions.append(TransactionSpec(id=t, home=int(rng.integers(0, graph.n)), objs=objs))
        sc = Scenario(
            scenario_id=f"c{seed}-{i:03d}",
            graph=graph,
            cost=CostModel(alpha=alpha, beta=1.0),
            objects=objects,
            transactions=tuple(transactions),
            config=ScenarioConfig(seed=seed, prune_factor=prune_factor),
        )
        scenarios.append(validate_scenario(sc))
    logger.info(f"Generated corpus seed={seed}: {len(scenarios)} scenarios (n <= {max_nodes}, k <= {max_k})")
    return scenarios


def graph_corpus(seed: int, count: int, max_grid: int = 16, max_unit_disk: int = 200) -> list[WeightedGraph]:
    """Alternating grids up to max_grid x max_grid and unit-disk graphs up to max_unit_disk nodes."""
    if seed < 0 or count < 0:
        raise ValidationError(f"count and seed must not be negative, got count={count} seed={seed}")
    if max_grid < 2 or max_unit_disk < 10:
        raise ValidationError(f"graph corpus bounds too small: max_grid={max_grid}, max_unit_disk={max_unit_disk}")
    rng = np.random.default_rng(seed)
    graphs: list[WeightedGraph] = []
    for i in range(count):
        if i % 2 == 0:
            graphs.append(grid_graph(int(rng.integers(2, max_grid + 1)), int(rng.integers(2, max_grid + 1))))
            continue
        n = int(rng.integers(10, max_unit_disk + 1))
        graphs.append(unit_disk_graph(n, unit_disk_radius(n), 1.0, int(rng.integers(0, 2**32))))
    return graphs
