import os
import tempfile
from pathlib import Path
from typing import Callable, Generator, Optional, Sequence

import pytest

# the run store must point at a throwaway database before app.database is imported
os.environ.setdefault("APP_DATABASE_URL", f"sqlite:///{Path(tempfile.gettempdir()) / f'dualflow-{os.getpid()}.db'}")

from app.database import reset_db  # noqa: E402
from app.metric_graph import WeightedGraph, build_graph  # noqa: E402
from app.models import CostModel, ObjectSpec, ScenarioConfig, TransactionSpec  # noqa: E402
from app.sched_core import Scenario, validate_scenario  # noqa: E402

ScenarioFactory = Callable[..., Scenario]


@pytest.fixture()
def new_db() -> Generator[None, None, None]:
    """Create a fresh database for each test."""
    reset_db()
    yield
    reset_db()


@pytest.fixture()
def path5() -> WeightedGraph:
    """0 - 1 - 2 - 3 - 4 with unit weights."""
    return build_graph(5, [(i, i + 1, 1) for i in range(4)])


@pytest.fixture()
def make_scenario(path5: WeightedGraph) -> ScenarioFactory:
    """Scenario builder: `txns` is a list of (home, objs) pairs, ids assigned in order."""

    def build(
        txns: Sequence[tuple[int, Sequence[int]]],
        alpha: float = 2.0,
        beta: float = 1.0,
        homes: Sequence[int] = (0,),
        graph: Optional[WeightedGraph] = None,
        prune_factor: float = 8.0,
        scenario_id: str = "test",
    ) -> Scenario:
        return validate_scenario(
            Scenario(
                scenario_id=scenario_id,
                graph=graph or path5,
                cost=CostModel(alpha=alpha, beta=beta),
                objects=tuple(ObjectSpec(id=i, home=home) for i, home in enumerate(homes)),
                transactions=tuple(
                    TransactionSpec(id=i, home=home, objs=tuple(objs)) for i, (home, objs) in enumerate(txns)
                ),
                config=ScenarioConfig(prune_factor=prune_factor),
            )
        )

    return build
