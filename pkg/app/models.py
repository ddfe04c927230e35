import math
from datetime import datetime
from enum import Enum
from typing import Optional, Union

from pydantic import field_validator, model_validator
from sqlmodel import Field, SQLModel


class GeneratorKind(str, Enum):
    GRID = "grid"
    UNIT_DISK = "unit-disk"


class TourKind(str, Enum):
    MST = "mst"
    UNIVERSAL = "universal"
    EXACT = "exact"


class Algorithm(str, Enum):
    SINGLE_GLOBAL = "single-global"
    MULTI_GLOBAL = "multi-global"
    SINGLE_DIST = "single-dist"
    MULTI_DIST = "multi-dist"
    DIRECT = "direct"


# Non-persistent schemas: the sections of a scenario file
class GeneratorSpec(SQLModel, table=False):
    """Deterministic graph generator: grid(width, height) or unit-disk(n, radius, side)."""

    kind: GeneratorKind
    width: Optional[int] = Field(default=None, ge=1)
    height: Optional[int] = Field(default=None, ge=1)
    n: Optional[int] = Field(default=None, ge=1)
    radius: Optional[float] = Field(default=None, gt=0)
    side: float = Field(default=1.0, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def check_kind_parameters(self) -> "GeneratorSpec":
        match self.kind:
            case GeneratorKind.GRID:
                if self.width is None or self.height is None:
                    raise ValueError("grid generator needs width and height")
            case GeneratorKind.UNIT_DISK:
                if self.n is None or self.radius is None:
                    raise ValueError("unit-disk generator needs n and radius")
        return self


class GraphSection(SQLModel, table=False):
    """Explicit graph: node count and [u, v, w] edges."""

    n: int = Field(ge=1)
    edges: list[tuple[int, int, Union[int, float]]] = Field(default_factory=list)


class CostModel(SQLModel, table=False):
    """Dual-flow costs: alpha per unit distance for objects, beta for transactions."""

    alpha: float = Field(gt=1)
    beta: float = Field(default=1.0, ge=1)

    @model_validator(mode="after")
    def check_object_costlier(self) -> "CostModel":
        if not self.alpha > self.beta:
            raise ValueError(f"alpha ({self.alpha}) must be greater than beta ({self.beta})")
        return self

    @property
    def gamma(self) -> int:
        return math.ceil(self.alpha / self.beta)


class ObjectSpec(SQLModel, table=False):
    id: int = Field(ge=0)
    home: int = Field(ge=0)


class TransactionSpec(SQLModel, table=False):
    id: int = Field(ge=0)
    home: int = Field(ge=0)
    objs: tuple[int, ...] = Field(min_length=1)

    @field_validator("objs")
    @classmethod
    def sort_objects(cls, objs: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(sorted(set(objs)))


class ScenarioConfig(SQLModel, table=False):
    """Per-scenario knobs. prune_factor=8 is the analysed level-pruning constant."""

    sigma: float = Field(default=2.0, ge=2)
    tour: TourKind = Field(default=TourKind.MST)
    seed: int = Field(default=0, ge=0)
    prune_factor: float = Field(default=8.0, ge=0)
    control_weight: float = Field(default=1.0, gt=0)

    @field_validator("tour")
    @classmethod
    def reject_exact_tour(cls, tour: TourKind) -> TourKind:
        if tour == TourKind.EXACT:
            raise ValueError("tour must be 'mst' or 'universal'")
        return tour


class ScenarioDocument(SQLModel, table=False):
    """Schema of a scenario file; exactly one of graph / generator is present."""

    graph: Optional[GraphSection] = None
    generator: Optional[GeneratorSpec] = None
    cost: CostModel
    objects: list[ObjectSpec] = Field(min_length=1)
    transactions: list[TransactionSpec] = Field(min_length=1)
    config: ScenarioConfig = Field(default_factory=ScenarioConfig)

    @model_validator(mode="after")
    def check_graph_source(self) -> "ScenarioDocument":
        if (self.graph is None) == (self.generator is None):
            raise ValueError("scenario needs exactly one of 'graph' or 'generator'")
        return self


# Persistent table
class RunRecord(SQLModel, table=True):
    """One (scenario, algorithm, tour) run with its costs, oracle value and bound diagnostics."""

    __tablename__ = "run_records"  # type: ignore[assignment]

    id: Optional[int] = Field(default=None, primary_key=True)
    run_id: str = Field(default="", max_length=64, index=True)
    scenario_id: str = Field(max_length=255, index=True)
    algorithm: str = Field(max_length=32)
    tour: str = Field(max_length=16)
    n: int = Field(default=0)
    transactions: int = Field(default=0)
    k: int = Field(default=1)
    alpha: float = Field(default=0.0)
    beta: float = Field(default=1.0)
    cost: Optional[float] = Field(default=None)
    object_cost: Optional[float] = Field(default=None)
    txn_cost: Optional[float] = Field(default=None)
    c_star: Optional[float] = Field(default=None)
    ratio: Optional[float] = Field(default=None)
    s_f_size: Optional[int] = Field(default=None)
    tour_length: Optional[float] = Field(default=None)
    tour_star: Optional[float] = Field(default=None)
    message_cost: Optional[float] = Field(default=None)
    message_cost_p1: Optional[float] = Field(default=None)
    message_cost_p2: Optional[float] = Field(default=None)
    message_cost_p3: Optional[float] = Field(default=None)
    phase1_bound_ok: Optional[bool] = Field(default=None)
    rhs: Optional[float] = Field(default=None)
    h: int = Field(default=0)
    measured_i: int = Field(default=1)
    delta: int = Field(default=0)
    zeta: float = Field(default=1.0)
    diameter: float = Field(default=0.0)
    violations: str = Field(default="", max_length=2000)
    error: str = Field(default="", max_length=2000)
    runtime_s: float = Field(default=0.0)
    created_at: datetime = Field(default_factory=datetime.utcnow)
