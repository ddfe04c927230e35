"""Scenario files: YAML documents validated through the SQLModel schemas in app.models."""

import logging
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError as PydanticValidationError

from app.errors import GraphError, ParseError, ValidationError
from app.metric_graph import build_graph, generate
from app.models import ScenarioDocument
from app.sched_core import Scenario, validate_scenario

logger = logging.getLogger(__name__)

# pydantic error types that mean the document has the wrong shape rather than bad values
STRUCTURAL_ERROR_SUFFIXES = ("_type", "_parsing")
STRUCTURAL_ERROR_TYPES = {"missing", "extra_forbidden"}


def _field_path(loc: tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc)


def _document_from(data: Any) -> ScenarioDocument:
    if not isinstance(data, dict):
        raise ParseError(f"Scenario document must be a mapping, got {type(data).__name__}")
    try:
        return ScenarioDocument.model_validate(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        field = _field_path(first["loc"])
        kind = first["type"]
        logger.error(f"Scenario document rejected at {field}: {first['msg']}")
        if kind in STRUCTURAL_ERROR_TYPES or kind.endswith(STRUCTURAL_ERROR_SUFFIXES):
            raise ParseError(first["msg"], field=field) from e
        raise ValidationError(f"{field}: {first['msg']}") from e


def scenario_from_document(doc: ScenarioDocument, scenario_id: str) -> Scenario:
    try:
        if doc.graph is not None:
            graph = build_graph(doc.graph.n, doc.graph.edges)
        else:
            graph = generate(doc.generator)
    except GraphError as e:
        logger.error(f"Scenario {scenario_id} has an invalid graph: {e}")
        raise ValidationError(str(e)) from e

    sc = Scenario(
        scenario_id=scenario_id,
        graph=graph,
        cost=doc.cost,
        objects=tuple(sorted(doc.objects, key=lambda o: o.id)),
        transactions=tuple(sorted(doc.transactions, key=lambda t: t.id)),
        config=doc.config,
    )
    return validate_scenario(sc)


def loads_scenario(text: str, scenario_id: str = "scenario") -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        logger.error(f"Scenario {scenario_id} is not valid YAML: {e}")
        raise ParseError("Malformed YAML", line=line) from e
    return scenario_from_document(_document_from(data), scenario_id)


def parse_scenario(path: Path) -> Scenario:
    """Read and validate a scenario file; the file stem becomes the scenario id."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        logger.error(f"Cannot read scenario file {path}: {e}")
        raise ParseError(f"Cannot read {path}: {e.strerror}") from e
    return loads_scenario(text, path.stem)


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    """Document form with an explicit graph section, even for generated graphs."""
    return {
        "graph": sc.graph.to_dict(),
        "cost": sc.cost.model_dump(mode="json"),
        "objects": [o.model_dump(mode="json") for o in sc.objects],
        "transactions": [{"id": t.id, "home": t.home, "objs": list(t.objs)} for t in sc.transactions],
        "config": sc.config.model_dump(mode="json"),
    }


def dumps_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def save_scenario(sc: Scenario, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_scenario(sc))
    return path
