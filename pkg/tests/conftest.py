"""Shared generators for randomized store and query tests."""

import random

import pytest

from auditbox.model import epoch_ms_to_iso

SUBJECTS = ["entitytype:operator", "entitytype:law", "run:r1", "study:s1", "study:s2", "doc:a"]
PREDICATES = ["audit:confidence", "audit:status", "audit:usedLibrary", "audit:runStatus", "ns:misc"]
COMPONENTS = ["svc-1", "svc-2", "ui-1", "onto-1"]
RUN_IDS = [None, "run-1", "run-2", "run-3"]
BASE_MS = 1704067200000  # 2024-01-01T00:00:00.000Z


def random_object(rng: random.Random) -> dict:
    kind = rng.randrange(6)
    if kind == 0:
        return {"type": "string", "value": rng.choice(["alpha", "beta", "gamma", "completed"])}
    if kind == 1:
        return {"type": "integer", "value": rng.randrange(-50, 50)}
    if kind == 2:
        return {"type": "decimal", "value": round(rng.uniform(0, 1), 6)}
    if kind == 3:
        return {"type": "boolean", "value": rng.random() < 0.5}
    if kind == 4:
        return {"type": "timestamp", "value": epoch_ms_to_iso(BASE_MS + rng.randrange(0, 10 * 86_400_000))}
    return {"type": "entity_ref", "value": rng.choice(["run:r1", "doc:a", "study:s1"])}


def random_draft(rng: random.Random) -> dict:
    draft = {
        "subject": rng.choice(SUBJECTS),
        "predicate": rng.choice(PREDICATES),
        "object": random_object(rng),
        "component_id": rng.choice(COMPONENTS),
        "recorded_at": epoch_ms_to_iso(BASE_MS + rng.randrange(0, 10 * 86_400_000)),
    }
    run_id = rng.choice(RUN_IDS)
    if run_id is not None:
        draft["run_id"] = run_id
    return draft


@pytest.fixture
def rng():
    return random.Random(1234)
