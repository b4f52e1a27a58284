"""Deterministic trace generators for two reference deployments.

uc1 is a document-processing pipeline (six components, two ML extractors
emitting per-entity confidence scores, a run-level status roll-up). uc2 is
a research-study platform (a consent check that is sometimes skipped, and
an analysis service whose library usage lands in a CSV).

Every byte written is a pure function of the config: same seed, same files.
Alongside the traces goes a ground-truth file with the expected answers,
computed here by brute force so the pipeline can be checked end to end.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import epoch_ms_to_iso

DAY_MS = 86_400_000
HOUR_MS = 3_600_000
T0 = 1_704_067_200_000  # 2024-01-01T00:00:00Z

USE_CASES = ("uc1", "uc2")

DEFAULT_FAULT_RATES = {
    "run_failure": 0.1,
    "consent_skip": 0.3,
    "correction_rate": 0.05,
}

UC1_COMPONENTS = (
    ("ui-1", "Portal UI", "ui"),
    ("svc-ml-1", "Entity extractor A", "ml_model"),
    ("svc-ml-2", "Entity extractor B", "ml_model"),
    ("svc-rules-1", "Validation rules", "non_ml_service"),
    ("svc-rules-2", "Routing rules", "non_ml_service"),
    ("onto-1", "Domain ontology", "ontology"),
)

# which extractor produces which entity type
UC1_ENTITIES = (
    ("operator", "svc-ml-1"),
    ("applicable_law", "svc-ml-1"),
    ("permit_date", "svc-ml-2"),
    ("location", "svc-ml-2"),
)

UC2_STUDIES = {
    "s1": ("statsLib", "plotLib", "dataCleaner"),
    "s2": ("statsLib", "mlToolkit"),
    "s3": ("plotLib", "surveyKit", "statsLib"),
}

BATCH_RECORD_LIMIT = 400


@dataclass(frozen=True)
class SimulatorConfig:
    use_case: str
    seed: int
    n_runs: int
    fault_rates: dict = field(default_factory=dict)

    def rate(self, name: str) -> float:
        return self.fault_rates.get(name, DEFAULT_FAULT_RATES[name])

    def to_dict(self) -> dict:
        rates = {name: self.rate(name) for name in DEFAULT_FAULT_RATES}
        return {
            "use_case": self.use_case,
            "seed": self.seed,
            "n_runs": self.n_runs,
            "fault_rates": rates,
        }


def parse_simulator_config(obj: dict) -> SimulatorConfig:
    if not isinstance(obj, dict):
        raise ConfigError("simulator config must be an object")
    unknown = set(obj) - {"use_case", "seed", "n_runs", "fault_rates"}
    if unknown:
        raise ConfigError(f"unknown simulator config field(s): {sorted(unknown)}")
    use_case = obj.get("use_case")
    if use_case not in USE_CASES:
        raise ConfigError(f"use_case must be one of {USE_CASES}, got {use_case!r}")
    seed = obj.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    n_runs = obj.get("n_runs")
    if not isinstance(n_runs, int) or isinstance(n_runs, bool) or n_runs < 1:
        raise ConfigError("n_runs must be a positive integer")
    rates = obj.get("fault_rates", {})
    if not isinstance(rates, dict):
        raise ConfigError("fault_rates must be an object")
    unknown = set(rates) - set(DEFAULT_FAULT_RATES)
    if unknown:
        raise ConfigError(f"unknown fault rate(s): {sorted(unknown)}")
    for name, value in rates.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not 0 <= value <= 1:
            raise ConfigError(f"fault_rates.{name} must be in [0, 1]")
    return SimulatorConfig(use_case=use_case, seed=seed, n_runs=n_runs, fault_rates=dict(rates))


# -- output helpers -----------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def _dump_lines(records) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records)


def _write(root: Path, rel: str, text: str) -> None:
    path = root / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _chunk_batches(prefix: str, rel_file: str, fmt: str, mapping_id: str, context: dict, n: int):
    batches = []
    index = 0
    for start in range(0, n, BATCH_RECORD_LIMIT):
        stop = min(start + BATCH_RECORD_LIMIT, n)
        batches.append(
            {
                "batch_key": f"{prefix}-{index:04d}",
                "file": rel_file,
                "format": fmt,
                "mapping_id": mapping_id,
                "context": context,
                "record_from": start,
                "record_to": stop,
            }
        )
        index += 1
    return batches


# -- uc1 ----------------------------------------------------------------------


def _uc1_system() -> dict:
    return {
        "system_id": "permit-pipeline",
        "components": [
            {"id": cid, "name": name, "kind": kind, "phase_coverage": ["exploitation"]}
            for cid, name, kind in UC1_COMPONENTS
        ],
        "data_flows": [
            {"from": "ui-1", "to": "svc-ml-1", "payload_label": "document"},
            {"from": "ui-1", "to": "svc-ml-2", "payload_label": "document"},
            {"from": "svc-ml-1", "to": "svc-rules-1", "payload_label": "entities"},
            {"from": "svc-ml-2", "to": "svc-rules-2", "payload_label": "entities"},
            {"from": "svc-rules-1", "to": "onto-1", "payload_label": "terms"},
        ],
        "phases_in_scope": ["exploitation"],
    }


def _uc1_mappings() -> list[dict]:
    return [
        {
            "mapping_id": "map-status",
            "source_format": "nested_record",
            "subject_template": "component:{component}",
            "rules": [
                {"source_path": "status", "predicate": "audit:status", "object_type": "string", "required": True}
            ],
        },
        {
            "mapping_id": "map-run-status",
            "source_format": "nested_record",
            "subject_template": "run:{run}",
            "rules": [
                {"source_path": "status", "predicate": "audit:runStatus", "object_type": "string", "required": True}
            ],
            "default_component_id": "ui-1",
        },
        {
            "mapping_id": "map-confidence",
            "source_format": "nested_record",
            "subject_template": "entitytype:{entity_type}",
            "rules": [
                {"source_path": "confidence", "predicate": "audit:confidence", "object_type": "decimal", "required": True}
            ],
        },
        {
            "mapping_id": "map-corrections",
            "source_format": "nested_record",
            "subject_template": "entitytype:{entity_type}",
            "rules": [
                {"source_path": "note", "predicate": "audit:correction", "object_type": "string", "required": True}
            ],
            "default_component_id": "ui-1",
        },
    ]


def _uc1_bindings() -> list[dict]:
    bindings = [
        {
            "binding_id": f"bind-{cid}-status",
            "component_id": cid,
            "source_format": "nested_record",
            "mapping_ref": "map-status",
            "provides_patterns": [{"predicate": "audit:status", "object_type": "string"}],
        }
        for cid, _, _ in UC1_COMPONENTS
    ]
    bindings.append(
        {
            "binding_id": "bind-run-status",
            "component_id": "ui-1",
            "source_format": "nested_record",
            "mapping_ref": "map-run-status",
            "provides_patterns": [{"predicate": "audit:runStatus", "object_type": "string"}],
        }
    )
    bindings.append(
        {
            "binding_id": "bind-ml-confidence",
            "component_id": "svc-ml-1",
            "source_format": "nested_record",
            "mapping_ref": "map-confidence",
            "provides_patterns": [{"predicate": "audit:confidence", "object_type": "decimal"}],
        }
    )
    bindings.append(
        {
            "binding_id": "bind-corrections",
            "component_id": "ui-1",
            "source_format": "nested_record",
            "mapping_ref": "map-corrections",
            "provides_patterns": [{"predicate": "audit:correction", "object_type": "string"}],
        }
    )
    return bindings


def _simulate_uc1(config: SimulatorConfig, rng: random.Random) -> dict:
    status_records = []
    run_status_records = []
    confidence_records = []
    correction_records = []
    run_success = {}
    confidence_samples: dict[tuple[str, int], list[float]] = {}

    for k in range(config.n_runs):
        run_id = f"run-{k:04d}"
        start = T0 + k * 4 * HOUR_MS + rng.randrange(HOUR_MS)
        failing = rng.random() < config.rate("run_failure")
        failed_component = rng.choice([cid for cid, _, _ in UC1_COMPONENTS]) if failing else None
        for i, (cid, _, _) in enumerate(UC1_COMPONENTS):
            status = "failed" if cid == failed_component else "completed"
            status_records.append(
                {
                    "run": run_id,
                    "component": cid,
                    "status": status,
                    "ts": epoch_ms_to_iso(start + i * 10_000 + rng.randrange(5_000)),
                }
            )
        succeeded = failed_component is None
        run_success[run_id] = succeeded
        run_status_records.append(
            {
                "run": run_id,
                "status": "completed" if succeeded else "failed",
                "ts": epoch_ms_to_iso(start + 120_000),
            }
        )
        for j, (entity, emitter) in enumerate(UC1_ENTITIES):
            if emitter == failed_component:
                rng.random()  # burn the draw so failures do not shift later runs
                continue
            value = round(rng.uniform(0.5, 0.999), 6)
            ts = start + 60_000 + j * 1_000
            confidence_records.append(
                {
                    "run": run_id,
                    "component": emitter,
                    "entity_type": entity,
                    "confidence": value,
                    "ts": epoch_ms_to_iso(ts),
                }
            )
            day = ts // DAY_MS * DAY_MS
            confidence_samples.setdefault((f"entitytype:{entity}", day), []).append(value)
        if rng.random() < config.rate("correction_rate"):
            entity = rng.choice([name for name, _ in UC1_ENTITIES])
            correction_records.append(
                {
                    "run": run_id,
                    "entity_type": entity,
                    "note": f"manual correction in {run_id}",
                    "ts": epoch_ms_to_iso(start + 300_000),
                }
            )

    avg_confidence: dict[str, dict[str, float]] = {}
    for (subject, day), values in sorted(confidence_samples.items()):
        avg_confidence.setdefault(subject, {})[epoch_ms_to_iso(day)] = math.fsum(values) / len(values)

    batches = (
        _chunk_batches("uc1-status", "traces/status.jsonl", "jsonl", "map-status", {}, len(status_records))
        + _chunk_batches(
            "uc1-run-status", "traces/run_status.jsonl", "jsonl", "map-run-status",
            {"component_id": "ui-1"}, len(run_status_records),
        )
        + _chunk_batches(
            "uc1-confidence", "traces/confidence.jsonl", "jsonl", "map-confidence", {}, len(confidence_records)
        )
        + _chunk_batches(
            "uc1-corrections", "traces/corrections.jsonl", "jsonl", "map-corrections",
            {"component_id": "ui-1"}, len(correction_records),
        )
    )

    return {
        "system": _uc1_system(),
        "mappings": _uc1_mappings(),
        "bindings": _uc1_bindings(),
        "goal": "transparency",
        "selected_questions": ["uc1-q1", "uc1-q2"],
        "batches": batches,
        "files": {
            "traces/status.jsonl": _dump_lines(status_records),
            "traces/run_status.jsonl": _dump_lines(run_status_records),
            "traces/confidence.jsonl": _dump_lines(confidence_records),
            "traces/corrections.jsonl": _dump_lines(correction_records),
        },
        "ground_truth": {
            "avg_confidence": avg_confidence,
            "run_success": run_success,
            "n_confidence_records": len(confidence_records),
        },
    }


# -- uc2 ----------------------------------------------------------------------


def _uc2_system() -> dict:
    return {
        "system_id": "study-platform",
        "components": [
            {"id": "ui-2", "name": "Researcher portal", "kind": "ui", "phase_coverage": ["exploitation"]},
            {"id": "consent-svc", "name": "Consent gate", "kind": "consent_check", "phase_coverage": ["exploitation"]},
            {"id": "analysis-ml", "name": "Analysis engine", "kind": "ml_model", "phase_coverage": ["exploitation"]},
        ],
        "data_flows": [
            {"from": "ui-2", "to": "consent-svc", "payload_label": "subject data"},
            {"from": "consent-svc", "to": "analysis-ml", "payload_label": "cleared data"},
        ],
        "phases_in_scope": ["exploitation"],
    }


def _uc2_mappings() -> list[dict]:
    return [
        {
            "mapping_id": "map-consent",
            "source_format": "triple_file",
            "subject_template": "passthrough",
            "rules": [
                {"source_path": "audit:dataCollection", "predicate": "audit:dataCollection", "object_type": "timestamp", "required": False},
                {"source_path": "audit:consentEvaluated", "predicate": "audit:consentEvaluated", "object_type": "boolean", "required": False},
            ],
            "default_component_id": "consent-svc",
        },
        {
            "mapping_id": "map-libraries",
            "source_format": "delimited_table",
            "subject_template": "study:{study}",
            "rules": [
                {"source_path": "library", "predicate": "audit:usedLibrary", "object_type": "string", "required": True}
            ],
        },
    ]


def _uc2_bindings() -> list[dict]:
    return [
        {
            "binding_id": "bind-consent",
            "component_id": "consent-svc",
            "source_format": "triple_file",
            "mapping_ref": "map-consent",
            "provides_patterns": [
                {"predicate": "audit:dataCollection"},
                {"predicate": "audit:consentEvaluated", "object_type": "boolean"},
            ],
        },
        {
            "binding_id": "bind-analysis-libs",
            "component_id": "analysis-ml",
            "source_format": "delimited_table",
            "mapping_ref": "map-libraries",
            "provides_patterns": [{"predicate": "audit:usedLibrary", "object_type": "string"}],
        },
    ]


def _simulate_uc2(config: SimulatorConfig, rng: random.Random) -> dict:
    files = {}
    batches = []
    consent_evaluated = {}
    study_of_run = {}
    library_rows = []

    for k in range(config.n_runs):
        run_id = f"run-{k:04d}"
        start = T0 + k * 6 * HOUR_MS + rng.randrange(HOUR_MS)
        study = rng.choice(sorted(UC2_STUDIES))
        study_of_run[run_id] = study
        evaluated = rng.random() >= config.rate("consent_skip")
        consent_evaluated[run_id] = evaluated
        lines = [f"run:{run_id}\taudit:dataCollection\t{epoch_ms_to_iso(start)}"]
        if evaluated:
            lines.append(f"run:{run_id}\taudit:consentEvaluated\ttrue")
        rel = f"traces/consent/{run_id}.triples"
        files[rel] = "".join(line + "\n" for line in lines)
        batches.append(
            {
                "batch_key": f"uc2-consent-{run_id}",
                "file": rel,
                "format": "triples",
                "mapping_id": "map-consent",
                "context": {
                    "run_id": run_id,
                    "component_id": "consent-svc",
                    "recorded_at": epoch_ms_to_iso(start),
                },
                "record_from": 0,
                "record_to": len(lines),
            }
        )
        for i, library in enumerate(UC2_STUDIES[study]):
            library_rows.append(
                {
                    "study": study,
                    "run": run_id,
                    "component": "analysis-ml",
                    "library": library,
                    "ts": epoch_ms_to_iso(start + 600_000 + i * 1_000),
                }
            )

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["study", "run", "component", "library", "ts"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(library_rows)
    files["traces/libraries.csv"] = buf.getvalue()
    batches.extend(
        _chunk_batches("uc2-libraries", "traces/libraries.csv", "csv", "map-libraries", {}, len(library_rows))
    )

    libraries = {
        study: sorted(set(libs)) for study, libs in UC2_STUDIES.items()
        if study in set(study_of_run.values())
    }
    return {
        "system": _uc2_system(),
        "mappings": _uc2_mappings(),
        "bindings": _uc2_bindings(),
        "goal": "compliance",
        "selected_questions": ["uc2-q1", "uc2-q2"],
        "batches": batches,
        "files": files,
        "ground_truth": {
            "consent_evaluated": consent_evaluated,
            "study_of_run": study_of_run,
            "libraries": libraries,
        },
    }


# -- entry points --------------------------------------------------------------


def simulate(config: SimulatorConfig, out_dir) -> dict:
    """Write the full corpus for a config; returns the manifest."""
    if config.use_case not in USE_CASES:
        raise ConfigError(f"use_case must be one of {USE_CASES}, got {config.use_case!r}")
    rng = random.Random(config.seed)
    built = _simulate_uc1(config, rng) if config.use_case == "uc1" else _simulate_uc2(config, rng)

    root = Path(out_dir)
    manifest = {
        "config": config.to_dict(),
        "goal": built["goal"],
        "selected_questions": built["selected_questions"],
        "files": {
            "system": "system.json",
            "mappings": "mappings.json",
            "bindings": "bindings.json",
            "batches": "batches.json",
            "ground_truth": "ground_truth.json",
        },
    }
    _write(root, "system.json", _dump(built["system"]))
    _write(root, "mappings.json", _dump(built["mappings"]))
    _write(root, "bindings.json", _dump(built["bindings"]))
    _write(root, "batches.json", _dump(built["batches"]))
    _write(root, "ground_truth.json", _dump(built["ground_truth"]))
    for rel, text in built["files"].items():
        _write(root, rel, text)
    _write(root, "manifest.json", _dump(manifest))
    return manifest


def load_manifest(out_dir) -> dict:
    root = Path(out_dir)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    manifest["system"] = json.loads((root / "system.json").read_text(encoding="utf-8"))
    manifest["mappings"] = json.loads((root / "mappings.json").read_text(encoding="utf-8"))
    manifest["bindings"] = json.loads((root / "bindings.json").read_text(encoding="utf-8"))
    manifest["batches"] = json.loads((root / "batches.json").read_text(encoding="utf-8"))
    manifest["ground_truth"] = json.loads((root / "ground_truth.json").read_text(encoding="utf-8"))
    return manifest


def read_records(out_dir, rel_file: str, fmt: str) -> list:
    """All records in a trace file: dicts (jsonl, csv) or raw lines (triples)."""
    text = (Path(out_dir) / rel_file).read_text(encoding="utf-8")
    if fmt == "jsonl":
        return [json.loads(line) for line in text.splitlines() if line]
    if fmt == "triples":
        return [line for line in text.splitlines() if line]
    if fmt == "csv":
        return list(csv.DictReader(io.StringIO(text)))
    raise ConfigError(f"unknown trace format {fmt!r}")


def batch_records(out_dir, batch: dict) -> list:
    records = read_records(out_dir, batch["file"], batch["format"])
    return records[batch["record_from"] : batch["record_to"]]
