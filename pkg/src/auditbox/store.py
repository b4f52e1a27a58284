"""Append-only statement store with batch-atomic ingest and crash recovery.

One line-delimited UTF-8 log file per audit. Statement lines are staged and
become visible only when their batch commit line lands, so recovery after a
crash always yields a committed-batch prefix. Indices live in memory and are
rebuilt on open.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import (
    BatchTooLarge,
    CorruptLog,
    IdempotencyConflict,
    ParseError,
    StorageFailure,
)
from .model import (
    ArtefactStatement,
    ObjectValue,
    StatementPattern,
    canonical_json,
    canonicalize_statement,
)

log = logging.getLogger(__name__)

DAY_MS = 86_400_000
DEFAULT_MAX_BATCH = 10_000


def _normalize_draft_for_hash(draft) -> dict:
    if isinstance(draft, dict):
        out = {}
        for k, v in draft.items():
            out[k] = v.to_dict() if isinstance(v, ObjectValue) else v
        return out
    return {"_unparsable": repr(draft)}


def batch_content_hash(drafts: list) -> str:
    payload = canonical_json([_normalize_draft_for_hash(d) for d in drafts])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class IngestReceipt:
    batch_key: str
    accepted: int
    deduplicated: int
    rejected: tuple  # of (index, reason)
    store_sequence: int

    def to_dict(self) -> dict:
        return {
            "batch_key": self.batch_key,
            "accepted": self.accepted,
            "deduplicated": self.deduplicated,
            "rejected": [{"index": i, "reason": r} for i, r in self.rejected],
            "store_sequence": self.store_sequence,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "IngestReceipt":
        return cls(
            batch_key=obj["batch_key"],
            accepted=obj["accepted"],
            deduplicated=obj["deduplicated"],
            rejected=tuple((r["index"], r["reason"]) for r in obj["rejected"]),
            store_sequence=obj["store_sequence"],
        )


@dataclass
class IngestBatch:
    """One idempotent unit of ingestion.

    ``drafts`` are raw statement dicts; ``pre_rejected`` carries rejections
    produced upstream (mapping failures keyed by source record index) so the
    receipt accounts for every submitted item.
    """

    batch_key: str
    drafts: list
    pre_rejected: list = field(default_factory=list)

    def size(self) -> int:
        return len(self.drafts) + len(self.pre_rejected)


def _statement_line(seq: int, stmt: ArtefactStatement) -> str:
    rec = stmt.to_dict()
    rec["seq"] = seq
    return canonical_json(rec)


def _parse_statement_line(rec: dict) -> tuple[int, ArtefactStatement]:
    data = dict(rec)
    seq = data.pop("seq")
    stated_id = data.pop("id")
    data.pop("kind", None)
    stmt = canonicalize_statement(data)
    if stmt.statement_id != stated_id:
        raise ParseError(f"statement id mismatch at seq {seq}")
    return int(seq), stmt


class StatementStore:
    """In-memory indexed view over an optional append-only log file."""

    def __init__(self, path: Optional[str] = None, max_batch: int = DEFAULT_MAX_BATCH):
        self._path = path
        self._max_batch = max_batch
        self._rows: list[tuple[int, ArtefactStatement]] = []
        self._by_id: dict[str, int] = {}  # statement_id -> row position
        self._by_predicate: dict[str, list[int]] = {}
        self._by_run: dict[str, list[int]] = {}
        self._by_component: dict[str, list[int]] = {}
        self._by_predicate_day: dict[tuple[str, int], list[int]] = {}
        self._receipts: dict[str, tuple[str, IngestReceipt]] = {}
        self._last_seq = 0
        self._fh = None
        if path is not None:
            self._fh = open(path, "a", encoding="utf-8")
            self._fh.seek(0, os.SEEK_END)

    # -- construction -------------------------------------------------------

    @classmethod
    def recover(cls, path: str, max_batch: int = DEFAULT_MAX_BATCH) -> "StatementStore":
        """Rebuild from a log file, keeping only fully committed batches.

        A torn final line is truncated with a warning; garbage anywhere else
        raises CorruptLog. Trailing statement lines with no commit marker are
        discarded (their batch never committed).
        """
        store = cls.__new__(cls)
        store._path = path
        store._max_batch = max_batch
        store._rows = []
        store._by_id = {}
        store._by_predicate = {}
        store._by_run = {}
        store._by_component = {}
        store._by_predicate_day = {}
        store._receipts = {}
        store._last_seq = 0
        store._fh = None

        keep_bytes = 0
        pending: list[tuple[int, ArtefactStatement]] = []
        if os.path.exists(path):
            with open(path, "rb") as fh:
                raw = fh.read()
            offset = 0
            lines: list[tuple[int, bytes, bool]] = []
            while offset < len(raw):
                nl = raw.find(b"\n", offset)
                if nl == -1:
                    lines.append((offset, raw[offset:], False))
                    offset = len(raw)
                else:
                    lines.append((offset, raw[offset:nl], True))
                    offset = nl + 1
            for i, (start, line, terminated) in enumerate(lines):
                is_last = i == len(lines) - 1
                try:
                    if not terminated:
                        raise ValueError("unterminated line")
                    rec = json.loads(line.decode("utf-8"))
                    if not isinstance(rec, dict):
                        raise ValueError("line is not an object")
                    if "batch" in rec:
                        b = rec["batch"]
                        receipt = IngestReceipt.from_dict(b["receipt"])
                        for seq, stmt in pending:
                            store._append_row(seq, stmt)
                        pending = []
                        store._receipts[b["batch_key"]] = (b["content_hash"], receipt)
                        keep_bytes = start + len(line) + 1
                    else:
                        pending.append(_parse_statement_line(rec))
                except Exception as exc:
                    if is_last:
                        log.warning("truncating torn final log line in %s: %s", path, exc)
                        break
                    raise CorruptLog(f"unreadable log line {i + 1} in {path}: {exc}") from None
            if keep_bytes < len(raw):
                # drop the torn tail and any uncommitted trailing batch
                with open(path, "rb+") as fh:
                    fh.truncate(keep_bytes)
        store._fh = open(path, "a", encoding="utf-8")
        store._fh.seek(0, os.SEEK_END)
        return store

    # -- internals ----------------------------------------------------------

    def _append_row(self, seq: int, stmt: ArtefactStatement) -> None:
        pos = len(self._rows)
        self._rows.append((seq, stmt))
        self._by_id[stmt.statement_id] = pos
        self._by_predicate.setdefault(stmt.predicate, []).append(pos)
        if stmt.run_id is not None:
            self._by_run.setdefault(stmt.run_id, []).append(pos)
        self._by_component.setdefault(stmt.component_id, []).append(pos)
        day = stmt.recorded_at // DAY_MS
        self._by_predicate_day.setdefault((stmt.predicate, day), []).append(pos)
        self._last_seq = max(self._last_seq, seq)

    # -- properties ---------------------------------------------------------

    @property
    def watermark(self) -> int:
        return self._last_seq

    def __len__(self) -> int:
        return len(self._rows)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # -- ingest -------------------------------------------------------------

    def ingest(self, batch: IngestBatch) -> IngestReceipt:
        """Append a batch atomically; full idempotency on batch_key.

        Re-sending a key with identical content returns the original receipt;
        reusing a key with different content raises IdempotencyConflict.
        """
        if not batch.batch_key or not isinstance(batch.batch_key, str):
            raise ParseError("batch_key must be a non-empty string")
        if batch.size() > self._max_batch:
            raise BatchTooLarge(
                f"batch of {batch.size()} exceeds limit {self._max_batch}",
                limit=self._max_batch,
                size=batch.size(),
            )
        content_hash = batch_content_hash(batch.drafts)
        prior = self._receipts.get(batch.batch_key)
        if prior is not None:
            prior_hash, prior_receipt = prior
            if prior_hash != content_hash:
                raise IdempotencyConflict(
                    f"batch_key {batch.batch_key!r} was already used with different content"
                )
            return prior_receipt

        rejected: list[tuple[int, str]] = list(batch.pre_rejected)
        staged: list[tuple[int, ArtefactStatement]] = []
        staged_ids: set[str] = set()
        accepted = 0
        deduplicated = 0
        seq = self._last_seq
        for i, draft in enumerate(batch.drafts):
            try:
                stmt = canonicalize_statement(draft)
            except Exception as exc:
                rejected.append((i, str(exc)))
                continue
            if stmt.statement_id in self._by_id or stmt.statement_id in staged_ids:
                deduplicated += 1
                continue
            seq += 1
            staged.append((seq, stmt))
            staged_ids.add(stmt.statement_id)
            accepted += 1
        rejected.sort(key=lambda pair: pair[0])
        receipt = IngestReceipt(
            batch_key=batch.batch_key,
            accepted=accepted,
            deduplicated=deduplicated,
            rejected=tuple(rejected),
            store_sequence=seq,
        )
        self._commit(batch.batch_key, content_hash, staged, receipt)
        return receipt

    def _commit(
        self,
        batch_key: str,
        content_hash: str,
        staged: list[tuple[int, ArtefactStatement]],
        receipt: IngestReceipt,
    ) -> None:
        commit_rec = {
            "batch": {
                "batch_key": batch_key,
                "content_hash": content_hash,
                "receipt": receipt.to_dict(),
            }
        }
        if self._fh is not None:
            start = self._fh.tell()
            try:
                for seq, stmt in staged:
                    self._fh.write(_statement_line(seq, stmt) + "\n")
                self._fh.write(canonical_json(commit_rec) + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                # roll the file back to the pre-batch length via a fresh handle
                try:
                    self._fh.close()
                except OSError:
                    pass
                with open(self._path, "rb+") as fixer:
                    fixer.truncate(start)
                self._fh = open(self._path, "a", encoding="utf-8")
                self._fh.seek(0, os.SEEK_END)
                raise StorageFailure(f"batch commit aborted: {exc}") from exc
        for seq, stmt in staged:
            self._append_row(seq, stmt)
        self._receipts[batch_key] = (content_hash, receipt)

    # -- reads --------------------------------------------------------------

    def scan(
        self,
        pattern: StatementPattern,
        time_range: Optional[tuple[Optional[int], Optional[int]]] = None,
        as_of: Optional[int] = None,
    ) -> Iterator[ArtefactStatement]:
        """Statements matching pattern and [from, to) on recorded_at, in sequence order."""
        for _, stmt in self.select(pattern, time_range=time_range, as_of=as_of):
            yield stmt

    def select(
        self,
        pattern: Optional[StatementPattern] = None,
        time_range: Optional[tuple[Optional[int], Optional[int]]] = None,
        as_of: Optional[int] = None,
    ) -> list[tuple[int, ArtefactStatement]]:
        """Index-assisted match returning (seq, statement) rows."""
        positions: Optional[list[int]] = None
        if pattern is not None:
            fixed_run = pattern.run_id is not None and not str(pattern.run_id).startswith("?")
            if pattern.predicate is not None:
                positions = self._by_predicate.get(pattern.predicate, [])
            elif fixed_run:
                positions = self._by_run.get(pattern.run_id, [])
        rows = self._rows if positions is None else [self._rows[p] for p in positions]
        t_from, t_to = time_range if time_range is not None else (None, None)
        out = []
        for seq, stmt in rows:
            if as_of is not None and seq > as_of:
                continue
            if pattern is not None and not pattern.matches(stmt):
                continue
            if t_from is not None and stmt.recorded_at < t_from:
                continue
            if t_to is not None and stmt.recorded_at >= t_to:
                continue
            out.append((seq, stmt))
        return out

    def all_rows(self, as_of: Optional[int] = None) -> list[tuple[int, ArtefactStatement]]:
        if as_of is None:
            return list(self._rows)
        return [(seq, stmt) for seq, stmt in self._rows if seq <= as_of]

    def receipt_for(self, batch_key: str) -> Optional[IngestReceipt]:
        entry = self._receipts.get(batch_key)
        return entry[1] if entry else None

    def check_index_consistency(self) -> list[str]:
        """Full-scan audit of every index; returns human-readable problems."""
        problems: list[str] = []
        seqs = [seq for seq, _ in self._rows]
        if any(b <= a for a, b in zip(seqs, seqs[1:])):
            problems.append("sequence numbers are not strictly increasing")
        ids = [stmt.statement_id for _, stmt in self._rows]
        if len(set(ids)) != len(ids):
            problems.append("duplicate statement_id in log")
        rebuilt_pred: dict[str, list[int]] = {}
        rebuilt_run: dict[str, list[int]] = {}
        rebuilt_comp: dict[str, list[int]] = {}
        rebuilt_pd: dict[tuple[str, int], list[int]] = {}
        for pos, (_, stmt) in enumerate(self._rows):
            rebuilt_pred.setdefault(stmt.predicate, []).append(pos)
            if stmt.run_id is not None:
                rebuilt_run.setdefault(stmt.run_id, []).append(pos)
            rebuilt_comp.setdefault(stmt.component_id, []).append(pos)
            rebuilt_pd.setdefault((stmt.predicate, stmt.recorded_at // DAY_MS), []).append(pos)
        for name, live, rebuilt in (
            ("predicate", self._by_predicate, rebuilt_pred),
            ("run_id", self._by_run, rebuilt_run),
            ("component_id", self._by_component, rebuilt_comp),
            ("predicate_day", self._by_predicate_day, rebuilt_pd),
        ):
            if live != rebuilt:
                problems.append(f"index {name} inconsistent with log")
        return problems


def recover(log_path: str) -> StatementStore:
    return StatementStore.recover(log_path)


def ingest(batch: IngestBatch, store: StatementStore) -> IngestReceipt:
    return store.ingest(batch)
