"""Domain error hierarchy shared by all auditbox modules.

Every error carries a stable ``code`` string so the HTTP layer and the CLI
can map failures without string-matching messages.
"""

from __future__ import annotations


class AuditboxError(Exception):
    """Base class for all domain errors."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.details:
            out["details"] = self.details
        return out


class ParseError(AuditboxError):
    code = "parse_error"


class MissingField(AuditboxError):
    code = "missing_field"


class InvalidPredicate(AuditboxError):
    code = "invalid_predicate"


class InvalidObjectType(AuditboxError):
    code = "invalid_object_type"


class DanglingReference(AuditboxError):
    code = "dangling_reference"


class DuplicateId(AuditboxError):
    code = "duplicate_id"


class EmptyCatalog(AuditboxError):
    code = "empty_catalog"


class IllegalState(AuditboxError):
    code = "illegal_state"


class UnknownQuestion(AuditboxError):
    code = "unknown_question"


class EmptySelection(AuditboxError):
    code = "empty_selection"


class UnknownComponent(AuditboxError):
    code = "unknown_component"


class DuplicateBindingId(AuditboxError):
    code = "duplicate_binding_id"


class CoverageIncomplete(AuditboxError):
    code = "coverage_incomplete"


class UnknownAudit(AuditboxError):
    code = "unknown_audit"


class MissingRequiredField(AuditboxError):
    code = "missing_required_field"


class TypeCoercionError(AuditboxError):
    code = "type_coercion_error"


class TemplateFieldUnresolved(AuditboxError):
    code = "template_field_unresolved"


class WorkflowNotCollecting(AuditboxError):
    code = "workflow_not_collecting"


class BatchTooLarge(AuditboxError):
    code = "batch_too_large"


class IdempotencyConflict(AuditboxError):
    code = "idempotency_conflict"


class StorageFailure(AuditboxError):
    code = "storage_failure"


class CorruptLog(AuditboxError):
    code = "corrupt_log"


class InvalidQuery(AuditboxError):
    code = "invalid_query"


class TypeMismatch(AuditboxError):
    code = "type_mismatch"


class UnboundVariable(AuditboxError):
    code = "unbound_variable"


class InvalidBucket(AuditboxError):
    code = "invalid_bucket"


class MissingParam(AuditboxError):
    code = "missing_param"


class PermissionDenied(AuditboxError):
    code = "permission_denied"


class ConfigError(AuditboxError):
    code = "config_error"
