/** Structural validation for query documents, run before submission.
 *
 * Mirrors the server's parse rules so the console can block a request that
 * would be rejected anyway and point at the offending node. Shape checks
 * only: evaluation semantics (type mismatches against live data) stay
 * server-side and are surfaced from the response.
 */

export interface Issue {
  path: string;
  message: string;
}

export const AGGREGATES = [
  "COUNT",
  "COUNT_DISTINCT",
  "AVG",
  "MIN",
  "MAX",
  "SUM",
  "EXISTS",
  "COLLECT_SET",
] as const;

const NEEDS_OVER = new Set(["COUNT_DISTINCT", "AVG", "MIN", "MAX", "SUM", "COLLECT_SET"]);
const FIELD_NAMES = new Set([
  "subject",
  "predicate",
  "object",
  "component_id",
  "run_id",
  "recorded_at",
]);
const FILTER_OPS = new Set(["=", "!=", "<", "<=", ">", ">=", "prefix", "≠", "≤", "≥"]);
const OBJECT_TYPES = new Set([
  "string",
  "integer",
  "decimal",
  "boolean",
  "timestamp",
  "entity_ref",
]);
const PATTERN_KEYS = new Set([
  "subject",
  "predicate",
  "object_type",
  "component_id",
  "run_id",
  "object",
  "ad_hoc",
]);
const QUERY_KEYS = new Set([
  "match",
  "filters",
  "group_by",
  "aggregate",
  "time_bucket",
  "order_by",
  "limit",
]);
const BUCKET_RE = /^(\d+)(ms|s|m|h|d)$/;

export function isVariable(value: unknown): value is string {
  return typeof value === "string" && value.startsWith("?") && value.length > 1;
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function validPredicate(term: unknown): boolean {
  if (typeof term !== "string" || !term) return false;
  const parts = term.split(":");
  return parts.length === 2 && parts[0] !== "" && parts[1] !== "";
}

interface PatternCheck {
  variables: string[];
  constrained: boolean;
}

function checkPattern(raw: unknown, path: string, issues: Issue[]): PatternCheck {
  const out: PatternCheck = { variables: [], constrained: false };
  if (!isRecord(raw)) {
    issues.push({ path, message: "pattern must be an object" });
    return out;
  }
  for (const key of Object.keys(raw)) {
    if (!PATTERN_KEYS.has(key)) {
      issues.push({ path: `${path}.${key}`, message: `unknown pattern field '${key}'` });
    }
  }
  let subject = raw.subject;
  if (isRecord(subject)) {
    const keys = Object.keys(subject);
    if (keys.length !== 1 || keys[0] !== "prefix" || typeof subject.prefix !== "string") {
      issues.push({ path: `${path}.subject`, message: "subject match must be exact or {prefix}" });
    } else {
      out.constrained = true;
    }
    subject = undefined;
  } else if (subject !== undefined && typeof subject !== "string") {
    issues.push({ path: `${path}.subject`, message: "subject must be a string or {prefix}" });
    subject = undefined;
  }
  if (raw.predicate !== undefined) {
    if (!validPredicate(raw.predicate)) {
      issues.push({ path: `${path}.predicate`, message: "predicate must be namespace:local" });
    } else {
      out.constrained = true;
    }
  }
  if (raw.object_type !== undefined) {
    if (typeof raw.object_type !== "string" || !OBJECT_TYPES.has(raw.object_type)) {
      issues.push({ path: `${path}.object_type`, message: `unknown object type` });
    } else {
      out.constrained = true;
    }
  }
  if (raw.object !== undefined && !isVariable(raw.object)) {
    issues.push({ path: `${path}.object`, message: "object slot only accepts a ?variable" });
  }
  for (const slot of ["subject", "component_id", "run_id"] as const) {
    const value = slot === "subject" ? subject : raw[slot];
    if (value === undefined) continue;
    if (typeof value !== "string") {
      issues.push({ path: `${path}.${slot}`, message: `${slot} must be a string` });
      continue;
    }
    if (isVariable(value)) {
      out.variables.push(value);
    } else {
      out.constrained = true;
    }
  }
  if (isVariable(raw.object)) {
    out.variables.push(raw.object);
  }
  const seen = new Set<string>();
  for (const name of out.variables) {
    if (seen.has(name)) {
      issues.push({ path, message: `duplicate variable ${name} within one pattern` });
    }
    seen.add(name);
  }
  if (!out.constrained) {
    issues.push({ path, message: "pattern has no constrained field" });
  }
  return out;
}

/** All structural problems in a query document; empty means submittable. */
export function validateQuery(doc: unknown): Issue[] {
  const issues: Issue[] = [];
  if (!isRecord(doc)) {
    return [{ path: "", message: "query must be an object" }];
  }
  for (const key of Object.keys(doc)) {
    if (!QUERY_KEYS.has(key)) {
      issues.push({ path: key, message: `unknown query field '${key}'` });
    }
  }

  const rawMatch = doc.match;
  const boundVars = new Set<string>();
  let single = false;
  if (!Array.isArray(rawMatch) || rawMatch.length === 0) {
    issues.push({ path: "match", message: "match must be a non-empty list of patterns" });
  } else {
    single = rawMatch.length === 1;
    rawMatch.forEach((raw, i) => {
      const check = checkPattern(raw, `match[${i}]`, issues);
      for (const name of check.variables) boundVars.add(name);
    });
  }

  const checkRef = (ref: unknown, where: string): void => {
    if (isVariable(ref)) {
      if (!boundVars.has(ref)) {
        issues.push({ path: where, message: `unbound variable ${ref}` });
      }
      return;
    }
    if (typeof ref === "string" && FIELD_NAMES.has(ref)) {
      if (!single) {
        issues.push({
          path: where,
          message: `field reference '${ref}' requires a single-pattern query`,
        });
      }
      return;
    }
    issues.push({ path: where, message: "must be a ?variable or field name" });
  };

  const rawAgg = doc.aggregate;
  let groupable = true;
  if (!isRecord(rawAgg) || typeof rawAgg.op !== "string") {
    issues.push({ path: "aggregate", message: "aggregate must be an object with an op" });
    groupable = false;
  } else {
    for (const key of Object.keys(rawAgg)) {
      if (key !== "op" && key !== "over") {
        issues.push({ path: `aggregate.${key}`, message: `unknown aggregate field '${key}'` });
      }
    }
    const op = rawAgg.op;
    if (!(AGGREGATES as readonly string[]).includes(op)) {
      issues.push({ path: "aggregate.op", message: `unknown aggregate op '${op}'` });
    } else {
      if (NEEDS_OVER.has(op) && rawAgg.over === undefined) {
        issues.push({ path: "aggregate", message: `aggregate ${op} requires an over reference` });
      }
      if (op === "EXISTS" && rawAgg.over !== undefined) {
        issues.push({ path: "aggregate.over", message: "EXISTS takes no over reference" });
      }
    }
    if (rawAgg.over !== undefined) {
      checkRef(rawAgg.over, "aggregate.over");
    }
  }

  const rawFilters = doc.filters ?? [];
  if (!Array.isArray(rawFilters)) {
    issues.push({ path: "filters", message: "filters must be a list" });
  } else {
    rawFilters.forEach((f, i) => {
      if (!isRecord(f) || !eqKeys(f, ["lhs", "op", "rhs"])) {
        issues.push({ path: `filters[${i}]`, message: "filter must be {lhs, op, rhs}" });
        return;
      }
      if (typeof f.op !== "string" || !FILTER_OPS.has(f.op)) {
        issues.push({ path: `filters[${i}].op`, message: `unknown filter op` });
      }
      checkRef(f.lhs, `filters[${i}].lhs`);
      if (isRecord(f.rhs) || Array.isArray(f.rhs)) {
        issues.push({ path: `filters[${i}].rhs`, message: "rhs must be a scalar literal" });
      }
    });
  }

  const groupKeys: string[] = [];
  const rawGroup = doc.group_by ?? [];
  if (!Array.isArray(rawGroup)) {
    issues.push({ path: "group_by", message: "group_by must be a list" });
  } else if (groupable) {
    rawGroup.forEach((g, i) => {
      checkRef(g, `group_by[${i}]`);
      if (typeof g === "string") {
        if (groupKeys.includes(g)) {
          issues.push({ path: `group_by[${i}]`, message: `duplicate group_by entry '${g}'` });
        }
        groupKeys.push(g);
      }
    });
  }

  const bucket = doc.time_bucket;
  if (bucket !== undefined) {
    const m = typeof bucket === "string" ? BUCKET_RE.exec(bucket) : null;
    if (!m) {
      issues.push({ path: "time_bucket", message: "time_bucket must look like '1d'" });
    } else if (Number(m[1]) === 0) {
      issues.push({ path: "time_bucket", message: "time_bucket duration must be positive" });
    }
  }

  const rawOrder = doc.order_by ?? [];
  if (!Array.isArray(rawOrder)) {
    issues.push({ path: "order_by", message: "order_by must be a list" });
  } else {
    const legal = new Set([...groupKeys, "value"]);
    if (bucket !== undefined) legal.add("bucket");
    rawOrder.forEach((o, i) => {
      if (!isRecord(o) || !("key" in o) || Object.keys(o).some((k) => k !== "key" && k !== "dir")) {
        issues.push({ path: `order_by[${i}]`, message: "order_by entry must be {key, dir?}" });
        return;
      }
      const dir = o.dir ?? "asc";
      if (dir !== "asc" && dir !== "desc") {
        issues.push({ path: `order_by[${i}].dir`, message: "dir must be asc or desc" });
      }
      if (typeof o.key !== "string" || !legal.has(o.key)) {
        issues.push({
          path: `order_by[${i}].key`,
          message: "key must be a group key, 'bucket', or 'value'",
        });
      }
    });
  }

  const limit = doc.limit;
  if (limit !== undefined) {
    if (typeof limit !== "number" || !Number.isInteger(limit) || limit < 1) {
      issues.push({ path: "limit", message: "limit must be an integer >= 1" });
    }
  }

  return issues;
}

function eqKeys(obj: Record<string, unknown>, keys: string[]): boolean {
  const own = Object.keys(obj).sort();
  return own.length === keys.length && [...keys].sort().every((k, i) => own[i] === k);
}
