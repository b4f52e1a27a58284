/** Fixture loading and a scripted HTTP fake for contract tests.
 *
 * Fixtures are request/response pairs recorded from the real service by
 * tools/record_fixtures.py; tests replay the responses and assert on what
 * the client actually sent.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { HttpFn, HttpRequest, HttpResponse, TransportError } from "../src/api.js";

export interface Fixture {
  request: {
    method: string;
    path: string;
    body?: any;
    idempotency_key?: string;
    token?: string;
  };
  response: { status: number; body: any };
}

const here = dirname(fileURLToPath(import.meta.url));
export const fixtures: Record<string, Fixture> = JSON.parse(
  readFileSync(join(here, "fixtures", "fixtures.json"), "utf-8"),
);

export function fixture(name: string): Fixture {
  const found = fixtures[name];
  if (!found) throw new Error(`no fixture named '${name}'; rerun tools/record_fixtures.py`);
  return found;
}

type Routed = HttpResponse | "transport-error";

export class FakeHttp {
  readonly requests: HttpRequest[] = [];
  private readonly routes = new Map<string, Routed[]>();

  /** Queue responses for METHOD+path; the last one repeats forever. */
  on(method: string, path: string, ...sources: (Fixture | HttpResponse | "transport-error")[]): this {
    const queue = sources.map((s) =>
      s === "transport-error" ? s : "response" in s ? s.response : s,
    );
    this.routes.set(`${method} ${path}`, queue as Routed[]);
    return this;
  }

  handler(): HttpFn {
    return async (req) => {
      this.requests.push(req);
      const key = `${req.method} ${req.url}`;
      const queue = this.routes.get(key);
      if (!queue || queue.length === 0) {
        throw new Error(`no fixture route for ${key}`);
      }
      const next = queue.length > 1 ? (queue.shift() as Routed) : queue[0];
      if (next === "transport-error") {
        throw new TransportError("connection refused");
      }
      return { status: next.status, body: JSON.parse(JSON.stringify(next.body)) };
    };
  }

  sent(method: string, path: string): HttpRequest[] {
    return this.requests.filter((r) => r.method === method && r.url === path);
  }
}

/** Every number in a JSON tree (booleans excluded). */
export function numericLeaves(node: unknown): number[] {
  const out: number[] = [];
  const walk = (value: unknown): void => {
    if (typeof value === "number") {
      out.push(value);
    } else if (Array.isArray(value)) {
      value.forEach(walk);
    } else if (typeof value === "object" && value !== null) {
      Object.values(value).forEach(walk);
    }
  };
  walk(node);
  return out;
}
