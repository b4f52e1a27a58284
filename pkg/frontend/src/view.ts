/** DOM rendering. Pure functions from view models to elements; every
 * handler is injected so this layer stays free of client state.
 */

import type { ChartModel, HistoryEntry, ResultModel } from "./console.js";
import type { CoveragePanel } from "./coverage.js";
import { coverageRows, startEnabled } from "./coverage.js";
import type { ReportView } from "./report.js";
import type { Scalar } from "./types.js";
import type { Issue } from "./validate.js";
import type { SubmitGate, WizardRow } from "./scoping.js";

type Child = Node | string;

export function el(
  tag: string,
  attrs: Record<string, string | boolean | ((event: Event) => void)> = {},
  ...children: Child[]
): HTMLElement {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(name.replace(/^on/, ""), value);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(name, "");
    } else {
      node.setAttribute(name, value);
    }
  }
  node.append(...children);
  return node;
}

export function clear(node: HTMLElement): HTMLElement {
  node.replaceChildren();
  return node;
}

function scalarText(value: Scalar | Scalar[]): string {
  if (value === null) return "—";
  if (Array.isArray(value)) return value.map((v) => String(v)).join(", ");
  return String(value);
}

// -- login --------------------------------------------------------------

export function renderLogin(
  onConnect: (baseUrl: string, token: string) => void,
): HTMLElement {
  const url = el("input", {
    type: "text",
    value: window.location.origin,
    placeholder: "service base URL",
  }) as HTMLInputElement;
  const token = el("input", {
    type: "password",
    placeholder: "access token",
  }) as HTMLInputElement;
  return el(
    "form",
    {
      class: "login",
      onsubmit: (event) => {
        event.preventDefault();
        onConnect(url.value.trim(), token.value.trim());
      },
    },
    el("h1", {}, "auditbox"),
    el("label", {}, "Server", url),
    el("label", {}, "Token", token),
    el("button", { type: "submit" }, "Connect"),
  );
}

// -- scoping wizard -------------------------------------------------------

export function renderWizard(
  rows: WizardRow[],
  gate: SubmitGate,
  banner: string | null,
  onMark: (questionId: string, mark: "accepted" | "rejected") => void,
  onSubmit: () => void,
): HTMLElement {
  const root = el("section", { class: "wizard" }, el("h2", {}, "Scope the audit"));
  if (banner) root.append(el("div", { class: "banner" }, banner));
  for (const row of rows) {
    root.append(
      el(
        "article",
        { class: `rec mark-${row.mark}` },
        el("header", {}, el("strong", {}, row.questionId), ` score ${row.score}`),
        el("p", {}, row.text),
        el("ul", {}, ...row.reasons.map((reason) => el("li", {}, reason))),
        row.relatedRisks.length
          ? el("p", { class: "risks" }, `related risks: ${row.relatedRisks.join(", ")}`)
          : "",
        el(
          "div",
          { class: "mark-buttons" },
          el("button", { onclick: () => onMark(row.questionId, "accepted") }, "Accept"),
          el("button", { onclick: () => onMark(row.questionId, "rejected") }, "Reject"),
        ),
      ),
    );
  }
  const submit = el("button", { class: "submit", onclick: () => onSubmit() }, "Submit selection");
  if (!gate.ok) {
    submit.setAttribute("disabled", "");
    root.append(el("p", { class: "gate-reason" }, gate.reason ?? ""));
  }
  root.append(submit);
  return root;
}

// -- coverage panel ---------------------------------------------------------

export function renderCoverage(
  panel: CoveragePanel,
  onOverrideToggle: (checked: boolean) => void,
  onStart: () => void,
  onRetry: () => void,
): HTMLElement {
  const root = el("section", { class: "coverage" }, el("h2", {}, "Collector coverage"));
  if (panel.fetchError) {
    root.append(
      el(
        "div",
        { class: "banner" },
        panel.fetchError,
        " ",
        el("button", { onclick: () => onRetry() }, "Retry"),
      ),
    );
  }
  if (panel.coverage) {
    root.append(el("p", {}, `overall ratio: ${panel.coverage.overall_ratio}`));
    const list = el("ul", { class: "questions" });
    for (const row of coverageRows(panel)) {
      const item = el(
        "li",
        { class: row.covered ? "covered" : "missing" },
        el("strong", {}, row.questionId),
        row.covered ? " covered" : " missing:",
      );
      if (!row.covered) {
        item.append(
          el(
            "ul",
            {},
            ...row.missingPatterns.map((p) => el("li", { class: "pattern" }, JSON.stringify(p))),
          ),
        );
      }
      list.append(item);
    }
    root.append(list);
  } else {
    root.append(el("p", {}, "coverage not loaded yet"));
  }
  const override = el("input", {
    type: "checkbox",
    onchange: (event) => onOverrideToggle((event.target as HTMLInputElement).checked),
  }) as HTMLInputElement;
  override.checked = panel.overrideChecked;
  const start = el("button", { onclick: () => onStart() }, "Start collecting");
  if (!startEnabled(panel)) start.setAttribute("disabled", "");
  root.append(el("label", { class: "override" }, override, " override coverage gate"), start);
  return root;
}

// -- query console ------------------------------------------------------

export function renderIssues(issues: Issue[]): HTMLElement {
  return el(
    "ul",
    { class: "issues" },
    ...issues.map((issue) =>
      el("li", { "data-path": issue.path }, el("code", {}, issue.path), ` ${issue.message}`),
    ),
  );
}

function renderChart(model: ChartModel): HTMLElement {
  const width = 640;
  const height = 240;
  const pad = 40;
  const all = model.series.flatMap((s) => s.points);
  const buckets = [...new Set(all.map((p) => p.bucket))].sort();
  const values = all.map((p) => p.value);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const x = (bucket: string): number =>
    pad + (buckets.indexOf(bucket) / Math.max(buckets.length - 1, 1)) * (width - 2 * pad);
  const y = (value: number): number =>
    hi === lo ? height / 2 : height - pad - ((value - lo) / (hi - lo)) * (height - 2 * pad);

  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart");
  for (const series of model.series) {
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "currentColor");
    line.setAttribute(
      "points",
      series.points.map((p) => `${x(p.bucket)},${y(p.value)}`).join(" "),
    );
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = series.label;
    line.append(title);
    svg.append(line);
  }
  const wrap = el("figure", { class: "chart-wrap" });
  wrap.append(svg);
  wrap.append(
    el(
      "figcaption",
      {},
      model.series
        .map((s) => `${s.label}: ${s.points.map((p) => `${p.bucket}→${p.value}`).join(" ")}`)
        .join(" | "),
    ),
  );
  return wrap;
}

export function renderResult(model: ResultModel): HTMLElement {
  const root = el("div", { class: "result" });
  if (model.kind === "chart") {
    root.append(renderChart(model));
  } else if (model.kind === "set-table") {
    const table = el("table", {});
    for (const group of model.groups) {
      table.append(
        el("tr", {}, el("th", {}, group.label), el("td", {}, scalarText(group.members))),
      );
    }
    root.append(table);
  } else {
    const table = el("table", {});
    table.append(el("tr", {}, ...model.columns.map((c) => el("th", {}, c))));
    for (const row of model.cells) {
      table.append(el("tr", {}, ...row.map((cell) => el("td", {}, scalarText(cell)))));
    }
    root.append(table);
  }
  root.append(el("p", { class: "watermark" }, `as of watermark ${model.watermark}`));
  return root;
}

export function renderHistoryEntry(entry: HistoryEntry, model: ResultModel | null): HTMLElement {
  const root = el("article", { class: "history-entry" }, el("h3", {}, entry.label));
  if (entry.verdict) root.append(el("p", { class: `verdict-${entry.verdict}` }, entry.verdict));
  if (entry.issues.length) root.append(renderIssues(entry.issues));
  if (entry.error) {
    root.append(el("div", { class: "banner" }, `${entry.error.code}: ${entry.error.message}`));
  }
  if (model) root.append(renderResult(model));
  return root;
}

// -- report ----------------------------------------------------------------

export function renderReport(view: ReportView): HTMLElement {
  const root = el(
    "section",
    { class: "report" },
    el("h2", {}, `Audit report: ${view.auditId}`),
    el("p", {}, `goal ${view.goal}, catalog ${view.catalogVersion}`),
    el("p", {}, `generated at ${view.generatedAt}, watermark ${view.watermark}`),
    el("p", {}, `coverage ratio ${view.overallCoverageRatio}`),
  );
  for (const answer of view.answers) {
    const block = el(
      "article",
      { class: "answer" },
      el("h3", {}, answer.questionId),
      answer.verdict ? el("p", { class: `verdict-${answer.verdict}` }, answer.verdict) : "",
    );
    block.append(renderResult(answer.result));
    root.append(block);
  }
  return root;
}
