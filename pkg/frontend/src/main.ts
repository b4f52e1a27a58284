/** Application bootstrap: login, audit picker, and the three panels. */

import { ApiClient, fetchHttp } from "./api.js";
import {
  ConsoleState,
  consoleAvailable,
  initConsole,
  paramNames,
  resultModel,
  runCustom,
  runPredefined,
} from "./console.js";
import {
  CoveragePanel,
  initPanel,
  pollDelayMs,
  refreshCoverage,
  startCollecting,
} from "./coverage.js";
import { reportView } from "./report.js";
import {
  WizardState,
  canSubmit,
  initWizard,
  setMark,
  submitSelection,
  wizardRows,
} from "./scoping.js";
import type { AuditSnapshot, CatalogDoc, QueryDoc, Scalar } from "./types.js";
import {
  clear,
  el,
  renderCoverage,
  renderHistoryEntry,
  renderLogin,
  renderReport,
  renderWizard,
} from "./view.js";

interface App {
  client: ApiClient;
  catalog: CatalogDoc;
  audit: AuditSnapshot | null;
  wizard: WizardState | null;
  coverage: CoveragePanel | null;
  console: ConsoleState | null;
  pollTimer: number | null;
}

const root = document.getElementById("app") ?? document.body;

function boot(): void {
  clear(root as HTMLElement).append(
    renderLogin(async (baseUrl, token) => {
      const client = new ApiClient(baseUrl, token, fetchHttp(fetch.bind(globalThis)));
      try {
        await client.healthz();
        const catalog = await client.getCatalog();
        const app: App = {
          client,
          catalog,
          audit: null,
          wizard: null,
          coverage: null,
          console: null,
          pollTimer: null,
        };
        await showAuditPicker(app);
      } catch (exc) {
        alert(exc instanceof Error ? exc.message : String(exc));
      }
    }),
  );
}

async function showAuditPicker(app: App): Promise<void> {
  const { audits } = await app.client.listAudits();
  const list = el("ul", { class: "audits" });
  for (const audit of audits) {
    list.append(
      el(
        "li",
        {},
        el(
          "button",
          { onclick: () => void openAudit(app, audit.audit_id) },
          `${audit.audit_id} (${audit.state}, ${audit.goal})`,
        ),
      ),
    );
  }
  clear(root as HTMLElement).append(el("section", {}, el("h2", {}, "Audits"), list));
}

async function openAudit(app: App, auditId: string): Promise<void> {
  app.audit = await app.client.getAudit(auditId);
  if (app.audit.state === "draft") {
    app.wizard = initWizard(app.audit, await app.client.getRecommendations(auditId));
  } else {
    app.wizard = null;
  }
  app.coverage = initPanel(auditId, app.audit.state);
  app.coverage = await refreshCoverage(app.client, app.coverage);
  app.console = initConsole(auditId);
  render(app);
  schedulePoll(app);
}

function schedulePoll(app: App): void {
  if (app.pollTimer !== null) {
    window.clearTimeout(app.pollTimer);
    app.pollTimer = null;
  }
  const delay = app.audit ? pollDelayMs(app.audit.state) : null;
  if (delay === null || !app.coverage) return;
  app.pollTimer = window.setTimeout(async () => {
    if (!app.coverage || !app.audit) return;
    app.coverage = await refreshCoverage(app.client, app.coverage);
    render(app);
    schedulePoll(app);
  }, delay);
}

function render(app: App): void {
  const host = clear(root as HTMLElement);
  if (!app.audit) return;
  host.append(el("h1", {}, `${app.audit.audit_id} — ${app.audit.state}`));

  if (app.wizard) {
    host.append(
      renderWizard(
        wizardRows(app.wizard),
        canSubmit(app.wizard),
        app.wizard.banner,
        (questionId, mark) => {
          app.wizard = setMark(app.wizard!, questionId, mark);
          render(app);
        },
        () => {
          void (async () => {
            const outcome = await submitSelection(app.client, app.wizard!);
            app.wizard = outcome.state;
            if (outcome.submitted) {
              app.audit = outcome.state.audit;
              app.wizard = null;
              await openAudit(app, app.audit.audit_id);
              return;
            }
            render(app);
          })();
        },
      ),
    );
    return;
  }

  if (app.coverage) {
    host.append(
      renderCoverage(
        app.coverage,
        (checked) => {
          app.coverage = { ...app.coverage!, overrideChecked: checked };
          render(app);
        },
        () => {
          void (async () => {
            app.coverage = await startCollecting(app.client, app.coverage!);
            app.audit = await app.client.getAudit(app.audit!.audit_id);
            app.coverage.workflowState = app.audit.state;
            render(app);
            schedulePoll(app);
          })();
        },
        () => {
          void (async () => {
            app.coverage = await refreshCoverage(app.client, app.coverage!);
            render(app);
          })();
        },
      ),
    );
  }

  if (app.console && app.audit && consoleAvailable(app.audit.state)) {
    host.append(renderConsole(app));
    host.append(renderReportControls(app));
  }

  const historyHost = el("section", { class: "history" });
  for (const entry of app.console ? [...app.console.history].reverse() : []) {
    const model =
      entry.rows !== null && entry.watermark !== null
        ? resultModel(entry.rows, entry.watermark)
        : null;
    historyHost.append(renderHistoryEntry(entry, model));
  }
  host.append(historyHost);
}

function renderConsole(app: App): HTMLElement {
  const selected = app.audit?.selected?.question_ids ?? [];
  const section = el("section", { class: "console" }, el("h2", {}, "Query console"));

  for (const questionId of selected) {
    const question = app.catalog.questions.find((q) => q.question_id === questionId);
    if (!question) continue;
    const template = app.catalog.templates.find((t) => t.template_id === question.template_id);
    const names = template ? paramNames(template.ast) : [];
    const inputs = new Map<string, HTMLInputElement>();
    const form = el("form", {
      class: "predefined",
      onsubmit: (event) => {
        event.preventDefault();
        const params: Record<string, Scalar> = {};
        for (const [name, input] of inputs) params[name] = input.value;
        void runPredefined(app.client, app.console!, questionId, params).then(() => render(app));
      },
    });
    form.append(el("strong", {}, questionId), el("span", {}, ` ${question.text} `));
    for (const name of names) {
      const input = el("input", { type: "text", placeholder: name }) as HTMLInputElement;
      inputs.set(name, input);
      form.append(el("label", {}, `${name} `, input));
    }
    form.append(el("button", { type: "submit" }, "Run"));
    section.append(form);
  }

  const editor = el("textarea", {
    class: "ast-editor",
    rows: "10",
  }) as HTMLTextAreaElement;
  editor.value = JSON.stringify(
    { match: [{ predicate: "audit:confidence", object: "?v" }], aggregate: { op: "COUNT" } },
    null,
    2,
  );
  const custom = el("form", {
    class: "custom",
    onsubmit: (event) => {
      event.preventDefault();
      let doc: QueryDoc;
      try {
        doc = JSON.parse(editor.value) as QueryDoc;
      } catch (exc) {
        alert(`not valid JSON: ${String(exc)}`);
        return;
      }
      void runCustom(app.client, app.console!, doc).then(() => render(app));
    },
  });
  custom.append(
    el("h3", {}, "Custom query"),
    editor,
    el("button", { type: "submit" }, "Run custom query"),
  );
  section.append(custom);
  return section;
}

function renderReportControls(app: App): HTMLElement {
  return el(
    "section",
    { class: "report-controls" },
    el(
      "button",
      {
        onclick: () => {
          void (async () => {
            try {
              const report = await app.client.generateReport(app.audit!.audit_id, {});
              app.audit = await app.client.getAudit(app.audit!.audit_id);
              const host = clear(root as HTMLElement);
              host.append(
                el("button", { onclick: () => void openAudit(app, app.audit!.audit_id) }, "Back"),
                renderReport(reportView(report)),
              );
            } catch (exc) {
              alert(exc instanceof Error ? exc.message : String(exc));
            }
          })();
        },
      },
      "Generate report",
    ),
  );
}

boot();
