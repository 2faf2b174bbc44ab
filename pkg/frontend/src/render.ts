/**
 * DOM builders for transcript bubbles, evidence panels, and notification
 * cards. Framework-free: plain elements, no innerHTML with user data.
 *
 * Rendering is strictly presentational. Every number shown here arrives
 * already computed and already formatted by the service; this module
 * only decides where it goes on screen, never what it is.
 */

import type { Cell, Evidence, NotificationRecord, QueryResult } from "./api.js";
import type { TranscriptEntry } from "./transcript.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Display form of one result cell; tagged envelopes are unwrapped as-is. */
export function formatCell(cell: Cell): string {
  if (cell === null) return "null";
  if (typeof cell === "object") {
    if ("$ts" in cell) return cell.$ts;
    return `${cell.$span_us}us`;
  }
  return String(cell);
}

export function renderResultTable(result: QueryResult): HTMLTableElement {
  const table = el("table", "result-table");
  const head = table.createTHead().insertRow();
  for (const column of result.columns) {
    const th = document.createElement("th");
    th.textContent = column.name;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const row of result.rows) {
    const tr = body.insertRow();
    for (const cell of row) tr.insertCell().textContent = formatCell(cell);
  }
  if (result.rows.length === 0) {
    const tr = body.insertRow();
    const td = tr.insertCell();
    td.colSpan = Math.max(1, result.columns.length);
    td.className = "empty-result";
    td.textContent = "(no rows)";
  }
  return table;
}

/**
 * Collapsible receipts: the canonical query text verbatim, the result
 * rows as a table, and any evaluation warnings. Collapsed by default —
 * the toggle reads "Show evidence" until opened.
 */
export function renderEvidencePanel(evidence: Evidence[]): HTMLElement {
  const wrap = el("div", "evidence");
  const toggle = el("button", "evidence-toggle", "Show evidence");
  toggle.type = "button";
  toggle.setAttribute("aria-expanded", "false");
  const panel = el("div", "evidence-panel");
  panel.hidden = true;

  for (const item of evidence) {
    const block = el("section", "evidence-item");
    const plan = el("pre", "evidence-plan", item.plan);
    block.appendChild(plan);
    block.appendChild(renderResultTable(item.result));
    for (const warning of item.result.warnings) {
      block.appendChild(el("p", "evidence-warning", warning));
    }
    panel.appendChild(block);
  }

  toggle.addEventListener("click", () => {
    panel.hidden = !panel.hidden;
    toggle.textContent = panel.hidden ? "Show evidence" : "Hide evidence";
    toggle.setAttribute("aria-expanded", String(!panel.hidden));
  });

  wrap.appendChild(toggle);
  wrap.appendChild(panel);
  return wrap;
}

/**
 * One transcript bubble. Direction and response kind become CSS classes
 * (`bubble user`, `bubble agent kind-null_data`, …) so refusals and
 * unsupported answers are visually distinct from grounded ones. Agent
 * entries that carry evidence always expose the evidence toggle.
 */
export function renderEntry(entry: TranscriptEntry): HTMLElement {
  const classes = ["bubble", entry.direction];
  if (entry.kind) classes.push(`kind-${entry.kind}`);
  const bubble = el("article", classes.join(" "));
  bubble.appendChild(el("p", "bubble-text", entry.text));

  const meta = el("footer", "bubble-meta");
  meta.appendChild(el("time", "bubble-time", entry.timestamp));
  bubble.appendChild(meta);

  if (entry.evidence.length > 0) {
    bubble.appendChild(renderEvidencePanel(entry.evidence));
  }
  return bubble;
}

/**
 * One proactive notification. Shows the service-composed message, the
 * metric, the observed and baseline readings exactly as delivered, and
 * the delta badge — `delta_percent` when the service computed one, or
 * the far-above wording when the baseline was zero.
 */
export function renderNotificationCard(
  record: NotificationRecord,
): HTMLElement {
  const card = el("article", `card kind-${record.kind}`);

  const head = el("header", "card-head");
  head.appendChild(el("span", "card-metric", record.metric));
  const delta = record.far_above ? "far above baseline" : record.delta_percent;
  head.appendChild(el("span", "card-delta", delta));
  card.appendChild(head);

  card.appendChild(el("p", "card-message", record.message));

  const facts = el("dl", "card-facts");
  const fact = (label: string, value: string) => {
    facts.appendChild(el("dt", undefined, label));
    facts.appendChild(el("dd", undefined, value));
  };
  fact("date", record.date);
  fact("observed", String(record.observed));
  if (record.baseline !== null) fact("baseline", String(record.baseline));
  card.appendChild(facts);

  if (record.evidence.length > 0) {
    card.appendChild(renderEvidencePanel(record.evidence));
  }
  return card;
}
