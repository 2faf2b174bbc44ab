/**
 * Polling notifications feed.
 *
 * Polls `GET /notifications` on a configurable interval and renders one
 * card per notification. Two states the design insists on:
 *
 * - an empty feed is an explicit "no alerts" message — silence means
 *   everything is within your normal ranges, and the UI says so rather
 *   than showing a blank pane;
 * - a failed poll never blanks the feed. The last successful render
 *   stays up behind a stale-data banner until a poll succeeds again.
 */

import type { ApiClient, NotificationRecord } from "./api.js";
import { renderNotificationCard } from "./render.js";

export const NO_ALERTS_TEXT =
  "No alerts — everything is within your usual ranges.";
export const STALE_TEXT =
  "Could not refresh notifications; showing the last loaded state.";

export interface FeedOptions {
  /** Poll period in milliseconds. */
  intervalMs?: number;
  /** Only show notifications dated on/after this ISO date. */
  since?: string;
}

export class NotificationsFeed {
  private readonly intervalMs: number;
  private readonly since?: string;
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  private hasRendered = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly userId: string,
    options: FeedOptions = {},
  ) {
    this.intervalMs = options.intervalMs ?? 30_000;
    this.since = options.since;
    this.root.classList.add("feed");
  }

  /** Poll immediately, then keep polling on the configured interval. */
  start(): Promise<void> {
    this.stop();
    this.timer = setInterval(() => void this.refresh(), this.intervalMs);
    return this.refresh();
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async refresh(): Promise<void> {
    if (this.inFlight) return; // never stack polls
    this.inFlight = true;
    try {
      const records = await this.client.notifications(this.userId, this.since);
      this.renderRecords(records);
      this.hasRendered = true;
      this.setStale(false);
    } catch {
      // keep whatever is on screen; just flag it as possibly stale
      if (!this.hasRendered) this.renderUnavailable();
      this.setStale(true);
    } finally {
      this.inFlight = false;
    }
  }

  private renderRecords(records: NotificationRecord[]): void {
    const list = document.createElement("div");
    list.className = "feed-cards";
    if (records.length === 0) {
      const empty = document.createElement("p");
      empty.className = "feed-empty";
      empty.textContent = NO_ALERTS_TEXT;
      list.appendChild(empty);
    } else {
      for (const record of records) {
        list.appendChild(renderNotificationCard(record));
      }
    }
    this.root.querySelector(".feed-cards")?.remove();
    this.root.appendChild(list);
  }

  private renderUnavailable(): void {
    // first poll failed: nothing cached to keep showing
    const list = document.createElement("div");
    list.className = "feed-cards";
    const note = document.createElement("p");
    note.className = "feed-empty";
    note.textContent = "Notifications unavailable.";
    list.appendChild(note);
    this.root.querySelector(".feed-cards")?.remove();
    this.root.appendChild(list);
  }

  private setStale(stale: boolean): void {
    const existing = this.root.querySelector(".stale-banner");
    if (!stale) {
      existing?.remove();
      return;
    }
    if (existing) return;
    const banner = document.createElement("p");
    banner.className = "stale-banner";
    banner.textContent = STALE_TEXT;
    this.root.prepend(banner);
  }
}
