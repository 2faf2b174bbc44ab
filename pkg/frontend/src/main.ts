/**
 * Browser entry point.
 *
 * Mounts the app against the page's own origin by default (the service
 * can host the built UI), overridable per URL for development:
 *
 *   ?api=http://127.0.0.1:8777   target service origin
 *   ?user=demo                   user whose data to converse about
 *   ?since=2025-06-25            earliest notification date to show
 *   ?poll=30000                  notification poll interval (ms)
 */

import { SleepqlClient } from "./api.js";
import { mountApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const pollParam = Number(params.get("poll") ?? "");

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

mountApp(root, {
  client: new SleepqlClient(params.get("api") ?? ""),
  userId: params.get("user") ?? "demo",
  storage: window.localStorage,
  feed: {
    since: params.get("since") ?? undefined,
    ...(Number.isFinite(pollParam) && pollParam > 0
      ? { intervalMs: pollParam }
      : {}),
  },
});
