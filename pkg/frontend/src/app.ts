/**
 * Composition root: chat pane + notifications feed against one service.
 *
 * Conversation rules this module owns:
 *
 * - one chat request in flight at a time — the composer is disabled
 *   while the service is thinking;
 * - a failed send is never dropped silently: the user's bubble stays,
 *   marked failed, with a retry control that resends the same text;
 * - the session id is persisted, and on mount the transcript is rebuilt
 *   from the service's session history — the page holds no state the
 *   server does not.
 */

import { ServiceError } from "./api.js";
import type { ApiClient, GroundedResponse } from "./api.js";
import { NotificationsFeed, type FeedOptions } from "./notifications.js";
import { renderEntry } from "./render.js";
import { agentEntry, entriesFromHistory, userEntry } from "./transcript.js";

export interface AppOptions {
  client: ApiClient;
  userId?: string;
  timezone?: string;
  storage?: Pick<Storage, "getItem" | "setItem" | "removeItem">;
  feed?: FeedOptions;
}

export interface AppHandles {
  /** Resolves once the session is bootstrapped (or the error shown). */
  ready: Promise<void>;
  /** Send a message as if typed; resolves when delivery settles. */
  send(text: string): Promise<void>;
  sessionId(): string | null;
  feed: NotificationsFeed;
  /** Stop background polling. */
  stop(): void;
}

const memoryStorage = (): Pick<Storage, "getItem" | "setItem" | "removeItem"> => {
  const map = new Map<string, string>();
  return {
    getItem: (k) => map.get(k) ?? null,
    setItem: (k, v) => void map.set(k, v),
    removeItem: (k) => void map.delete(k),
  };
};

function build(root: HTMLElement): {
  transcript: HTMLElement;
  form: HTMLFormElement;
  input: HTMLInputElement;
  sendButton: HTMLButtonElement;
  feedRoot: HTMLElement;
  refreshButton: HTMLButtonElement;
} {
  root.innerHTML = "";
  root.classList.add("app");

  const chat = document.createElement("main");
  chat.className = "chat";
  const transcript = document.createElement("div");
  transcript.className = "transcript";
  transcript.setAttribute("aria-live", "polite");
  chat.appendChild(transcript);

  const form = document.createElement("form");
  form.className = "composer";
  const input = document.createElement("input");
  input.className = "composer-input";
  input.placeholder = "Ask about your sleep or activity…";
  input.setAttribute("aria-label", "Message");
  const sendButton = document.createElement("button");
  sendButton.className = "composer-send";
  sendButton.type = "submit";
  sendButton.textContent = "Send";
  form.appendChild(input);
  form.appendChild(sendButton);
  chat.appendChild(form);

  const aside = document.createElement("aside");
  aside.className = "notifications";
  const heading = document.createElement("h2");
  heading.textContent = "Notifications";
  const refreshButton = document.createElement("button");
  refreshButton.className = "feed-refresh";
  refreshButton.type = "button";
  refreshButton.textContent = "Refresh";
  const head = document.createElement("div");
  head.className = "feed-head";
  head.appendChild(heading);
  head.appendChild(refreshButton);
  aside.appendChild(head);
  const feedRoot = document.createElement("div");
  feedRoot.className = "feed-root";
  aside.appendChild(feedRoot);

  root.appendChild(chat);
  root.appendChild(aside);
  return { transcript, form, input, sendButton, feedRoot, refreshButton };
}

export function mountApp(root: HTMLElement, options: AppOptions): AppHandles {
  const client = options.client;
  const userId = options.userId ?? "demo";
  const storage = options.storage ?? memoryStorage();
  const storageKey = `sleepql.session.${userId}`;

  const ui = build(root);
  let sessionId: string | null = null;
  let pending = false;

  const setPending = (value: boolean): void => {
    pending = value;
    ui.input.disabled = value || sessionId === null;
    ui.sendButton.disabled = value || sessionId === null;
  };

  const appendBubble = (node: HTMLElement): void => {
    ui.transcript.appendChild(node);
    node.scrollIntoView?.({ block: "end" });
  };

  const appendAgent = (response: GroundedResponse): void => {
    const entry = agentEntry(
      response.text,
      response.kind,
      new Date().toISOString(),
      response.evidence,
    );
    appendBubble(renderEntry(entry));
  };

  const showSendError = (
    text: string,
    bubble: HTMLElement,
    error: unknown,
  ): void => {
    const notice = document.createElement("div");
    notice.className = "send-error";
    const message = document.createElement("span");
    message.textContent =
      error instanceof ServiceError
        ? `Not delivered: ${error.message}`
        : "Not delivered.";
    const retry = document.createElement("button");
    retry.type = "button";
    retry.className = "retry-send";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => {
      notice.remove();
      void deliver(text, bubble);
    });
    notice.appendChild(message);
    notice.appendChild(retry);
    ui.transcript.appendChild(notice);
  };

  const deliver = async (text: string, bubble: HTMLElement): Promise<void> => {
    if (pending || sessionId === null) return;
    setPending(true);
    try {
      const reply = await client.chat(sessionId, text);
      bubble.classList.remove("failed");
      appendAgent(reply.response);
    } catch (error) {
      bubble.classList.add("failed");
      showSendError(text, bubble, error);
    } finally {
      setPending(false);
    }
  };

  const send = async (text: string): Promise<void> => {
    const trimmed = text.trim();
    if (!trimmed || pending || sessionId === null) return;
    const bubble = renderEntry(userEntry(trimmed, new Date().toISOString()));
    appendBubble(bubble);
    ui.input.value = "";
    await deliver(trimmed, bubble);
  };

  ui.form.addEventListener("submit", (event) => {
    event.preventDefault();
    void send(ui.input.value);
  });

  const showConnectError = (error: unknown): void => {
    const notice = document.createElement("div");
    notice.className = "connect-error";
    const message = document.createElement("span");
    message.textContent =
      error instanceof ServiceError
        ? `Cannot reach the service: ${error.message}`
        : "Cannot reach the service.";
    const retry = document.createElement("button");
    retry.type = "button";
    retry.className = "retry-connect";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => {
      notice.remove();
      void bootstrap();
    });
    notice.appendChild(message);
    notice.appendChild(retry);
    ui.transcript.appendChild(notice);
  };

  const bootstrap = async (): Promise<void> => {
    setPending(true);
    try {
      const stored = storage.getItem(storageKey);
      if (stored) {
        try {
          const session = await client.getSession(stored);
          sessionId = session.session_id;
          ui.transcript.innerHTML = "";
          for (const entry of entriesFromHistory(session.history ?? [])) {
            appendBubble(renderEntry(entry));
          }
          return;
        } catch (error) {
          if (!(error instanceof ServiceError) || error.status === 0) {
            throw error; // service down: keep the stored id, offer retry
          }
          storage.removeItem(storageKey); // session expired server-side
        }
      }
      const session = await client.createSession(userId, options.timezone);
      sessionId = session.session_id;
      storage.setItem(storageKey, session.session_id);
    } catch (error) {
      showConnectError(error);
    } finally {
      setPending(false);
    }
  };

  const feed = new NotificationsFeed(ui.feedRoot, client, userId, options.feed);
  ui.refreshButton.addEventListener("click", () => void feed.refresh());

  const ready = bootstrap().then(() => feed.start());

  return {
    ready,
    send,
    sessionId: () => sessionId,
    feed,
    stop: () => feed.stop(),
  };
}
