import { afterEach, describe, expect, test } from "vitest";

import { ServiceError } from "../../src/api.js";
import type { ChatReply, HistoryEntry } from "../../src/api.js";
import { mountApp, type AppHandles } from "../../src/app.js";
import {
  chatReply,
  deferred,
  FakeClient,
  sessionInfo,
  simpleResponse,
} from "../fakes.js";
import { eventually, memoryStorage } from "../helpers.js";

const QUIET_FEED = { intervalMs: 3_600_000 };
const mounted: AppHandles[] = [];

function mount(
  client: FakeClient,
  storage = memoryStorage(),
): { handles: AppHandles; root: HTMLElement; storage: typeof storage } {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const handles = mountApp(root, {
    client,
    userId: "demo",
    storage,
    feed: QUIET_FEED,
  });
  mounted.push(handles);
  return { handles, root, storage };
}

afterEach(() => {
  while (mounted.length) mounted.pop()?.stop();
  document.body.innerHTML = "";
});

const input = (root: HTMLElement) =>
  root.querySelector<HTMLInputElement>(".composer-input")!;
const sendButton = (root: HTMLElement) =>
  root.querySelector<HTMLButtonElement>(".composer-send")!;

describe("mountApp bootstrap", () => {
  test("creates a session, stores its id, and enables the composer", async () => {
    const client = new FakeClient();
    const { handles, root, storage } = mount(client);
    await handles.ready;
    expect(client.createSessionCalls).toEqual([["demo", undefined]]);
    expect(handles.sessionId()).toBe("s-1");
    expect(storage.getItem("sleepql.session.demo")).toBe("s-1");
    expect(input(root).disabled).toBe(false);
    expect(sendButton(root).disabled).toBe(false);
  });

  test("rebuilds the transcript from stored session history", async () => {
    const history: HistoryEntry[] = [
      {
        role: "user",
        text: "How many steps did I take yesterday?",
        kind: null,
        timestamp: "t1",
      },
      {
        role: "agent",
        text: "You took 6,000 steps yesterday.",
        kind: "simple",
        timestamp: "t1",
        response: simpleResponse("You took 6,000 steps yesterday."),
      },
    ];
    const client = new FakeClient();
    client.onGetSession = async (id) =>
      sessionInfo({ session_id: id, history });
    const storage = memoryStorage();
    storage.setItem("sleepql.session.demo", "s-known");

    const { handles, root } = mount(client, storage);
    await handles.ready;
    expect(client.getSessionCalls).toEqual(["s-known"]);
    expect(client.createSessionCalls).toEqual([]); // resumed, not recreated
    expect(handles.sessionId()).toBe("s-known");
    const bubbles = root.querySelectorAll(".bubble");
    expect(bubbles).toHaveLength(2);
    expect(bubbles[1]?.textContent).toContain("6,000 steps");
    expect(bubbles[1]?.querySelector(".evidence-toggle")).not.toBeNull();
  });

  test("a session the service no longer knows is replaced, not fatal", async () => {
    const client = new FakeClient(); // default getSession: 404
    const storage = memoryStorage();
    storage.setItem("sleepql.session.demo", "s-dead");
    const { handles } = mount(client, storage);
    await handles.ready;
    expect(client.getSessionCalls).toEqual(["s-dead"]);
    expect(client.createSessionCalls).toHaveLength(1);
    expect(storage.getItem("sleepql.session.demo")).toBe("s-1");
  });

  test("an unreachable service shows a retry control and keeps typing off", async () => {
    const client = new FakeClient();
    client.onCreateSession = async () => {
      throw new ServiceError(0, "service unreachable: connect ECONNREFUSED");
    };
    const { handles, root } = mount(client);
    await handles.ready;
    expect(handles.sessionId()).toBeNull();
    expect(input(root).disabled).toBe(true);
    const notice = root.querySelector(".connect-error");
    expect(notice?.textContent).toContain("Cannot reach the service");

    client.onCreateSession = async (userId) =>
      sessionInfo({ user_id: userId }); // service comes back
    notice?.querySelector<HTMLButtonElement>(".retry-connect")?.click();
    await eventually(() => {
      expect(handles.sessionId()).toBe("s-1");
      expect(root.querySelector(".connect-error")).toBeNull();
      expect(input(root).disabled).toBe(false);
    });
  });
});

describe("sending", () => {
  test("shows the user bubble immediately and the answer when it lands", async () => {
    const client = new FakeClient();
    const { handles, root } = mount(client);
    await handles.ready;
    await handles.send("How many steps did I take yesterday?");
    const bubbles = root.querySelectorAll(".bubble");
    expect(bubbles).toHaveLength(2);
    expect(bubbles[0]?.classList.contains("user")).toBe(true);
    expect(bubbles[1]?.classList.contains("agent")).toBe(true);
    expect(bubbles[1]?.classList.contains("kind-simple")).toBe(true);
    expect(client.chatCalls).toEqual([
      ["s-1", "How many steps did I take yesterday?"],
    ]);
  });

  test("only one request in flight: composer locks, extra sends ignored", async () => {
    const client = new FakeClient();
    const gate = deferred<ChatReply>();
    client.onChat = () => gate.promise;
    const { handles, root } = mount(client);
    await handles.ready;

    const pending = handles.send("first question");
    await eventually(() => expect(client.chatCalls).toHaveLength(1));
    expect(input(root).disabled).toBe(true);
    expect(sendButton(root).disabled).toBe(true);

    await handles.send("second question"); // ignored while pending
    expect(client.chatCalls).toHaveLength(1);
    expect(root.querySelectorAll(".bubble.user")).toHaveLength(1);

    gate.resolve(chatReply("the answer"));
    await pending;
    expect(input(root).disabled).toBe(false);
    expect(root.querySelectorAll(".bubble.agent")).toHaveLength(1);
  });

  test("a failed send is marked and retryable with the same text", async () => {
    const client = new FakeClient();
    client.onChat = async () => {
      throw new ServiceError(503, "translation backend unavailable");
    };
    const { handles, root } = mount(client);
    await handles.ready;
    await handles.send("How did I sleep?");

    const bubble = root.querySelector(".bubble.user")!;
    expect(bubble.classList.contains("failed")).toBe(true);
    const notice = root.querySelector(".send-error");
    expect(notice?.textContent).toContain(
      "Not delivered: translation backend unavailable",
    );

    client.onChat = async (id, text) => chatReply(`echo: ${text}`);
    notice?.querySelector<HTMLButtonElement>(".retry-send")?.click();
    await eventually(() => {
      expect(root.querySelector(".send-error")).toBeNull();
      expect(bubble.classList.contains("failed")).toBe(false);
      expect(root.querySelectorAll(".bubble.agent")).toHaveLength(1);
    });
    expect(client.chatCalls).toEqual([
      ["s-1", "How did I sleep?"],
      ["s-1", "How did I sleep?"],
    ]);
  });

  test("blank input sends nothing", async () => {
    const client = new FakeClient();
    const { handles, root } = mount(client);
    await handles.ready;
    await handles.send("   ");
    expect(client.chatCalls).toHaveLength(0);
    expect(root.querySelectorAll(".bubble")).toHaveLength(0);
  });

  test("submitting the form sends the typed text and clears the box", async () => {
    const client = new FakeClient();
    const { handles, root } = mount(client);
    await handles.ready;
    input(root).value = "  How many steps today?  ";
    root
      .querySelector("form.composer")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    await eventually(() => {
      expect(client.chatCalls).toEqual([["s-1", "How many steps today?"]]);
      expect(input(root).value).toBe("");
    });
  });
});
