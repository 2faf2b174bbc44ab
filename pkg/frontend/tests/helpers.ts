/** Shared test constants and small utilities. */

export const SERVICE_BIND = "127.0.0.1:18766";
export const SERVICE_BASE = `http://${SERVICE_BIND}`;

/** In-memory stand-in for window.localStorage. */
export function memoryStorage(): Pick<
  Storage,
  "getItem" | "setItem" | "removeItem"
> {
  const map = new Map<string, string>();
  return {
    getItem: (key) => map.get(key) ?? null,
    setItem: (key, value) => void map.set(key, value),
    removeItem: (key) => void map.delete(key),
  };
}

/** Poll until `check` stops throwing (assertion helper for async DOM). */
export async function eventually(
  check: () => void,
  timeoutMs = 10_000,
  stepMs = 50,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      check();
      return;
    } catch (error) {
      if (Date.now() > deadline) throw error;
      await new Promise((r) => setTimeout(r, stepMs));
    }
  }
}
