import { defineConfig } from "vitest/config";

import { SERVICE_BASE } from "./tests/helpers.js";

export default defineConfig({
  test: {
    environment: "happy-dom",
    // The shipped page is hosted by the service itself, so requests are
    // same-origin; tests run under the same assumption.
    environmentOptions: { happyDOM: { url: SERVICE_BASE } },
    globalSetup: "./tests/setup/service.ts",
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
