import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: ["tests/globalSetup.ts"],
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
