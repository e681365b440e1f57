import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // the e2e spec boots the real annotation service
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
