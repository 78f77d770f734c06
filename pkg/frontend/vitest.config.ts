import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node", // DOM suites opt in per file
  },
});
