import { defineConfig } from "vitest/config";

// The annotation service (storyscope serve) listens on 8765 by default.
// In dev the UI runs on the vite port and /api is proxied through.
export default defineConfig({
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8765",
    },
  },
  build: {
    target: "es2022",
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
  },
});
