import { defineConfig } from 'vitest/config'

export default defineConfig({
  server: { port: 5173 },
  test: {
    environment: 'jsdom',
    testTimeout: 30000,
    hookTimeout: 120000,
  },
})
