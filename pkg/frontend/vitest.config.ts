import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'happy-dom',
    environmentOptions: {
      happyDOM: {
        settings: {
          // the viewer iframe points at service URLs that only exist in
          // production; never fetch them from tests
          disableIframePageLoading: true,
        },
      },
    },
    include: ['test/**/*.test.ts'],
  },
});
