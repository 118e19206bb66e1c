/** End-to-end UI flows against mocked endpoints: option loading, debounced
 * submission, job state transitions, viewer rendering, and failure paths. */

import { beforeEach, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { App } from '../src/app.js';
import {
  APP_SHELL,
  GOLDEN_MANIFEST,
  OPTIONS_FIXTURE,
  RouteResult,
  flush,
  instantSleep,
  makeFetch,
} from './helpers.js';

function mountApp(fetchFake: ReturnType<typeof makeFetch>) {
  document.body.innerHTML = APP_SHELL;
  const root = document.getElementById('app') as HTMLElement;
  const app = new App(root, new ApiClient(fetchFake.fetch), {
    pollIntervalMs: 1,
    sleep: instantSleep,
  });
  return { app, root };
}

function completeSelection(root: HTMLElement) {
  const years = root.querySelector('#scope-years') as HTMLSelectElement;
  const brands = root.querySelector('#scope-brands') as HTMLSelectElement;
  for (const option of Array.from(years.options)) option.selected = true;
  brands.options[0].selected = true;
  years.dispatchEvent(new Event('change'));
  brands.dispatchEvent(new Event('change'));
}

function happyRoutes(states: string[]) {
  let statusCall = 0;
  let posts = 0;
  const routes = {
    '/api/collections': { body: OPTIONS_FIXTURE } as RouteResult,
    '/api/reports/jb1/artifact/manifest.json': { body: GOLDEN_MANIFEST } as RouteResult,
    '/api/reports/jb1': () => {
      const state = states[Math.min(statusCall, states.length - 1)];
      statusCall += 1;
      const body: Record<string, unknown> = { job_id: 'jb1', state };
      if (state === 'done') {
        body.report_url = '/api/reports/jb1/artifact/index.html';
        body.manifest_url = '/api/reports/jb1/artifact/manifest.json';
      }
      if (state === 'failed') body.error = 'NoData: scope has no garments';
      return { body };
    },
    '/api/reports': () => {
      posts += 1;
      return { status: 202, body: { job_id: 'jb1' } };
    },
  };
  return { routes, postCount: () => posts };
}

describe('app', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  it('loads options into the form', async () => {
    const fake = makeFetch({ '/api/collections': { body: OPTIONS_FIXTURE } });
    const { app, root } = mountApp(fake);
    await app.start();
    const brands = root.querySelector('#scope-brands') as HTMLSelectElement;
    expect(brands.options.length).toBe(2);
    expect(root.querySelector('#status-banner')?.className).toContain('hidden');
  });

  it('disables the form for an empty catalog', async () => {
    const fake = makeFetch({
      '/api/collections': { body: { years: [], seasons: [], brands: [], groups: [] } },
    });
    const { app, root } = mountApp(fake);
    await app.start();
    const banner = root.querySelector('#status-banner') as HTMLElement;
    expect(banner.textContent).toContain('empty');
    expect((root.querySelector('#generate') as HTMLButtonElement).disabled).toBe(true);
  });

  it('shows a retry banner on 503 and recovers on retry', async () => {
    let healthy = false;
    const fake = makeFetch({
      '/api/collections': () =>
        healthy
          ? { body: OPTIONS_FIXTURE }
          : {
              status: 503,
              body: { error: { code: 'backend_unavailable', message: 'down' } },
            },
    });
    const { app, root } = mountApp(fake);
    await app.start();
    const retry = root.querySelector('#retry') as HTMLButtonElement;
    expect(retry).toBeTruthy();
    healthy = true;
    retry.click();
    await flush();
    const brands = root.querySelector('#scope-brands') as HTMLSelectElement;
    expect(brands.options.length).toBe(2);
  });

  it('runs the full generate flow: queued -> running -> done -> viewer', async () => {
    const { routes } = happyRoutes(['queued', 'running', 'done']);
    const fake = makeFetch(routes);
    const { app, root } = mountApp(fake);
    await app.start();
    completeSelection(root);

    await app.onGenerate();

    const frame = root.querySelector('#report-frame') as HTMLIFrameElement;
    expect(frame).toBeTruthy();
    expect(frame.src).toContain('/api/reports/jb1/artifact/index.html');
    const nav = Array.from(
      root.querySelectorAll('#report-viewer nav.report-pages a'),
    ).map((a) => a.textContent);
    expect(nav).toEqual(['Cover', 'Overall', 'Dresses', 'Skirts']);
    const manifestLink = root.querySelector('#manifest-link') as HTMLAnchorElement;
    expect(manifestLink.href).toContain('manifest.json');
    expect(root.querySelector('#job-panel')?.textContent).toContain('done');
  });

  it('double-click submits a single job', async () => {
    const { routes, postCount } = happyRoutes(['queued', 'running', 'done']);
    const fake = makeFetch(routes);
    const { app, root } = mountApp(fake);
    await app.start();
    completeSelection(root);

    const first = app.onGenerate();
    const second = app.onGenerate(); // debounce: button already in flight
    await Promise.all([first, second]);
    expect(postCount()).toBe(1);
  });

  it('renders the server error message for failed jobs', async () => {
    const { routes } = happyRoutes(['queued', 'failed']);
    const fake = makeFetch(routes);
    const { app, root } = mountApp(fake);
    await app.start();
    completeSelection(root);

    await app.onGenerate();

    const panel = root.querySelector('#error-panel') as HTMLElement;
    expect(panel.className).toContain('visible');
    expect(panel.textContent).toContain('NoData: scope has no garments');
    // no stale report link survives a failed job
    expect(root.querySelector('#report-frame')).toBeNull();
  });

  it('renders field-level 400 errors from the server', async () => {
    const fake = makeFetch({
      '/api/collections': { body: OPTIONS_FIXTURE },
      '/api/reports': {
        status: 400,
        body: { error: { code: 'invalid_scope', message: "brand 'Dior' not in catalog" } },
      },
    });
    const { app, root } = mountApp(fake);
    await app.start();
    completeSelection(root);

    await app.onGenerate();

    const panel = root.querySelector('#error-panel') as HTMLElement;
    expect(panel.textContent).toContain('invalid_scope');
    expect(panel.textContent).toContain('Dior');
  });
});
