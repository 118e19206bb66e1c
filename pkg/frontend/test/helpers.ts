/** Shared mocks: the app DOM shell and a route-based fetch fake. */

import { FetchLike } from '../src/api.js';

export const APP_SHELL = `
<main id="app">
  <div id="status-banner" class="banner loading"></div>
  <form id="scope-form" onsubmit="return false">
    <select id="scope-years" multiple></select>
    <select id="scope-season"></select>
    <select id="scope-brands" multiple></select>
    <select id="scope-group"></select>
    <button id="generate" type="button" disabled>Generate</button>
  </form>
  <div id="job-panel"></div>
  <div id="error-panel" class="error hidden"></div>
  <div id="report-viewer"></div>
</main>
`;

export const OPTIONS_FIXTURE = {
  years: [2022, 2023],
  seasons: ['SS'],
  brands: ['Chanel', 'Valentino'],
  groups: ['Dresses & Skirts', 'Topweights', 'Trousers & Shorts', 'Jackets & Coats'],
};

export const GOLDEN_MANIFEST = {
  cover: {
    title: 'Dresses & Skirts report — SS 2022-2023 — Chanel',
    author: 'GPT-FAR',
    generated_at: '2024-01-01T00:00:00+00:00',
  },
  category_pages: [
    { category: 'dresses', description: 'Dresses lean soft and fluid.' },
    { category: 'skirts', description: 'Skirts move toward volume.' },
  ],
};

export interface RouteResult {
  status?: number;
  body: unknown;
}

export type Route = (init?: RequestInit) => RouteResult;

/** Minimal Response stand-in covering everything ApiClient touches. */
function asResponse(result: RouteResult): Response {
  const status = result.status ?? 200;
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => result.body,
  } as unknown as Response;
}

export interface FetchFake {
  fetch: FetchLike;
  calls: { url: string; init?: RequestInit }[];
}

export function makeFetch(routes: Record<string, Route | RouteResult>): FetchFake {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({ url, init });
    for (const [prefix, route] of Object.entries(routes)) {
      if (url.startsWith(prefix)) {
        const result = typeof route === 'function' ? route(init) : route;
        return asResponse(result);
      }
    }
    throw new Error(`no mock route for ${url}`);
  };
  return { fetch: fetchFn, calls };
}

export const instantSleep = () => Promise.resolve();

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
