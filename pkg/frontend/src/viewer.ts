/** Embedded report viewer: iframe over the server-exported HTML plus page
 * navigation (cover / overall / one per category) and a manifest link. The
 * report itself is never re-rendered client-side. */

import { ApiClient, JobStatus } from './api.js';

// Must mirror the server's anchor slugs (lowercase, non-alnum runs to "-").
export function slugify(text: string): string {
  return text
    .toLowerCase()
    .replace(/[^a-z0-9]+/g, '-')
    .replace(/^-+|-+$/g, '');
}

function titleCase(text: string): string {
  return text
    .split(' ')
    .map((w, i) => (w === 'and' && i > 0 ? w : w.charAt(0).toUpperCase() + w.slice(1)))
    .join(' ');
}

export async function renderReport(
  container: HTMLElement,
  client: ApiClient,
  job: JobStatus,
): Promise<void> {
  if (job.state !== 'done' || !job.report_url || !job.manifest_url) {
    throw new Error(`job ${job.job_id} has no artifact to render`);
  }
  const manifest = await client.manifest(job.manifest_url);
  container.innerHTML = '';

  const nav = document.createElement('nav');
  nav.className = 'report-pages';
  const pages: { label: string; anchor: string }[] = [
    { label: 'Cover', anchor: 'cover' },
    { label: 'Overall', anchor: 'overall' },
    ...manifest.category_pages.map((page) => ({
      label: titleCase(page.category),
      anchor: `cat-${slugify(page.category)}`,
    })),
  ];

  const frame = document.createElement('iframe');
  frame.id = 'report-frame';
  frame.title = manifest.cover.title;
  frame.src = job.report_url;

  for (const page of pages) {
    const link = document.createElement('a');
    link.href = `${job.report_url}#${page.anchor}`;
    link.textContent = page.label;
    link.dataset.anchor = page.anchor;
    link.addEventListener('click', (event) => {
      event.preventDefault();
      frame.src = `${job.report_url}#${page.anchor}`;
    });
    nav.appendChild(link);
  }

  const manifestLink = document.createElement('a');
  manifestLink.id = 'manifest-link';
  manifestLink.href = job.manifest_url;
  manifestLink.download = 'manifest.json';
  manifestLink.textContent = 'Download manifest';

  container.appendChild(nav);
  container.appendChild(frame);
  container.appendChild(manifestLink);
}
