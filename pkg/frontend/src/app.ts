/** Application wiring: option loading, debounced job submission, status
 * tracking, and the report viewer. One generation tracked at a time;
 * changing the scope cancels the active poll. */

import { ApiClient, ApiError, JobStatus } from './api.js';
import {
  FormElements,
  catalogIsEmpty,
  findFormElements,
  readSelection,
  renderOptions,
  setFormDisabled,
  syncGenerateEnabled,
} from './form.js';
import { PollHandle, makeHandle, pollJob } from './poll.js';
import { renderReport } from './viewer.js';

export interface AppOptions {
  pollIntervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export class App {
  private elements!: FormElements;
  private banner: HTMLElement;
  private jobPanel: HTMLElement;
  private errorPanel: HTMLElement;
  private viewerPanel: HTMLElement;
  private activePoll: PollHandle | null = null;
  private submitting = false;

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private options: AppOptions = {},
  ) {
    this.banner = this.mustFind('status-banner');
    this.jobPanel = this.mustFind('job-panel');
    this.errorPanel = this.mustFind('error-panel');
    this.viewerPanel = this.mustFind('report-viewer');
  }

  private mustFind(id: string): HTMLElement {
    const el = this.root.querySelector(`#${id}`);
    if (!el) throw new Error(`missing #${id}`);
    return el as HTMLElement;
  }

  async start(): Promise<void> {
    this.elements = findFormElements(this.root);
    this.elements.generate.addEventListener('click', () => void this.onGenerate());
    for (const select of [
      this.elements.years,
      this.elements.season,
      this.elements.brands,
      this.elements.group,
    ]) {
      select.addEventListener('change', () => this.onScopeChange());
    }
    await this.loadOptions();
  }

  async loadOptions(): Promise<void> {
    this.banner.textContent = 'Loading collections…';
    this.banner.className = 'banner loading';
    try {
      const options = await this.client.loadCollections();
      if (catalogIsEmpty(options)) {
        this.banner.textContent =
          'The catalog is empty; ingest catwalk images before generating reports.';
        this.banner.className = 'banner empty';
        setFormDisabled(this.elements, true);
        return;
      }
      renderOptions(this.elements, options);
      setFormDisabled(this.elements, false);
      syncGenerateEnabled(this.elements, false);
      this.banner.textContent = '';
      this.banner.className = 'banner hidden';
    } catch (error) {
      this.showRetryBanner(error);
    }
  }

  private showRetryBanner(error: unknown): void {
    const reason = error instanceof Error ? error.message : String(error);
    this.banner.innerHTML = '';
    this.banner.className = 'banner offline';
    this.banner.appendChild(
      document.createTextNode(`Service unreachable (${reason}). `),
    );
    const retry = document.createElement('button');
    retry.id = 'retry';
    retry.textContent = 'Retry';
    retry.addEventListener('click', () => void this.loadOptions());
    this.banner.appendChild(retry);
  }

  private onScopeChange(): void {
    if (this.activePoll) {
      this.activePoll.cancel();
      this.activePoll = null;
      this.jobPanel.textContent = '';
    }
    syncGenerateEnabled(this.elements, this.submitting);
  }

  private setJobState(status: JobStatus): void {
    this.jobPanel.dataset.state = status.state;
    this.jobPanel.textContent = `Job ${status.job_id}: ${status.state}`;
  }

  private showError(message: string): void {
    this.errorPanel.textContent = message;
    this.errorPanel.className = 'error visible';
  }

  private clearError(): void {
    this.errorPanel.textContent = '';
    this.errorPanel.className = 'error hidden';
  }

  async onGenerate(): Promise<void> {
    if (this.submitting) return; // debounce: one in-flight generation
    const scope = readSelection(this.elements);
    if (!scope) return;

    this.submitting = true;
    this.elements.generate.disabled = true;
    this.clearError();
    this.viewerPanel.innerHTML = '';
    if (this.activePoll) this.activePoll.cancel();

    try {
      const { job_id } = await this.client.submitReport(scope);
      this.jobPanel.dataset.state = 'queued';
      this.jobPanel.textContent = `Job ${job_id}: queued`;
      const handle = makeHandle();
      this.activePoll = handle;
      const status = await pollJob(this.client, job_id, handle, {
        intervalMs: this.options.pollIntervalMs ?? 2000,
        sleep: this.options.sleep,
        onUpdate: (update) => this.setJobState(update),
      });
      if (status.state === 'failed') {
        this.showError(status.error ?? 'Report generation failed.');
      } else {
        await renderReport(this.viewerPanel, this.client, status);
      }
    } catch (error) {
      if (error instanceof Error && error.message === 'cancelled') {
        return; // scope changed mid-flight; stay quiet
      }
      if (error instanceof ApiError) {
        this.showError(`${error.code}: ${error.message}`);
      } else {
        this.showError(error instanceof Error ? error.message : String(error));
      }
    } finally {
      this.submitting = false;
      syncGenerateEnabled(this.elements, false);
    }
  }
}
