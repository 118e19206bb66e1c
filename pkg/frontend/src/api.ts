/** Typed client for the report service API. All numbers shown in the UI come
 * verbatim from server artifacts; this client never computes statistics. */

export interface CollectionOptions {
  years: number[];
  seasons: string[];
  brands: string[];
  groups: string[];
}

export interface ScopeSelection {
  years: number[];
  season: string;
  brands: string[];
  group: string;
}

export type JobState = 'queued' | 'running' | 'done' | 'failed';

export interface JobStatus {
  job_id: string;
  state: JobState;
  error?: string;
  report_url?: string;
  manifest_url?: string;
}

export interface ReportManifest {
  cover: { title: string; author: string; generated_at: string };
  category_pages: { category: string; description: string }[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchFn: FetchLike;

  constructor(fetchFn?: FetchLike, private base = '') {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      let code = 'http_error';
      let message = `HTTP ${response.status}`;
      try {
        const body = await response.json();
        if (body && body.error) {
          code = body.error.code ?? code;
          message = body.error.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  loadCollections(): Promise<CollectionOptions> {
    return this.request<CollectionOptions>('/api/collections');
  }

  submitReport(scope: ScopeSelection): Promise<{ job_id: string }> {
    return this.request<{ job_id: string }>('/api/reports', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(scope),
    });
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/api/reports/${jobId}`);
  }

  manifest(manifestUrl: string): Promise<ReportManifest> {
    return this.request<ReportManifest>(manifestUrl);
  }
}
