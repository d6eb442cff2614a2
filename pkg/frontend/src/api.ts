// Typed client for the /v1 Evaluation API. The dashboard talks to the
// service exclusively through this module.

export interface SystemSummary {
  name: string;
  version: string;
  summary: string;
}

export interface SysDefDoc {
  name: string;
  version: string;
  documentation: { contact: string; summary: string; description: string };
  docker_image: string;
  build_command?: string;
  run_command: string;
  build_parameters: Record<string, unknown>;
  run_parameters: Record<string, unknown>;
  results: Record<string, { path: string; type: string }>;
}

export interface StatusDoc {
  status: string;
  since: string;
  message?: string;
  job?: { phase: string; backend: string; job_id: string };
}

export interface SessionSummary {
  experiment_id: string;
  meta: { creator: string; created_at: string; description: string; status: string };
  system: { name: string; version: string };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: unknown = null,
  ) {
    super(message);
  }

  render(): string {
    return `${this.code}: ${this.message}`;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    public token: string | null = null,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(method: string, path: string, init: RequestInit = {}): Promise<Response> {
    const headers = new Headers(init.headers);
    if (this.token) {
      headers.set("Authorization", `Bearer ${this.token}`);
    }
    const response = await this.fetchFn(`${this.baseUrl}/v1${path}`, {
      ...init,
      method,
      headers,
    });
    if (!response.ok) {
      let code = "internal";
      let message = response.statusText;
      let detail: unknown = null;
      try {
        const body = await response.json();
        code = body.code ?? code;
        message = body.message ?? message;
        detail = body.detail ?? null;
      } catch {
        // non-JSON error body; keep the defaults
      }
      throw new ApiError(response.status, code, message, detail);
    }
    return response;
  }

  private async json<T>(method: string, path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.request(method, path, init);
    return (await response.json()) as T;
  }

  private jsonBody(payload: unknown): RequestInit {
    return {
      body: JSON.stringify(payload),
      headers: { "Content-Type": "application/json" },
    };
  }

  systems(): Promise<SystemSummary[]> {
    return this.json("GET", "/systems");
  }

  system(name: string, version: string): Promise<SysDefDoc> {
    return this.json(
      "GET",
      `/systems/${encodeURIComponent(name)}/${encodeURIComponent(version)}`,
    );
  }

  async createSession(
    system: { name: string; version: string },
    buildParameters: Record<string, unknown>,
    runParameters: Record<string, unknown>,
    description: string,
  ): Promise<string> {
    const body = await this.json<{ experiment_id: string }>(
      "POST",
      "/session",
      this.jsonBody({
        system,
        build_parameters: buildParameters,
        run_parameters: runParameters,
        description,
      }),
    );
    return body.experiment_id;
  }

  sessions(): Promise<SessionSummary[]> {
    return this.json("GET", "/session");
  }

  status(id: string): Promise<StatusDoc> {
    return this.json("GET", `/session/${id}/status`);
  }

  async log(id: string): Promise<string> {
    const response = await this.request("GET", `/session/${id}/log`);
    return response.text();
  }

  setParameters(id: string, parameters: Record<string, unknown>): Promise<{ status: string }> {
    return this.json("POST", `/session/${id}/parameters`, this.jsonBody({ parameters }));
  }

  async uploadParameter(id: string, name: string, file: Blob, filename: string): Promise<void> {
    const form = new FormData();
    form.append("name", name);
    form.append("file", file, filename);
    await this.request("POST", `/session/${id}/parameter`, { body: form });
  }

  build(id: string, timeoutS?: number): Promise<{ status: string }> {
    return this.json(
      "POST",
      `/session/${id}/build`,
      this.jsonBody(timeoutS === undefined ? {} : { timeout_s: timeoutS }),
    );
  }

  run(id: string, timeoutS?: number): Promise<{ status: string }> {
    return this.json(
      "POST",
      `/session/${id}/run`,
      this.jsonBody(timeoutS === undefined ? {} : { timeout_s: timeoutS }),
    );
  }

  archive(id: string): Promise<{ archive_url: string }> {
    return this.json("POST", `/session/${id}/archive`);
  }

  async deleteSession(id: string): Promise<void> {
    await this.request("DELETE", `/session/${id}`);
  }

  resultUrl(id: string, name: string): string {
    return `${this.baseUrl}/v1/session/${id}/result/${encodeURIComponent(name)}`;
  }

  archiveUrl(id: string): string {
    return `${this.baseUrl}/v1/session/${id}/archive`;
  }

  async openapi(): Promise<{ paths: Record<string, unknown> }> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/openapi.json`);
    if (!response.ok) {
      throw new ApiError(response.status, "internal", "no API description served");
    }
    return (await response.json()) as { paths: Record<string, unknown> };
  }
}

// Endpoints this dashboard drives; checked against the service's own API
// description at boot so an incompatible deployment fails loudly.
export const REQUIRED_ENDPOINTS = [
  "/v1/systems",
  "/v1/systems/{name}/{version}",
  "/v1/session",
  "/v1/session/{session_id}/parameter",
  "/v1/session/{session_id}/parameters",
  "/v1/session/{session_id}/build",
  "/v1/session/{session_id}/run",
  "/v1/session/{session_id}/status",
  "/v1/session/{session_id}/log",
  "/v1/session/{session_id}/result/{name}",
  "/v1/session/{session_id}/archive",
];

export function missingEndpoints(description: { paths: Record<string, unknown> }): string[] {
  return REQUIRED_ENDPOINTS.filter((path) => !(path in (description.paths ?? {})));
}
