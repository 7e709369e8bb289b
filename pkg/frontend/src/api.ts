// Typed client for the collection portal API. The session token is held in
// memory and mirrored to sessionStorage so a reload stays logged in until
// the server-side idle expiry kicks in.

const TOKEN_KEY = "trialbox-session";

export interface LoginResponse {
  token: string;
  role: string;
  username: string;
}

export interface RegisterInput {
  primary_id: string;
  secondary_id: string;
  trial_code: string;
  date_enrolled?: string;
}

export interface RegisterResponse {
  ok: boolean;
  pseudonym: string;
  trial_code: string;
}

export interface BatchRowError {
  row_number: number;
  reason: string;
}

export interface CheckRow {
  term: string;
  registered: boolean;
  status: string;
  pseudonym?: string;
}

export interface CascadeReport {
  vault_rows_removed: number;
  staged_studies_removed: number;
  published_studies_removed: number;
}

export interface HealthInfo {
  version: string;
  disk_free_bytes: number;
  disk_total_bytes: number;
  last_cycle_at: string | null;
  cases: number;
  cases_by_status: Record<string, number>;
  clients: number;
}

/** Error carrying the server's error code and any per-row batch failures. */
export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public code?: string,
    public rowErrors?: BatchRowError[],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  private token: string | null = null;

  constructor(private baseUrl = "") {
    try {
      this.token = window.sessionStorage.getItem(TOKEN_KEY);
    } catch {
      this.token = null;
    }
  }

  get session(): string | null {
    return this.token;
  }

  private setToken(token: string | null): void {
    this.token = token;
    try {
      if (token === null) {
        window.sessionStorage.removeItem(TOKEN_KEY);
      } else {
        window.sessionStorage.setItem(TOKEN_KEY, token);
      }
    } catch {
      // storage unavailable: in-memory session only
    }
  }

  private async request(
    method: string,
    path: string,
    options: { json?: unknown; text?: string; contentType?: string } = {},
  ): Promise<Response> {
    const headers: Record<string, string> = {};
    if (this.token) {
      headers["X-Session-Token"] = this.token;
    }
    let body: string | undefined;
    if (options.json !== undefined) {
      headers["Content-Type"] = "application/json";
      body = JSON.stringify(options.json);
    } else if (options.text !== undefined) {
      headers["Content-Type"] = options.contentType ?? "text/plain";
      body = options.text;
    }
    const response = await fetch(this.baseUrl + path, { method, headers, body });
    if (!response.ok) {
      throw await this.toError(response);
    }
    return response;
  }

  private async toError(response: Response): Promise<ApiError> {
    let payload: Record<string, unknown> = {};
    try {
      payload = (await response.json()) as Record<string, unknown>;
    } catch {
      // non-JSON error body
    }
    if (Array.isArray(payload.errors)) {
      return new ApiError(
        response.status,
        "the batch contains errors",
        "batch-errors",
        payload.errors as BatchRowError[],
      );
    }
    const message =
      (payload.message as string) ?? (payload.detail as string) ?? response.statusText;
    return new ApiError(response.status, message, payload.error as string | undefined);
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    const response = await this.request("POST", "/api/login", {
      json: { username, password },
    });
    const data = (await response.json()) as LoginResponse;
    this.setToken(data.token);
    return data;
  }

  async logout(): Promise<void> {
    try {
      await this.request("POST", "/api/logout", { json: {} });
    } finally {
      this.setToken(null);
    }
  }

  async changePassword(currentPassword: string, newPassword: string): Promise<void> {
    await this.request("POST", "/api/change-password", {
      json: { current_password: currentPassword, new_password: newPassword },
    });
  }

  async registerClient(input: RegisterInput): Promise<RegisterResponse> {
    const response = await this.request("POST", "/api/register-client", { json: input });
    return (await response.json()) as RegisterResponse;
  }

  /** All-or-nothing batch upload; row failures arrive as ApiError.rowErrors. */
  async batchUpload(csvText: string): Promise<{ accepted: number }> {
    const response = await this.request("POST", "/api/batch-upload", {
      text: csvText,
      contentType: "text/csv",
    });
    return (await response.json()) as { accepted: number };
  }

  async checkClients(terms: string[]): Promise<CheckRow[]> {
    const response = await this.request("POST", "/api/check-clients", { json: { terms } });
    const data = (await response.json()) as { rows: CheckRow[] };
    return data.rows;
  }

  async checkClientsCsv(terms: string[]): Promise<string> {
    const response = await this.request("POST", "/api/check-clients.csv", { json: { terms } });
    return await response.text();
  }

  async downloadData(sections: string[]): Promise<Blob> {
    const query = encodeURIComponent(sections.join(","));
    const response = await this.request("GET", `/api/download-data?sections=${query}`);
    return await response.blob();
  }

  async optOut(nationalId: string): Promise<CascadeReport> {
    const response = await this.request("POST", "/api/opt-out", {
      json: { national_id: nationalId },
    });
    const data = (await response.json()) as { cascade: CascadeReport };
    return data.cascade;
  }

  async health(): Promise<HealthInfo> {
    const response = await this.request("GET", "/api/health");
    return (await response.json()) as HealthInfo;
  }
}
