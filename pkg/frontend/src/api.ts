/**
 * Typed client for the artifact repository REST API.
 *
 * The portal issues only documented calls: list/get artifacts, launch a
 * version, poll a run handle. Reads are public; launch needs the bearer
 * token when the service was started with one.
 */

export interface ArtifactVersion {
  version_id: number;
  created_at: number;
  content_hash: string;
  size_bytes: number;
}

export interface ArtifactSummary {
  artifact_id: string;
  title: string;
  authors: string[];
  description: string;
  tags: string[];
  visibility: string;
  links: string[];
  created_at: number;
  latest_version: number | null;
}

export interface ArtifactDetail extends Omit<ArtifactSummary, "latest_version"> {
  versions: ArtifactVersion[];
}

export type RunState = "created" | "extracted" | "running" | "finished" | "failed";

export interface RunStatus {
  handle_id: string;
  artifact_id: string;
  version_id: number;
  workspace_path: string;
  state: RunState;
  repetition: number;
  total_repetitions: number;
  error: string;
  updated_at: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class RepositoryApi {
  constructor(private baseUrl: string = "", private token: string = "") {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers: Record<string, string> = { ...(init.headers as Record<string, string>) };
    if (this.token) {
      headers["authorization"] = `Bearer ${this.token}`;
    }
    const response = await fetch(this.baseUrl + path, { ...init, headers });
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const message =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return body as T;
  }

  listArtifacts(query: string = ""): Promise<ArtifactSummary[]> {
    const suffix = query ? `?query=${encodeURIComponent(query)}` : "";
    return this.request<ArtifactSummary[]>(`/artifacts${suffix}`);
  }

  getArtifact(artifactId: string): Promise<ArtifactDetail> {
    return this.request<ArtifactDetail>(`/artifacts/${encodeURIComponent(artifactId)}`);
  }

  launch(artifactId: string, versionId: number): Promise<RunStatus> {
    return this.request<RunStatus>(
      `/artifacts/${encodeURIComponent(artifactId)}/versions/${versionId}/launch`,
      { method: "POST" },
    );
  }

  runStatus(handleId: string): Promise<RunStatus> {
    return this.request<RunStatus>(`/runs/${encodeURIComponent(handleId)}`);
  }
}
