/**
 * Pure view models: API payloads in, display-ready fields out.
 *
 * The artifact list mirrors the /artifacts response one to one (same order,
 * same entries, no client-side filtering), and run states are shown exactly
 * as the service reports them.
 */

import { ArtifactDetail, ArtifactSummary, RunStatus } from "./api.js";

export interface ArtifactCardView {
  id: string;
  title: string;
  authors: string;
  tags: string[];
  latestVersion: string;
  createdAt: string;
}

export interface RunStatusView {
  handleId: string;
  state: string;
  progress: string;
  updatedAt: string;
  error: string;
}

function formatTimestamp(epochSeconds: number): string {
  if (!epochSeconds) {
    return "-";
  }
  return new Date(epochSeconds * 1000).toISOString().replace("T", " ").slice(0, 19);
}

export function artifactCards(artifacts: ArtifactSummary[]): ArtifactCardView[] {
  return artifacts.map((a) => ({
    id: a.artifact_id,
    title: a.title,
    authors: a.authors.join(", ") || "unknown",
    tags: a.tags,
    latestVersion: a.latest_version === null ? "no versions" : `v${a.latest_version}`,
    createdAt: formatTimestamp(a.created_at),
  }));
}

export function describeVersions(detail: ArtifactDetail): string[] {
  return detail.versions.map(
    (v) => `v${v.version_id} · ${v.size_bytes} bytes · ${v.content_hash.slice(0, 12)}…`,
  );
}

export function runStatusView(status: RunStatus): RunStatusView {
  const progress =
    status.total_repetitions > 0
      ? `${status.repetition} / ${status.total_repetitions} repetitions`
      : "-";
  return {
    handleId: status.handle_id,
    state: status.state,
    progress,
    updatedAt: formatTimestamp(status.updated_at),
    error: status.error,
  };
}

export function emptyStateMessage(query: string): string {
  return query
    ? `No artifacts match “${query}”.`
    : "The repository is empty — publish an artifact with the CLI.";
}
