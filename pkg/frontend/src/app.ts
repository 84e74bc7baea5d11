/**
 * Portal wiring: browse shared artifacts, inspect one, launch a version with
 * one click, and watch its run progress. All state lives on the server; a
 * page refresh only re-fetches.
 */

import { ApiError, ArtifactDetail, RepositoryApi, RunStatus } from "./api.js";
import { RunPoller } from "./poller.js";
import { artifactCards, describeVersions, emptyStateMessage, runStatusView } from "./views.js";

const api = new RepositoryApi("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function setBanner(message: string): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.hidden = message === "";
}

async function refreshList(): Promise<void> {
  const query = el<HTMLInputElement>("search").value.trim();
  const list = el<HTMLDivElement>("artifact-list");
  try {
    const artifacts = await api.listArtifacts(query);
    setBanner("");
    list.replaceChildren();
    if (artifacts.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty";
      empty.textContent = emptyStateMessage(query);
      list.appendChild(empty);
      return;
    }
    for (const card of artifactCards(artifacts)) {
      const node = document.createElement("div");
      node.className = "card";
      node.innerHTML = `
        <h3></h3>
        <p class="meta"></p>
        <p class="tags"></p>`;
      (node.querySelector("h3") as HTMLElement).textContent = card.title;
      (node.querySelector(".meta") as HTMLElement).textContent =
        `${card.authors} · ${card.latestVersion} · ${card.createdAt}`;
      (node.querySelector(".tags") as HTMLElement).textContent =
        card.tags.map((t) => `#${t}`).join(" ");
      node.addEventListener("click", () => void showDetail(card.id));
      list.appendChild(node);
    }
  } catch (err) {
    list.replaceChildren();
    setBanner(`Repository unreachable: ${(err as Error).message}`);
  }
}

async function showDetail(artifactId: string): Promise<void> {
  const panel = el<HTMLDivElement>("detail");
  let detail: ArtifactDetail;
  try {
    detail = await api.getArtifact(artifactId);
  } catch (err) {
    setBanner(`Could not load artifact: ${(err as Error).message}`);
    return;
  }
  panel.hidden = false;
  el<HTMLHeadingElement>("detail-title").textContent = detail.title;
  el<HTMLParagraphElement>("detail-description").textContent =
    detail.description || "(no description)";
  el<HTMLParagraphElement>("detail-authors").textContent =
    `Authors: ${detail.authors.join(", ") || "unknown"}`;

  const versions = el<HTMLUListElement>("detail-versions");
  versions.replaceChildren();
  const labels = describeVersions(detail);
  detail.versions.forEach((version, i) => {
    const item = document.createElement("li");
    const label = document.createElement("span");
    label.textContent = labels[i];
    const button = document.createElement("button");
    button.textContent = "Launch";
    button.addEventListener("click", () => void launch(detail.artifact_id, version.version_id));
    item.append(label, button);
    versions.appendChild(item);
  });
  if (detail.versions.length === 0) {
    const item = document.createElement("li");
    item.textContent = "no versions uploaded yet";
    versions.appendChild(item);
  }
}

function renderRun(status: RunStatus): void {
  const panel = el<HTMLDivElement>("run");
  panel.hidden = false;
  const view = runStatusView(status);
  el<HTMLSpanElement>("run-handle").textContent = view.handleId;
  el<HTMLSpanElement>("run-state").textContent = view.state;
  el<HTMLSpanElement>("run-state").dataset.state = view.state;
  el<HTMLSpanElement>("run-progress").textContent = view.progress;
  el<HTMLSpanElement>("run-updated").textContent = view.updatedAt;
  el<HTMLParagraphElement>("run-error").textContent = view.error;
}

async function launch(artifactId: string, versionId: number): Promise<void> {
  api.setToken(el<HTMLInputElement>("token").value.trim());
  try {
    const handle = await api.launch(artifactId, versionId);
    renderRun(handle);
    const poller = new RunPoller(api, handle.handle_id, { onUpdate: renderRun });
    await poller.start();
  } catch (err) {
    if (err instanceof ApiError) {
      setBanner(`Launch failed (${err.status}): ${err.message}`);
    } else {
      setBanner(`Launch failed: ${(err as Error).message}`);
    }
  }
}

export function init(): void {
  el<HTMLButtonElement>("refresh").addEventListener("click", () => void refreshList());
  el<HTMLInputElement>("search").addEventListener("change", () => void refreshList());
  void refreshList();
}

init();
