import type { HealthInfo } from "../api.js";
import type { AppContext, ViewModule } from "../context.js";

const REFRESH_MS = 15000;

let timer: ReturnType<typeof setInterval> | null = null;
let lastGood: HealthInfo | null = null;

function formatBytes(n: number): string {
  if (n >= 1 << 30) {
    return `${(n / (1 << 30)).toFixed(1)} GiB`;
  }
  if (n >= 1 << 20) {
    return `${(n / (1 << 20)).toFixed(1)} MiB`;
  }
  return `${n} B`;
}

function panelHtml(info: HealthInfo | null, stale: boolean): string {
  const staleBanner = stale
    ? `<div id="monitor-stale" class="box error">Connection to the collection box lost; showing the last known state.</div>`
    : "";
  if (info === null) {
    return `${staleBanner}<p id="monitor-empty">No health data yet.</p>`;
  }
  const statuses = Object.entries(info.cases_by_status)
    .map(([status, count]) => `<li>${status}: ${count}</li>`)
    .join("");
  return `
    ${staleBanner}
    <dl id="monitor-panel">
      <dt>Version</dt><dd class="m-version">${info.version}</dd>
      <dt>Disk free</dt><dd class="m-disk">${formatBytes(info.disk_free_bytes)}</dd>
      <dt>Last collection cycle</dt><dd class="m-cycle">${info.last_cycle_at ?? "never"}</dd>
      <dt>Registered clients</dt><dd class="m-clients">${info.clients}</dd>
      <dt>Cases</dt><dd class="m-cases">${info.cases}</dd>
    </dl>
    <ul id="monitor-statuses">${statuses}</ul>
  `;
}

async function refresh(root: HTMLElement, ctx: AppContext): Promise<void> {
  const host = root.querySelector<HTMLElement>("#monitor-host");
  if (!host) {
    return;
  }
  try {
    lastGood = await ctx.api.health();
    host.innerHTML = panelHtml(lastGood, false);
  } catch {
    host.innerHTML = panelHtml(lastGood, true);
  }
}

export const monitorView: ViewModule & {
  refreshNow(root: HTMLElement, ctx: AppContext): Promise<void>;
} = {
  title: "Monitoring",

  render(): string {
    return `<h2>Box Monitoring</h2><div id="monitor-host"><p>Loading…</p></div>`;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    void refresh(root, ctx);
    timer = setInterval(() => void refresh(root, ctx), REFRESH_MS);
  },

  unbind(): void {
    if (timer !== null) {
      clearInterval(timer);
      timer = null;
    }
  },

  // exposed for tests and for a manual refresh action
  refreshNow(root: HTMLElement, ctx: AppContext): Promise<void> {
    return refresh(root, ctx);
  },
};
