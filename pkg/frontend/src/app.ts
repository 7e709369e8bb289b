// Application shell: hash router, navigation chrome and the client-side
// access guard. Views render into #view; the server remains the actual
// authority on every access rule this mirrors.

import { ApiClient } from "./api.js";
import type { AppContext, ViewModule } from "./context.js";
import { guardView, initialState, isView, type View, type ViewState } from "./state.js";
import { batchView } from "./views/batch.js";
import { checkView } from "./views/check.js";
import { downloadView } from "./views/download.js";
import { loginView } from "./views/login.js";
import { monitorView } from "./views/monitor.js";
import { optOutView } from "./views/optout.js";
import { passwordView } from "./views/password.js";
import { registerView } from "./views/register.js";

const VIEW_MODULES: Record<View, ViewModule> = {
  login: loginView,
  register: registerView,
  batch: batchView,
  check: checkView,
  download: downloadView,
  optout: optOutView,
  monitor: monitorView,
  password: passwordView,
};

const NAV_ITEMS: { view: View; label: string }[] = [
  { view: "monitor", label: "Monitoring" },
  { view: "register", label: "Register Client" },
  { view: "batch", label: "Batch Registration" },
  { view: "check", label: "Check Clients" },
  { view: "download", label: "Download Data" },
  { view: "optout", label: "Opt-Out" },
  { view: "password", label: "Change Password" },
];

export class PortalApp {
  readonly state: ViewState;
  private active: ViewModule | null = null;
  private renderedView: View | null = null;
  private readonly onHashChange = () => this.route();

  constructor(
    private root: HTMLElement,
    readonly api: ApiClient,
  ) {
    this.state = initialState(api.session);
    window.addEventListener("hashchange", this.onHashChange);
    // every view handles its own submits; never let one navigate the page
    this.root.addEventListener("submit", (event) => event.preventDefault());
  }

  /** Detach from the window; used when replacing the app instance. */
  dispose(): void {
    window.removeEventListener("hashchange", this.onHashChange);
    this.active?.unbind?.();
  }

  /** Resolve the current location hash to a view, apply the guard, render. */
  route(): void {
    const requested = window.location.hash.replace(/^#\/?/, "") || this.state.activeView;
    const wanted = isView(requested) ? requested : this.state.activeView;
    const view = guardView(this.state, wanted);
    if (view !== wanted) {
      // access denied: send the address bar back to the login page too
      window.location.hash = `#/${view}`;
    }
    this.show(view);
  }

  navigate(view: View): void {
    const target = guardView(this.state, view);
    window.location.hash = `#/${target}`;
    this.show(target);
  }

  private context(): AppContext {
    return {
      api: this.api,
      state: this.state,
      navigate: (view) => this.navigate(view),
      rerender: () => this.show(this.state.activeView, true),
      download: (content, filename) => this.handleDownload(content, filename),
    };
  }

  private handleDownload(content: Blob | string, filename: string): void {
    const blob = typeof content === "string" ? new Blob([content], { type: "text/csv" }) : content;
    this.state.lastDownload = { filename, bytes: blob.size };
    // jsdom has no object URLs; recording the download is enough there
    if (typeof URL.createObjectURL === "function") {
      const anchor = document.createElement("a");
      anchor.href = URL.createObjectURL(blob);
      anchor.download = filename;
      anchor.click();
      URL.revokeObjectURL(anchor.href);
    }
  }

  show(view: View, force = false): void {
    const target = guardView(this.state, view);
    if (!force && target === this.renderedView) {
      // the echoed hashchange after navigate() must not re-render: handlers
      // bound to the current DOM would otherwise write into detached nodes
      return;
    }
    if (this.active?.unbind) {
      this.active.unbind();
    }
    this.state.activeView = target;
    this.renderedView = target;
    const module = VIEW_MODULES[target];
    this.active = module;
    this.root.innerHTML = `
      <header>
        <h1>Collection Portal</h1>
        ${this.state.session ? this.navHtml(target) : ""}
      </header>
      <main id="view">${module.render(this.context())}</main>
    `;
    if (this.state.session) {
      this.bindNav();
    }
    module.bind(this.root.querySelector<HTMLElement>("#view")!, this.context());
  }

  private navHtml(active: View): string {
    const items = NAV_ITEMS.map(
      ({ view, label }) =>
        `<a href="#/${view}" data-view="${view}" class="${view === active ? "active" : ""}">${label}</a>`,
    ).join("");
    return `<nav id="nav">${items}<button id="logout" type="button">Logout</button></nav>`;
  }

  private bindNav(): void {
    this.root.querySelector<HTMLButtonElement>("#logout")?.addEventListener("click", async () => {
      try {
        await this.api.logout();
      } catch {
        // the session is cleared locally regardless
      }
      this.state.session = null;
      this.state.role = null;
      this.state.username = null;
      this.state.notice = "You have been logged out of the portal.";
      this.navigate("login");
    });
  }

  /** Test hook: poke the monitoring panel without waiting for the timer. */
  refreshMonitor(): Promise<void> {
    return monitorView.refreshNow(this.root.querySelector<HTMLElement>("#view")!, this.context());
  }
}

export function createApp(root: HTMLElement, api: ApiClient): PortalApp {
  const app = new PortalApp(root, api);
  app.route();
  return app;
}

// browser bootstrap; tests construct the app themselves
const mount = typeof document !== "undefined" ? document.getElementById("app") : null;
if (mount !== null) {
  createApp(mount, new ApiClient());
}
