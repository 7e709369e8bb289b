import { ApiError } from "../api.js";
import { errorBox } from "../banners.js";
import type { AppContext, ViewModule } from "../context.js";
import { splitSearchTerms } from "../nhs.js";

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export const checkView: ViewModule = {
  title: "Check Clients",

  render(): string {
    return `
      <h2>Check Clients</h2>
      <p>Enter one or more client search terms (separated by commas, spaces or
         new lines); the search matches either the primary (NHS number) or
         secondary (hospital/radiology number) identifier.</p>
      <div id="check-banner"></div>
      <form id="check-form">
        <textarea id="check-terms" rows="4"></textarea>
        <button id="check-submit" type="submit">Check Clients</button>
        <button id="check-download" type="button">Download CSV</button>
      </form>
      <div id="check-results"></div>
    `;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    const banner = root.querySelector<HTMLElement>("#check-banner")!;
    const results = root.querySelector<HTMLElement>("#check-results")!;

    const terms = () =>
      splitSearchTerms(root.querySelector<HTMLTextAreaElement>("#check-terms")!.value);

    root.querySelector<HTMLFormElement>("#check-form")!.addEventListener("submit", async (event) => {
      event.preventDefault();
      banner.innerHTML = "";
      try {
        const rows = await ctx.api.checkClients(terms());
        const body = rows
          .map(
            (row) => `
              <tr class="${row.registered ? "registered" : "not-registered"}">
                <td>${escapeHtml(row.term)}</td>
                <td>${row.registered ? "yes" : "no"}</td>
                <td>${escapeHtml(row.status)}</td>
              </tr>`,
          )
          .join("");
        results.innerHTML = `
          <table id="check-table">
            <thead><tr><th>Term</th><th>Registered</th><th>Status</th></tr></thead>
            <tbody>${body}</tbody>
          </table>`;
      } catch (error) {
        if (error instanceof ApiError && error.status === 401) {
          ctx.state.session = null;
          ctx.navigate("login");
          return;
        }
        banner.innerHTML = errorBox([error instanceof ApiError ? error.message : String(error)]);
      }
    });

    root.querySelector<HTMLButtonElement>("#check-download")!.addEventListener("click", async () => {
      banner.innerHTML = "";
      try {
        const csv = await ctx.api.checkClientsCsv(terms());
        ctx.download(csv, "check-clients.csv");
      } catch (error) {
        banner.innerHTML = errorBox([error instanceof ApiError ? error.message : String(error)]);
      }
    });
  },
};
