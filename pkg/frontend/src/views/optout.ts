import { ApiError } from "../api.js";
import { errorBox, successBox } from "../banners.js";
import type { AppContext, ViewModule } from "../context.js";
import { preValidateNhs } from "../nhs.js";

export const optOutView: ViewModule = {
  title: "Opt-Out",

  render(ctx: AppContext): string {
    const warning =
      ctx.state.role === "admin"
        ? ""
        : errorBox(["opt-out requires an administrator account"]);
    return `
      <h2>Client Opt-Out</h2>
      <p>Records the client's opt-out and deletes everything already
         collected for them (vault rows, staged and published files).</p>
      ${warning}
      <div id="optout-banner"></div>
      <form id="optout-form">
        <label>NHS number <input id="optout-id" /></label>
        <button id="optout-submit" type="submit">Opt Out and Delete</button>
      </form>
    `;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    root.querySelector<HTMLFormElement>("#optout-form")!.addEventListener("submit", async (event) => {
      event.preventDefault();
      const banner = root.querySelector<HTMLElement>("#optout-banner")!;
      const nationalId = root.querySelector<HTMLInputElement>("#optout-id")!.value.trim();
      const shapeError = preValidateNhs(nationalId);
      if (shapeError) {
        banner.innerHTML = errorBox([shapeError]);
        return;
      }
      try {
        const cascade = await ctx.api.optOut(nationalId);
        banner.innerHTML = successBox(
          `Opt-out recorded. Removed: ${cascade.staged_studies_removed} staged and ` +
            `${cascade.published_studies_removed} published studies, ` +
            `${cascade.vault_rows_removed} vault rows.`,
        );
      } catch (error) {
        if (error instanceof ApiError && error.status === 401) {
          ctx.state.session = null;
          ctx.navigate("login");
          return;
        }
        banner.innerHTML = errorBox([error instanceof ApiError ? error.message : String(error)]);
      }
    });
  },
};
