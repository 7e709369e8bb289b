import { ApiError } from "../api.js";
import { errorBox, successBox } from "../banners.js";
import type { AppContext, ViewModule } from "../context.js";

const SECTIONS = ["overview", "clients", "studies", "images"] as const;

export const downloadView: ViewModule = {
  title: "Download Data",

  render(): string {
    const boxes = SECTIONS.map(
      (name) => `
        <label class="dl-option">
          <input type="checkbox" class="dl-section" value="${name}" checked /> ${name}
        </label>`,
    ).join("");
    return `
      <h2>Download Data</h2>
      <p>Exports the ground truth of everything collected so far, one CSV per
         section, zipped. The export is generated even when empty.</p>
      <div id="dl-banner"></div>
      <form id="dl-form">${boxes}<button id="dl-submit" type="submit">Download</button></form>
    `;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    root.querySelector<HTMLFormElement>("#dl-form")!.addEventListener("submit", async (event) => {
      event.preventDefault();
      const banner = root.querySelector<HTMLElement>("#dl-banner")!;
      const sections = Array.from(
        root.querySelectorAll<HTMLInputElement>(".dl-section:checked"),
      ).map((el) => el.value);
      if (sections.length === 0) {
        banner.innerHTML = errorBox(["select at least one section"]);
        return;
      }
      try {
        const blob = await ctx.api.downloadData(sections);
        ctx.download(blob, "collection-data.zip");
        banner.innerHTML = successBox(
          `Export generated (${blob.size} bytes, sections: ${sections.join(", ")}).`,
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
