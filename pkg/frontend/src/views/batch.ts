import { ApiError } from "../api.js";
import { renderBatchResult } from "../banners.js";
import type { AppContext, ViewModule } from "../context.js";

const TEMPLATE = "Primary ID,Secondary ID,Trial Code,Date Enrolled\n";

export const batchView: ViewModule = {
  title: "Batch Registration",

  render(): string {
    return `
      <h2>Batch Registration</h2>
      <p>Upload the batch CSV template (the blank template can be
         <a id="batch-template" href="#" download="batch-template.csv">downloaded here</a>),
         or paste CSV rows directly.</p>
      <form id="batch-form">
        <input id="batch-file" type="file" accept=".csv,text/csv" />
        <textarea id="batch-csv" rows="8" placeholder="${TEMPLATE.trim()}"></textarea>
        <button id="batch-submit" type="submit">Upload Batch</button>
      </form>
      <div id="batch-result">${renderBatchResult({ kind: "empty" })}</div>
    `;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    const textarea = root.querySelector<HTMLTextAreaElement>("#batch-csv")!;
    const fileInput = root.querySelector<HTMLInputElement>("#batch-file")!;
    const result = root.querySelector<HTMLElement>("#batch-result")!;

    root.querySelector<HTMLAnchorElement>("#batch-template")!.addEventListener("click", (event) => {
      event.preventDefault();
      ctx.download(TEMPLATE, "batch-template.csv");
    });

    fileInput.addEventListener("change", () => {
      const file = fileInput.files?.[0];
      if (!file) {
        return;
      }
      const reader = new FileReader();
      reader.onload = () => {
        textarea.value = String(reader.result ?? "");
      };
      reader.readAsText(file);
    });

    root.querySelector<HTMLFormElement>("#batch-form")!.addEventListener("submit", async (event) => {
      event.preventDefault();
      const csvText = textarea.value;
      if (csvText.trim().length === 0) {
        result.innerHTML = renderBatchResult({ kind: "empty" });
        return;
      }
      try {
        const outcome = await ctx.api.batchUpload(csvText);
        result.innerHTML = renderBatchResult({ kind: "success", accepted: outcome.accepted });
      } catch (error) {
        if (error instanceof ApiError && error.status === 401) {
          ctx.state.session = null;
          ctx.navigate("login");
          return;
        }
        if (error instanceof ApiError && error.rowErrors) {
          result.innerHTML = renderBatchResult({ kind: "errors", errors: error.rowErrors });
        } else {
          const message = error instanceof ApiError ? error.message : String(error);
          result.innerHTML = renderBatchResult({
            kind: "errors",
            errors: [{ row_number: 0, reason: message }],
          });
        }
      }
    });
  },
};
