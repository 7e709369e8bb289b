import { ApiError } from "../api.js";
import { errorBox, successBox } from "../banners.js";
import type { AppContext, ViewModule } from "../context.js";
import { preValidateNhs } from "../nhs.js";

export const registerView: ViewModule = {
  title: "Register Client",

  render(): string {
    return `
      <h2>Register Client</h2>
      <div id="reg-banner"></div>
      <form id="reg-form">
        <label>Primary ID (NHS number) <input id="reg-primary" /></label>
        <label>Secondary ID (Hospital/Radiology number) <input id="reg-secondary" /></label>
        <label>Trial Code <input id="reg-trial" /></label>
        <label>Date Enrolled (optional, YYYY-MM-DD) <input id="reg-date" /></label>
        <button id="reg-submit" type="submit">Register Client</button>
      </form>
    `;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    const form = root.querySelector<HTMLFormElement>("#reg-form")!;
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      const banner = root.querySelector<HTMLElement>("#reg-banner")!;
      const primary = root.querySelector<HTMLInputElement>("#reg-primary")!.value.trim();
      const secondary = root.querySelector<HTMLInputElement>("#reg-secondary")!.value.trim();
      const trialCode = root.querySelector<HTMLInputElement>("#reg-trial")!.value.trim();
      const dateEnrolled = root.querySelector<HTMLInputElement>("#reg-date")!.value.trim();

      // inline pre-validation before touching the server
      const shapeError = preValidateNhs(primary);
      if (shapeError) {
        banner.innerHTML = errorBox([shapeError]);
        return;
      }
      if (trialCode.length === 0) {
        banner.innerHTML = errorBox(["a trial code is required"]);
        return;
      }
      try {
        const result = await ctx.api.registerClient({
          primary_id: primary,
          secondary_id: secondary,
          trial_code: trialCode,
          ...(dateEnrolled ? { date_enrolled: dateEnrolled } : {}),
        });
        banner.innerHTML = successBox(
          `Client registered as ${result.pseudonym} (trial code ${result.trial_code}).`,
        );
        form.reset();
      } catch (error) {
        if (error instanceof ApiError && error.status === 401) {
          ctx.state.session = null;
          ctx.navigate("login");
          return;
        }
        const message = error instanceof ApiError ? error.message : String(error);
        banner.innerHTML = errorBox([message]);
      }
    });
  },
};
