import { ApiError } from "../api.js";
import { errorBox, successBox } from "../banners.js";
import type { AppContext, ViewModule } from "../context.js";

const MIN_LENGTH = 8;

export const passwordView: ViewModule = {
  title: "Change Password",

  render(): string {
    return `
      <h2>Change Password</h2>
      <div id="pw-banner"></div>
      <form id="pw-form">
        <label>Current Password <input id="pw-current" type="password" autocomplete="current-password" /></label>
        <label>New Password (at least ${MIN_LENGTH} characters)
          <input id="pw-new" type="password" autocomplete="new-password" /></label>
        <button id="pw-submit" type="submit">Change Password</button>
      </form>
    `;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    root.querySelector<HTMLFormElement>("#pw-form")!.addEventListener("submit", async (event) => {
      event.preventDefault();
      const banner = root.querySelector<HTMLElement>("#pw-banner")!;
      const current = root.querySelector<HTMLInputElement>("#pw-current")!.value;
      const next = root.querySelector<HTMLInputElement>("#pw-new")!.value;
      if (next.length < MIN_LENGTH) {
        banner.innerHTML = errorBox([
          `the new password must be at least ${MIN_LENGTH} characters in length`,
        ]);
        return;
      }
      try {
        await ctx.api.changePassword(current, next);
        banner.innerHTML = successBox("Password changed successfully.");
      } catch (error) {
        if (error instanceof ApiError && error.status === 401 && error.message.includes("session")) {
          ctx.state.session = null;
          ctx.navigate("login");
          return;
        }
        banner.innerHTML = errorBox([error instanceof ApiError ? error.message : String(error)]);
      }
    });
  },
};
