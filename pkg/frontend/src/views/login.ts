import { ApiError } from "../api.js";
import { errorBox, successBox } from "../banners.js";
import type { AppContext, ViewModule } from "../context.js";

export const loginView: ViewModule = {
  title: "Login",

  render(ctx: AppContext): string {
    const notice = ctx.state.notice ? successBox(ctx.state.notice) : "";
    return `
      <h2>Portal Login</h2>
      ${notice}
      <div id="login-banner"></div>
      <form id="login-form">
        <label>Username <input id="login-username" autocomplete="username" /></label>
        <label>Password <input id="login-password" type="password" autocomplete="current-password" /></label>
        <button id="login-submit" type="submit">Login</button>
      </form>
    `;
  },

  bind(root: HTMLElement, ctx: AppContext): void {
    const form = root.querySelector<HTMLFormElement>("#login-form")!;
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      const username = root.querySelector<HTMLInputElement>("#login-username")!.value;
      const password = root.querySelector<HTMLInputElement>("#login-password")!.value;
      const banner = root.querySelector<HTMLElement>("#login-banner")!;
      try {
        const session = await ctx.api.login(username, password);
        ctx.state.session = session.token;
        ctx.state.role = session.role;
        ctx.state.username = session.username;
        ctx.state.notice = null;
        ctx.navigate("monitor");
      } catch (error) {
        const message =
          error instanceof ApiError ? error.message : "login failed: server unreachable";
        banner.innerHTML = errorBox([message]);
      }
    });
  },
};
