import type { ApiClient } from "./api.js";
import type { View, ViewState } from "./state.js";

export interface AppContext {
  api: ApiClient;
  state: ViewState;
  navigate(view: View): void;
  rerender(): void;
  /** Hand a finished download to the browser (and note it in the state). */
  download(content: Blob | string, filename: string): void;
}

export interface ViewModule {
  title: string;
  render(ctx: AppContext): string;
  bind(root: HTMLElement, ctx: AppContext): void;
  unbind?(): void;
}
