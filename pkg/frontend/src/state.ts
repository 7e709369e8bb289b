// View state and the client-side access guard. Restricted views are
// unreachable without a session; the server enforces the same rule, this
// guard just mirrors it so the UI redirects instead of erroring.

export const VIEWS = [
  "login",
  "register",
  "batch",
  "check",
  "download",
  "optout",
  "monitor",
  "password",
] as const;

export type View = (typeof VIEWS)[number];

export interface DownloadNote {
  filename: string;
  bytes: number;
}

export interface ViewState {
  session: string | null;
  role: string | null;
  username: string | null;
  activeView: View;
  lastDownload: DownloadNote | null;
  notice: string | null;
}

export function initialState(session: string | null = null): ViewState {
  return {
    session,
    role: null,
    username: null,
    activeView: session ? "monitor" : "login",
    lastDownload: null,
    notice: null,
  };
}

export function isView(value: string): value is View {
  return (VIEWS as readonly string[]).includes(value);
}

/** The view actually shown for a request: login when there is no session. */
export function guardView(state: ViewState, requested: View): View {
  if (requested !== "login" && state.session === null) {
    return "login";
  }
  return requested;
}
