import { ApiClient } from "./api.js";
import { clear, el } from "./ui.js";
import { RetunePanel } from "./views/retune-panel.js";
import { SeriesDetailView } from "./views/series-detail.js";
import { SeriesListView } from "./views/series-list.js";

export interface App {
  navigate: (route: string) => Promise<void>;
  root: HTMLElement;
}

/** Hash router over the three pages; views re-fetch on every navigation. */
export function createApp(root: HTMLElement, api: ApiClient): App {
  clear(root);
  const nav = el(
    "nav",
    { class: "topnav" },
    el("a", { href: "#/", class: "nav-series" }, "Series"),
    " ",
    el("a", { href: "#/retune", class: "nav-retune" }, "Re-tuning"),
  );
  const page = el("main", { class: "page" });
  root.appendChild(nav);
  root.appendChild(page);

  async function navigate(route: string): Promise<void> {
    const detail = route.match(/^#\/series\/(.+)$/);
    if (detail) {
      await new SeriesDetailView(page, api, decodeURIComponent(detail[1])).load();
    } else if (route === "#/retune") {
      await new RetunePanel(page, api).load();
    } else {
      await new SeriesListView(page, api, (id) => {
        location.hash = `#/series/${encodeURIComponent(id)}`;
        void navigate(`#/series/${encodeURIComponent(id)}`);
      }).load();
    }
  }

  window.addEventListener("hashchange", () => void navigate(location.hash));
  return { navigate, root };
}

declare global {
  interface Window {
    BIPEC_NO_AUTOBOOT?: boolean;
  }
}

if (typeof document !== "undefined" && !window.BIPEC_NO_AUTOBOOT) {
  const boot = () => {
    const root = document.getElementById("app");
    if (root) {
      const app = createApp(root, new ApiClient(""));
      void app.navigate(location.hash);
    }
  };
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else {
    boot();
  }
}
