import type { ApiClient } from "../api.js";
import { clear, el, toast } from "../ui.js";

/** Landing page: all series with their pending-verdict counts. */
export class SeriesListView {
  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private openSeries: (id: string) => void,
  ) {}

  async load(): Promise<void> {
    clear(this.root);
    let rows;
    try {
      rows = await this.api.listSeries();
    } catch (err) {
      toast(String(err), "error");
      this.root.appendChild(el("p", { class: "empty-state" }, "failed to load series"));
      return;
    }

    const header = el(
      "div",
      { class: "page-header" },
      el("h2", {}, "Series"),
    );
    const refresh = el("button", { class: "refresh-series", type: "button" }, "Refresh");
    refresh.addEventListener("click", () => void this.load());
    header.appendChild(refresh);
    this.root.appendChild(header);

    if (rows.length === 0) {
      this.root.appendChild(
        el("p", { class: "empty-state" }, "No series in the attached dataset."),
      );
      return;
    }

    const table = el("table", { class: "series-table" });
    table.appendChild(
      el(
        "tr",
        {},
        el("th", {}, "id"),
        el("th", {}, "name"),
        el("th", {}, "points"),
        el("th", {}, "pending"),
      ),
    );
    for (const row of rows) {
      const badge =
        row.pending_count > 0
          ? el("span", { class: "badge" }, String(row.pending_count))
          : el("span", { class: "badge badge-zero" }, "0");
      const tr = el(
        "tr",
        { class: "series-row", "data-series-id": row.id },
        el("td", {}, row.id),
        el("td", {}, row.name),
        el("td", {}, String(row.length)),
        el("td", {}, badge),
      );
      tr.addEventListener("click", () => this.openSeries(row.id));
      table.appendChild(tr);
    }
    this.root.appendChild(table);
  }
}
