/** Small DOM helpers shared by the views. */

type Child = Node | string | null | undefined;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

/** Non-blocking notice; errors linger a little longer. */
export function toast(message: string, kind: "info" | "error" = "info"): void {
  const host =
    document.querySelector<HTMLElement>(".toast-host") ??
    document.body.appendChild(el("div", { class: "toast-host" }));
  const note = el("div", { class: `toast toast-${kind}`, role: "status" }, message);
  host.appendChild(note);
  setTimeout(() => note.remove(), kind === "error" ? 6000 : 2500);
}

const ANNOTATOR_KEY = "bipec.annotator";

export function annotatorName(): string {
  try {
    return localStorage.getItem(ANNOTATOR_KEY) || "reviewer";
  } catch {
    return "reviewer";
  }
}

export function setAnnotatorName(name: string): void {
  try {
    localStorage.setItem(ANNOTATOR_KEY, name);
  } catch {
    // storage unavailable: the field simply will not persist
  }
}

export function statusChip(status: string): HTMLElement {
  return el("span", { class: `chip chip-${status}` }, status);
}
