/** Entry point: wires the two screens, tab switching, shortcuts, and a toast. */

import { Client } from "./api.js";
import { DashboardView } from "./dashboard.js";
import { QueueView } from "./queue.js";

function must(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in the page shell`);
  return node;
}

export async function boot(base: string = ""): Promise<void> {
  const client = new Client(base);
  const toast = must("toast");
  let toastTimer: ReturnType<typeof setTimeout> | undefined;
  const notify = (message: string, kind: "info" | "warn" | "error" = "info") => {
    toast.textContent = message;
    toast.className = `toast ${kind}`;
    clearTimeout(toastTimer);
    toastTimer = setTimeout(() => toast.classList.add("hidden"), 4000);
  };

  const { labels } = await client.labels();

  const queue = new QueueView(must("annotate"), {
    client,
    labels,
    notify,
    onRoundCompleted: (round) => {
      notify(`Round ${round.iteration} retrained (${round.labeled} labeled total)`);
      void dashboard.refresh();
      void queue.refresh();
    },
  });
  const dashboard = new DashboardView(must("dashboard"), {
    client,
    labels,
    notify,
    onRoundsChanged: () => void queue.refresh(),
  });

  const screens = {
    annotate: { tab: must("tab-annotate"), pane: must("annotate") },
    dashboard: { tab: must("tab-dashboard"), pane: must("dashboard") },
  };
  let active: keyof typeof screens = "annotate";
  const show = (name: keyof typeof screens) => {
    active = name;
    for (const [key, screen] of Object.entries(screens)) {
      screen.tab.classList.toggle("active", key === name);
      screen.pane.classList.toggle("hidden", key !== name);
    }
  };
  screens.annotate.tab.addEventListener("click", () => show("annotate"));
  screens.dashboard.tab.addEventListener("click", () => {
    show("dashboard");
    void dashboard.refresh();
  });

  document.addEventListener("keydown", (event) => {
    if (active !== "annotate") return;
    const target = event.target as HTMLElement | null;
    if (target && ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName)) return;
    if (event.metaKey || event.ctrlKey || event.altKey) return;
    if (queue.handleKey(event.key)) event.preventDefault();
  });

  show("annotate");
  await Promise.all([queue.refresh(), dashboard.refresh()]);
}

// The test environment imports the module without a page shell.
if (typeof document !== "undefined" && document.getElementById("annotate")) {
  boot().catch((err) => {
    console.error(err);
    const toast = document.getElementById("toast");
    if (toast) {
      toast.textContent = `Failed to start: ${err instanceof Error ? err.message : err}`;
      toast.className = "toast error";
    }
  });
}
