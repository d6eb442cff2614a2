// Single-page app shell: hash routing between the catalog and experiment
// consoles, plus the API token prompt. Served by the Runtime Manager at /ui.

import { ApiClient, missingEndpoints } from "./api.js";
import { CatalogView } from "./catalog.js";
import { ExperimentConsole } from "./console.js";
import { clear, h } from "./dom.js";

export interface App {
  navigate(hash: string): Promise<void>;
  currentConsole(): ExperimentConsole | null;
  stop(): void;
}

export function mountApp(root: HTMLElement, api: ApiClient): App {
  let activeConsole: ExperimentConsole | null = null;
  const tokenInput = h("input", {
    type: "password",
    placeholder: "API token (if required)",
    "data-testid": "token-input",
  });
  tokenInput.addEventListener("change", () => {
    api.token = tokenInput.value || null;
    void render(window.location.hash);
  });
  const header = h(
    "header",
    {},
    h("h1", {}, h("a", { href: "#/" }, "SUNRISE")),
    h("span", { class: "muted" }, "simulation experiments"),
    tokenInput,
  );
  const outlet = h("main", { "data-testid": "outlet" });
  const compatSlot = h("div", {});
  clear(root);
  root.append(header, compatSlot, outlet);

  // endpoint discovery: verify the deployment serves everything we drive
  void api
    .openapi()
    .then((description) => {
      const missing = missingEndpoints(description);
      if (missing.length > 0) {
        compatSlot.append(
          h(
            "div",
            { class: "banner error", "data-testid": "compat-error" },
            `This service is missing endpoints the dashboard needs: ${missing.join(", ")}`,
          ),
        );
      }
    })
    .catch(() => {
      // unreachable service surfaces through the views themselves
    });

  async function render(hash: string): Promise<void> {
    activeConsole?.stop();
    activeConsole = null;
    clear(outlet);
    const experimentMatch = /^#\/exp\/([0-9a-f-]+)$/.exec(hash);
    if (experimentMatch) {
      const view = new ExperimentConsole(api, experimentMatch[1], showAuthPrompt);
      activeConsole = view;
      outlet.append(view.element);
      await view.mount();
      view.start();
      return;
    }
    const catalog = new CatalogView(
      api,
      (experimentId) => {
        window.location.hash = `#/exp/${experimentId}`;
      },
      showAuthPrompt,
    );
    outlet.append(catalog.element);
    await catalog.mount();
  }

  function showAuthPrompt(): void {
    tokenInput.classList.add("attention");
    tokenInput.focus();
  }

  const onHashChange = () => void render(window.location.hash);
  window.addEventListener("hashchange", onHashChange);
  void render(window.location.hash);

  return {
    navigate: (hash: string) => {
      window.location.hash = hash;
      return render(hash);
    },
    currentConsole: () => activeConsole,
    stop: () => {
      window.removeEventListener("hashchange", onHashChange);
      activeConsole?.stop();
    },
  };
}

declare global {
  interface Window {
    sunriseApp?: App;
  }
}

// In the browser the app boots itself; tests import mountApp instead.
if (typeof document !== "undefined" && document.getElementById("app")) {
  window.sunriseApp = mountApp(document.getElementById("app") as HTMLElement, new ApiClient(""));
}
