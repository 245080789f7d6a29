/** Browser entry point. Configure with query parameters:
 *  ?service=http://localhost:8000&manifest=/abs/path/to/fixture.manifest.json */

import { Workbench } from "./app.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("service") ?? "http://localhost:8000";
  const manifest = params.get("manifest");
  const mount = document.getElementById("app");
  if (!mount) throw new Error("missing #app mount point");
  if (!manifest) {
    mount.textContent =
      "usage: ?service=<service url>&manifest=<path to ingest manifest on the service host>";
    return;
  }
  const workbench = new Workbench({
    baseUrl,
    fetchFn: (url, init) => window.fetch(url, init),
  });
  mount.replaceChildren(workbench.root);
  await workbench.load(manifest);
  workbench.startPolling();
}

void boot();
