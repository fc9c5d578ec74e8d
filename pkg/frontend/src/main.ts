/**
 * Dashboard bootstrap: wires the controller to the page.
 */

import { ConductApi } from "./api.js";
import { ConductController } from "./controller.js";
import { gridViewModel, historyRows, whatIfRow } from "./model.js";
import { renderFinalReport, renderGrid, renderHistory, renderWhatIf } from "./render.js";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const node = byId<HTMLElement>("status");
  node.textContent = text;
  node.className = isError ? "status error" : "status";
}

async function refreshPanels(controller: ConductController): Promise<void> {
  const state = controller.current;
  const vm = gridViewModel(state);
  renderGrid(vm, byId("grid"));
  renderHistory(historyRows(state), byId("history"));

  const form = byId<HTMLElement>("entry");
  const finalizeBtn = byId<HTMLButtonElement>("finalize");
  if (vm.stopped) {
    form.classList.add("disabled");
    byId<HTMLButtonElement>("submit").disabled = true;
    finalizeBtn.disabled = false;
    byId("whatif").replaceChildren();
  } else {
    form.classList.remove("disabled");
    byId<HTMLButtonElement>("submit").disabled = false;
    finalizeBtn.disabled = true;
    const dltInput = byId<HTMLInputElement>("dlt");
    dltInput.max = String(vm.cohortSize);
    const previews = await controller.whatIfTable();
    renderWhatIf(previews.map(whatIfRow), byId("whatif"));
  }
}

async function boot(): Promise<void> {
  const api = new ConductApi("");
  const controller = new ConductController(api, {
    onConflict: (message) =>
      setStatus(`Submission lost a version race (${message}); the grid was refreshed - please re-enter.`, true),
  });

  byId<HTMLButtonElement>("create").onclick = async () => {
    try {
      const levels = Number(byId<HTMLInputElement>("levels").value) || 4;
      const maxN = Number(byId<HTMLInputElement>("maxn").value) || 96;
      const seed = Number(byId<HTMLInputElement>("seed").value) || 0;
      await controller.create(
        { max_n: maxN, rng_seed: seed },
        { levels_a: levels, levels_b: levels },
      );
      byId<HTMLInputElement>("trial-id").value = controller.current.id;
      setStatus(`Created trial ${controller.current.id}`);
      await refreshPanels(controller);
    } catch (err) {
      setStatus(String(err), true);
    }
  };

  byId<HTMLButtonElement>("load").onclick = async () => {
    try {
      await controller.load(byId<HTMLInputElement>("trial-id").value.trim());
      setStatus(`Loaded trial ${controller.current.id}`);
      await refreshPanels(controller);
    } catch (err) {
      setStatus(String(err), true);
    }
  };

  byId<HTMLButtonElement>("submit").onclick = async () => {
    try {
      const dlt = Number(byId<HTMLInputElement>("dlt").value);
      const updated = await controller.submitCohort(dlt);
      if (updated) {
        setStatus(`Recorded cohort (version ${updated.version})`);
      }
      await refreshPanels(controller);
    } catch (err) {
      setStatus(String(err), true);
    }
  };

  byId<HTMLButtonElement>("finalize").onclick = async () => {
    try {
      const report = await controller.finalize();
      renderFinalReport(report, byId("final"));
      setStatus("Selection report ready");
    } catch (err) {
      setStatus(String(err), true);
    }
  };
}

boot().catch((err) => setStatus(String(err), true));
