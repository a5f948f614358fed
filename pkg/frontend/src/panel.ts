// Parameter widgets. Sliders send one setParam per change; the shown value
// always comes from the server echo, never the local slider position.

import type { ViewerClient } from "./client.js";

interface SliderSpec {
  param: string;
  label: string;
  min: number;
  max: number;
  step: number;
}

const SLIDERS: SliderSpec[] = [
  { param: "aperture", label: "aperture (m)", min: 0, max: 0.12, step: 0.001 },
  { param: "focal_length", label: "focal length (m)", min: 0.02, max: 0.12, step: 0.001 },
  { param: "focus_distance", label: "focus distance (m)", min: 0.3, max: 6, step: 0.05 },
  { param: "m", label: "ray budget m", min: 0, max: 30, step: 1 },
  { param: "s", label: "edge scale s", min: 0, max: 1, step: 0.05 },
  { param: "blend_accum", label: "accum blend", min: 0, max: 0.99, step: 0.01 },
  { param: "taa_blend", label: "taa blend", min: 0, max: 0.99, step: 0.01 },
];

const MODES = ["hybrid", "post-only", "rt-only", "ground-truth", "sharp"];

export interface PanelHandle {
  refresh(): void;
}

export function buildPanel(root: HTMLElement, client: ViewerClient, passNames: string[]): PanelHandle {
  const rows: Array<() => void> = [];

  for (const spec of SLIDERS) {
    const row = document.createElement("div");
    row.className = "row";
    const label = document.createElement("label");
    label.textContent = spec.label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = String(spec.step);
    const shown = document.createElement("span");
    shown.className = "value";
    shown.textContent = "–";
    const err = document.createElement("span");
    err.className = "error";
    input.oninput = () => {
      client.setParam(spec.param, Number(input.value));
    };
    row.append(label, input, shown, err);
    root.append(row);
    rows.push(() => {
      const v = client.state.displayValue(spec.param);
      shown.textContent = v === undefined ? "–" : Number(v).toFixed(3);
      if (v !== undefined && document.activeElement !== input) {
        input.value = String(v);
      }
      err.textContent = client.state.paramErrors.get(spec.param) ?? "";
    });
  }

  const modeRow = document.createElement("div");
  modeRow.className = "row";
  const modeLabel = document.createElement("label");
  modeLabel.textContent = "mode";
  const modeSel = document.createElement("select");
  for (const m of MODES) {
    const opt = document.createElement("option");
    opt.value = m;
    opt.textContent = m;
    modeSel.append(opt);
  }
  modeSel.onchange = () => client.setMode(modeSel.value);
  modeRow.append(modeLabel, modeSel);
  root.append(modeRow);
  rows.push(() => {
    const v = client.state.displayValue("mode");
    if (typeof v === "string" && document.activeElement !== modeSel) {
      modeSel.value = v;
    }
  });

  const dumpRow = document.createElement("div");
  dumpRow.className = "row";
  const dumpLabel = document.createElement("label");
  dumpLabel.textContent = "pass dump";
  const dumpSel = document.createElement("select");
  const none = document.createElement("option");
  none.value = "";
  none.textContent = "(request once)";
  dumpSel.append(none);
  for (const name of passNames) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    dumpSel.append(opt);
  }
  dumpSel.onchange = () => {
    if (dumpSel.value) {
      client.requestPassDump(dumpSel.value);
      dumpSel.value = "";
    }
  };
  dumpRow.append(dumpLabel, dumpSel);
  root.append(dumpRow);

  return {
    refresh() {
      for (const r of rows) {
        r();
      }
    },
  };
}
