// Horizontal per-pass millisecond bars, one row per pipeline pass.

const PASS_ROWS = [
  "rasterization",
  "post_process",
  "gbuffer_sigma_blur",
  "ray_trace",
  "accumulation",
  "median",
  "recon_composite",
  "final_taa",
  "others",
];

export function renderPassBars(root: HTMLElement, passesMs: Record<string, number>): void {
  root.textContent = "";
  const total = passesMs["total"] ?? 0;
  const peak = Math.max(...PASS_ROWS.map((n) => passesMs[n] ?? 0), 1e-6);
  for (const name of PASS_ROWS) {
    const ms = passesMs[name] ?? 0;
    const row = document.createElement("div");
    row.className = "bar-row";
    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = name;
    const bar = document.createElement("div");
    bar.className = "bar";
    bar.style.width = `${Math.round((ms / peak) * 160)}px`;
    const val = document.createElement("span");
    val.className = "bar-value";
    val.textContent = `${ms.toFixed(1)} ms`;
    row.append(label, bar, val);
    root.append(row);
  }
  const totalRow = document.createElement("div");
  totalRow.className = "bar-total";
  totalRow.textContent = `frame total ${total.toFixed(1)} ms`;
  root.append(totalRow);
}
