import init, { explore_curve, explore_billing, sweep_theta } from "./pkg/spottune_wasm.js";

function call(f, ...args) {
  const v = JSON.parse(f(...args));
  if (v && v.error) throw new Error(v.error);
  return v;
}

function fields(form) {
  return Object.fromEntries(new FormData(form).entries());
}

// Draws each series as a polyline on a shared y-range. A series is
// { points: [[x, y], ...], color, width, dash }.
function plot(canvas, series, { xLabel = "", yLabel = "", shade = null } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 44;
  ctx.clearRect(0, 0, w, h);
  const pts = series.flatMap(s => s.points).filter(p => Number.isFinite(p[1]));
  if (!pts.length) return;
  let [x0, x1] = [Math.min(...pts.map(p => p[0])), Math.max(...pts.map(p => p[0]))];
  let [y0, y1] = [Math.min(...pts.map(p => p[1])), Math.max(...pts.map(p => p[1]))];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  if (x1 === x0) x1 = x0 + 1;
  const m = (y1 - y0) * 0.08; y0 -= m; y1 += m;
  const X = x => pad + (x - x0) / (x1 - x0) * (w - 2 * pad);
  const Y = y => h - pad + (y0 - y) / (y1 - y0) * (h - 2 * pad);
  if (shade) {
    ctx.fillStyle = shade.color;
    ctx.fillRect(X(shade.from), pad, X(shade.to) - X(shade.from), h - 2 * pad);
  }
  ctx.strokeStyle = "#bbb"; ctx.lineWidth = 1; ctx.setLineDash([]);
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555"; ctx.font = "11px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toFixed(0), pad, h - pad + 14);
  ctx.fillText(x1.toFixed(0), w - pad - 20, h - pad + 14);
  ctx.fillText(xLabel, w / 2 - 20, h - 8);
  ctx.fillText(yLabel, pad, pad - 8);
  for (const s of series) {
    ctx.strokeStyle = s.color; ctx.lineWidth = s.width || 1.5; ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.points.forEach(([x, y], i) => (i ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function showError(out, e) {
  out.textContent = "error: " + e.message;
}

function runCurve() {
  const f = fields(document.getElementById("curve-form"));
  const out = document.getElementById("curve-out");
  try {
    const v = call(explore_curve, f.shape === "two", +f.sigma, +f.theta, +f.steps, +f.seed);
    const idx = a => a.map((y, k) => [k, y]);
    plot(document.getElementById("curve-plot"), [
      { points: idx(v.actual), color: "#999", width: 1 },
      { points: idx(v.single), color: "#2c7fb8", dash: [5, 4] },
      { points: idx(v.staged), color: "#d35400", width: 2 },
    ], { xLabel: "step", yLabel: "loss", shade: { from: 0, to: v.observed_steps, color: "#f0f0f0" } });
    out.textContent =
      `observed ${v.observed_steps} of ${v.max_steps} steps${v.plateau ? " (plateau detected)" : ""}\n` +
      `staged fit:  ${v.staged_stages} stage(s), rss ${v.staged_rss.toExponential(3)}, final ${v.staged_final.toFixed(5)}\n` +
      `single fit:  rss ${v.single_rss.toExponential(3)}, final ${v.single_final.toFixed(5)}\n` +
      `true final:  ${v.actual_final.toFixed(5)}`;
  } catch (e) { showError(out, e); }
}

function runBilling() {
  const f = fields(document.getElementById("bill-form"));
  const out = document.getElementById("bill-out");
  try {
    const v = call(explore_billing, +f.seed, +f.start, +f.hours, +f.premium);
    const minute = t => (t - v.window_start) / 60;
    const prices = v.prices.map((p, i) => [i, p]);
    plot(document.getElementById("bill-plot"), [
      { points: prices, color: "#555" },
      { points: [[minute(v.start), v.max_price], [minute(v.end), v.max_price]], color: "#c0392b", dash: [4, 3] },
    ], { xLabel: "minute", yLabel: "$/hour", shade: { from: minute(v.start), to: minute(v.end), color: "#27ae6022" } });
    const held = ((v.end - v.start) / 60).toFixed(1);
    out.textContent =
      `held ${held} min, ended ${v.reason}\n` +
      `maximum price $${v.max_price.toFixed(4)}/h\n` +
      `market cost $${v.gross.toFixed(5)}, charged $${v.charge.toFixed(5)}${v.refunded ? " (refunded)" : ""}`;
  } catch (e) { showError(out, e); }
}

function runSweep() {
  const f = fields(document.getElementById("sweep-form"));
  const out = document.getElementById("sweep-out");
  out.textContent = "running…";
  // Let the browser paint the message before the simulation blocks.
  setTimeout(() => {
    try {
      const rows = call(sweep_theta, +f.seed, +f.steps);
      const cost = rows.map(r => [r.theta * 10, r.total_cost]);
      const jct = rows.map(r => [r.theta * 10, r.jct / 3600]);
      const scale = Math.max(...cost.map(p => p[1])) / Math.max(...jct.map(p => p[1]));
      plot(document.getElementById("sweep-plot"), [
        { points: cost, color: "#8e44ad", width: 2 },
        { points: jct.map(([x, y]) => [x, y * scale]), color: "#16a085", width: 2 },
      ], { xLabel: "θ × 10", yLabel: "cost (JCT rescaled)" });
      const head = "<tr><th>θ</th><th>cost $</th><th>before refunds $</th><th>JCT h</th><th>free steps</th><th>best kept</th></tr>";
      const body = rows.map(r =>
        `<tr class="${r.refund_reversal ? "flag" : ""}"><td>${r.theta.toFixed(1)}</td><td>${r.total_cost.toFixed(3)}</td>` +
        `<td>${r.gross_cost.toFixed(3)}</td><td>${(r.jct / 3600).toFixed(2)}</td>` +
        `<td>${(100 * r.free_steps_fraction).toFixed(1)}%</td><td>${(100 * r.best_selected_fraction).toFixed(0)}%</td></tr>`).join("");
      out.innerHTML = `<table>${head}${body}</table>`;
    } catch (e) { showError(out, e); }
  }, 20);
}

for (const [id, fn] of [["curve-form", runCurve], ["bill-form", runBilling], ["sweep-form", runSweep]]) {
  document.getElementById(id).addEventListener("submit", e => { e.preventDefault(); fn(); });
}

await init();
runCurve();
runBilling();
