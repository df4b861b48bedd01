import init, { capacity, sampleMap, decompose } from "./pkg/welding_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

function plot(canvas, xs, series, range) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 24;
  const [x0, x1] = [xs[0], xs[xs.length - 1]];
  const [y0, y1] = range;
  const px = (x) => pad + (w - 2 * pad) * (x - x0) / (x1 - x0);
  const py = (y) => h - pad - (h - 2 * pad) * (y - y0) / (y1 - y0);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.beginPath();
  ctx.moveTo(px(x0), py(y0));
  ctx.lineTo(px(x1), py(y1));
  ctx.stroke();
  series.forEach((ys, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.beginPath();
    ys.forEach((y, j) => (j ? ctx.lineTo(px(xs[j]), py(y)) : ctx.moveTo(px(xs[j]), py(y))));
    ctx.stroke();
  });
}

function show(el, f) {
  try {
    f();
  } catch (e) {
    el.textContent = String(e.message ?? e);
    el.classList.add("fail");
  }
}

function runCapacity() {
  const out = $("cap-out");
  out.classList.remove("fail");
  show(out, () => {
    const est = JSON.parse(capacity($("cap-set").value, Number($("cap-panels").value)));
    out.textContent = JSON.stringify(est, null, 2);
  });
}

function runMap() {
  const canvas = $("map-plot");
  show($("dec-status"), () => {
    const s = JSON.parse(sampleMap($("map").value, 400));
    plot(canvas, s.x, [s.y], [s.x[0], s.x[s.x.length - 1]]);
  });
}

function ledgerTable(rows) {
  const cols = ["n", "budget", "capE_bound", "cap_phiE_bound", "capF_bound", "cauchy", "residual"];
  const fmt = (v) => (typeof v === "number" && !Number.isInteger(v) ? v.toExponential(3) : String(v));
  let html = "<table><tr>" + cols.map((c) => `<th>${c}</th>`).join("") + "<th>pass</th></tr>";
  for (const r of rows) {
    html += `<tr class="${r.pass ? "" : "fail"}">` + cols.map((c) => `<td>${fmt(r[c])}</td>`).join("");
    html += `<td>${r.pass}</td></tr>`;
  }
  return html + "</table>";
}

function runDecompose() {
  const status = $("dec-status");
  status.classList.remove("fail");
  status.textContent = "running…";
  // let the status paint before the synchronous call
  setTimeout(() => show(status, () => {
    const t = performance.now();
    const r = JSON.parse(decompose($("map").value, Number($("depth").value), 600));
    const ms = (performance.now() - t).toFixed(0);
    status.textContent = `${r.passed ? "all levels pass" : "budget missed"}, pieces per level ${r.pieces.join(" / ")}, ${ms} ms`;
    status.classList.toggle("fail", !r.passed);
    plot($("dec-plot"), r.x, r.stages.map((s) => s.y), [r.x[0], r.x[r.x.length - 1]]);
    $("dec-ledger").innerHTML = ledgerTable(r.ledger);
  }), 0);
}

await init();
$("cap-run").onclick = runCapacity;
$("map-run").onclick = runMap;
$("dec-run").onclick = runDecompose;
for (const b of document.querySelectorAll("button[data-map]")) {
  b.onclick = () => {
    $("map").value = b.dataset.map;
    runMap();
  };
}
runCapacity();
runMap();
