import init, { bethe_table, residual_curve, gate_counts } from "./pkg/hubbard_anneal_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(el, f) {
  el.textContent = "";
  el.className = "";
  try {
    return f();
  } catch (e) {
    el.textContent = String(e.message ?? e);
    el.className = "err";
  }
}

// log-log plot with a T_A^-p guide through the last point
function plot(canvas, points, p) {
  const g = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 50;
  g.clearRect(0, 0, w, h);
  const lx = points.map((q) => Math.log10(q[0]));
  const ly = points.map((q) => Math.log10(q[1]));
  const x0 = Math.min(...lx), x1 = Math.max(...lx);
  const y0 = Math.floor(Math.min(...ly)), y1 = Math.ceil(Math.max(...ly));
  const X = (v) => pad + ((v - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const Y = (v) => h - pad - ((v - y0) / (y1 - y0 || 1)) * (h - 2 * pad);

  g.strokeStyle = "#ddd";
  g.fillStyle = "#555";
  g.font = "12px sans-serif";
  for (let d = y0; d <= y1; d++) {
    g.beginPath(); g.moveTo(pad, Y(d)); g.lineTo(w - pad, Y(d)); g.stroke();
    g.fillText(`1e${d}`, 4, Y(d) + 4);
  }
  for (const t of [1, 2, 5, 10, 20, 50, 100, 200]) {
    const v = Math.log10(t);
    if (v < x0 - 1e-9 || v > x1 + 1e-9) continue;
    g.fillText(String(t), X(v) - 6, h - pad + 16);
  }
  g.fillText("T_A", w / 2, h - 10);

  const [lxe, lye] = [lx[lx.length - 1], ly[ly.length - 1]];
  g.strokeStyle = "#c66";
  g.setLineDash([5, 4]);
  g.beginPath();
  g.moveTo(X(x0), Y(lye + p * (lxe - x0)));
  g.lineTo(X(x1), Y(lye));
  g.stroke();
  g.setLineDash([]);

  g.strokeStyle = "#236";
  g.fillStyle = "#236";
  g.beginPath();
  lx.forEach((v, i) => (i ? g.lineTo(X(v), Y(ly[i])) : g.moveTo(X(v), Y(ly[i]))));
  g.stroke();
  lx.forEach((v, i) => g.fillRect(X(v) - 2, Y(ly[i]) - 2, 4, 4));
}

function runCurve() {
  const sin = $("c-s").value === "sin";
  const msg = $("c-msg");
  msg.textContent = "running...";
  // let the message paint before the synchronous anneal
  setTimeout(() => {
    const t0 = performance.now();
    const out = report(msg, () =>
      JSON.parse(residual_curve(num("c-l"), num("c-u"), sin, num("c-lo"), num("c-hi"), 10)));
    if (!out) return;
    plot($("c-plot"), out.points, sin ? 4 : 2);
    const tail = out.slopes.slice(-3).map((s) => s.toFixed(2)).join(", ");
    msg.textContent = `${out.points.length} anneals in ${((performance.now() - t0) / 1000).toFixed(1)} s; last slopes ${tail} (dashed: T_A^-${sin ? 4 : 2})`;
  }, 10);
}

function runBethe() {
  const rows = report($("b-msg"), () => JSON.parse(bethe_table(num("b-l"), num("b-u"))));
  if (!rows) return;
  $("b-out").innerHTML =
    "<tr><th>L</th><th>E0</th><th>E0 / L</th></tr>" +
    rows.map((r) => `<tr><td>${r.L}</td><td>${r.E0.toFixed(6)}</td><td>${r.per_site.toFixed(6)}</td></tr>`).join("");
}

function runCounts() {
  const out = $("g-out");
  const c = report(out, () => JSON.parse(gate_counts(num("g-l"), num("g-t"), num("g-tau"))));
  if (!c) return;
  out.textContent = Object.entries(c).map(([k, v]) => `${k.padEnd(9)} ${v}`).join("\n");
}

await init();
$("c-run").onclick = runCurve;
$("b-run").onclick = runBethe;
$("g-run").onclick = runCounts;
runBethe();
runCounts();
