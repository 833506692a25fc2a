import init, { distance_laws, association_curve, sample_network } from "./pkg/mmwave_mfg_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, series, xLabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xMax = Math.max(...xs);
  const yMax = Math.max(1e-12, ...series.flatMap((s) => s.ys));
  const px = (x) => pad + (x / xMax) * (w - 2 * pad);
  const py = (y) => h - pad - (y / yMax) * (h - 2 * pad);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(xLabel, w / 2, h - 10);
  ctx.fillText(yMax.toPrecision(3), 2, pad);
  ctx.fillText(xMax.toPrecision(3), w - pad - 10, h - pad + 14);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, pad + 10, pad + 16 * (k + 1));
  });
}

function drawNetwork(canvas, net) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, scale = (w / 2 - 10) / net.r_max;
  const tx = (p) => [w / 2 + p[0] * scale, w / 2 - p[1] * scale];
  ctx.clearRect(0, 0, w, w);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.arc(w / 2, w / 2, net.r_max * scale, 0, 2 * Math.PI);
  ctx.stroke();
  const dot = (p, r, color) => {
    const [x, y] = tx(p);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(x, y, r, 0, 2 * Math.PI);
    ctx.fill();
  };
  for (const l of net.links) {
    const [x0, y0] = tx(net.probe), [x1, y1] = tx(l.bs);
    ctx.strokeStyle = l.los ? "rgba(0,90,200,.6)" : "rgba(200,40,40,.35)";
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  }
  net.mu.forEach((p) => dot(p, 2, "#aaa"));
  net.blockers.forEach((p) => dot(p, 2, "#000"));
  net.bs.forEach((p) => dot(p, 3, "#0a0"));
  dot(net.probe, 5, "#f80");
}

function run(fn) {
  try {
    $("error").textContent = "";
    fn();
  } catch (e) {
    $("error").textContent = String(e);
  }
}

function refresh() {
  const config = $("config").value;
  run(() => {
    const laws = JSON.parse(distance_laws(config, Number($("r").value), 200));
    plot($("laws"), laws.l, [
      { ys: laws.f_los, color: "#05c", label: `LOS, B_L = ${laws.b_los.toFixed(4)}` },
      { ys: laws.f_nlos, color: "#c22", label: `NLOS, B_N = ${laws.b_nlos.toFixed(4)}` },
    ], "serving distance l (m)");
  });
  run(() => {
    const a = JSON.parse(association_curve(config, 26));
    plot($("assoc"), a.r, [
      { ys: a.rho_los, color: "#05c", label: "LOS" },
      { ys: a.rho_nlos, color: "#c22", label: "NLOS" },
    ], "user distance r (m)");
  });
  run(() => drawNetwork($("net"), JSON.parse(sample_network(config, BigInt($("seed").value), Number($("probe").value)))));
}

await init();
$("r").addEventListener("input", () => { $("r-val").textContent = $("r").value; refresh(); });
for (const id of ["config", "seed", "probe"]) $(id).addEventListener("change", refresh);
refresh();
