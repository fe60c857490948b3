import init, { Session } from "./pkg/insident_wasm.js";

const $ = (id) => document.getElementById(id);
const canvas = $("plot");
const ctx = canvas.getContext("2d");
const palette = ["#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#76b7b2", "#edc948", "#9c755f", "#bab0ac",
  "#86bcb6", "#d37295", "#a0cbe8", "#8cd17d"];

let session = null;
let points = null;
let trained = null;
let overlay = null; // { kind: "summary" | "detect", ids: Set }

function toCanvas([x, y]) {
  return [x * canvas.width, (1 - y) * canvas.height];
}

function draw() {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!points) return;
  const dim = overlay !== null;
  points.rows.forEach((row, i) => {
    const [cx, cy] = toCanvas(row);
    const k = trained ? trained.assignments[i] : 0;
    ctx.globalAlpha = dim && !overlay.ids.has(i) ? 0.15 : 0.9;
    ctx.fillStyle = palette[k % palette.length];
    ctx.fillRect(cx - 1.5, cy - 1.5, 3, 3);
    if (points.anomaly[i]) {
      ctx.strokeStyle = "#000";
      ctx.globalAlpha = 0.6;
      ctx.strokeRect(cx - 3, cy - 3, 6, 6);
    }
  });
  ctx.globalAlpha = 1;
  if (overlay) {
    ctx.strokeStyle = overlay.kind === "detect" ? "#d00" : "#000";
    ctx.lineWidth = 1.5;
    for (const i of overlay.ids) {
      const [cx, cy] = toCanvas(points.rows[i]);
      ctx.beginPath();
      ctx.arc(cx, cy, 5, 0, 2 * Math.PI);
      ctx.stroke();
    }
    ctx.lineWidth = 1;
  }
  if (trained) {
    // each centroid with its unit ball under the learned weights
    trained.centroids.forEach((c, k) => {
      const [cx, cy] = toCanvas(c);
      const [wx, wy] = trained.weights[k];
      const r = 0.05;
      ctx.strokeStyle = palette[k % palette.length];
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.ellipse(cx, cy, (r / wx) * canvas.width, (r / wy) * canvas.height, 0, 0, 2 * Math.PI);
      ctx.stroke();
      ctx.fillStyle = "#000";
      ctx.fillRect(cx - 3, cy - 3, 6, 6);
    });
    ctx.lineWidth = 1;
  }
}

function show(text, error = false) {
  $("out").textContent = text;
  $("out").className = error ? "err" : "";
}

function pct(v) {
  return (100 * v).toFixed(2) + "%";
}

function run(action) {
  try {
    action();
  } catch (e) {
    show(String(e.message || e), true);
  }
}

$("train").onclick = () => run(() => {
  const n = +$("n").value;
  session = new Session(JSON.stringify({
    n, blobs: +$("blobs").value, anom_frac: +$("frac").value, contextual: $("contextual").checked, seed: +$("seed").value,
  }));
  points = JSON.parse(session.points());
  const t0 = performance.now();
  trained = JSON.parse(session.train(JSON.stringify({ k: +$("k").value, lr_w: +$("lrw").value, seed: +$("seed").value })));
  const ms = performance.now() - t0;
  overlay = null;
  $("size").max = n;
  $("summarize").disabled = false;
  $("detect").disabled = false;
  const obj = trained.objective;
  const w = trained.weights.map((c, k) => `  cluster ${k}: ${c.map((v) => v.toFixed(2)).join(", ")}`).join("\n");
  show(`trained in ${ms.toFixed(0)} ms, ${obj.length} iterations, converged: ${trained.converged}\n` +
    `objective ${obj[0].toFixed(4)} -> ${obj[obj.length - 1].toFixed(4)}\nweights (x, y):\n${w}`);
  draw();
});

$("size").oninput = () => { $("sizeval").textContent = $("size").value; };

$("summarize").onclick = () => run(() => {
  const s = JSON.parse(session.summarize(+$("size").value));
  overlay = { kind: "summary", ids: new Set(s.members) };
  const per = s.per_cluster.map(([k, c]) => `${k}:${c}`).join(" ");
  show(`summary of ${s.members.length} original points\nper cluster ${per}\n` +
    `anomaly fraction ${pct(s.anomaly_fraction)} in data, ${pct(s.summary_anomaly_fraction)} in summary\n` +
    `information loss ${s.information_loss.toFixed(3)}`);
  draw();
});

$("detect").onclick = () => run(() => {
  const d = JSON.parse(session.detect(+$("topn").value));
  overlay = { kind: "detect", ids: new Set(d.flagged) };
  const fmt = (v) => (v === null ? "undefined" : v.toFixed(3));
  show(`flagged ${d.flagged.length} points (red rings; true anomalies have black squares)\n` +
    `recall ${fmt(d.recall)}, F1 ${fmt(d.f1)}\nrecall with all weights 1: ${fmt(d.unweighted_recall)}`);
  draw();
});

init().then(() => show("Ready. Generate a dataset to start.")).catch((e) => show(String(e), true));
