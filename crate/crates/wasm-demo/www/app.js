import init, {
  builtin_names,
  picard_trace,
  lambda_profile,
  condition_gap_map,
} from "./pkg/weakfix_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function call(f, info) {
  try {
    return JSON.parse(f());
  } catch (e) {
    info.textContent = `error: ${e}`;
    return null;
  }
}

// Series of {values, color, log} drawn on shared axes; index on x.
function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  const tf = (v, log) => (log ? Math.log10(Math.max(v, 1e-300)) : v);
  const all = series.flatMap((s) =>
    s.values.filter((v) => v !== null && isFinite(v)).map((v) => tf(v, s.log)));
  if (all.length === 0) return;
  let lo = Math.min(...all), hi = Math.max(...all);
  if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
  const n = Math.max(...series.map((s) => s.values.length));
  const px = (i) => pad + (i / Math.max(n - 1, 1)) * (w - 2 * pad);
  const py = (v) => h - pad - ((v - lo) / (hi - lo)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(hi.toPrecision(4), 2, pad);
  ctx.fillText(lo.toPrecision(4), 2, h - pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    let started = false;
    s.values.forEach((v, i) => {
      if (v === null || !isFinite(v)) return;
      const x = px(i + (s.offset || 0)), y = py(tf(v, s.log));
      if (started) ctx.lineTo(x, y); else { ctx.moveTo(x, y); started = true; }
    });
    ctx.stroke();
  }
}

function runTrace() {
  const info = $("trace-info");
  const r = call(() => picard_trace($("scenario").value, num("x0"), num("steps")), info);
  if (!r) return;
  plot($("trace"), [{ values: r.points, color: "#1565c0" }]);
  const last = r.points[r.points.length - 1];
  const bound = r.bound.error ? `no certificate: ${r.bound.error}` : `certificate from n = ${r.bound.first_index}`;
  info.textContent = `x_n -> ${last}\nexpected ${r.expected_limit ?? "n/a"}\n${bound}`;
}

function runLambda() {
  const info = $("lambda-info");
  const r = call(() => lambda_profile($("scenario").value, num("horizon")), info);
  if (!r) return;
  plot($("lambda"), [
    { values: r.values, color: "#1565c0" },
    { values: r.averages, color: "#c62828" },
  ]);
  const a = r.analysis;
  const verdict = a.outcome === "certified"
    ? `lambda = ${a.lambda}, n(lambda) = ${a.n_lambda}`
    : `no lambda below 1 (average ${a.average} at l = ${a.witness_l})`;
  info.textContent = `blue: s_i, red: running averages\n${verdict}\nsum C_n: ${r.series_verdict}`;
}

function runGap() {
  const info = $("gap-info");
  const r = call(() => condition_gap_map($("scenario").value, num("gi"), num("gj"), num("grid")), info);
  if (!r) return;
  const canvas = $("gap");
  const ctx = canvas.getContext("2d");
  const m = r.axis.length;
  const cell = canvas.width / m;
  const finite = r.gaps.flat().filter((g) => g !== null);
  const scale = Math.max(...finite.map(Math.abs), 1e-12);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  r.gaps.forEach((row, yi) =>
    row.forEach((g, xi) => {
      if (g === null) ctx.fillStyle = "#000";
      else {
        const t = Math.min(Math.abs(g) / scale, 1);
        const c = Math.round(255 * (1 - t));
        ctx.fillStyle = g < 0 ? `rgb(255,${c},${c})` : `rgb(${c},${c},255)`;
      }
      ctx.fillRect(xi * cell, canvas.height - (yi + 1) * cell, cell + 1, cell + 1);
    }));
  info.textContent = `${r.variant}: rhs - lhs over (x, y); red cells violate\nmin gap ${r.min_gap}`;
}

await init();
for (const name of JSON.parse(builtin_names())) {
  $("scenario").add(new Option(name, name));
}
$("run-trace").onclick = runTrace;
$("run-lambda").onclick = runLambda;
$("run-gap").onclick = runGap;
$("scenario").onchange = () => { runTrace(); runLambda(); runGap(); };
runTrace();
runLambda();
runGap();
