import init, { fitSinc, compressRow, spiralSpectra } from "./pkg/tnkf_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

// Draws line series ({xs, ys, color, dots, fill}) on a canvas with shared axes.
function plot(canvas, series, { logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const tf = logY ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  const all = series.flatMap((s) => s.ys.map(tf));
  const xsAll = series.flatMap((s) => s.xs);
  const [x0, x1] = [Math.min(...xsAll), Math.max(...xsAll)];
  const [y0, y1] = [Math.min(...all), Math.max(...all)];
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((tf(y) - y0) / (y1 - y0 || 1)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "20px sans-serif";
  ctx.fillText(logY ? `1e${y1.toFixed(0)}` : y1.toFixed(2), 2, pad);
  ctx.fillText(logY ? `1e${y0.toFixed(0)}` : y0.toFixed(2), 2, h - pad);

  for (const s of series) {
    if (s.fill) {
      ctx.fillStyle = s.color;
      ctx.beginPath();
      s.xs.forEach((x, i) => ctx.lineTo(px(x), py(s.ys[i])));
      s.fill.xs.slice().reverse().forEach((x, i, arr) => ctx.lineTo(px(x), py(s.fill.ys[arr.length - 1 - i])));
      ctx.fill();
    } else if (s.dots) {
      ctx.fillStyle = s.color;
      s.xs.forEach((x, i) => ctx.fillRect(px(x) - 2, py(s.ys[i]) - 2, 4, 4));
    } else {
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      s.xs.forEach((x, i) => ctx.lineTo(px(x), py(s.ys[i])));
      ctx.stroke();
    }
  }
}

function guard(out, f) {
  out.classList.remove("err");
  try {
    f();
  } catch (e) {
    out.textContent = String(e.message || e);
    out.classList.add("err");
  }
}

function runSinc() {
  guard($("s-out"), () => {
    const t0 = performance.now();
    const fit = fitSinc(num("s-exp"), num("s-noise"), num("s-seed"), num("s-gamma"), num("s-sigma2"), num("s-eps"));
    const ms = performance.now() - t0;
    const grid = Array.from(fit.grid);
    $("s-out").textContent =
      `trained on ${fit.x.length} points in ${ms.toFixed(0)} ms\n` +
      `RMSE to the true curve ${fit.rmse.toFixed(4)}, max TT-rank of P ${fit.maxRankP}`;
    plot($("s-plot"), [
      { xs: grid, ys: Array.from(fit.upper), color: "rgba(31,119,180,0.15)", fill: { xs: grid, ys: Array.from(fit.lower) } },
      { xs: Array.from(fit.x), ys: Array.from(fit.y), color: "#888", dots: true },
      { xs: grid, ys: Array.from(fit.truth), color: "#2ca02c" },
      { xs: grid, ys: Array.from(fit.mean), color: "#1f77b4" },
    ]);
  });
}

function runRow() {
  guard($("r-out"), () => {
    const r = compressRow(num("r-exp"), num("r-sigma2"), num("r-row"), num("r-eps"));
    const dense = Array.from(r.dense);
    const idx = dense.map((_, i) => i);
    $("r-out").textContent =
      `TT-ranks [${Array.from(r.ranks).join(", ")}]\n` +
      `${r.storage} stored entries for ${dense.length} values, relative error ${r.relError.toExponential(2)}`;
    plot($("r-plot"), [
      { xs: idx, ys: dense, color: "#999" },
      { xs: idx, ys: Array.from(r.approx), color: "#d62728" },
    ]);
  });
}

function runSpectra() {
  guard($("p-out"), () => {
    const sizes = $("p-sizes").value.split(",").map((s) => Number(s.trim())).filter((n) => n > 0);
    const sp = spiralSpectra(Uint32Array.from(sizes), num("p-sigma2"), num("p-scale"), 1e-3);
    const values = Array.from(sp.values);
    const counts = Array.from(sp.counts);
    let offset = 0;
    const series = sizes.map((n, i) => {
      const ys = values.slice(offset, offset + n);
      offset += n;
      return { xs: ys.map((_, j) => j + 1), ys, color: COLORS[i % COLORS.length] };
    });
    $("p-out").textContent = sizes.map((n, i) => `N = ${n}: ${counts[i]} eigenvalues above 1e-3 of the largest`).join("\n");
    plot($("p-plot"), series, { logY: true });
  });
}

await init();
$("s-run").onclick = runSinc;
$("r-run").onclick = runRow;
$("p-run").onclick = runSpectra;
runSinc();
