import init, { run_program, grade, stretch_timing } from "./pkg/envtrace_web.js";

const $ = (id) => document.getElementById(id);

function opts() {
  return [Number($("jitter").value) || 0, Math.max(0, Math.floor(Number($("seed").value) || 0))];
}

function fmt(v) {
  return typeof v === "number" ? String(+v.toFixed(4)) : "";
}

function showError(msg) {
  $("error").textContent = msg || "";
}

function eventCells(e) {
  return e ? `<td>${e.pv}</td><td>${fmt(e.value)}</td><td>${fmt(e.t)}</td>` : "<td></td><td></td><td></td>";
}

function renderRows(rows) {
  const body = rows
    .map((r) => `<tr class="${r.match ? "" : "bad"}">${eventCells(r.gt)}<td>${r.match ? "✓" : "✗"}</td>${eventCells(r.pred)}</tr>`)
    .join("");
  $("table").innerHTML =
    "<table><tr><th>GT pv</th><th>value</th><th>t</th><th></th><th>pred pv</th><th>value</th><th>t</th></tr>" + body + "</table>";
}

function renderEvents(events) {
  const body = events.map((e) => `<tr>${eventCells(e)}</tr>`).join("");
  $("table").innerHTML = "<table><tr><th>pv</th><th>value</th><th>t</th></tr>" + body + "</table>";
}

// matched (gt, pred) times, both zeroed at their first pair, with the y = x line
function plot(pairs) {
  const c = $("plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  if (pairs.length === 0) return;
  const x0 = pairs[0][0], y0 = pairs[0][1];
  const pts = pairs.map(([x, y]) => [x - x0, y - y0]);
  const max = Math.max(1e-9, ...pts.flat());
  const pad = 30;
  const sx = (v) => pad + (v / max) * (c.width - 2 * pad);
  const sy = (v) => c.height - pad - (v / max) * (c.height - 2 * pad);
  g.strokeStyle = "#bbb";
  g.beginPath();
  g.moveTo(sx(0), sy(0));
  g.lineTo(sx(max), sy(max));
  g.stroke();
  g.fillStyle = "#1f5fbf";
  for (const [x, y] of pts) {
    g.beginPath();
    g.arc(sx(x), sy(y), 3, 0, 2 * Math.PI);
    g.fill();
  }
  g.fillStyle = "#333";
  g.fillText("ground truth time (s)", c.width / 2 - 50, c.height - 8);
  g.fillText(`${fmt(max)} s`, c.width - pad - 20, c.height - pad + 14);
}

function onRun() {
  const [jitter, seed] = opts();
  const r = JSON.parse(run_program($("gt").value, jitter, seed));
  if (r.error) return showError(r.error);
  showError(r.runtime_error);
  $("summary").textContent = `${r.events.length} events, ${fmt(r.duration)} s`;
  renderEvents(r.events);
  plot([]);
}

function onGrade() {
  const [jitter, seed] = opts();
  const r = JSON.parse(grade($("gt").value, $("cand").value, jitter, seed));
  if (r.error) return showError(r.error);
  showError([r.gt_error && `ground truth: ${r.gt_error}`, r.candidate_error && `candidate: ${r.candidate_error}`].filter(Boolean).join("\n"));
  $("summary").textContent = r.summary;
  renderRows(r.rows);
  plot(r.matched_times);
}

function onStretch() {
  const s = Number($("stretch").value);
  const r = JSON.parse(stretch_timing($("gt").value, s));
  if (r.error) return showError(r.error);
  showError("");
  const t = r.timing;
  $("stretch-out").textContent = `×${s.toFixed(2)}  timing ${t.composite.toFixed(3)} ${t.pass ? "pass" : "fail"}`;
  $("summary").textContent = r.summary;
  plot(r.matched_times);
}

await init();
$("run").addEventListener("click", onRun);
$("grade").addEventListener("click", onGrade);
$("stretch").addEventListener("input", onStretch);
onGrade();
