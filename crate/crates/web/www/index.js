import init, { analytic_curve, trajectory, Lattice } from './pkg/immune_sim_web.js';

const $ = (id) => document.getElementById(id);

function axes(ctx, w, h, xmax, ymax, xlabel, ylabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = '#999';
  ctx.beginPath();
  ctx.moveTo(40, 10); ctx.lineTo(40, h - 25); ctx.lineTo(w - 10, h - 25);
  ctx.stroke();
  ctx.fillStyle = '#555';
  ctx.fillText(xlabel + ' (max ' + xmax.toPrecision(3) + ')', w / 2 - 40, h - 8);
  ctx.fillText(ylabel, 4, 12);
  ctx.fillText(ymax.toPrecision(3), 4, 24);
  return { x: (v) => 40 + (v / xmax) * (w - 50), y: (v) => h - 25 - (v / ymax) * (h - 40) };
}

function line(ctx, xs, ys, sx, sy, colour) {
  ctx.strokeStyle = colour;
  ctx.beginPath();
  xs.forEach((x, i) => {
    if (!Number.isFinite(ys[i])) return;
    const px = sx(x), py = sy(ys[i]);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.className = 'out err';
}

function drawCurve() {
  const model = $('c-model').value, r = Number($('c-r').value);
  $('c-r-val').textContent = r.toFixed(2);
  const lambdas = Array.from({ length: 400 }, (_, i) => 0.01 + i * 0.02);
  const note = $('c-note');
  note.className = 'out';
  try {
    const ys = Array.from(analytic_curve(model, r, Float64Array.from(lambdas)));
    const canvas = $('c-plot'), ctx = canvas.getContext('2d');
    const finite = ys.filter(Number.isFinite);
    const ymax = model === 'm3' ? 1 : Math.max(1, Math.min(20, Math.max(...finite)));
    const s = axes(ctx, canvas.width, canvas.height, lambdas[lambdas.length - 1], ymax, 'lambda',
      model === 'm3' ? 'P(survive)' : 'mean mutant types per type');
    line(ctx, lambdas, ys.map((y) => Math.min(y, ymax)), s.x, s.y, '#1f6feb');
    note.textContent = model === 'm3'
      ? `survives iff r·lambda > 1, i.e. lambda > ${(1 / r).toFixed(3)}`
      : `mean is infinite once lambda(1 - r) >= 1, i.e. lambda >= ${(1 / (1 - r)).toFixed(3)}; survival iff lambda > 1`;
  } catch (e) {
    showError(note, e);
  }
}

let seed = 1;
function drawTrajectory() {
  const note = $('t-note');
  note.className = 'out';
  $('t-seed').textContent = 'seed ' + seed;
  try {
    const pts = trajectory($('t-model').value, Number($('t-lambda').value), Number($('t-r').value),
      BigInt(seed), BigInt(Math.max(1, Number($('t-cap').value))), 200, 0.05);
    const t = [], n = [], k = [];
    for (let i = 0; i < pts.length; i += 3) { t.push(pts[i]); n.push(pts[i + 1]); k.push(pts[i + 2]); }
    const canvas = $('t-plot'), ctx = canvas.getContext('2d');
    const s = axes(ctx, canvas.width, canvas.height, Math.max(t[t.length - 1], 1e-9), Math.max(...n, 1),
      'time', 'pathogens (blue), types (orange)');
    line(ctx, t, n, s.x, s.y, '#1f6feb');
    line(ctx, t, k, s.x, s.y, '#d9822b');
    const last = n[n.length - 1];
    note.textContent = last === 0
      ? `extinct at t = ${t[t.length - 1].toFixed(3)}`
      : `alive at t = ${t[t.length - 1].toFixed(3)} with ${last} pathogens in ${k[k.length - 1]} types`;
  } catch (e) {
    showError(note, e);
  }
}

let lattice = null, frame = 0;
function colour(type) {
  const h = (type * 137.508) % 360;
  return `hsl(${h}, 65%, 50%)`;
}

function drawLattice() {
  const canvas = $('l-plot'), ctx = canvas.getContext('2d');
  const cells = lattice.cells();
  let span = 10;
  for (let i = 0; i < cells.length; i += 3) span = Math.max(span, Math.abs(cells[i]) + 2, Math.abs(cells[i + 1]) + 2);
  const size = canvas.width / (2 * span + 1);
  const oneDim = $('l-dim').value === '1';
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let i = 0; i < cells.length; i += 3) {
    ctx.fillStyle = colour(cells[i + 2]);
    const y = oneDim ? canvas.height / 2 : (cells[i + 1] + span) * size;
    ctx.fillRect((cells[i] + span) * size, y, Math.max(size, 1), oneDim ? 20 : Math.max(size, 1));
  }
  $('l-note').textContent =
    `t = ${lattice.time().toFixed(2)}, N = ${lattice.population()}, types = ${lattice.type_count()}`;
}

function tick() {
  const running = lattice.advance(Math.max(20, lattice.population()));
  drawLattice();
  frame = running ? requestAnimationFrame(tick) : 0;
}

function startLattice() {
  cancelAnimationFrame(frame);
  const note = $('l-note');
  note.className = 'out';
  try {
    lattice = new Lattice($('l-model').value, Number($('l-dim').value), Number($('l-lambda').value),
      Number($('l-r').value), BigInt(Number($('l-seed').value)));
    tick();
  } catch (e) {
    showError(note, e);
  }
}

await init();
$('c-model').onchange = drawCurve;
$('c-r').oninput = drawCurve;
$('t-run').onclick = drawTrajectory;
$('t-next').onclick = () => { seed += 1; drawTrajectory(); };
$('l-start').onclick = startLattice;
$('l-stop').onclick = () => cancelAnimationFrame(frame);
drawCurve();
drawTrajectory();
